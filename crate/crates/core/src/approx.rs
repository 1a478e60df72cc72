//! Dependent thinnings, their Palm intensities, Poisson approximation
//! bounds and the Matérn type I experiment.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{poisson_like_constant, McEstimate};
use crate::error::{invalid, Error, Result};
use crate::geometry::{point_from_unit, sample_point, unit_ball_volume, MarkKind, MarkSpec, Point, Window};
use crate::gibbs::{rejection_sample, RejectionOptions};
use crate::models::{Intensity, Locality};
use crate::rng::{map_replicates, poisson, tags, StreamSeed};
use crate::space::{component_labels, PointConfig, Relation};
use crate::stats::{poisson_pmf, tv_empirical_vs_pmf, weighted_linear_fit, LinearFit, MeanAccumulator};

/// A hereditary retention rule `g(x, μ) ∈ {0, 1}` with finite reach:
/// `g(x, μ)` only looks at points of `μ` within `reach` of `x`, and adding
/// points never turns a 0 into a 1.
pub trait Thinning: Sync {
    /// `g(x, μ)`; entries of `mu` equal to `x` are ignored.
    fn retain(&self, x: &Point, mu: &[Point]) -> bool;
    fn reach(&self) -> f64;
    /// `P(g(x, ξ + δ_y) g(y, ξ + δ_x) = 1)` for `ξ` Poisson of intensity
    /// `alpha` and `‖x - y‖ = h`, when known in closed form.
    fn poisson_pair_retention(&self, _h: f64, _alpha: f64, _dim: usize) -> Option<f64> {
        None
    }
    /// `r` when `g(x, μ) = 1` exactly if `μ` has no point within `r` of `x`.
    fn exclusion_radius(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThinningRule {
    /// `g ≡ 1`.
    Keep,
    /// Keep `x` iff no other point lies within `radius` of it.
    MaternI { radius: f64 },
}

impl ThinningRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ThinningRule::MaternI { radius } if !(radius >= 0.0 && radius.is_finite()) => {
                Err(invalid(format!("matern radius must be finite and non-negative, got {radius}")))
            }
            _ => Ok(()),
        }
    }
}

impl Thinning for ThinningRule {
    fn retain(&self, x: &Point, mu: &[Point]) -> bool {
        match *self {
            ThinningRule::Keep => true,
            ThinningRule::MaternI { radius } => {
                let r2 = radius * radius;
                !mu.iter().any(|q| q != x && x.dist2(q) < r2)
            }
        }
    }

    fn reach(&self) -> f64 {
        match *self {
            ThinningRule::Keep => 0.0,
            ThinningRule::MaternI { radius } => radius,
        }
    }

    fn exclusion_radius(&self) -> Option<f64> {
        match *self {
            ThinningRule::Keep => None,
            ThinningRule::MaternI { radius } => Some(radius),
        }
    }

    fn poisson_pair_retention(&self, h: f64, alpha: f64, dim: usize) -> Option<f64> {
        Some(match *self {
            ThinningRule::Keep => 1.0,
            ThinningRule::MaternI { radius } if h < radius => 0.0,
            ThinningRule::MaternI { radius } => (-alpha * union_volume(dim, radius, h)).exp(),
        })
    }
}

/// `λ(B(o, r) ∪ B(h e_1, r))`.
pub fn union_volume(d: usize, r: f64, h: f64) -> f64 {
    let ball = unit_ball_volume(d) * r.powi(d as i32);
    if h >= 2.0 * r {
        return 2.0 * ball;
    }
    // lens = 2 κ_{d-1} r^d ∫_0^θ sin^d, with t = r cos θ
    let theta = (h / (2.0 * r)).acos();
    let m = 256;
    let step = theta / m as f64;
    let f = |t: f64| t.sin().powi(d as i32);
    let mut acc = f(0.0) + f(theta);
    for k in 1..m {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * step);
    }
    let lens = 2.0 * unit_ball_volume(d - 1) * r.powi(d as i32) * acc * step / 3.0;
    2.0 * ball - lens
}

/// `Γ(μ)`: the points `x` of `μ` with `g(x, μ - δ_x) = 1`.
pub fn thin<T: Thinning + ?Sized>(rule: &T, cfg: &PointConfig) -> PointConfig {
    let pts = cfg.points();
    let keep = retained(rule, pts);
    cfg.restrict(|p| {
        let i = pts.binary_search_by(|q| q.total_cmp(p)).expect("point of cfg");
        keep[i]
    })
}

/// Retention flags for every point of `pts`, with a cell grid for large
/// inputs.
pub fn retained<T: Thinning + ?Sized>(rule: &T, pts: &[Point]) -> Vec<bool> {
    let reach = rule.reach();
    if pts.len() <= 64 || reach <= 0.0 {
        return pts.iter().map(|p| rule.retain(p, pts)).collect();
    }
    let cell = |p: &Point| -> Vec<i64> { p.loc().iter().map(|v| (v / reach).floor() as i64).collect() };
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, p) in pts.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }
    let d = pts[0].dim();
    let mut near = Vec::new();
    pts.iter()
        .map(|p| {
            near.clear();
            let c = cell(p);
            let mut off = vec![-1i64; d];
            loop {
                let key: Vec<i64> = c.iter().zip(&off).map(|(a, b)| a + b).collect();
                if let Some(ix) = grid.get(&key) {
                    near.extend(ix.iter().map(|&j| pts[j]));
                }
                let mut k = 0;
                while k < d && off[k] == 1 {
                    off[k] = -1;
                    k += 1;
                }
                if k == d {
                    break;
                }
                off[k] += 1;
            }
            rule.retain(p, &near)
        })
        .collect()
}

/// Counts `(x, μ, y)` triples violating `g(x, μ + δ_y) <= g(x, μ)`.
pub fn heredity_violations<T: Thinning + ?Sized>(
    rule: &T,
    window: &Window,
    marks: &MarkSpec,
    trials: usize,
    seed: StreamSeed,
) -> usize {
    let mut rng = seed.rng();
    let mut bad = 0;
    for _ in 0..trials {
        let x = sample_point(&mut rng, window, marks);
        let n = rng.random_range(0..8);
        let mut mu: Vec<Point> = (0..n).map(|_| sample_point(&mut rng, window, marks)).collect();
        let before = rule.retain(&x, &mu);
        mu.push(sample_point(&mut rng, window, marks));
        if rule.retain(&x, &mu) && !before {
            bad += 1;
        }
    }
    bad
}

/// Papangelou intensity of the reduced Palm version of `ξ` with respect
/// to `Γ(ξ)` at `at`: `κ^x(y, μ) = κ(y, μ + δ_x) g(x, μ + δ_y) / g(x, μ)`
/// with `0/0 = 0`.
pub struct PalmPi<'a, M: ?Sized, T: ?Sized> {
    model: &'a M,
    rule: &'a T,
    at: Point,
    name: String,
}

impl<'a, M: Intensity + ?Sized, T: Thinning + ?Sized> PalmPi<'a, M, T> {
    pub fn new(model: &'a M, rule: &'a T, at: Point) -> Self {
        let name = format!("palm_{}", model.name());
        PalmPi { model, rule, at, name }
    }

    pub fn at(&self) -> &Point {
        &self.at
    }
}

impl<M: Intensity + ?Sized, T: Thinning + ?Sized> Intensity for PalmPi<'_, M, T> {
    fn kappa(&self, y: &Point, mu: &[Point]) -> f64 {
        if !self.rule.retain(&self.at, mu) {
            return 0.0;
        }
        let mut buf = Vec::with_capacity(mu.len() + 1);
        buf.extend_from_slice(mu);
        buf.push(*y);
        if !self.rule.retain(&self.at, &buf) {
            return 0.0;
        }
        buf.pop();
        buf.push(self.at);
        self.model.kappa(y, &buf)
    }

    fn alpha_bar(&self) -> f64 {
        self.model.alpha_bar()
    }

    fn marks(&self) -> &MarkSpec {
        self.model.marks()
    }

    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn relation(&self) -> Relation {
        self.model.relation()
    }

    fn locality(&self) -> Locality {
        Locality::None
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// `ξ` conditioned on `ξ(B(centre, radius)) = 0`: the intensity vanishes
/// on the ball.
struct Excluding<'a, M: ?Sized> {
    model: &'a M,
    centre: Point,
    radius: f64,
}

impl<M: Intensity + ?Sized> Intensity for Excluding<'_, M> {
    fn kappa(&self, y: &Point, mu: &[Point]) -> f64 {
        if y.dist2_to(self.centre.loc()) < self.radius * self.radius {
            0.0
        } else {
            self.model.kappa(y, mu)
        }
    }

    fn alpha_bar(&self) -> f64 {
        self.model.alpha_bar()
    }

    fn marks(&self) -> &MarkSpec {
        self.model.marks()
    }

    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn relation(&self) -> Relation {
        self.model.relation()
    }

    fn locality(&self) -> Locality {
        self.model.locality()
    }

    fn name(&self) -> &str {
        self.model.name()
    }
}

/// Two estimates of `E Σ_{x ∈ Γ(ξ)} h(x, ξ)` for `h = 1{x ∈ A} e^{-ξ(B)}`:
/// directly, and through the Palm process integrated against the intensity
/// of `Γ(ξ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PalmCheck {
    pub direct: McEstimate,
    pub palm: McEstimate,
    pub z: f64,
}

pub fn palm_identity_check<M: Intensity + ?Sized, T: Thinning + ?Sized>(
    model: &M,
    rule: &T,
    window: &Window,
    a: &Window,
    b: &Window,
    replicates: usize,
    seed: StreamSeed,
) -> Result<PalmCheck> {
    if !window.contains_window(a) {
        return Err(invalid("set A must lie inside the window"));
    }
    let opts = RejectionOptions::default();
    let h = |mu: &[Point]| -> f64 { (-(mu.iter().filter(|q| b.contains(q.loc())).count() as f64)).exp() };
    let rows: Vec<Result<(f64, f64)>> = map_replicates(replicates, |i| {
        let (xi, _) = rejection_sample(model, window, &[], opts, seed.path(&[tags::LHS, i]))?;
        let pts = xi.points();
        let keep = retained(rule, pts);
        let direct: f64 = pts
            .iter()
            .zip(&keep)
            .filter(|(p, &k)| k && a.contains(p.loc()))
            .map(|_| h(pts))
            .sum();

        let mut rng = seed.path(&[tags::RHS, i]).rng();
        let x = sample_point(&mut rng, a, model.marks());
        let (eta, _) = rejection_sample(model, window, &[], opts, seed.path(&[tags::RHS, i, tags::AUX]))?;
        let e = eta.points();
        let density = if rule.retain(&x, e) { model.kappa(&x, e) } else { 0.0 };
        let palm_value = if density > 0.0 {
            let palm = PalmPi::new(model, rule, x);
            let (zeta, _) = rejection_sample(&palm, window, &[], opts, seed.path(&[tags::RHS, i, tags::QMC]))?;
            let mut mu = zeta.into_points();
            mu.push(x);
            h(&mu)
        } else {
            0.0
        };
        Ok((direct, a.volume() * density * palm_value))
    });
    let mut d = MeanAccumulator::default();
    let mut p = MeanAccumulator::default();
    for r in rows {
        let (x, y) = r?;
        d.push(x);
        p.push(y);
    }
    let direct = McEstimate { estimate: d.mean(), std_error: d.std_error(), replicates };
    let palm = McEstimate { estimate: p.mean(), std_error: p.std_error(), replicates };
    let se = (direct.std_error.powi(2) + palm.std_error.powi(2)).sqrt();
    let z = if se > 0.0 { (direct.estimate - palm.estimate) / se } else { 0.0 };
    Ok(PalmCheck { direct, palm, z })
}

/// Geometry of the bound: `Γ(ξ)_W` is compared with `ν`; `g` looks at
/// `R = B(o, r_radius)` and the pair terms use `S = B(o, s_radius)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundGeometry {
    pub window: Window,
    /// Box on which `ξ` is simulated with empty boundary.
    pub domain: Window,
    pub r_radius: f64,
    pub s_radius: f64,
}

/// How the expectations over `ξ` are simulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FieldMode {
    /// One draw of `ξ` on the whole domain per replicate.
    Whole,
    /// For stationary `ξ` on domains too large to simulate whole. `E[g κ]`
    /// is the constant `rho`, so only the pair term needs draws of `ξ`,
    /// taken on boxes reaching `margin` beyond what `g κ` can see. With a
    /// Poisson `ξ` and a closed-form pair retention it needs none.
    Stationary { margin: f64, rho: McEstimate },
}

/// Source of `‖E[Γ(ξ)_W] - E[ν]‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Discrepancy {
    /// `∫_W |ρ(x) - ν(x)| λ(dx)` over a lattice of `nodes` points, with `ρ`
    /// averaged over all replicates. The absolute value makes the noise
    /// bias it upwards, which keeps the bound conservative.
    Grid { nodes: usize },
    Given(McEstimate),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundBudget {
    pub replicates: usize,
    /// Integration points per replicate and term.
    pub pairs: usize,
}

impl Default for BoundBudget {
    fn default() -> Self {
        BoundBudget { replicates: 20_000, pairs: 16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub intensity_discrepancy: McEstimate,
    pub t1: McEstimate,
    pub t2: McEstimate,
    pub t3: McEstimate,
    pub total: f64,
    pub total_se: f64,
    pub mode: FieldMode,
}

fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, d: usize, r: f64, out: &mut [f64]) {
    loop {
        let mut s = 0.0;
        for o in out.iter_mut().take(d) {
            *o = rng.random_range(-1.0..1.0);
            s += *o * *o;
        }
        if s <= 1.0 {
            for o in out.iter_mut().take(d) {
                *o *= r;
            }
            return;
        }
    }
}

fn random_marked<R: Rng + ?Sized>(rng: &mut R, loc: &[f64], marks: &MarkSpec) -> Point {
    let mut p = Point::new(loc);
    marks.sample_into(rng, &mut p);
    p
}

/// `g(x, μ) κ(x, μ)`.
fn g_kappa<M: Intensity + ?Sized, T: Thinning + ?Sized>(model: &M, rule: &T, x: &Point, mu: &[Point]) -> f64 {
    if rule.retain(x, mu) {
        model.kappa(x, mu)
    } else {
        0.0
    }
}

struct FieldDraw<'a, M: ?Sized> {
    model: &'a M,
    domain: Window,
    mode: FieldMode,
    sight: f64,
}

impl<M: Intensity + ?Sized> FieldDraw<'_, M> {
    /// A draw of `ξ` good enough to evaluate `g κ` at every point of `at`.
    fn draw(&self, at: &[&Point], seed: StreamSeed) -> Result<Vec<Point>> {
        self.draw_with(self.model, at, seed)
    }

    fn draw_with<N: Intensity + ?Sized>(&self, model: &N, at: &[&Point], seed: StreamSeed) -> Result<Vec<Point>> {
        let w = match self.mode {
            FieldMode::Whole => self.domain,
            FieldMode::Stationary { margin, .. } => {
                let h = self.sight + margin;
                let d = self.domain.dim();
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for p in at {
                    for i in 0..d {
                        lo[i] = lo[i].min(p.loc()[i] - h);
                        hi[i] = hi[i].max(p.loc()[i] + h);
                    }
                }
                let bx = Window::new(&lo, &hi)?;
                bx.intersection(&self.domain).unwrap_or(bx)
            }
        };
        Ok(rejection_sample(model, &w, &[], RejectionOptions::default(), seed)?.0.into_points())
    }
}

/// The bound terms for `Γ(ξ)_W` against a Poisson process with intensity
/// density `nu` with respect to `λ`.
///
/// Each replicate draws integration points at random and independent
/// copies of `ξ`, so products of expectations are estimated without bias.
#[allow(clippy::too_many_arguments)]
pub fn bound_terms<M, T, F>(
    model: &M,
    rule: &T,
    geom: &BoundGeometry,
    nu: F,
    discrepancy: Discrepancy,
    mode: FieldMode,
    budget: &BoundBudget,
    seed: StreamSeed,
) -> Result<BoundReport>
where
    M: Intensity + ?Sized,
    T: Thinning + ?Sized,
    F: Fn(&Point) -> f64 + Sync,
{
    let w = geom.window;
    if !geom.domain.contains_window(&w) {
        return Err(invalid("the simulation domain must contain W"));
    }
    if !(geom.r_radius <= geom.s_radius && geom.s_radius > 0.0) {
        return Err(invalid("need 0 < R <= S"));
    }
    if rule.reach() > geom.r_radius + 1e-12 {
        return Err(invalid("the thinning looks beyond R"));
    }
    if !model.locality().is_cluster_local() {
        return Err(Error::NotClusterLocal);
    }
    if budget.replicates < 2 || budget.pairs == 0 {
        return Err(invalid("bound_terms needs at least two replicates"));
    }
    let d = w.dim();
    let marks = model.marks();
    let rel = model.relation();
    let reach = model.reach();
    let bar = model.alpha_bar();
    let two_s = 2.0 * geom.s_radius;
    let near_vol = w.volume() * unit_ball_volume(d) * two_s.powi(d as i32);
    let far_vol = w.volume() * w.volume();
    let whole = mode == FieldMode::Whole;
    let rho_bar = match mode {
        FieldMode::Stationary { rho, .. } => Some(rho),
        FieldMode::Whole => None,
    };
    let closed = rho_bar.and(model.constant()).filter(|&a| rule.poisson_pair_retention(two_s, a, d).is_some());
    // otherwise factor out the rare empty ball around x: both points are
    // retained iff ξ avoids B(x, u) and, given that, also B(y, u)
    let kappa_bar = mean_kappa_at_origin(model);
    let conditional = match (rho_bar, rule.exclusion_radius()) {
        (Some(r), Some(u)) if closed.is_none() && u >= reach && kappa_bar > 0.0 => Some((u, r.estimate / kappa_bar)),
        _ => None,
    };
    let field = FieldDraw { model, domain: geom.domain, mode, sight: geom.r_radius.max(reach) };
    let eta_box = w.expanded(geom.s_radius + reach + 1e-9)?;
    let unit_dim = d + marks.mark_dims();
    let grid: Vec<Point> = match discrepancy {
        Discrepancy::Grid { nodes } => {
            let rule_q = crate::qmc::Kronecker::new(unit_dim);
            let mut shift_rng = seed.path(&[tags::QMC]).rng();
            let shift: Vec<f64> = (0..unit_dim).map(|_| shift_rng.random()).collect();
            let mut u = vec![0.0; unit_dim];
            (0..nodes.max(1))
                .map(|n| {
                    rule_q.node(n, &shift, &mut u);
                    point_from_unit(&u, &w, marks)
                })
                .collect()
        }
        Discrepancy::Given(_) => Vec::new(),
    };
    if !grid.is_empty() && !whole {
        return Err(invalid("grid discrepancy needs whole-domain draws"));
    }


    struct Row {
        t: [f64; 3],
        /// Stationary mode: geometric factors of the first and third terms
        /// and the pair term given an empty ball around `x`.
        g: [f64; 3],
        rho: Vec<f64>,
    }
    let rows: Vec<Result<Row>> = map_replicates(budget.replicates, |i| {
        let s = seed.path(&[tags::REPLICATE, i]);
        let mut rng = s.rng();
        let whole_a = if whole { Some(field.draw(&[], s.child(1))?) } else { None };
        let whole_b = if whole { Some(field.draw(&[], s.child(2))?) } else { None };
        let eta = if reach > 0.0 {
            let n = poisson(&mut rng, bar * eta_box.volume());
            let e: Vec<Point> = (0..n).map(|_| sample_point(&mut rng, &eta_box, marks)).collect();
            Some(e)
        } else {
            None
        };
        let eta_labels = eta.as_ref().map(|e| component_labels(e, &rel, reach));
        let outside: Vec<usize> = match (&eta, &eta_labels) {
            (Some(e), Some(l)) => {
                e.iter().zip(l).filter(|(p, _)| w.distance_to(p.loc()) > geom.s_radius).map(|(_, &l)| l).collect()
            }
            _ => Vec::new(),
        };

        let mut t = [0.0; 3];
        let mut g = [0.0; 3];
        let mut loc = [0.0; crate::geometry::MAX_DIM];
        let mut off = [0.0; crate::geometry::MAX_DIM];
        for k in 0..budget.pairs {
            let ks = s.path(&[3, k as u64]);
            // pairs with overlapping S-neighbourhoods
            w.sample_loc(&mut rng, &mut loc);
            let x = random_marked(&mut rng, &loc[..d], marks);
            uniform_in_ball(&mut rng, d, two_s, &mut off);
            for j in 0..d {
                loc[j] = x.loc()[j] + off[j];
            }
            let y = random_marked(&mut rng, &loc[..d], marks);
            if w.contains(y.loc()) {
                match (&whole_a, &whole_b) {
                    (Some(a), Some(b)) => {
                        t[0] += 2.0 * near_vol * g_kappa(model, rule, &x, a) * g_kappa(model, rule, &y, b);
                    }
                    _ => g[0] += 2.0 * near_vol,
                }
                if let Some(alpha) = closed {
                    let p = rule.poisson_pair_retention(x.dist(&y), alpha, d).unwrap_or(0.0);
                    t[1] += 2.0 * near_vol * alpha * alpha * p;
                } else if let Some((u, _)) = conditional {
                    if x.dist2(&y) >= u * u {
                        let ex = Excluding { model, centre: x, radius: u };
                        let mut xc = field.draw_with(&ex, &[&x, &y], ks.child(3))?;
                        if !xc.iter().any(|q| q.dist2(&y) < u * u) {
                            xc.push(y);
                            let a = model.kappa(&x, &xc);
                            xc.pop();
                            xc.push(x);
                            g[2] += 2.0 * near_vol * a * model.kappa(&y, &xc);
                        }
                    }
                } else {
                    let xc = match &whole_a {
                        Some(a) => a.clone(),
                        None => field.draw(&[&x, &y], ks.child(3))?,
                    };
                    let mut with_y = xc.clone();
                    with_y.push(y);
                    let a = g_kappa(model, rule, &x, &with_y);
                    if a > 0.0 {
                        let mut with_x = xc;
                        with_x.push(x);
                        if rule.retain(&y, &with_x) {
                            with_x.pop();
                            t[1] += 2.0 * near_vol * a * model.kappa(&y, &with_x);
                        }
                    }
                }
            }
            // pairs with disjoint S-neighbourhoods
            if let (Some(e), Some(labels)) = (&eta, &eta_labels) {
                w.sample_loc(&mut rng, &mut loc);
                let x = random_marked(&mut rng, &loc[..d], marks);
                w.sample_loc(&mut rng, &mut loc);
                let y = Point::new(&loc[..d]);
                if x.dist(&y) > two_s {
                    let r2 = geom.r_radius * geom.r_radius;
                    let from_y: Vec<usize> =
                        e.iter().zip(labels).filter(|(p, _)| p.dist2_to(y.loc()) <= r2).map(|(_, &l)| l).collect();
                    let hit = !from_y.is_empty()
                        && from_y.iter().any(|l| {
                            outside.contains(l)
                                || e.iter().zip(labels).any(|(p, m)| m == l && p.dist2_to(x.loc()) <= r2)
                        });
                    if hit {
                        match &whole_a {
                            Some(a) => t[2] += 2.0 * bar * far_vol * g_kappa(model, rule, &x, a),
                            None => g[1] += 2.0 * bar * far_vol,
                        }
                    }
                }
            }
        }
        let m = budget.pairs as f64;
        for v in t.iter_mut().chain(g.iter_mut()) {
            *v /= m;
        }
        if let Some(r) = rho_bar {
            t[0] = r.estimate * r.estimate * g[0];
            t[2] = r.estimate * g[1];
        }
        if let Some((_, p)) = conditional {
            t[1] = p * g[2];
        }
        let rho = match &whole_a {
            Some(a) => grid.iter().map(|x| g_kappa(model, rule, x, a)).collect(),
            None => Vec::new(),
        };
        Ok(Row { t, g, rho })
    });
    let mut acc = [MeanAccumulator::default(), MeanAccumulator::default(), MeanAccumulator::default()];
    let mut geo = [MeanAccumulator::default(), MeanAccumulator::default(), MeanAccumulator::default()];
    let mut tot = MeanAccumulator::default();
    let mut rho = vec![MeanAccumulator::default(); grid.len()];
    for row in rows {
        let row = row?;
        for j in 0..3 {
            acc[j].push(row.t[j]);
        }
        for j in 0..3 {
            geo[j].push(row.g[j]);
        }
        tot.push(row.t.iter().sum());
        for (a, v) in rho.iter_mut().zip(&row.rho) {
            a.push(*v);
        }
    }
    let intensity_discrepancy = match discrepancy {
        Discrepancy::Given(e) => e,
        Discrepancy::Grid { .. } => {
            let g = grid.len() as f64;
            let mut sum = 0.0;
            let mut var = 0.0;
            for (x, a) in grid.iter().zip(&rho) {
                sum += (a.mean() - nu(x)).abs();
                var += a.std_error().powi(2);
            }
            McEstimate {
                estimate: w.volume() * sum / g,
                std_error: w.volume() * var.sqrt() / g,
                replicates: budget.replicates,
            }
        }
    };
    let est = |a: &MeanAccumulator| McEstimate { estimate: a.mean(), std_error: a.std_error(), replicates: budget.replicates };
    let (mut t1, mut t2, mut t3) = (est(&acc[0]), est(&acc[1]), est(&acc[2]));
    let mut rho_var = 0.0;
    if let Some(r) = rho_bar {
        // delta method for the uncertainty in rho
        let (g1, g3) = (geo[0].mean(), geo[1].mean());
        let q = if conditional.is_some() { geo[2].mean() / kappa_bar } else { 0.0 };
        t1.std_error = t1.std_error.hypot(2.0 * r.estimate * g1 * r.std_error);
        t2.std_error = t2.std_error.hypot(q * r.std_error);
        t3.std_error = t3.std_error.hypot(g3 * r.std_error);
        rho_var = ((2.0 * r.estimate * g1 + g3 + q) * r.std_error).powi(2);
    }
    let total = intensity_discrepancy.estimate + tot.mean();
    let total_se = (intensity_discrepancy.std_error.powi(2) + tot.std_error().powi(2) + rho_var).sqrt();
    Ok(BoundReport {
        intensity_discrepancy,
        t1,
        t2,
        t3,
        total,
        total_se,
        mode,
    })
}

/// The far-pair term of the corollary in closed form from a fitted
/// one-arm decay `c1 e^{-c2 v}`.
pub fn corollary_far_term(c1: f64, c2: f64, expected_count: f64, window: &Window, u: f64, v: f64) -> f64 {
    if window.diameter() > 2.0 * (u + v) {
        c1 * expected_count * window.volume() * u.powi(window.dim() as i32) * (-c2 * v).exp()
    } else {
        0.0
    }
}

/// Counts of `cfg` in the `2^d` dyadic cells of `window`.
pub fn cell_counts(cfg: &[Point], window: &Window) -> Vec<u32> {
    let mut c = vec![0u32; 1 << window.dim()];
    for p in cfg {
        if window.contains(p.loc()) {
            c[window.dyadic_cell_of(p.loc())] += 1;
        }
    }
    c
}

/// Total variation between the empirical law of count vectors and
/// independent Poisson counts with the given means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvEstimate {
    /// Bias-corrected estimate.
    pub tv: f64,
    pub std_error: f64,
    /// Plug-in estimate before correction.
    pub raw: f64,
    pub samples: usize,
}

/// Plug-in TV is biased upwards by sampling noise; the bootstrap estimates
/// that bias and its spread.
pub fn count_tv(samples: &[Vec<u32>], means: &[f64], bootstrap: usize, seed: StreamSeed) -> TvEstimate {
    let pmf = |k: &Vec<u32>| -> f64 { k.iter().zip(means).map(|(&k, &m)| poisson_pmf(k as u64, m)).product() };
    let raw = tv_empirical_vs_pmf(samples, pmf);
    if bootstrap < 2 || samples.len() < 2 {
        return TvEstimate { tv: raw, std_error: f64::NAN, raw, samples: samples.len() };
    }
    let boots: Vec<f64> = map_replicates(bootstrap, |b| {
        let mut rng = seed.path(&[tags::REPLICATE, b]).rng();
        let re: Vec<Vec<u32>> = (0..samples.len()).map(|_| samples[rng.random_range(0..samples.len())].clone()).collect();
        tv_empirical_vs_pmf(&re, pmf)
    });
    let acc = MeanAccumulator::from_slice(&boots);
    let tv = (2.0 * raw - acc.mean()).max(0.0);
    TvEstimate { tv, std_error: acc.variance().sqrt(), raw, samples: samples.len() }
}

/// Empirical TV between `Γ(ξ)_W` and `ν` next to the bound on their KR
/// distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundValidity {
    pub model: String,
    /// Constant density of `ν` with respect to `λ`.
    pub nu_density: f64,
    pub mean_count: McEstimate,
    pub tv: TvEstimate,
    pub bound: BoundReport,
    /// `tv <= bound + 3σ`.
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidityBudget {
    pub pilot: usize,
    pub replicates: usize,
    pub bootstrap: usize,
    pub grid_nodes: usize,
    pub bound: BoundBudget,
}

impl Default for ValidityBudget {
    fn default() -> Self {
        ValidityBudget { pilot: 10_000, replicates: 20_000, bootstrap: 200, grid_nodes: 64, bound: BoundBudget::default() }
    }
}

/// Compares `Γ(ξ)_W` with the homogeneous Poisson process whose density is
/// fitted on an independent pilot run.
pub fn bound_validity<M: Intensity + ?Sized, T: Thinning + ?Sized>(
    model: &M,
    rule: &T,
    geom: &BoundGeometry,
    budget: &ValidityBudget,
    seed: StreamSeed,
) -> Result<BoundValidity> {
    let w = geom.window;
    let sample_counts = |n: usize, s: StreamSeed| -> Result<Vec<Vec<u32>>> {
        map_replicates(n, |i| {
            let (xi, _) = rejection_sample(model, &geom.domain, &[], RejectionOptions::default(), s.path(&[tags::REPLICATE, i]))?;
            let pts = xi.points();
            let keep = retained(rule, pts);
            let kept: Vec<Point> = pts.iter().zip(&keep).filter(|(_, &k)| k).map(|(p, _)| *p).collect();
            Ok(cell_counts(&kept, &w))
        })
        .into_iter()
        .collect()
    };
    let pilot = sample_counts(budget.pilot.max(2), seed.child(tags::PROPOSAL))?;
    let pilot_mean = pilot.iter().map(|c| c.iter().sum::<u32>() as f64).sum::<f64>() / pilot.len() as f64;
    let nu_density = pilot_mean / w.volume();
    let counts = sample_counts(budget.replicates.max(2), seed.child(tags::LHS))?;
    let totals: Vec<f64> = counts.iter().map(|c| c.iter().sum::<u32>() as f64).collect();
    let mean_count = McEstimate {
        estimate: totals.iter().sum::<f64>() / totals.len() as f64,
        std_error: MeanAccumulator::from_slice(&totals).std_error(),
        replicates: totals.len(),
    };
    let cells = w.dyadic_cells();
    let means: Vec<f64> = cells.iter().map(|c| nu_density * c.volume()).collect();
    let tv = count_tv(&counts, &means, budget.bootstrap, seed.child(tags::AUX));
    let bound = bound_terms(
        model,
        rule,
        geom,
        |_| nu_density,
        Discrepancy::Grid { nodes: budget.grid_nodes },
        FieldMode::Whole,
        &budget.bound,
        seed.child(tags::RHS),
    )?;
    let sigma = (tv.std_error.powi(2) + bound.total_se.powi(2)).sqrt();
    let holds = tv.tv <= bound.total + 3.0 * sigma;
    Ok(BoundValidity { model: model.name().to_string(), nu_density, mean_count, tv, bound, holds })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaternBudget {
    /// Expected number of empty balls in the calibration sample.
    pub calibration_hits: usize,
    /// Extra room around the calibration ball and the local boxes.
    pub margin: f64,
    pub replicates: usize,
    pub bootstrap: usize,
    /// Blocks are at least this many multiples of `range + u_n` wide.
    pub block_factor: f64,
    pub bound: BoundBudget,
}

impl Default for MaternBudget {
    fn default() -> Self {
        MaternBudget {
            calibration_hits: 2500,
            margin: 0.5,
            replicates: 10_000,
            bootstrap: 200,
            block_factor: 4.0,
            bound: BoundBudget { replicates: 4000, pairs: 8 },
        }
    }
}

/// `u_n = sup{u : P(ξ(B(o,u)) = 0) >= c/n}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub c: f64,
    pub n: f64,
    pub u_n: f64,
    /// `u_n` for a constant intensity, where the empty-ball probability is
    /// explicit.
    pub closed_form: Option<f64>,
    /// Bracket from the two empty-space bounds.
    pub bracket: (f64, f64),
    pub samples: usize,
    /// `n P̂(empty ball of radius u_n)` on the calibration sample.
    pub calibrated: f64,
    /// The same on an independent sample.
    pub check: McEstimate,
    /// `u_n^d / log n`.
    pub growth: f64,
}

fn nearest_from_origin<M: Intensity + ?Sized>(model: &M, half: f64, seed: StreamSeed) -> Result<f64> {
    let d = model.dim();
    let bx = Window::centered(&vec![0.0; d], half)?;
    let pts = if let Some(alpha) = model.constant() {
        let mut rng = seed.rng();
        let n = poisson(&mut rng, alpha * bx.volume());
        (0..n).map(|_| sample_point(&mut rng, &bx, model.marks())).collect()
    } else {
        rejection_sample(model, &bx, &[], RejectionOptions::default(), seed)?.0.into_points()
    };
    Ok(pts.iter().map(|p| p.loc().iter().map(|v| v * v).sum::<f64>().sqrt()).fold(f64::INFINITY, f64::min))
}

fn check_translation_invariant<M: Intensity + ?Sized>(model: &M, seed: StreamSeed) -> Result<()> {
    let d = model.dim();
    let marks = model.marks();
    let mut rng = seed.rng();
    let w = Window::centered(&vec![0.0; d], 10.0)?;
    for _ in 0..64 {
        let p = sample_point(&mut rng, &w, marks);
        let mut o = p;
        o.loc_mut().iter_mut().for_each(|v| *v = 0.0);
        let (a, b) = (model.kappa(&p, &[]), model.kappa(&o, &[]));
        if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
            return Err(invalid("the intensity at the empty configuration depends on the location"));
        }
    }
    Ok(())
}

/// Finds `u_n` from the nearest-point distance to the origin. Under common
/// random numbers `P̂(u)` is a step function, so the supremum is an order
/// statistic of the sample.
pub fn calibrate_un<M: Intensity + ?Sized>(
    model: &M,
    c: f64,
    n: f64,
    budget: &MaternBudget,
    seed: StreamSeed,
) -> Result<Calibration> {
    if !(c > 0.0 && c.is_finite() && n.is_finite()) {
        return Err(invalid("c must be positive"));
    }
    if c >= n {
        return Err(Error::TargetTooLarge { c, n });
    }
    check_translation_invariant(model, seed.child(tags::AUX))?;
    let d = model.dim();
    let di = d as i32;
    let kd = unit_ball_volume(d);
    let log_ratio = (n / c).ln();
    let lo = (log_ratio / (model.alpha_bar() * kd)).powf(1.0 / d as f64);
    let pl = poisson_like_constant(model);
    if pl.vacuous {
        return Err(Error::Bracket("the empty-space upper bound is vacuous (c0 = 0)".into()));
    }
    let hi = 2.0 * pl.half_reach + (log_ratio / pl.c0).powf(1.0 / d as f64);
    let half = hi + model.reach() + budget.margin;
    let p = c / n;
    let samples = ((budget.calibration_hits.max(1) as f64) / p).ceil() as usize;
    let draw = |tag: u64| -> Result<Vec<f64>> {
        map_replicates(samples, |i| nearest_from_origin(model, half, seed.path(&[tag, i]))).into_iter().collect()
    };
    let mut dist = draw(tags::LHS)?;
    dist.sort_by(|a, b| b.total_cmp(a));
    let k = ((p * samples as f64).ceil() as usize).clamp(1, samples);
    let u_n = dist[k - 1].min(half);
    if u_n >= hi + model.reach() {
        return Err(Error::Bracket(format!("u_n = {u_n} escaped the bracket [{lo}, {hi}]")));
    }
    let calibrated = n * dist.iter().filter(|&&x| x >= u_n).count() as f64 / samples as f64;
    let fresh = draw(tags::RHS)?;
    let hits: Vec<f64> = fresh.iter().map(|&x| n * (x > u_n) as u8 as f64).collect();
    let check = McEstimate::from_values(&hits);
    let closed_form = model.constant().map(|a| (log_ratio / (a * kd)).powf(1.0 / d as f64));
    Ok(Calibration {
        c,
        n,
        u_n,
        closed_form,
        bracket: (lo, hi),
        samples,
        calibrated,
        check,
        growth: u_n.powi(di) / n.ln(),
    })
}

/// One scale of the Matérn type I experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaternExperiment {
    pub model: String,
    pub c: f64,
    pub n: f64,
    pub calibration: Calibration,
    /// `c ∫ κ(o, r, 0) Q(dr)`: the mass of the reference Poisson process.
    pub reference_mass: f64,
    pub mean_count: McEstimate,
    pub tv: TvEstimate,
    pub bound: BoundReport,
    pub blocks_per_axis: usize,
    /// Share of the window dropped around block seams.
    pub seam_discard_fraction: f64,
}

/// `∫ κ(o, r, 0) Q(dr)`.
fn mean_kappa_at_origin<M: Intensity + ?Sized>(model: &M) -> f64 {
    let d = model.dim();
    let marks = model.marks();
    let origin = Point::new(&vec![0.0; d]);
    let labels: Vec<u16> = match marks.kind {
        MarkKind::RadiusAndLabel => (1..=marks.labels).collect(),
        _ => vec![0],
    };
    let radii = match marks.kind {
        MarkKind::None => vec![(0.0, 1.0)],
        _ => marks.law.quadrature(32),
    };
    let mut s = 0.0;
    for &(r, w) in &radii {
        for &l in &labels {
            s += w * model.kappa(&origin.with_radius(r).with_label(l), &[]) / labels.len() as f64;
        }
    }
    s
}

/// Kept length of `[a, b]` once the bands `[s - m, s + m]` around the
/// seams `s` are removed.
fn kept_length(a: f64, b: f64, seams: &[f64], m: f64) -> f64 {
    let mut cut = Vec::new();
    for &s in seams {
        let lo = (s - m).max(a);
        let hi = (s + m).min(b);
        if hi > lo {
            cut.push((lo, hi));
        }
    }
    cut.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut removed = 0.0;
    let mut end = a;
    for (lo, hi) in cut {
        let lo = lo.max(end);
        if hi > lo {
            removed += hi - lo;
            end = hi;
        }
    }
    (b - a) - removed
}

/// `χ_n` at one scale: calibrate `u_n`, sample and thin `ξ` on
/// `[0, n^{1/d}]^d`, rescale to the unit cube and compare cell counts with
/// the reference Poisson process.
pub fn matern_experiment<M: Intensity + ?Sized>(
    model: &M,
    c: f64,
    n: f64,
    budget: &MaternBudget,
    seed: StreamSeed,
) -> Result<MaternExperiment> {
    let calibration = calibrate_un(model, c, n, budget, seed.child(tags::QMC))?;
    let u_n = calibration.u_n;
    let d = model.dim();
    let side = n.powf(1.0 / d as f64);
    let wn = Window::cube(d, side)?;
    let unit = Window::unit(d);
    let rule = ThinningRule::MaternI { radius: u_n };
    let range = model.reach();
    let guard = range + u_n;

    if u_n < range {
        return Err(invalid(format!("u_n = {u_n} is below the interaction range {range}")));
    }
    // ξ lives on W_n padded by `guard`, so points of W_n see a full
    // neighbourhood; Gibbs draws are tiled into blocks and points near the
    // inner seams are dropped
    let ext = wn.expanded(guard)?;
    let ext_side = side + 2.0 * guard;
    let poissonian = model.constant().is_some();
    let blocks = if poissonian { 1 } else { ((ext_side / (budget.block_factor * guard)).floor() as usize).max(1) };
    let bside = ext_side / blocks as f64;
    let seams: Vec<f64> = (1..blocks).map(|k| k as f64 * bside - guard).collect();
    let mean_kappa = mean_kappa_at_origin(model);
    let reference_mass = c * mean_kappa;
    // reference means per unit-cube cell, restricted to the kept region
    let cells = unit.dyadic_cells();
    let means: Vec<f64> = cells
        .iter()
        .map(|cell| {
            let kept: f64 = (0..d)
                .map(|i| kept_length(cell.lower()[i] * side, cell.upper()[i] * side, &seams, guard) / side)
                .product();
            reference_mass * kept
        })
        .collect();
    let kept_total: f64 = (0..d).map(|_| kept_length(0.0, side, &seams, guard) / side).product();

    let in_guard = |p: &Point| seams.iter().any(|&s| p.loc().iter().any(|&v| (v - s).abs() < guard));
    let rows: Vec<Result<Vec<u32>>> = map_replicates(budget.replicates, |i| {
        let s = seed.path(&[tags::REPLICATE, i]);
        let mut xi: Vec<Point> = Vec::new();
        if let Some(alpha) = model.constant() {
            let mut rng = s.rng();
            let k = poisson(&mut rng, alpha * ext.volume());
            xi.extend((0..k).map(|_| sample_point(&mut rng, &ext, model.marks())));
        } else {
            let mut idx = vec![0usize; d];
            for b in 0..blocks.pow(d as u32) {
                let mut rem = b;
                for v in idx.iter_mut() {
                    *v = rem % blocks;
                    rem /= blocks;
                }
                let lo: Vec<f64> = idx.iter().map(|&k| k as f64 * bside - guard).collect();
                let hi: Vec<f64> = lo.iter().map(|v| v + bside).collect();
                let bw = Window::new(&lo, &hi)?;
                let (part, _) = rejection_sample(model, &bw, &[], RejectionOptions::default(), s.child(b as u64))?;
                xi.extend_from_slice(part.points());
            }
        }
        let keep = retained(&rule, &xi);
        let chi: Vec<Point> = xi
            .iter()
            .zip(&keep)
            .filter(|(p, &k)| k && wn.contains(p.loc()) && !in_guard(p))
            .map(|(p, _)| {
                let mut q = *p;
                q.loc_mut().iter_mut().for_each(|v| *v /= side);
                q
            })
            .collect();
        Ok(cell_counts(&chi, &unit))
    });
    let counts = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let totals: Vec<f64> = counts.iter().map(|c| c.iter().sum::<u32>() as f64).collect();
    let mean_count = McEstimate::from_values(&totals);
    let tv = count_tv(&counts, &means, budget.bootstrap, seed.child(tags::AUX));

    // bound terms on the unscaled window; E[χ_n] differs from E[ν] only
    // through the calibration error of n P(empty ball)
    let disc = McEstimate {
        estimate: (calibration.check.estimate - c).abs() * mean_kappa * kept_total,
        std_error: calibration.check.std_error * mean_kappa * kept_total,
        replicates: calibration.check.replicates,
    };
    let rho = McEstimate {
        estimate: mean_kappa * calibration.check.estimate / n,
        std_error: mean_kappa * calibration.check.std_error / n,
        replicates: calibration.check.replicates,
    };
    let geom = BoundGeometry {
        window: wn,
        domain: wn.expanded(guard + budget.margin)?,
        r_radius: u_n,
        s_radius: u_n + range.max(budget.margin),
    };
    let bound = bound_terms(
        model,
        &rule,
        &geom,
        |_| 0.0,
        Discrepancy::Given(disc),
        FieldMode::Stationary { margin: budget.margin, rho },
        &budget.bound,
        seed.child(tags::RHS),
    )?;
    Ok(MaternExperiment {
        model: model.name().to_string(),
        c,
        n,
        calibration,
        reference_mass,
        mean_count,
        tv,
        bound,
        blocks_per_axis: blocks,
        seam_discard_fraction: 1.0 - kept_total,
    })
}

/// The experiment along a sequence of scales with log-log slopes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateProbe {
    pub rows: Vec<MaternExperiment>,
    /// Slope of `log TV` against `log n`.
    pub tv_slope: Option<f64>,
    /// Slope of `log(bound)` against `log n`; descriptive only.
    pub bound_slope: Option<f64>,
    /// Each TV is at most the previous one, up to overlapping 95% intervals.
    pub tv_monotone: bool,
}

pub fn rate_probe<M: Intensity + ?Sized>(
    model: &M,
    c: f64,
    ns: &[f64],
    budget: &MaternBudget,
    seed: StreamSeed,
) -> Result<RateProbe> {
    let mut rows = Vec::new();
    for (k, &n) in ns.iter().enumerate() {
        rows.push(matern_experiment(model, c, n, budget, seed.child(k as u64))?);
    }
    Ok(summarize_rates(rows))
}

/// Slopes and the monotonicity verdict for experiments ordered by `n`.
pub fn summarize_rates(rows: Vec<MaternExperiment>) -> RateProbe {
    let slope = |f: &dyn Fn(&MaternExperiment) -> f64| -> Option<f64> {
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for r in &rows {
            let v = f(r);
            if v > 0.0 && v.is_finite() {
                x.push(r.n.ln());
                y.push(v.ln());
            }
        }
        let w = vec![1.0; x.len()];
        weighted_linear_fit(&x, &y, &w).map(|f: LinearFit| f.slope)
    };
    let tv_slope = slope(&|r| r.tv.tv);
    let bound_slope = slope(&|r| r.bound.total);
    let tv_monotone = rows.windows(2).all(|p| {
        let (a, b) = (&p[0].tv, &p[1].tv);
        b.tv - a.tv <= 1.96 * (a.std_error + b.std_error)
    });
    RateProbe { rows, tv_slope, bound_slope, tv_monotone }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Model, ModelKind, ModelSpec};

    #[test]
    fn matern_removes_both_close_points() {
        let rule = ThinningRule::MaternI { radius: 0.1 };
        let cfg = PointConfig::new(vec![Point::new(&[0.0, 0.0]), Point::new(&[0.05, 0.0]), Point::new(&[1.0, 1.0])]).unwrap();
        let t = thin(&rule, &cfg);
        assert_eq!(t.len(), 1);
        assert!(t.contains(&Point::new(&[1.0, 1.0])));
        assert!(thin(&rule, &PointConfig::empty()).is_empty());
    }

    #[test]
    fn grid_and_naive_thinning_agree() {
        let rule = ThinningRule::MaternI { radius: 0.07 };
        let mut rng = StreamSeed::new(5).rng();
        let w = Window::unit(2);
        let pts: Vec<Point> = (0..300).map(|_| sample_point(&mut rng, &w, &MarkSpec::none())).collect();
        let fast = retained(&rule, &pts);
        let slow: Vec<bool> = pts.iter().map(|p| rule.retain(p, &pts)).collect();
        assert_eq!(fast, slow);
    }

    #[test]
    fn palm_of_keep_rule_adds_the_point() {
        let m = Model::new(ModelSpec {
            dim: 2,
            marks: MarkSpec::radius(crate::geometry::RadiusLaw::PointMass { r: 0.05 }).unwrap(),
            kind: ModelKind::Strauss { alpha: 2.0, beta: 0.5 },
        })
        .unwrap();
        let at = Point::new(&[0.5, 0.5]).with_radius(0.05);
        let palm = PalmPi::new(&m, &ThinningRule::Keep, at);
        let y = Point::new(&[0.55, 0.5]).with_radius(0.05);
        assert_eq!(palm.kappa(&y, &[]), m.kappa(&y, &[at]));
        let matern = ThinningRule::MaternI { radius: 0.2 };
        let palm = PalmPi::new(&m, &matern, at);
        assert_eq!(palm.kappa(&y, &[]), 0.0);
    }

    #[test]
    fn kept_length_merges_bands() {
        assert!((kept_length(0.0, 10.0, &[5.0], 1.0) - 8.0).abs() < 1e-12);
        assert!((kept_length(0.0, 10.0, &[4.0, 5.0], 1.0) - 7.0).abs() < 1e-12);
        assert!((kept_length(0.0, 2.0, &[5.0], 1.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn union_volume_matches_closed_forms() {
        use std::f64::consts::PI;
        let (r, h) = (1.0f64, 0.7f64);
        assert!((union_volume(1, r, h) - (2.0 * r + h)).abs() < 1e-10);
        let lens2 = 2.0 * r * r * (h / (2.0 * r)).acos() - 0.5 * h * (4.0 * r * r - h * h).sqrt();
        assert!((union_volume(2, r, h) - (2.0 * PI * r * r - lens2)).abs() < 1e-8);
        let lens3 = PI * (4.0 * r + h) * (2.0 * r - h).powi(2) / 12.0;
        assert!((union_volume(3, r, h) - (8.0 * PI / 3.0 - lens3)).abs() < 1e-8);
        assert!((union_volume(2, r, 0.0) - PI).abs() < 1e-8);
    }

    #[test]
    fn target_above_scale_is_rejected() {
        let m = Model::new(ModelSpec { dim: 2, marks: MarkSpec::none(), kind: ModelKind::Poisson { alpha: 1.0 } }).unwrap();
        let e = calibrate_un(&m, 5.0, 5.0, &MaternBudget::default(), StreamSeed::new(0));
        assert!(matches!(e, Err(Error::TargetTooLarge { .. })));
    }
}
