//! Empirical checks of a sampled Gibbs process: GNZ residuals, empty-space
//! bounds and one-arm probabilities of the Boolean model.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{ball_box_volume, point_from_unit, unit_ball_volume, MarkKind, MarkSpec, Point, Window};
use crate::gibbs::{rejection_sample, retention_p, OrderInterval, RejectionOptions, RetentionConfig};
use crate::models::Intensity;
use crate::qmc::{self, Kronecker};
use crate::rng::{map_replicates, poisson, tags, StreamSeed};
use crate::samplers::{Sampler, SamplerOptions};
use crate::space::{component_labels, KeyMap, PointConfig, Relation, WholeWindow};
use crate::stats::{weighted_linear_fit, MeanAccumulator};

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub replicates: usize,
}

impl McEstimate {
    fn from_acc(acc: &MeanAccumulator) -> Self {
        McEstimate { estimate: acc.mean(), std_error: acc.std_error(), replicates: acc.count() as usize }
    }

    pub(crate) fn from_values(xs: &[f64]) -> Self {
        McEstimate::from_acc(&MeanAccumulator::from_slice(xs))
    }
}

/// Test functions `h(x, μ)` for the GNZ equation, evaluated with `x ∉ μ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    /// `1{x ∈ A}`.
    Indicator { a: Window },
    /// `1{x ∈ A} e^{-μ(B)}` for a fixed set `B`.
    Damped { a: Window, b: Window },
    /// `1{x ∈ A} (1 - e^{-μ(B(x, radius))})`: sensitive to close pairs.
    Contact { a: Window, radius: f64 },
    /// `1{x ∈ A, y ∈ A'}`, checked against the second-order equation.
    Pair { a: Window, b: Window },
}

impl TestFunction {
    pub fn id(&self) -> &'static str {
        match self {
            TestFunction::Indicator { .. } => "indicator",
            TestFunction::Damped { .. } => "damped",
            TestFunction::Contact { .. } => "contact",
            TestFunction::Pair { .. } => "pair",
        }
    }

    /// Order of the factorial moment measure involved.
    pub fn order(&self) -> usize {
        match self {
            TestFunction::Pair { .. } => 2,
            _ => 1,
        }
    }

    fn domain(&self) -> &Window {
        match self {
            TestFunction::Indicator { a } | TestFunction::Damped { a, .. } | TestFunction::Contact { a, .. } => a,
            TestFunction::Pair { a, .. } => a,
        }
    }

    /// `h(x, μ)` for first-order functions with `x ∈ A`, where `μ` is given
    /// as a slice and `skip` marks an entry standing for `x` itself.
    fn value(&self, x: &Point, mu: &[Point], skip: Option<usize>) -> f64 {
        let others = mu.iter().enumerate().filter(|(i, _)| Some(*i) != skip).map(|(_, q)| q);
        match self {
            TestFunction::Indicator { .. } => 1.0,
            TestFunction::Damped { b, .. } => (-(others.filter(|q| b.contains(q.loc())).count() as f64)).exp(),
            TestFunction::Contact { radius, .. } => {
                let r2 = radius * radius;
                let n = others.filter(|q| x.dist2(q) <= r2).count();
                1.0 - (-(n as f64)).exp()
            }
            TestFunction::Pair { .. } => unreachable!("pair functions are evaluated separately"),
        }
    }

    pub fn validate(&self, window: &Window) -> Result<()> {
        let inside = |w: &Window| window.contains_window(w);
        let ok = match self {
            TestFunction::Indicator { a } | TestFunction::Damped { a, .. } => inside(a),
            TestFunction::Contact { a, radius } => inside(a) && *radius > 0.0 && radius.is_finite(),
            TestFunction::Pair { a, b } => inside(a) && inside(b),
        };
        if !ok {
            return Err(invalid(format!("test function {} does not fit the window", self.id())));
        }
        if let TestFunction::Damped { b, .. } = self {
            if b.dim() != window.dim() {
                return Err(invalid("damping set has the wrong dimension"));
            }
        }
        Ok(())
    }

    /// `Σ h(x, ξ - δ_x)` over `ξ`, or the number of ordered pairs in `A × A'`.
    fn lhs(&self, xi: &[Point]) -> f64 {
        match self {
            TestFunction::Pair { a, b } => {
                let mut n = 0usize;
                for (i, x) in xi.iter().enumerate() {
                    if !a.contains(x.loc()) {
                        continue;
                    }
                    n += xi.iter().enumerate().filter(|&(j, y)| j != i && b.contains(y.loc())).count();
                }
                n as f64
            }
            _ => {
                let a = self.domain();
                xi.iter()
                    .enumerate()
                    .filter(|(_, x)| a.contains(x.loc()))
                    .map(|(i, x)| self.value(x, xi, Some(i)))
                    .sum()
            }
        }
    }
}

/// Both sides of the GNZ equation for one test function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GnzReport {
    pub function: String,
    pub sampler: String,
    pub lhs: McEstimate,
    pub rhs: McEstimate,
    /// `(lhs - rhs) / sqrt(se_lhs² + se_rhs²)`.
    pub z: f64,
}

/// GNZ residual: the left side samples `sample_model`; the right side
/// integrates `h κ` of `rhs_model` against independent samples of
/// `sample_model`. With equal models `z` is approximately standard normal.
#[allow(clippy::too_many_arguments)]
pub fn gnz_test<A: Intensity + ?Sized, B: Intensity + ?Sized>(
    sample_model: &A,
    rhs_model: &B,
    sampler: Sampler,
    opts: &SamplerOptions,
    window: &Window,
    boundary: &[Point],
    f: &TestFunction,
    replicates: usize,
    nodes: usize,
    seed: StreamSeed,
) -> Result<GnzReport> {
    f.validate(window)?;
    if replicates < 2 || nodes == 0 {
        return Err(invalid("gnz_test needs at least two replicates and one node"));
    }
    let marks = rhs_model.marks();
    let unit_dim = window.dim() + marks.mark_dims();
    let rule = Kronecker::new(unit_dim * f.order());
    let rows: Vec<Result<(f64, f64)>> = map_replicates(replicates, |i| {
        let xi = sampler.sample(sample_model, window, boundary, opts, seed.path(&[tags::LHS, i]))?;
        let lhs = f.lhs(xi.points());
        let eta = sampler.sample(sample_model, window, boundary, opts, seed.path(&[tags::RHS, i]))?;
        let mut cfg: Vec<Point> = eta.points().to_vec();
        cfg.extend_from_slice(boundary);
        let rhs = gnz_rhs(rhs_model, f, eta.points(), &cfg, &rule, unit_dim, nodes, seed.path(&[tags::RHS, i, tags::QMC]));
        Ok((lhs, rhs))
    });
    let mut l = MeanAccumulator::default();
    let mut r = MeanAccumulator::default();
    for row in rows {
        let (a, b) = row?;
        l.push(a);
        r.push(b);
    }
    let lhs = McEstimate::from_acc(&l);
    let rhs = McEstimate::from_acc(&r);
    let se = (lhs.std_error.powi(2) + rhs.std_error.powi(2)).sqrt();
    let diff = lhs.estimate - rhs.estimate;
    let z = if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };
    Ok(GnzReport { function: f.id().to_string(), sampler: sampler.name().to_string(), lhs, rhs, z })
}

/// `∫ h(x, ξ) κ(x, ξ + ψ) λ(dx)` by one randomly shifted lattice rule;
/// `cfg` holds `ξ + ψ`.
#[allow(clippy::too_many_arguments)]
fn gnz_rhs<M: Intensity + ?Sized>(
    model: &M,
    f: &TestFunction,
    xi: &[Point],
    cfg: &[Point],
    rule: &Kronecker,
    unit_dim: usize,
    nodes: usize,
    seed: StreamSeed,
) -> f64 {
    use rand::Rng;
    let marks = model.marks();
    let mut rng = seed.rng();
    let shift: Vec<f64> = (0..rule.dim()).map(|_| rng.random()).collect();
    let mut u = vec![0.0; rule.dim()];
    let mut sum = 0.0;
    match f {
        TestFunction::Pair { a, b } => {
            let mut buf = cfg.to_vec();
            for n in 0..nodes {
                rule.node(n, &shift, &mut u);
                let x = point_from_unit(&u[..unit_dim], a, marks);
                let y = point_from_unit(&u[unit_dim..], b, marks);
                let kx = model.kappa(&x, cfg);
                if kx == 0.0 {
                    continue;
                }
                buf.push(x);
                sum += kx * model.kappa(&y, &buf);
                buf.pop();
            }
            a.volume() * b.volume() * sum / nodes as f64
        }
        _ => {
            let a = f.domain();
            for n in 0..nodes {
                rule.node(n, &shift, &mut u);
                let x = point_from_unit(&u, a, marks);
                let k = model.kappa(&x, cfg);
                if k != 0.0 {
                    sum += k * f.value(&x, xi, None);
                }
            }
            a.volume() * sum / nodes as f64
        }
    }
}

/// Budget for [`empty_space_bounds`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmptySpaceBudget {
    pub replicates: usize,
    /// Lattice nodes per randomized copy for the bound integrals.
    pub nodes: usize,
    pub shifts: usize,
    /// Nodes for the retention identity, which is much more expensive.
    pub identity_nodes: usize,
    #[serde(skip)]
    pub retention: RetentionConfig,
}

impl Default for EmptySpaceBudget {
    fn default() -> Self {
        EmptySpaceBudget {
            replicates: 100_000,
            nodes: 4096,
            shifts: 8,
            identity_nodes: 64,
            retention: RetentionConfig::default(),
        }
    }
}

/// Conditional probability that `B` is empty given `ψ`, with the bounds
/// `e^{-ᾱλ(B)} <= P <= upper`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmptySpaceReport {
    pub region: Window,
    pub boundary: PointConfig,
    pub mc: McEstimate,
    /// `exp(-∫_B p(x, 0) λ(dx))` with the retention probabilities of the
    /// process on `B` with boundary `ψ`. Exact for constant intensities.
    pub identity: f64,
    pub identity_se: f64,
    pub lower: f64,
    /// Bound built on `κ(x, 0)` over points unrelated to `ψ`.
    pub upper_loc1: f64,
    pub upper_loc1_se: f64,
    /// Bound built on `κ(x, ψ)`; valid only for the stronger locality.
    pub upper_loc2: Option<f64>,
    pub upper_loc2_se: Option<f64>,
    pub upper: f64,
    pub upper_se: f64,
    /// `lower > upper` beyond quadrature noise.
    pub bound_alarm: bool,
}

impl EmptySpaceReport {
    /// `lower - kσ <= mc <= upper + kσ`, with σ combining the Monte Carlo
    /// and quadrature errors.
    pub fn sandwiched(&self, k: f64) -> bool {
        let s_lo = self.mc.std_error;
        let s_hi = (self.mc.std_error.powi(2) + self.upper_se.powi(2)).sqrt();
        self.mc.estimate >= self.lower - k * s_lo && self.mc.estimate <= self.upper + k * s_hi
    }
}

/// `λ(N_x ∩ B)`: the measure of marked points in `B` related to `x`.
pub fn neighbourhood_measure(x: &Point, relation: &Relation, marks: &MarkSpec, region: &Window) -> f64 {
    match *relation {
        Relation::Range { r0 } => ball_box_volume(x.loc(), r0, region),
        Relation::BallsOverlap | Relation::BallsOverlapDistinctLabels => {
            let mut v: f64 = marks
                .law
                .quadrature(16)
                .iter()
                .map(|&(s, w)| w * ball_box_volume(x.loc(), x.radius + s, region))
                .sum();
            if *relation == Relation::BallsOverlapDistinctLabels && marks.kind == MarkKind::RadiusAndLabel {
                let m = marks.labels as f64;
                v *= (m - 1.0) / m;
            }
            v
        }
    }
}

/// Empty-space probability of `region` given the boundary, with its
/// lower bound and the two upper bounds.
pub fn empty_space_bounds<M: Intensity + ?Sized>(
    model: &M,
    window: &Window,
    region: &Window,
    boundary: &PointConfig,
    budget: &EmptySpaceBudget,
    seed: StreamSeed,
) -> Result<EmptySpaceReport> {
    if !window.contains_window(region) {
        return Err(invalid("region must lie inside the window"));
    }
    if let Some(p) = boundary.iter().find(|p| region.contains(p.loc())) {
        return Err(invalid(format!("boundary point {p:?} lies inside the region")));
    }
    if budget.replicates < 2 {
        return Err(invalid("empty_space_bounds needs at least two replicates"));
    }
    let psi = boundary.points();
    let bar = model.alpha_bar();
    let rel = model.relation();
    let marks = model.marks();
    let vol = region.volume();
    let unit_dim = region.dim() + marks.mark_dims();

    let hits: Vec<Result<f64>> = map_replicates(budget.replicates, |i| {
        let (xi, _) = rejection_sample(model, region, psi, RejectionOptions::default(), seed.path(&[tags::REPLICATE, i]))?;
        Ok(xi.is_empty() as u8 as f64)
    });
    let hits = hits.into_iter().collect::<Result<Vec<f64>>>()?;
    let mc = McEstimate::from_values(&hits);

    let bound_integral = |with_psi: bool, tag: u64| {
        let est = qmc::integrate(unit_dim, budget.nodes, budget.shifts, seed.path(&[tags::QMC, tag]), |u| {
            let x = point_from_unit(u, region, marks);
            let k = if with_psi {
                model.kappa(&x, psi)
            } else if rel.related_to_any(&x, psi) {
                return 0.0;
            } else {
                model.kappa(&x, &[])
            };
            if k == 0.0 {
                return 0.0;
            }
            (-bar * neighbourhood_measure(&x, &rel, marks, region)).exp() * k
        });
        let v = (-vol * est.value).exp();
        (v, v * vol * est.std_error)
    };
    let (upper_loc1, upper_loc1_se) = bound_integral(false, 1);
    let (upper_loc2, upper_loc2_se) = if model.locality() == crate::models::Locality::Loc2 {
        let (v, s) = bound_integral(true, 2);
        (Some(v), Some(s))
    } else {
        (None, None)
    };
    let (upper, upper_se) = match (upper_loc2, upper_loc2_se) {
        (Some(v), Some(s)) if v < upper_loc1 => (v, s),
        _ => (upper_loc1, upper_loc1_se),
    };

    let (identity, identity_se) = empty_space_identity(model, region, psi, budget, seed.path(&[tags::AUX]));
    let lower = (-bar * vol).exp();
    let bound_alarm = lower > upper + 3.0 * upper_se + 1e-12;
    Ok(EmptySpaceReport {
        region: *region,
        boundary: boundary.clone(),
        mc,
        identity,
        identity_se,
        lower,
        upper_loc1,
        upper_loc1_se,
        upper_loc2,
        upper_loc2_se,
        upper,
        upper_se,
        bound_alarm,
    })
}

/// `P(ξ(B) = 0 | ψ) = exp(-∫_B p(x, 0) λ(dx))` for the process on `B` with
/// boundary `ψ`, where `p` is the retention probability at the empty
/// configuration.
fn empty_space_identity<M: Intensity + ?Sized>(
    model: &M,
    region: &Window,
    psi: &[Point],
    budget: &EmptySpaceBudget,
    seed: StreamSeed,
) -> (f64, f64) {
    let marks = model.marks();
    let keymap = KeyMap::new(*region, marks.clone());
    let unit_dim = region.dim() + marks.mark_dims();
    let mut counter = 0u64;
    let est = qmc::integrate(unit_dim, budget.identity_nodes.max(1), budget.shifts, seed, |u| {
        counter += 1;
        let x = point_from_unit(u, region, marks);
        let key = keymap.key(&x, 0);
        let interval = OrderInterval::new(&keymap, &WholeWindow, key);
        retention_p(model, &x, psi, &interval, &budget.retention, seed.path(&[tags::RETENTION, counter])).value
    });
    let vol = region.volume();
    let v = (-vol * est.value).exp();
    (v, v * vol * est.std_error)
}

/// `c0 = e^{-ᾱ κ_d 2^d R^d} ∫ κ((o, r), 0) Q(dr)` with `R` half the reach.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoissonLikeConstant {
    pub c0: f64,
    pub half_reach: f64,
    /// `c0 = 0`: the decay bound says nothing.
    pub vacuous: bool,
}

pub fn poisson_like_constant<M: Intensity + ?Sized>(model: &M) -> PoissonLikeConstant {
    let d = model.dim();
    let marks = model.marks();
    let r = 0.5 * model.reach();
    let origin = Point::new(&vec![0.0; d]);
    let labels: Vec<u16> = match marks.kind {
        MarkKind::RadiusAndLabel => (1..=marks.labels).collect(),
        _ => vec![0],
    };
    let radii = match marks.kind {
        MarkKind::None => vec![(0.0, 1.0)],
        _ => marks.law.quadrature(32),
    };
    let mut integral = 0.0;
    for &(rad, w) in &radii {
        for &l in &labels {
            let p = origin.with_radius(rad).with_label(l);
            integral += w * model.kappa(&p, &[]) / labels.len() as f64;
        }
    }
    let c0 = (-model.alpha_bar() * unit_ball_volume(d) * (2.0 * r).powi(d as i32)).exp() * integral;
    PoissonLikeConstant { c0, half_reach: r, vacuous: c0 <= 0.0 }
}

/// Probability that no point has its centre in `B(o, t)`, against
/// `e^{-c0 (t - 2R)^d}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayCheck {
    pub t: f64,
    pub empty: McEstimate,
    pub bound: f64,
    /// `-log P̂ / t^d`; infinite when no empty ball was observed.
    pub rate: f64,
    /// `c0 (1 - 2R/t)^d`.
    pub rate_bound: f64,
    /// `P̂ <= bound + 3 se`.
    pub holds: bool,
}

/// Samples the process on `[-t, t]^d` with empty boundary and counts the
/// replicates whose centres avoid `B(o, t)`.
pub fn decay_check<M: Intensity + ?Sized>(model: &M, t: f64, replicates: usize, seed: StreamSeed) -> Result<DecayCheck> {
    let c = poisson_like_constant(model);
    if t < 2.0 * c.half_reach {
        return Err(invalid(format!("decay check needs t >= 2R = {}", 2.0 * c.half_reach)));
    }
    let d = model.dim();
    let window = Window::centered(&vec![0.0; d], t)?;
    let t2 = t * t;
    let hits: Vec<Result<f64>> = map_replicates(replicates, |i| {
        let (xi, _) = rejection_sample(model, &window, &[], RejectionOptions::default(), seed.path(&[tags::REPLICATE, i]))?;
        Ok(xi.iter().all(|p| p.loc().iter().map(|v| v * v).sum::<f64>() >= t2) as u8 as f64)
    });
    let empty = McEstimate::from_values(&hits.into_iter().collect::<Result<Vec<_>>>()?);
    let di = d as i32;
    let bound = (-c.c0 * (t - 2.0 * c.half_reach).powi(di)).exp();
    let rate = if empty.estimate > 0.0 { -empty.estimate.ln() / t.powi(di) } else { f64::INFINITY };
    Ok(DecayCheck {
        t,
        empty,
        bound,
        rate,
        rate_bound: c.c0 * (1.0 - 2.0 * c.half_reach / t).powi(di),
        holds: empty.estimate <= bound + 3.0 * empty.std_error,
    })
}

/// One-arm probabilities of the Boolean model at one `(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OneArmReport {
    pub u: f64,
    pub v: f64,
    /// `P(B(o,u) ↔ B(o,u+v)^c)`.
    pub arm: McEstimate,
    /// `P((o,Y) ↔ B(o,v)^c)` in `η + δ_{(o,Y)}`.
    pub typical: McEstimate,
    /// `α κ_d u^d P((o,Y) ↔ B(o,v)^c)`.
    pub bound: f64,
    pub bound_se: f64,
    /// `arm <= bound` within three combined standard errors.
    pub holds: bool,
    pub c1: f64,
    pub c2: f64,
}

/// Exponential fit `P((o,Y) ↔ B(o,v)^c) ≈ c1 e^{-c2 v}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub c1: f64,
    pub c2: f64,
    /// 95% interval for `c2`.
    pub c2_ci: (f64, f64),
    pub points: usize,
    /// The interval for `c2` reaches zero: no evidence of decay.
    pub possibly_supercritical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneArmGrid {
    pub alpha: f64,
    pub replicates: usize,
    /// Half-width of the simulation boxes.
    pub arm_box: f64,
    pub typical_box: f64,
    pub cells: Vec<OneArmReport>,
    pub typical: Vec<(f64, McEstimate)>,
    pub fit: Option<DecayFit>,
}

/// Boolean model `Poisson(α λ)` on the centred box of half-width `h`.
fn boolean_sample(alpha: f64, marks: &MarkSpec, d: usize, h: f64, seed: StreamSeed) -> Vec<Point> {
    let w = Window::centered(&vec![0.0; d], h).expect("positive half-width");
    let mut rng = seed.rng();
    let n = poisson(&mut rng, alpha * w.volume());
    (0..n).map(|_| crate::geometry::sample_point(&mut rng, &w, marks)).collect()
}

fn norm(p: &Point) -> f64 {
    p.loc().iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Both one-arm probabilities over the grid `us × vs`, with the decay fit
/// of the typical-point probability over `vs`.
///
/// The arm event at `(u, v)` only depends on points within `u + v + 2R` of
/// the origin, so one box of half-width `max(u + v) + 2R` serves every cell.
#[allow(clippy::too_many_arguments)]
pub fn one_arm(
    relation: &Relation,
    marks: &MarkSpec,
    dim: usize,
    alpha: f64,
    us: &[f64],
    vs: &[f64],
    replicates: usize,
    seed: StreamSeed,
) -> Result<OneArmGrid> {
    marks.validate()?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(invalid("alpha must be finite and non-negative"));
    }
    if us.iter().chain(vs).any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(invalid("u and v must be positive"));
    }
    if replicates < 2 {
        return Err(invalid("one_arm needs at least two replicates"));
    }
    let reach = relation.reach(marks);
    let umax = us.iter().copied().fold(0.0, f64::max);
    let vmax = vs.iter().copied().fold(0.0, f64::max);
    let arm_box = umax + vmax + reach + 1e-9;
    let typical_box = vmax + reach + 1e-9;

    // per component: smallest and largest distance from the origin
    let arm_rows: Vec<Vec<u8>> = map_replicates(replicates, |i| {
        let eta = boolean_sample(alpha, marks, dim, arm_box, seed.path(&[tags::LHS, i]));
        let labels = component_labels(&eta, relation, reach);
        let mut span: std::collections::HashMap<usize, (f64, f64)> = Default::default();
        for (p, &l) in eta.iter().zip(&labels) {
            let r = norm(p);
            let e = span.entry(l).or_insert((r, r));
            e.0 = e.0.min(r);
            e.1 = e.1.max(r);
        }
        let mut out = Vec::with_capacity(us.len() * vs.len());
        for &u in us {
            for &v in vs {
                out.push(span.values().any(|&(lo, hi)| lo < u && hi > u + v) as u8);
            }
        }
        out
    });
    let typ_rows: Vec<f64> = map_replicates(replicates, |i| {
        let s = seed.path(&[tags::RHS, i]);
        let mut eta = boolean_sample(alpha, marks, dim, typical_box, s);
        let mut o = Point::new(&vec![0.0; dim]);
        marks.sample_into(&mut s.child(tags::AUX).rng(), &mut o);
        eta.push(o);
        let labels = component_labels(&eta, relation, reach);
        let lo = *labels.last().expect("origin present");
        eta.iter().zip(&labels).filter(|(_, &l)| l == lo).map(|(p, _)| norm(p)).fold(0.0, f64::max)
    });
    let typical: Vec<(f64, McEstimate)> = vs
        .iter()
        .map(|&v| {
            let xs: Vec<f64> = typ_rows.iter().map(|&m| (m > v) as u8 as f64).collect();
            (v, McEstimate::from_values(&xs))
        })
        .collect();
    let fit = fit_decay(&typical);
    let kd = unit_ball_volume(dim);
    let mut cells = Vec::new();
    for (a, &u) in us.iter().enumerate() {
        for (b, &v) in vs.iter().enumerate() {
            let k = a * vs.len() + b;
            let xs: Vec<f64> = arm_rows.iter().map(|r| r[k] as f64).collect();
            let arm = McEstimate::from_values(&xs);
            let t = typical[b].1;
            let scale = alpha * kd * u.powi(dim as i32);
            let bound = scale * t.estimate;
            let bound_se = scale * t.std_error;
            let sigma = (arm.std_error.powi(2) + bound_se.powi(2)).sqrt();
            cells.push(OneArmReport {
                u,
                v,
                arm,
                typical: t,
                bound,
                bound_se,
                holds: arm.estimate <= bound + 3.0 * sigma,
                c1: fit.map_or(f64::NAN, |f| f.c1),
                c2: fit.map_or(f64::NAN, |f| f.c2),
            });
        }
    }
    Ok(OneArmGrid { alpha, replicates, arm_box, typical_box, cells, typical, fit })
}

/// Weighted least squares of `log P̂` on `v`, with delta-method weights
/// `N P̂ / (1 - P̂)`; cells without hits are dropped.
pub fn fit_decay(points: &[(f64, McEstimate)]) -> Option<DecayFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for &(v, e) in points {
        if e.estimate <= 0.0 || e.estimate >= 1.0 {
            continue;
        }
        xs.push(v);
        ys.push(e.estimate.ln());
        ws.push(e.replicates as f64 * e.estimate / (1.0 - e.estimate));
    }
    if xs.len() < 3 {
        return None;
    }
    let fit = weighted_linear_fit(&xs, &ys, &ws)?;
    let (lo, hi) = fit.slope_ci(0.95);
    Some(DecayFit {
        c1: fit.intercept.exp(),
        c2: -fit.slope,
        c2_ci: (-hi, -lo),
        points: xs.len(),
        possibly_supercritical: -lo <= 0.0 || -hi <= 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RadiusLaw;
    use crate::models::{Model, ModelKind, ModelSpec};

    fn poisson(alpha: f64) -> Model {
        Model::new(ModelSpec { dim: 2, marks: MarkSpec::none(), kind: ModelKind::Poisson { alpha } }).unwrap()
    }

    #[test]
    fn mecke_for_poisson_indicator() {
        let m = poisson(3.0);
        let w = Window::unit(2);
        let a = Window::new(&[0.0, 0.0], &[0.5, 1.0]).unwrap();
        let f = TestFunction::Indicator { a };
        let r = gnz_test(&m, &m, Sampler::Rejection, &SamplerOptions::default(), &w, &[], &f, 4000, 16, StreamSeed::new(3))
            .unwrap();
        // the right side is exactly α λ(A) for every replicate
        assert!((r.rhs.estimate - 1.5).abs() < 1e-12);
        assert!(r.z.abs() < 4.0, "{r:?}");
    }

    #[test]
    fn pair_function_counts_ordered_pairs() {
        let a = Window::unit(1);
        let f = TestFunction::Pair { a, b: a };
        let pts = [Point::new(&[0.1]), Point::new(&[0.2]), Point::new(&[0.3])];
        assert_eq!(f.lhs(&pts), 6.0);
    }

    #[test]
    fn poisson_empty_space_collapses() {
        let m = poisson(2.0);
        let w = Window::unit(2);
        let b = Window::new(&[0.2, 0.2], &[0.6, 0.6]).unwrap();
        let budget = EmptySpaceBudget { replicates: 20_000, nodes: 256, shifts: 4, identity_nodes: 8, ..Default::default() };
        let r = empty_space_bounds(&m, &w, &b, &PointConfig::empty(), &budget, StreamSeed::new(1)).unwrap();
        let exact = (-2.0f64 * 0.16).exp();
        assert!((r.lower - exact).abs() < 1e-12);
        assert!((r.upper - exact).abs() < 1e-12);
        assert!((r.identity - exact).abs() < 1e-12);
        assert!(r.sandwiched(3.0));
    }

    #[test]
    fn tiny_region_bounds_near_one() {
        let m = Model::new(ModelSpec {
            dim: 2,
            marks: MarkSpec::radius(RadiusLaw::PointMass { r: 0.05 }).unwrap(),
            kind: ModelKind::Hardcore { alpha: 2.0 },
        })
        .unwrap();
        let b = Window::new(&[0.5, 0.5], &[0.501, 0.501]).unwrap();
        let budget = EmptySpaceBudget { replicates: 100, nodes: 64, shifts: 4, identity_nodes: 4, ..Default::default() };
        let r = empty_space_bounds(&m, &Window::unit(2), &b, &PointConfig::empty(), &budget, StreamSeed::new(2)).unwrap();
        assert!(r.lower > 0.9999 && r.upper > 0.9999);
        assert!(r.upper >= r.lower);
    }

    #[test]
    fn c0_constant_intensity() {
        let m = Model::new(ModelSpec {
            dim: 2,
            marks: MarkSpec::radius(RadiusLaw::PointMass { r: 0.05 }).unwrap(),
            kind: ModelKind::Hardcore { alpha: 2.0 },
        })
        .unwrap();
        let c = poisson_like_constant(&m);
        let want = 2.0 * (-2.0 * std::f64::consts::PI * 4.0 * 0.05f64 * 0.05).exp();
        assert!((c.c0 - want).abs() < 1e-12);
        assert!(!c.vacuous);
    }

    #[test]
    fn no_points_no_arms() {
        let marks = MarkSpec::radius(RadiusLaw::PointMass { r: 0.5 }).unwrap();
        let g = one_arm(&Relation::BallsOverlap, &marks, 2, 0.0, &[0.5], &[1.0, 2.0, 3.0], 50, StreamSeed::new(0)).unwrap();
        assert!(g.cells.iter().all(|c| c.arm.estimate == 0.0 && c.typical.estimate == 0.0));
    }
}
