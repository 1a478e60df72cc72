//! Hamiltonian weights, partition functions, retention probabilities and
//! the exact rejection sampler.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{point_from_unit, sample_point, Point, Window};
use crate::models::{kappa_m, Intensity};
use crate::qmc::Kronecker;
use crate::rng::{poisson, tags, StreamSeed};
use crate::space::{KeyMap, Layering, OrderKey, PointConfig};
use crate::stats::{poisson_truncation, MeanAccumulator, RatioAccumulator};

/// A region of the state space with a box enclosing its locations.
pub trait Region: Sync {
    fn bounding(&self) -> Window;
    fn contains(&self, p: &Point) -> bool;
}

impl Region for Window {
    fn bounding(&self) -> Window {
        *self
    }

    fn contains(&self, p: &Point) -> bool {
        Window::contains(self, p.loc())
    }
}

/// The order interval `(x, ∞)` inside the active part of a window.
pub struct OrderInterval<'a> {
    keymap: &'a KeyMap,
    layering: &'a dyn Layering,
    above: OrderKey,
}

impl<'a> OrderInterval<'a> {
    pub fn new(keymap: &'a KeyMap, layering: &'a dyn Layering, above: OrderKey) -> Self {
        OrderInterval { keymap, layering, above }
    }
}

impl Region for OrderInterval<'_> {
    fn bounding(&self) -> Window {
        let w = *self.keymap.window();
        if self.layering.is_whole() && self.keymap.key_dims() == 1 {
            // keys are monotone in the single coordinate
            let lo = self.above.point().loc()[0].max(w.lower()[0]);
            if lo < w.upper()[0] {
                return Window::new(&[lo], w.upper()).unwrap_or(w);
            }
        }
        w
    }

    fn contains(&self, p: &Point) -> bool {
        if !self.keymap.window().contains(p.loc()) {
            return false;
        }
        match self.layering.layer(p) {
            Some(l) => self.keymap.key(p, l) > self.above,
            None => false,
        }
    }
}

/// `e^{-H(pts, ψ)}`, the symmetrized multi-point intensity.
pub fn hamiltonian_weight<M: Intensity + ?Sized>(model: &M, pts: &[Point], boundary: &[Point]) -> f64 {
    let mut sorted = pts.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    kappa_m(model, &sorted, boundary)
}

/// Draws a unit-intensity Poisson configuration on `region` into `out`.
pub fn draw_region<R: Rng + ?Sized>(rng: &mut R, region: &dyn Region, bounding: &Window, marks: &crate::geometry::MarkSpec, out: &mut Vec<Point>) {
    out.clear();
    let n = poisson(rng, bounding.volume());
    for _ in 0..n {
        let p = sample_point(rng, bounding, marks);
        if region.contains(&p) {
            out.push(p);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    MonteCarlo,
    SeriesEnum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartitionEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub estimator: Estimator,
    /// Budget ran out before the target precision.
    pub partial: bool,
}

/// Sample budget for Monte Carlo partition functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZBudget {
    pub min_samples: usize,
    pub max_samples: usize,
    /// Target relative standard error.
    pub rel_se: f64,
}

impl Default for ZBudget {
    fn default() -> Self {
        ZBudget { min_samples: 4096, max_samples: 1 << 20, rel_se: 1e-3 }
    }
}

/// Monte Carlo `Z_B(ψ) = E e^{-H(η_B, ψ)}` with `η` unit-intensity Poisson.
pub fn partition_z<M: Intensity + ?Sized>(
    model: &M,
    region: &dyn Region,
    boundary: &[Point],
    budget: ZBudget,
    seed: StreamSeed,
) -> PartitionEstimate {
    let bounding = region.bounding();
    let mut rng = seed.rng();
    let mut acc = MeanAccumulator::default();
    let mut eta = Vec::new();
    let mut target = budget.min_samples.max(2);
    loop {
        while (acc.count() as usize) < target {
            draw_region(&mut rng, region, &bounding, model.marks(), &mut eta);
            acc.push(kappa_m(model, &eta, boundary));
        }
        let done = acc.std_error() <= budget.rel_se * acc.mean().abs();
        if done || target >= budget.max_samples {
            return PartitionEstimate {
                value: acc.mean(),
                std_error: acc.std_error(),
                n_samples: acc.count() as usize,
                estimator: Estimator::MonteCarlo,
                partial: !done,
            };
        }
        target = (target * 2).min(budget.max_samples);
    }
}

/// Quadrature budget for the series expansion of `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesBudget {
    pub nodes: usize,
    pub shifts: usize,
    /// Poisson tail mass allowed beyond the truncation order.
    pub tail: f64,
}

impl Default for SeriesBudget {
    fn default() -> Self {
        SeriesBudget { nodes: 2048, shifts: 8, tail: 1e-10 }
    }
}

/// `Z_B(ψ) = e^{-λ(B)} Σ_m (1/m!) ∫ κ̃_m dλ^m`, each order by randomized QMC
/// over the bounding box, truncated where the `Poisson(ᾱλ(B))` tail drops
/// below `budget.tail`.
pub fn partition_series<M: Intensity + ?Sized>(
    model: &M,
    region: &dyn Region,
    boundary: &[Point],
    budget: SeriesBudget,
    seed: StreamSeed,
) -> PartitionEstimate {
    let bounding = region.bounding();
    let vol = bounding.volume();
    let order = poisson_truncation(model.alpha_bar() * vol, budget.tail);
    let k = bounding.dim() + model.marks().mark_dims();
    let shifts = budget.shifts.max(2);
    let mut totals = vec![0.0; shifts];
    let mut pts = Vec::with_capacity(order);
    let mut log_coef = 0.0;
    for m in 0..=order {
        if m > 0 {
            log_coef += vol.ln() - (m as f64).ln();
        }
        let coef = (log_coef - vol).exp();
        if m == 0 {
            totals.iter_mut().for_each(|t| *t += coef);
            continue;
        }
        let rule = Kronecker::new(m * k);
        let mut u = vec![0.0; m * k];
        let mut shift = vec![0.0; m * k];
        for (s, total) in totals.iter_mut().enumerate() {
            let mut rng = seed.path(&[m as u64, s as u64]).rng();
            shift.iter_mut().for_each(|v| *v = rng.random());
            let mut sum = 0.0;
            for n in 0..budget.nodes {
                rule.node(n, &shift, &mut u);
                pts.clear();
                let mut inside = true;
                for j in 0..m {
                    let p = point_from_unit(&u[j * k..(j + 1) * k], &bounding, model.marks());
                    if !region.contains(&p) {
                        inside = false;
                        break;
                    }
                    pts.push(p);
                }
                if inside {
                    sum += kappa_m(model, &pts, boundary);
                }
            }
            *total += coef * sum / budget.nodes as f64;
        }
    }
    let acc = MeanAccumulator::from_slice(&totals);
    PartitionEstimate {
        value: acc.mean(),
        std_error: acc.std_error(),
        n_samples: budget.nodes * shifts,
        estimator: Estimator::SeriesEnum,
        partial: false,
    }
}

/// Controls for the Monte Carlo retention probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RetentionConfig {
    /// Initial number of common Poisson draws.
    pub n_z: usize,
    pub max_n_z: usize,
    /// Stop once the 95% half-width is below this fraction of `ᾱ`.
    pub halfwidth: f64,
}

impl Default for RetentionConfig {
    fn default() -> Self {
        RetentionConfig { n_z: 4096, max_n_z: 1 << 16, halfwidth: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RetentionEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    /// Both partition estimates vanished; the value is 0 by convention.
    pub degenerate: bool,
    /// `max_n_z` reached before the precision target.
    pub capped: bool,
}

impl RetentionEstimate {
    fn exact(value: f64) -> Self {
        RetentionEstimate { value, std_error: 0.0, samples: 0, degenerate: false, capped: false }
    }
}

/// `p(x, ψ) = κ(x, ψ_x) Z_{(x,∞)}(ψ_x + δ_x) / Z_{(x,∞)}(ψ_x)`.
///
/// `below` holds `ψ_x` together with any boundary configuration. Both
/// partition functions are estimated from the same Poisson draws on
/// `region`, so the ratio is exactly 1 whenever `x` cannot interact with
/// the draws.
pub fn retention_p<M: Intensity + ?Sized>(
    model: &M,
    x: &Point,
    below: &[Point],
    region: &dyn Region,
    cfg: &RetentionConfig,
    seed: StreamSeed,
) -> RetentionEstimate {
    let k0 = model.kappa(x, below);
    if k0 == 0.0 {
        return RetentionEstimate::exact(0.0);
    }
    if model.constant().is_some() {
        return RetentionEstimate::exact(k0);
    }
    let bounding = region.bounding();
    let mut rng = seed.rng();
    let mut acc = RatioAccumulator::default();
    let mut eta = Vec::new();
    let base = below.len();
    let mut without: Vec<Point> = below.to_vec();
    let mut with: Vec<Point> = below.to_vec();
    with.push(*x);
    let mut target = cfg.n_z.max(16);
    loop {
        while (acc.count() as usize) < target {
            draw_region(&mut rng, region, &bounding, model.marks(), &mut eta);
            without.truncate(base);
            with.truncate(base + 1);
            let (mut a, mut b) = (1.0, 1.0);
            for y in &eta {
                if b != 0.0 {
                    b *= model.kappa(y, &without);
                }
                if a != 0.0 {
                    a *= model.kappa(y, &with);
                }
                if a == 0.0 && b == 0.0 {
                    break;
                }
                without.push(*y);
                with.push(*y);
            }
            acc.push(a, b);
        }
        let Some(ratio) = acc.ratio() else {
            return RetentionEstimate {
                value: 0.0,
                std_error: 0.0,
                samples: acc.count() as usize,
                degenerate: true,
                capped: false,
            };
        };
        let se = k0 * acc.ratio_std_error();
        let done = 1.96 * se < cfg.halfwidth * model.alpha_bar();
        if done || target >= cfg.max_n_z {
            return RetentionEstimate {
                value: (k0 * ratio).clamp(0.0, model.alpha_bar()),
                std_error: se,
                samples: acc.count() as usize,
                degenerate: false,
                capped: !done,
            };
        }
        target = (target * 2).min(cfg.max_n_z);
    }
}

/// Deterministic retention probability from series partition functions.
pub fn retention_p_series<M: Intensity + ?Sized>(
    model: &M,
    x: &Point,
    below: &[Point],
    region: &dyn Region,
    budget: SeriesBudget,
    seed: StreamSeed,
) -> (f64, f64) {
    let k0 = model.kappa(x, below);
    if k0 == 0.0 {
        return (0.0, 0.0);
    }
    let mut with = below.to_vec();
    with.push(*x);
    let num = partition_series(model, region, &with, budget, seed.child(1));
    let den = partition_series(model, region, below, budget, seed.child(2));
    if den.value <= 0.0 {
        return (0.0, 0.0);
    }
    let r = num.value / den.value;
    let rel = ((num.std_error / num.value.max(f64::MIN_POSITIVE)).powi(2) + (den.std_error / den.value).powi(2)).sqrt();
    ((k0 * r).clamp(0.0, model.alpha_bar()), k0 * r * rel)
}

/// Options for the rejection sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RejectionOptions {
    /// Smallest acceptable acceptance rate.
    pub floor: f64,
}

impl Default for RejectionOptions {
    fn default() -> Self {
        RejectionOptions { floor: 1e-6 }
    }
}

/// Exact sampler: propose `Poisson(ᾱλ_W)` and accept with probability
/// `e^{-H(μ,ψ)} / ᾱ^{μ(W)}`. Returns the sample and the number of trials.
pub fn rejection_sample<M: Intensity + ?Sized>(
    model: &M,
    window: &Window,
    boundary: &[Point],
    opts: RejectionOptions,
    seed: StreamSeed,
) -> Result<(PointConfig, u64)> {
    let bar = model.alpha_bar();
    let mean = bar * window.volume();
    let max_trials = (20.0 / opts.floor).ceil() as u64;
    let mut buf: Vec<Point> = Vec::new();
    let mut proposal: Vec<Point> = Vec::new();
    for trial in 0..max_trials {
        let mut rng = seed.path(&[tags::REJECTION, trial]).rng();
        let u: f64 = rng.random();
        let n = poisson(&mut rng, mean);
        proposal.clear();
        for _ in 0..n {
            proposal.push(sample_point(&mut rng, window, model.marks()));
        }
        buf.clear();
        buf.extend_from_slice(boundary);
        let mut prod = 1.0;
        let mut accepted = true;
        for p in &proposal {
            let k = model.kappa(p, &buf);
            if k > bar * (1.0 + 1e-12) {
                return Err(Error::InvalidParameter(format!("intensity {k} exceeds alpha_bar {bar}")));
            }
            prod *= k / bar;
            if prod < u {
                accepted = false;
                break;
            }
            buf.push(*p);
        }
        if accepted {
            return Ok((PointConfig::from_distinct(proposal), trial + 1));
        }
    }
    Err(Error::AcceptanceTooLow { floor: opts.floor, trials: max_trials })
}

/// Both sides of `exp(-∫ p(x, ψ) λ(dx)) = e^{-λ(X)} Z_X(0)^{-1} Π_{y ∈ ψ}
/// Z_{(y,∞)}(ψ_y) / Z_{(y,∞)}(ψ_y + δ_y)` on a one-dimensional window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub z: f64,
}

/// The left side integrates Monte Carlo retention probabilities over
/// randomly shifted lattices; the right side uses series partition
/// functions.
#[allow(clippy::too_many_arguments)]
pub fn exponential_identity<M: Intensity + ?Sized>(
    model: &M,
    window: &Window,
    psi: &PointConfig,
    nodes: usize,
    shifts: usize,
    cfg: &RetentionConfig,
    series: SeriesBudget,
    seed: StreamSeed,
) -> Result<IdentityCheck> {
    if window.dim() != 1 || model.dim() != 1 {
        return Err(crate::error::invalid("the identity check runs on one-dimensional windows"));
    }
    if psi.iter().any(|p| !window.contains(p.loc())) {
        return Err(crate::error::invalid("psi must lie in the window"));
    }
    let keymap = KeyMap::new(*window, model.marks().clone());
    let layering = crate::space::WholeWindow;
    let mut sorted: Vec<(OrderKey, Point)> = psi.iter().map(|p| (keymap.key(p, 0), *p)).collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));

    let unit_dim = 1 + model.marks().mark_dims();
    let rule = Kronecker::new(unit_dim);
    let shifts = shifts.max(2);
    let mut totals = MeanAccumulator::default();
    for s in 0..shifts {
        let mut rng = seed.path(&[tags::LHS, s as u64]).rng();
        let shift: Vec<f64> = (0..unit_dim).map(|_| rng.random()).collect();
        let mut u = vec![0.0; unit_dim];
        let mut sum = 0.0;
        for n in 0..nodes.max(1) {
            rule.node(n, &shift, &mut u);
            let x = point_from_unit(&u, window, model.marks());
            let key = keymap.key(&x, 0);
            let below: Vec<Point> = sorted.iter().take_while(|(k, _)| *k < key).map(|(_, p)| *p).collect();
            let region = OrderInterval::new(&keymap, &layering, key);
            let stream = seed.path(&[tags::RETENTION, s as u64, n as u64]);
            sum += retention_p(model, &x, &below, &region, cfg, stream).value;
        }
        totals.push(window.volume() * sum / nodes.max(1) as f64);
    }
    let integral = totals.mean();
    let lhs = (-integral).exp();
    let lhs_se = lhs * totals.std_error();

    let z0 = partition_series(model, window, &[], series, seed.path(&[tags::RHS, 0]));
    let mut log_rhs = -window.volume() - z0.value.ln();
    let mut var = (z0.std_error / z0.value).powi(2);
    for (i, (key, y)) in sorted.iter().enumerate() {
        let below: Vec<Point> = sorted[..i].iter().map(|(_, p)| *p).collect();
        let mut with = below.clone();
        with.push(*y);
        let region = OrderInterval::new(&keymap, &layering, *key);
        let stream = seed.path(&[tags::RHS, 1 + i as u64]);
        let num = partition_series(model, &region, &below, series, stream.child(1));
        let den = partition_series(model, &region, &with, series, stream.child(2));
        if den.value <= 0.0 {
            return Err(crate::error::invalid("psi is not stable for this model"));
        }
        log_rhs += num.value.ln() - den.value.ln();
        var += (num.std_error / num.value).powi(2) + (den.std_error / den.value).powi(2);
    }
    let rhs = log_rhs.exp();
    let rhs_se = rhs * var.sqrt();
    let se = lhs_se.hypot(rhs_se);
    let z = if se > 0.0 { (lhs - rhs) / se } else { 0.0 };
    Ok(IdentityCheck { lhs, lhs_se, rhs, rhs_se, z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{MarkSpec, RadiusLaw};
    use crate::models::{Model, ModelKind, ModelSpec};
    use crate::space::WholeWindow;

    fn model(kind: ModelKind, dim: usize, r: f64) -> Model {
        let marks = if matches!(kind, ModelKind::Poisson { .. }) {
            MarkSpec::none()
        } else {
            MarkSpec::radius(RadiusLaw::PointMass { r }).unwrap()
        };
        Model::new(ModelSpec { dim, marks, kind }).unwrap()
    }

    #[test]
    fn weights_basic() {
        let p = model(ModelKind::Poisson { alpha: 2.0 }, 1, 0.0);
        assert_eq!(hamiltonian_weight(&p, &[], &[]), 1.0);
        let pts = [Point::new(&[0.1]), Point::new(&[0.5]), Point::new(&[0.7])];
        assert_eq!(hamiltonian_weight(&p, &pts, &[]), 8.0);
        let h = model(ModelKind::Hardcore { alpha: 2.0 }, 1, 0.1);
        let close = [Point::new(&[0.1]).with_radius(0.1), Point::new(&[0.15]).with_radius(0.1)];
        assert_eq!(hamiltonian_weight(&h, &close, &[]), 0.0);
    }

    #[test]
    fn poisson_partition_closed_form() {
        let p = model(ModelKind::Poisson { alpha: 1.7 }, 2, 0.0);
        let w = Window::new(&[0.0, 0.0], &[1.0, 0.8]).unwrap();
        let exact = (0.7f64 * 0.8).exp();
        let mc = partition_z(&p, &w, &[], ZBudget::default(), StreamSeed::new(5));
        assert!((mc.value - exact).abs() < 3.0 * mc.std_error + 1e-12, "{mc:?} vs {exact}");
        let s = partition_series(&p, &w, &[], SeriesBudget::default(), StreamSeed::new(6));
        assert!((s.value - exact).abs() < 1e-8, "{s:?} vs {exact}");
        let tiny = Window::new(&[0.0, 0.0], &[1e-9, 1e-9]).unwrap();
        let z0 = partition_z(&p, &tiny, &[], ZBudget::default(), StreamSeed::new(7));
        assert!((z0.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hardcore_partition_below_poisson() {
        let h = model(ModelKind::Hardcore { alpha: 2.0 }, 2, 0.1);
        let w = Window::unit(2);
        let mc = partition_z(&h, &w, &[], ZBudget::default(), StreamSeed::new(8));
        assert!(mc.value - 3.0 * mc.std_error <= 1f64.exp());
        assert!(mc.value + 3.0 * mc.std_error >= (-1f64).exp());
    }

    #[test]
    fn retention_poisson_exact_and_hardcore_zero() {
        let p = model(ModelKind::Poisson { alpha: 1.5 }, 1, 0.0);
        let km = KeyMap::new(Window::unit(1), MarkSpec::none());
        let x = Point::new(&[0.3]);
        let region = OrderInterval::new(&km, &WholeWindow, km.key(&x, 0));
        let r = retention_p(&p, &x, &[], &region, &RetentionConfig::default(), StreamSeed::new(1));
        assert_eq!(r.value, 1.5);
        assert_eq!(r.std_error, 0.0);
        let h = model(ModelKind::Hardcore { alpha: 1.0 }, 1, 0.1);
        let x = Point::new(&[0.3]).with_radius(0.1);
        let below = [Point::new(&[0.25]).with_radius(0.1)];
        let r = retention_p(&h, &x, &below, &region, &RetentionConfig::default(), StreamSeed::new(1));
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn retention_matches_series_oracle() {
        // hard-core Strauss on the unit interval, interaction distance 0.2
        let m = model(ModelKind::Strauss { alpha: 1.0, beta: 0.0 }, 1, 0.1);
        let km = KeyMap::new(Window::unit(1), m.marks().clone());
        for (i, &xv) in [0.1, 0.45, 0.8].iter().enumerate() {
            let x = Point::new(&[xv]).with_radius(0.1);
            let region = OrderInterval::new(&km, &WholeWindow, km.key(&x, 0));
            let mc = retention_p(&m, &x, &[], &region, &RetentionConfig::default(), StreamSeed::new(i as u64));
            let (s, se) = retention_p_series(&m, &x, &[], &region, SeriesBudget::default(), StreamSeed::new(99));
            let tol = 3.0 * (mc.std_error.powi(2) + se.powi(2)).sqrt();
            assert!((mc.value - s).abs() <= tol, "x={xv}: mc {mc:?} series {s} ± {se}");
            assert!(mc.value <= 1.0);
        }
    }

    #[test]
    fn poisson_identity_is_exact() {
        let p = model(ModelKind::Poisson { alpha: 0.8 }, 1, 0.0);
        let psi = PointConfig::new(vec![Point::new(&[0.2]), Point::new(&[0.6])]).unwrap();
        let c = exponential_identity(&p, &Window::unit(1), &psi, 64, 4, &RetentionConfig::default(), SeriesBudget::default(), StreamSeed::new(2))
            .unwrap();
        assert!((c.lhs - (-0.8f64).exp()).abs() < 1e-12);
        assert!((c.rhs - (-0.8f64).exp()).abs() < 1e-8, "{c:?}");
    }

    #[test]
    fn rejection_poisson_accepts_first_trial() {
        let p = model(ModelKind::Poisson { alpha: 2.0 }, 2, 0.0);
        let (_, trials) = rejection_sample(&p, &Window::unit(2), &[], RejectionOptions::default(), StreamSeed::new(3)).unwrap();
        assert_eq!(trials, 1);
    }
}
