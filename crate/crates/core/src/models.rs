//! Papangelou intensities with their locality data.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{sample_point, unit_ball_volume, MarkKind, MarkSpec, Point, RadiusLaw, Window, MAX_DIM};
use crate::rng::StreamSeed;
use crate::space::Relation;

/// How far the dependence of `κ(x, μ)` on `μ` reaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Locality {
    /// Depends on the cluster of `x` only.
    Loc1,
    /// Depends on `μ` restricted to `N_x` only (implies `Loc1`).
    Loc2,
    /// No locality information.
    None,
}

impl Locality {
    pub fn is_cluster_local(self) -> bool {
        matches!(self, Locality::Loc1 | Locality::Loc2)
    }
}

/// A locally stable Papangelou intensity.
///
/// `cfg` never contains `p`; callers add points explicitly.
pub trait Intensity: Sync + Send {
    fn kappa(&self, p: &Point, cfg: &[Point]) -> f64;
    /// The constant in `κ <= ᾱ`.
    fn alpha_bar(&self) -> f64;
    fn marks(&self) -> &MarkSpec;
    fn dim(&self) -> usize;
    fn relation(&self) -> Relation;
    fn locality(&self) -> Locality;
    fn name(&self) -> &str;

    /// Location distance beyond which points never interact.
    fn reach(&self) -> f64 {
        self.relation().reach(self.marks())
    }

    /// True when adding points never increases `κ`. Then the retention
    /// probability is bounded by `κ(x, ψ_x)`.
    fn repulsive(&self) -> bool {
        false
    }

    /// `Some(α)` when `κ ≡ α`.
    fn constant(&self) -> Option<f64> {
        None
    }
}

/// `κ_m(x_1..x_m, μ) = κ(x_1, μ) κ(x_2, μ + δ_{x_1}) ...`.
pub fn kappa_m<M: Intensity + ?Sized>(model: &M, pts: &[Point], cfg: &[Point]) -> f64 {
    let mut buf = cfg.to_vec();
    let mut prod = 1.0;
    for p in pts {
        prod *= model.kappa(p, &buf);
        if prod == 0.0 {
            return 0.0;
        }
        buf.push(*p);
    }
    prod
}

/// Nonnegative finite-range pair potential `U(t)`, zero for `t >= r0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Potential {
    /// `U(t) = height` on `[0, r0)`; `height = inf` is a hard core.
    Step { height: f64 },
    /// `U(t) = strength (1 - t/r0)^2` on `[0, r0)`.
    Soft { strength: f64 },
}

impl Potential {
    fn value(&self, t: f64, r0: f64) -> f64 {
        if t >= r0 {
            return 0.0;
        }
        match *self {
            Potential::Step { height } => height,
            Potential::Soft { strength } => {
                let u = 1.0 - t / r0;
                strength * u * u
            }
        }
    }
}

fn default_area_nodes() -> usize {
    4096
}

/// Model families and their parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelKind {
    Poisson {
        alpha: f64,
    },
    Strauss {
        alpha: f64,
        beta: f64,
    },
    Hardcore {
        alpha: f64,
    },
    AreaInteraction {
        alpha: f64,
        beta: f64,
        /// Lattice nodes per ball of the smallest radius.
        #[serde(default = "default_area_nodes")]
        nodes: usize,
    },
    RandomCluster {
        alpha: f64,
        q: f64,
        /// Required when `q < 1`.
        #[serde(default)]
        alpha_bar: Option<f64>,
    },
    WidomRowlinson {
        alpha: f64,
    },
    PairPotential {
        alpha: f64,
        potential: Potential,
        r0: f64,
    },
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Poisson { .. } => "poisson",
            ModelKind::Strauss { .. } => "strauss",
            ModelKind::Hardcore { .. } => "hardcore",
            ModelKind::AreaInteraction { .. } => "area_interaction",
            ModelKind::RandomCluster { .. } => "random_cluster",
            ModelKind::WidomRowlinson { .. } => "widom_rowlinson",
            ModelKind::PairPotential { .. } => "pair_potential",
        }
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            ModelKind::Poisson { alpha }
            | ModelKind::Strauss { alpha, .. }
            | ModelKind::Hardcore { alpha }
            | ModelKind::AreaInteraction { alpha, .. }
            | ModelKind::RandomCluster { alpha, .. }
            | ModelKind::WidomRowlinson { alpha }
            | ModelKind::PairPotential { alpha, .. } => alpha,
        }
    }
}

/// Declarative description of a model, as it appears in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub dim: usize,
    #[serde(default = "MarkSpec::none")]
    pub marks: MarkSpec,
    #[serde(rename = "model")]
    pub kind: ModelKind,
}

/// Counting lattice for the area-interaction volume.
///
/// One global lattice is shared by all evaluations, so uncovered volumes are
/// integer node counts and the cocycle identity holds exactly.
#[derive(Debug, Clone, PartialEq)]
struct AreaLattice {
    h: f64,
    shift: [f64; MAX_DIM],
    cell_volume: f64,
}

impl AreaLattice {
    fn new(dim: usize, r1: f64, nodes: usize) -> Self {
        let h = r1 * (unit_ball_volume(dim) / nodes as f64).powf(1.0 / dim as f64);
        let mut shift = [0.0; MAX_DIM];
        for (i, s) in shift.iter_mut().enumerate() {
            *s = ((i as f64 + 1.0) * 0.618_033_988_749_894_9).fract();
        }
        AreaLattice { h, shift, cell_volume: h.powi(dim as i32) }
    }

    /// Lattice nodes in `B(p, r)` not covered by any ball in `cover`.
    fn uncovered(&self, p: &Point, cover: &[Point]) -> u64 {
        let d = p.dim();
        let r = p.radius;
        let mut lo = [0i64; MAX_DIM];
        let mut hi = [0i64; MAX_DIM];
        for k in 0..d {
            lo[k] = ((p.loc()[k] - r) / self.h - self.shift[k]).ceil() as i64;
            hi[k] = ((p.loc()[k] + r) / self.h - self.shift[k]).floor() as i64;
            if hi[k] < lo[k] {
                return 0;
            }
        }
        let mut idx = lo;
        let mut node = [0.0; MAX_DIM];
        let mut count = 0u64;
        let r2 = r * r;
        loop {
            let mut inside = true;
            let mut d2 = 0.0;
            for k in 0..d {
                node[k] = (idx[k] as f64 + self.shift[k]) * self.h;
                let t = node[k] - p.loc()[k];
                d2 += t * t;
            }
            if d2 > r2 {
                inside = false;
            }
            if inside && !cover.iter().any(|q| q.dist2_to(&node[..d]) <= q.radius * q.radius) {
                count += 1;
            }
            let mut k = 0;
            loop {
                if k == d {
                    return count;
                }
                idx[k] += 1;
                if idx[k] <= hi[k] {
                    break;
                }
                idx[k] = lo[k];
                k += 1;
            }
        }
    }
}

/// A validated model ready for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    relation: Relation,
    alpha_bar: f64,
    locality: Locality,
    lattice: Option<AreaLattice>,
}

impl Model {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let ModelSpec { dim, marks, kind } = &spec;
        if *dim == 0 || *dim > MAX_DIM {
            return Err(invalid(format!("dimension {dim} outside 1..={MAX_DIM}")));
        }
        marks.validate()?;
        let alpha = kind.alpha();
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid(format!("alpha must be positive and finite, got {alpha}")));
        }
        let need = |want: MarkKind| -> Result<()> {
            if marks.kind == want {
                Ok(())
            } else {
                Err(Error::IncompatibleMark { model: kind.name(), found: marks.kind_name() })
            }
        };
        let check_beta = |beta: f64| -> Result<()> {
            if (0.0..=1.0).contains(&beta) {
                Ok(())
            } else {
                Err(invalid(format!("beta must lie in [0, 1], got {beta}")))
            }
        };
        let mut lattice = None;
        let (relation, alpha_bar, locality) = match *kind {
            ModelKind::Poisson { alpha } => (Relation::Range { r0: 0.0 }, alpha, Locality::Loc2),
            ModelKind::Strauss { alpha, beta } => {
                need(MarkKind::Radius)?;
                check_beta(beta)?;
                (Relation::BallsOverlap, alpha, Locality::Loc2)
            }
            ModelKind::Hardcore { alpha } => {
                need(MarkKind::Radius)?;
                (Relation::BallsOverlap, alpha, Locality::Loc2)
            }
            ModelKind::AreaInteraction { alpha, beta, nodes } => {
                need(MarkKind::Radius)?;
                check_beta(beta)?;
                let r1 = marks.law.min();
                if r1 <= 0.0 {
                    return Err(invalid("area interaction needs radii bounded below by a positive r1"));
                }
                if nodes < 16 {
                    return Err(invalid("area interaction needs at least 16 lattice nodes per ball"));
                }
                lattice = Some(AreaLattice::new(*dim, r1, nodes));
                (Relation::BallsOverlap, alpha, Locality::Loc2)
            }
            ModelKind::RandomCluster { alpha, q, alpha_bar } => {
                need(MarkKind::Radius)?;
                if !(q > 0.0 && q.is_finite()) {
                    return Err(invalid(format!("q must be positive, got {q}")));
                }
                let bar = if q >= 1.0 {
                    alpha * q
                } else {
                    if marks.law.min() <= 0.0 {
                        return Err(invalid("random cluster with q < 1 needs radii in [r1, r2] with r1 > 0"));
                    }
                    match alpha_bar {
                        Some(b) if b >= alpha * q && b.is_finite() => b,
                        Some(b) => return Err(invalid(format!("alpha_bar {b} is below alpha * q"))),
                        None => return Err(invalid("random cluster with q < 1 needs an explicit alpha_bar")),
                    }
                };
                (Relation::BallsOverlap, bar, Locality::Loc1)
            }
            ModelKind::WidomRowlinson { alpha } => {
                need(MarkKind::RadiusAndLabel)?;
                (Relation::BallsOverlapDistinctLabels, alpha, Locality::Loc2)
            }
            ModelKind::PairPotential { alpha, potential, r0 } => {
                if !(r0 > 0.0 && r0.is_finite()) {
                    return Err(invalid(format!("r0 must be positive and finite, got {r0}")));
                }
                let ok = match potential {
                    Potential::Step { height } => height >= 0.0,
                    Potential::Soft { strength } => strength >= 0.0 && strength.is_finite(),
                };
                if !ok {
                    return Err(invalid("pair potentials must be nonnegative"));
                }
                (Relation::Range { r0 }, alpha, Locality::Loc2)
            }
        };
        Ok(Model { spec, relation, alpha_bar, locality, lattice })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn kind(&self) -> &ModelKind {
        &self.spec.kind
    }

    /// `κ` with mark and dimension checks.
    pub fn kappa_checked(&self, p: &Point, cfg: &[Point]) -> Result<f64> {
        for q in std::iter::once(p).chain(cfg) {
            if q.dim() != self.spec.dim {
                return Err(Error::DimensionMismatch { expected: self.spec.dim, found: q.dim() });
            }
            if !self.spec.marks.admits(q) {
                return Err(Error::IncompatibleMark { model: self.kind().name(), found: "point mark" });
            }
        }
        Ok(self.kappa(p, cfg))
    }

    /// Same model with a different `β` (Strauss and area interaction).
    pub fn with_beta(&self, new_beta: f64) -> Result<Model> {
        let mut spec = self.spec.clone();
        match &mut spec.kind {
            ModelKind::Strauss { beta, .. } | ModelKind::AreaInteraction { beta, .. } => *beta = new_beta,
            _ => return Err(invalid("model has no beta parameter")),
        }
        Model::new(spec)
    }

    fn count_neighbors(&self, p: &Point, cfg: &[Point]) -> usize {
        cfg.iter().filter(|q| self.relation.related(p, q)).count()
    }

    /// Number of components of `cfg` that contain a neighbour of `p`.
    fn attached_components(&self, p: &Point, cfg: &[Point]) -> i32 {
        let rel = &self.relation;
        let mut seen = vec![false; cfg.len()];
        let mut k = 0;
        let mut stack = Vec::new();
        for i in 0..cfg.len() {
            if seen[i] || !rel.related(p, &cfg[i]) {
                continue;
            }
            k += 1;
            seen[i] = true;
            stack.push(i);
            while let Some(j) = stack.pop() {
                for (l, q) in cfg.iter().enumerate() {
                    if !seen[l] && rel.related(&cfg[j], q) {
                        seen[l] = true;
                        stack.push(l);
                    }
                }
            }
        }
        k
    }
}

impl TryFrom<ModelSpec> for Model {
    type Error = Error;
    fn try_from(spec: ModelSpec) -> Result<Self> {
        Model::new(spec)
    }
}

impl Intensity for Model {
    fn kappa(&self, p: &Point, cfg: &[Point]) -> f64 {
        let v = match self.spec.kind {
            ModelKind::Poisson { alpha } => alpha,
            ModelKind::Strauss { alpha, beta } => {
                let n = self.count_neighbors(p, cfg);
                if n == 0 {
                    alpha
                } else {
                    alpha * beta.powi(n as i32)
                }
            }
            ModelKind::Hardcore { alpha } | ModelKind::WidomRowlinson { alpha } => {
                if cfg.iter().any(|q| self.relation.related(p, q)) {
                    0.0
                } else {
                    alpha
                }
            }
            ModelKind::AreaInteraction { alpha, beta, .. } => {
                let lattice = self.lattice.as_ref().expect("area lattice");
                let cover: Vec<Point> = cfg.iter().filter(|q| self.relation.related(p, q)).copied().collect();
                let n = lattice.uncovered(p, &cover);
                if n == 0 || beta == 1.0 {
                    alpha
                } else if beta == 0.0 {
                    0.0
                } else {
                    alpha * (n as f64 * lattice.cell_volume * beta.ln()).exp()
                }
            }
            ModelKind::RandomCluster { alpha, q, .. } => alpha * q.powi(1 - self.attached_components(p, cfg)),
            ModelKind::PairPotential { alpha, potential, r0 } => {
                let mut u = 0.0;
                for q in cfg {
                    let t2 = p.dist2(q);
                    if t2 < r0 * r0 {
                        u += potential.value(t2.sqrt(), r0);
                    }
                }
                alpha * (-u).exp()
            }
        };
        debug_assert!(
            (0.0..=self.alpha_bar * (1.0 + 1e-12)).contains(&v),
            "kappa {v} outside [0, {}]",
            self.alpha_bar
        );
        v
    }

    fn alpha_bar(&self) -> f64 {
        self.alpha_bar
    }

    fn marks(&self) -> &MarkSpec {
        &self.spec.marks
    }

    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn relation(&self) -> Relation {
        self.relation
    }

    fn locality(&self) -> Locality {
        self.locality
    }

    fn name(&self) -> &str {
        self.spec.kind.name()
    }

    fn repulsive(&self) -> bool {
        matches!(
            self.spec.kind,
            ModelKind::Poisson { .. }
                | ModelKind::Strauss { .. }
                | ModelKind::Hardcore { .. }
                | ModelKind::WidomRowlinson { .. }
                | ModelKind::PairPotential { .. }
        )
    }

    fn constant(&self) -> Option<f64> {
        match self.spec.kind {
            ModelKind::Poisson { alpha } => Some(alpha),
            _ => None,
        }
    }
}

/// Reference models used by the validation suites: one per family on the
/// plane, all with `α = 2` and interaction distance `0.1`.
pub fn corpus() -> Vec<ModelSpec> {
    let disc = || MarkSpec::radius(RadiusLaw::PointMass { r: 0.05 }).expect("valid law");
    let spec = |marks: MarkSpec, kind: ModelKind| ModelSpec { dim: 2, marks, kind };
    vec![
        spec(MarkSpec::none(), ModelKind::Poisson { alpha: 2.0 }),
        spec(disc(), ModelKind::Strauss { alpha: 2.0, beta: 0.5 }),
        spec(disc(), ModelKind::Hardcore { alpha: 2.0 }),
        spec(
            MarkSpec::radius(RadiusLaw::Uniform { a: 0.04, b: 0.06 }).expect("valid law"),
            ModelKind::AreaInteraction { alpha: 2.0, beta: 0.5, nodes: 256 },
        ),
        spec(disc(), ModelKind::RandomCluster { alpha: 2.0, q: 2.0, alpha_bar: None }),
        spec(
            MarkSpec::radius_and_label(RadiusLaw::PointMass { r: 0.05 }, 2).expect("valid law"),
            ModelKind::WidomRowlinson { alpha: 2.0 },
        ),
        spec(
            MarkSpec::none(),
            ModelKind::PairPotential { alpha: 2.0, potential: Potential::Soft { strength: 1.0 }, r0: 0.1 },
        ),
    ]
}

/// Outcome of a randomized cocycle check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CocycleReport {
    pub trials: usize,
    pub max_violation: f64,
    pub failures: usize,
    pub tolerance: f64,
}

/// Samples `(x, y, μ)` on a window a few interaction ranges wide and
/// compares `κ(x,μ)κ(y,μ+δ_x)` with `κ(y,μ)κ(x,μ+δ_y)`.
pub fn check_cocycle<M: Intensity + ?Sized>(model: &M, trials: usize, tolerance: f64, seed: StreamSeed) -> CocycleReport {
    use rand::Rng;
    let reach = model.reach();
    let side = if reach > 0.0 { 3.0 * reach } else { 1.0 };
    let window = Window::cube(model.dim(), side).expect("positive side");
    let mut rng = seed.rng();
    let mut max_violation: f64 = 0.0;
    let mut failures = 0;
    let mut mu = Vec::new();
    for _ in 0..trials {
        mu.clear();
        let n = rng.random_range(0..12);
        for _ in 0..n {
            mu.push(sample_point(&mut rng, &window, model.marks()));
        }
        let x = sample_point(&mut rng, &window, model.marks());
        let y = sample_point(&mut rng, &window, model.marks());
        let lhs = kappa_m(model, &[x, y], &mu);
        let rhs = kappa_m(model, &[y, x], &mu);
        let scale = lhs.abs().max(rhs.abs());
        let v = if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale };
        max_violation = max_violation.max(v);
        if v > tolerance {
            failures += 1;
        }
    }
    CocycleReport { trials, max_violation, failures, tolerance }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RadiusLaw;

    fn strauss(alpha: f64, beta: f64, r: f64) -> Model {
        Model::new(ModelSpec {
            dim: 2,
            marks: MarkSpec::radius(RadiusLaw::PointMass { r }).unwrap(),
            kind: ModelKind::Strauss { alpha, beta },
        })
        .unwrap()
    }

    fn at(x: f64, y: f64, r: f64) -> Point {
        Point::new(&[x, y]).with_radius(r)
    }

    #[test]
    fn strauss_three_neighbors() {
        let m = strauss(2.0, 0.5, 0.05);
        let p = at(0.5, 0.5, 0.05);
        let cfg = vec![at(0.55, 0.5, 0.05), at(0.5, 0.45, 0.05), at(0.45, 0.52, 0.05), at(0.9, 0.9, 0.05)];
        // brute force count
        let n = cfg.iter().filter(|q| p.dist(q) <= 0.1).count();
        assert_eq!(n, 3);
        assert!((m.kappa(&p, &cfg) - 2.0 * 0.5f64.powi(n as i32)).abs() < 1e-15);
        let k2 = kappa_m(&m, &[p, cfg[0]], &[]);
        assert!((k2 - 4.0 * 0.5).abs() < 1e-15);
        assert_eq!(k2, kappa_m(&m, &[cfg[0], p], &[]));
    }

    #[test]
    fn hardcore_overlap_is_zero() {
        let m = Model::new(ModelSpec {
            dim: 2,
            marks: MarkSpec::radius(RadiusLaw::PointMass { r: 0.05 }).unwrap(),
            kind: ModelKind::Hardcore { alpha: 2.0 },
        })
        .unwrap();
        assert_eq!(m.kappa(&at(0.5, 0.5, 0.05), &[at(0.55, 0.5, 0.05)]), 0.0);
        assert_eq!(m.kappa(&at(0.5, 0.5, 0.05), &[at(0.75, 0.5, 0.05)]), 2.0);
    }

    #[test]
    fn mark_mismatch_rejected() {
        let err = Model::new(ModelSpec { dim: 2, marks: MarkSpec::none(), kind: ModelKind::Strauss { alpha: 1.0, beta: 0.5 } });
        assert!(matches!(err, Err(Error::IncompatibleMark { .. })));
        let neg = Model::new(ModelSpec {
            dim: 2,
            marks: MarkSpec::radius(RadiusLaw::PointMass { r: 0.05 }).unwrap(),
            kind: ModelKind::Strauss { alpha: 1.0, beta: -0.5 },
        });
        assert!(matches!(neg, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn random_cluster_counts_components() {
        let m = Model::new(ModelSpec {
            dim: 2,
            marks: MarkSpec::radius(RadiusLaw::PointMass { r: 0.1 }).unwrap(),
            kind: ModelKind::RandomCluster { alpha: 1.0, q: 2.0, alpha_bar: None },
        })
        .unwrap();
        let x = at(0.0, 0.0, 0.1);
        assert_eq!(m.kappa(&x, &[]), 2.0);
        // two separate components both touching x
        let cfg = [at(0.15, 0.0, 0.1), at(-0.15, 0.0, 0.1)];
        assert_eq!(m.kappa(&x, &cfg), 0.5);
        // joined through a third point: one component
        let joined = [at(0.15, 0.0, 0.1), at(-0.15, 0.0, 0.1), at(0.0, 0.12, 0.1)];
        assert_eq!(m.kappa(&x, &joined), 1.0);
    }

    #[test]
    fn area_lattice_counts_ball_volume() {
        let m = Model::new(ModelSpec {
            dim: 2,
            marks: MarkSpec::radius(RadiusLaw::PointMass { r: 0.1 }).unwrap(),
            kind: ModelKind::AreaInteraction { alpha: 1.0, beta: 0.5, nodes: 4096 },
        })
        .unwrap();
        let lat = m.lattice.as_ref().unwrap();
        let p = at(0.3, 0.7, 0.1);
        let v = lat.uncovered(&p, &[]) as f64 * lat.cell_volume;
        assert!((v - std::f64::consts::PI * 0.01).abs() < 0.02 * std::f64::consts::PI * 0.01);
        let same = at(0.3, 0.7, 0.1);
        assert_eq!(lat.uncovered(&p, &[same]), 0);
    }

    #[test]
    fn cocycle_poisson_and_strauss() {
        let p = Model::new(ModelSpec { dim: 2, marks: MarkSpec::none(), kind: ModelKind::Poisson { alpha: 3.0 } }).unwrap();
        assert_eq!(check_cocycle(&p, 1000, 1e-12, StreamSeed::new(1)).max_violation, 0.0);
        let s = strauss(2.0, 0.5, 0.05);
        let rep = check_cocycle(&s, 2000, 1e-12, StreamSeed::new(2));
        assert_eq!(rep.failures, 0);
    }
}
