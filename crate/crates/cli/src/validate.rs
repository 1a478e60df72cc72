//! Corpus-wide self-check: deterministic invariants plus statistical
//! identities, with a Bonferroni-corrected threshold on the latter.

use gibbs_forge::coupling::{certify_disagreement, disagreement_couple, dominated};
use gibbs_forge::diagnostics::{empty_space_bounds, gnz_test, one_arm, EmptySpaceBudget, TestFunction};
use gibbs_forge::geometry::sample_point;
use gibbs_forge::gibbs::{exponential_identity, RetentionConfig, SeriesBudget};
use gibbs_forge::models::{check_cocycle, corpus, Intensity, Model, ModelKind, ModelSpec};
use gibbs_forge::rng::map_replicates;
use gibbs_forge::samplers::{kernel_mass, Sampler, SamplerOptions};
use gibbs_forge::stats::normal_quantile;
use gibbs_forge::{MarkSpec, Point, PointConfig, RadiusLaw, Relation, StreamSeed, Window};
use rand::Rng;
use serde::Serialize;

use crate::{CliError, Clock};

/// Family-wise error rate for the statistical rows.
pub const FAMILY_LEVEL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Exact,
    Statistical,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub kind: Kind,
    pub statistic: f64,
    /// Exact rows pass when `statistic <= threshold`; statistical rows
    /// when `|statistic| <= threshold`.
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Validation {
    pub rows: Vec<CheckRow>,
    pub partial: bool,
}

impl Validation {
    fn exact(&mut self, check: String, statistic: f64, threshold: f64) {
        let pass = statistic <= threshold;
        self.rows.push(CheckRow { check, kind: Kind::Exact, statistic, threshold, pass });
    }

    fn stat(&mut self, check: String, z: f64) {
        self.rows.push(CheckRow { check, kind: Kind::Statistical, statistic: z, threshold: f64::NAN, pass: false });
    }

    fn finish(&mut self) {
        let m = self.rows.iter().filter(|r| r.kind == Kind::Statistical).count().max(1);
        let q = normal_quantile(1.0 - FAMILY_LEVEL / (2.0 * m as f64));
        for r in self.rows.iter_mut().filter(|r| r.kind == Kind::Statistical) {
            r.threshold = q;
            r.pass = r.statistic.abs() <= q;
        }
    }
}

fn scaled(base: usize, scale: f64) -> usize {
    ((base as f64 * scale).round() as usize).max(1)
}

fn line_strauss() -> Model {
    Model::new(ModelSpec {
        dim: 1,
        marks: MarkSpec::radius(RadiusLaw::PointMass { r: 0.1 }).expect("valid law"),
        kind: ModelKind::Strauss { alpha: 1.0, beta: 0.3 },
    })
    .expect("valid model")
}

/// Runs every check; the clock is consulted between groups.
pub fn validate_corpus(seed: u64, scale: f64, clock: &Clock) -> Result<Validation, CliError> {
    let root = StreamSeed::new(seed);
    let models: Vec<Model> = corpus().into_iter().map(Model::new).collect::<Result<_, _>>()?;
    let mut v = Validation::default();
    let unit = Window::unit(2);

    for (i, m) in models.iter().enumerate() {
        let tol = if matches!(m.kind(), ModelKind::AreaInteraction { .. }) { 1e-6 } else { 1e-12 };
        let r = check_cocycle(m, scaled(1000, scale), tol, root.path(&[1, i as u64]));
        v.exact(format!("cocycle/{}", m.name()), r.max_violation, tol);
    }

    let line = line_strauss();
    let lw = Window::unit(1);
    let budget = SeriesBudget { nodes: 128, shifts: 2, tail: 1e-8 };
    let mut rng = root.child(2).rng();
    let mut worst: f64 = 0.0;
    for s in 0..scaled(10, scale) {
        let n = rng.random_range(0..=4);
        let mu: Vec<Point> = (0..n).map(|_| sample_point(&mut rng, &lw, line.marks())).collect();
        let k = kernel_mass(&line, &lw, &mu, &[], budget, root.path(&[3, s as u64]))?;
        worst = worst.max((k - 1.0).abs());
    }
    v.exact("kernel_mass/strauss_1d".into(), worst, 1e-9);

    let cfg = RetentionConfig { n_z: 512, ..Default::default() };
    let psi = PointConfig::new(vec![Point::new(&[-0.04, 0.5]).with_radius(0.05), Point::new(&[0.5, 1.03]).with_radius(0.05)])?;
    for i in [1usize, 2] {
        let m = &models[i];
        let bad: usize = map_replicates(scaled(100, scale), |s| {
            match disagreement_couple(m, &unit, &psi, &PointConfig::empty(), &cfg, root.path(&[4, i as u64, s])) {
                Ok(r) => usize::from(!(certify_disagreement(&r, &m.relation(), m.reach()) && dominated(&r))),
                Err(_) => 1,
            }
        })
        .into_iter()
        .sum();
        v.exact(format!("coupling/{}", m.name()), bad as f64, 0.0);
    }

    let region = Window::new(&[0.3, 0.3], &[0.7, 0.7])?;
    let es = EmptySpaceBudget { replicates: scaled(2000, scale), ..Default::default() };
    let p = empty_space_bounds(&models[0], &unit, &region, &PointConfig::empty(), &es, root.child(5))?;
    let exact = (-2.0f64 * region.volume()).exp();
    let gap = (p.lower - exact).abs().max((p.upper - exact).abs()).max((p.identity - exact).abs());
    v.exact("empty_space/poisson_closed_form".into(), gap, 1e-9);

    if clock.expired() {
        v.partial = true;
        v.finish();
        return Ok(v);
    }

    let a = Window::new(&[0.1, 0.1], &[0.9, 0.9])?;
    let functions = [TestFunction::Indicator { a }, TestFunction::Contact { a, radius: 0.1 }];
    let opts = SamplerOptions::default();
    for (i, m) in models.iter().enumerate() {
        if clock.expired() {
            v.partial = true;
            break;
        }
        for (j, f) in functions.iter().enumerate() {
            let r = gnz_test(m, m, Sampler::Rejection, &opts, &unit, &[], f, scaled(2000, scale), 32, root.path(&[6, i as u64, j as u64]))?;
            v.stat(format!("gnz/{}/{}", m.name(), f.id()), r.z);
        }
    }

    let psi1 = PointConfig::new(vec![Point::new(&[0.3]).with_radius(0.1), Point::new(&[0.7]).with_radius(0.1)])?;
    let c = exponential_identity(&line, &lw, &psi1, 256, 16, &RetentionConfig { n_z: 1024, ..Default::default() }, SeriesBudget::default(), root.child(7))?;
    v.stat("identity/strauss_1d".into(), c.z);

    let near = PointConfig::new(vec![Point::new(&[0.27, 0.5]).with_radius(0.05)])?;
    for i in [1usize, 2] {
        let r = empty_space_bounds(&models[i], &unit, &region, &near, &es, root.path(&[8, i as u64]))?;
        let lo = (r.lower - r.mc.estimate) / r.mc.std_error.max(1e-300);
        let hi = (r.mc.estimate - r.upper) / (r.mc.std_error.powi(2) + r.upper_se.powi(2)).sqrt().max(1e-300);
        v.stat(format!("sandwich/{}", models[i].name()), lo.max(hi).max(0.0));
    }

    let marks = MarkSpec::radius(RadiusLaw::PointMass { r: 0.5 })?;
    let g = one_arm(&Relation::BallsOverlap, &marks, 2, 0.3 / std::f64::consts::PI, &[0.5, 1.0], &[0.5, 1.5], scaled(5000, scale), root.child(9))?;
    for c in &g.cells {
        let excess = (c.arm.estimate - c.bound) / (c.arm.std_error.powi(2) + c.bound_se.powi(2)).sqrt().max(1e-300);
        v.stat(format!("one_arm/u{}_v{}", c.u, c.v), excess.max(0.0));
    }

    v.finish();
    Ok(v)
}
