//! The driving Poisson process, the Poisson embedding and sequential kernel
//! thinning.
//!
//! Both constructive samplers are ordered scans. The embedding keeps a
//! driving point `(x, t)` iff `t <= p(x, accepted so far)`. Because
//! `p(x, μ)` only looks at points of `μ` below `x`, a single pass in
//! increasing key order gives the same set as the recursive definition
//! through successive minima.

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::geometry::{sample_point, Point, Window};
use crate::gibbs::{rejection_sample, retention_p, retention_p_series, OrderInterval, RejectionOptions, RetentionConfig, SeriesBudget};
use crate::models::Intensity;
use crate::rng::{poisson, tags, StreamSeed};
use crate::space::{KeyMap, Layering, PointConfig, WholeWindow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DrivingEntry {
    pub point: Point,
    /// Height in `[0, ᾱ]`.
    pub t: f64,
    /// Rank in the base order; names the retention stream of this point.
    pub index: u32,
}

/// A realization of the dominating Poisson process on `W × marks × [0, ᾱ]`.
#[derive(Debug, Clone, Serialize)]
pub struct DrivingProcess {
    entries: Vec<DrivingEntry>,
    window: Window,
    alpha_bar: f64,
    #[serde(serialize_with = "ser_seed")]
    seed: StreamSeed,
    #[serde(skip)]
    keymap: KeyMap,
}

fn ser_seed<S: serde::Serializer>(s: &StreamSeed, ser: S) -> std::result::Result<S::Ok, S::Error> {
    ser.serialize_u64(s.raw())
}

impl DrivingProcess {
    pub fn entries(&self) -> &[DrivingEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn alpha_bar(&self) -> f64 {
        self.alpha_bar
    }

    pub fn keymap(&self) -> &KeyMap {
        &self.keymap
    }

    pub fn seed(&self) -> StreamSeed {
        self.seed
    }

    /// Driving points with `t <= ᾱ`, i.e. the dominating Poisson process.
    pub fn support(&self) -> PointConfig {
        PointConfig::from_distinct(self.entries.iter().map(|e| e.point).collect())
    }

    /// Driving process built from explicit entries (sorted here).
    pub fn from_entries(
        points: Vec<(Point, f64)>,
        window: Window,
        marks: crate::geometry::MarkSpec,
        alpha_bar: f64,
        seed: StreamSeed,
    ) -> Result<Self> {
        if points.iter().any(|(_, t)| !(0.0..=alpha_bar).contains(t)) {
            return Err(invalid("driving heights must lie in [0, alpha_bar]"));
        }
        let keymap = KeyMap::new(window, marks);
        let mut keyed: Vec<_> = points.into_iter().map(|(p, t)| (keymap.key(&p, 0), p, t)).collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        let entries = keyed
            .into_iter()
            .enumerate()
            .map(|(i, (_, point, t))| DrivingEntry { point, t, index: i as u32 })
            .collect();
        Ok(DrivingProcess { entries, window, alpha_bar, seed, keymap })
    }
}

/// `N ~ Poisson(ᾱλ(W))` uniform points with marks and heights `U[0, ᾱ]`.
pub fn sample_driving(window: &Window, marks: &crate::geometry::MarkSpec, alpha_bar: f64, seed: StreamSeed) -> DrivingProcess {
    let mut rng = seed.child(tags::DRIVING).rng();
    let n = poisson(&mut rng, alpha_bar * window.volume());
    let pts = (0..n)
        .map(|_| {
            let p = sample_point(&mut rng, window, marks);
            (p, rng.random::<f64>() * alpha_bar)
        })
        .collect();
    DrivingProcess::from_entries(pts, *window, marks.clone(), alpha_bar, seed).expect("heights in range")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decision {
    pub index: u32,
    pub layer: u32,
    pub t: f64,
    /// Estimated retention probability; `None` when the decision followed
    /// from `t > κ(x, ψ_x)` for a repulsive model.
    pub p_hat: Option<f64>,
    pub std_error: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbedTrace {
    pub accepted: PointConfig,
    pub decisions: Vec<Decision>,
    /// Retention estimates that hit the sample cap.
    pub capped: usize,
}

/// Sampler tuning shared by the constructive samplers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SamplerOptions {
    pub retention: RetentionConfig,
    pub rejection: RejectionOptions,
}

/// Scans `(point, height, stream index)` triples in key order and keeps a
/// point iff `height <= p̂`.
#[allow(clippy::too_many_arguments)]
fn scan<M: Intensity + ?Sized>(
    model: &M,
    keymap: &KeyMap,
    items: &[(Point, f64, u32)],
    boundary: &[Point],
    layering: &dyn Layering,
    stop_after_layer: Option<u32>,
    opts: &RetentionConfig,
    seed: StreamSeed,
) -> EmbedTrace {
    let mut keyed: Vec<_> = items
        .iter()
        .filter_map(|&(p, t, i)| layering.layer(&p).map(|l| (keymap.key(&p, l), p, t, i)))
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    let mut below: Vec<Point> = boundary.to_vec();
    let mut accepted = Vec::new();
    let mut decisions = Vec::with_capacity(keyed.len());
    let mut capped = 0;
    for (key, x, t, index) in keyed {
        if stop_after_layer.is_some_and(|l| key.layer > l) {
            break;
        }
        let (p_hat, se, keep) = if model.repulsive() && t > model.kappa(&x, &below) {
            (None, 0.0, false)
        } else {
            let region = OrderInterval::new(keymap, layering, key);
            let est = retention_p(model, &x, &below, &region, opts, seed.path(&[tags::RETENTION, index as u64]));
            capped += est.capped as usize;
            (Some(est.value), est.std_error, t <= est.value)
        };
        decisions.push(Decision { index, layer: key.layer, t, p_hat, std_error: se, accepted: keep });
        if keep {
            below.push(x);
            accepted.push(x);
        }
    }
    EmbedTrace { accepted: PointConfig::from_distinct(accepted), decisions, capped }
}

/// Poisson embedding on the whole window.
pub fn embed<M: Intensity + ?Sized>(
    model: &M,
    driving: &DrivingProcess,
    boundary: &[Point],
    opts: &RetentionConfig,
) -> EmbedTrace {
    embed_in(model, driving, boundary, &WholeWindow, None, opts)
}

/// Poisson embedding on the part of the window with a layer, scanning
/// layers in increasing order. With `stop_after_layer` the scan ends once
/// that layer is finished; decisions in earlier layers do not depend on
/// later ones.
pub fn embed_in<M: Intensity + ?Sized>(
    model: &M,
    driving: &DrivingProcess,
    boundary: &[Point],
    layering: &dyn Layering,
    stop_after_layer: Option<u32>,
    opts: &RetentionConfig,
) -> EmbedTrace {
    let items: Vec<_> = driving.entries.iter().map(|e| (e.point, e.t, e.index)).collect();
    scan(model, &driving.keymap, &items, boundary, layering, stop_after_layer, opts, driving.seed)
}

/// Sequential kernel thinning of a proposal: keep `x` with probability
/// `p̂(x, kept so far) / ᾱ`.
pub fn kernel_thin<M: Intensity + ?Sized>(
    model: &M,
    window: &Window,
    proposal: &[Point],
    boundary: &[Point],
    opts: &RetentionConfig,
    seed: StreamSeed,
) -> PointConfig {
    let keymap = KeyMap::new(*window, model.marks().clone());
    let mut order: Vec<_> = proposal.iter().map(|p| (keymap.key(p, 0), *p)).collect();
    order.sort_by(|a, b| a.0.cmp(&b.0));
    let items: Vec<_> = order
        .iter()
        .enumerate()
        .map(|(i, (_, p))| {
            let u: f64 = seed.path(&[tags::THINNING, i as u64]).rng().random();
            (*p, u * model.alpha_bar(), i as u32)
        })
        .collect();
    scan(model, &keymap, &items, boundary, &WholeWindow, None, opts, seed).accepted
}

/// `K(μ, N*)`: the kernel weights of every `ψ ≤ μ`, summed. Retention
/// values come from series partition functions, one per `(x, ψ_x)`.
pub fn kernel_mass<M: Intensity + ?Sized>(
    model: &M,
    window: &Window,
    mu: &[Point],
    boundary: &[Point],
    budget: SeriesBudget,
    seed: StreamSeed,
) -> Result<f64> {
    if mu.len() > 16 {
        return Err(invalid("kernel enumeration is limited to 16 points"));
    }
    let keymap = KeyMap::new(*window, model.marks().clone());
    let mut order: Vec<_> = mu.iter().map(|p| (keymap.key(p, 0), *p)).collect();
    order.sort_by(|a, b| a.0.cmp(&b.0));
    let m = order.len();
    let bar = model.alpha_bar();
    let mut memo = std::collections::HashMap::new();
    let mut p = |i: usize, below_mask: u32| -> f64 {
        *memo.entry((i, below_mask)).or_insert_with(|| {
            let mut below = boundary.to_vec();
            below.extend((0..i).filter(|j| below_mask >> j & 1 == 1).map(|j| order[j].1));
            let region = OrderInterval::new(&keymap, &WholeWindow, order[i].0);
            retention_p_series(model, &order[i].1, &below, &region, budget, seed.path(&[i as u64, below_mask as u64])).0
        })
    };
    let mut total = 0.0;
    for mask in 0..(1u32 << m) {
        let mut w = 1.0;
        for i in 0..m {
            let q = p(i, mask & ((1 << i) - 1)) / bar;
            w *= if mask >> i & 1 == 1 { q } else { 1.0 - q };
        }
        total += w;
    }
    Ok(total)
}

/// Draws a `Poisson(ᾱλ_W)` proposal.
pub fn sample_proposal<M: Intensity + ?Sized>(model: &M, window: &Window, seed: StreamSeed) -> Vec<Point> {
    let mut rng = seed.child(tags::PROPOSAL).rng();
    let n = poisson(&mut rng, model.alpha_bar() * window.volume());
    (0..n).map(|_| sample_point(&mut rng, window, model.marks())).collect()
}

/// Two embeddings driven by one Poisson process.
pub fn joint_dominated_pair<A: Intensity + ?Sized, B: Intensity + ?Sized>(
    model_a: &A,
    model_b: &B,
    window: &Window,
    boundary_a: &[Point],
    boundary_b: &[Point],
    opts: &RetentionConfig,
    seed: StreamSeed,
) -> Result<(PointConfig, PointConfig, DrivingProcess)> {
    if model_a.alpha_bar() != model_b.alpha_bar() {
        return Err(invalid("jointly driven models need the same alpha_bar"));
    }
    if model_a.marks() != model_b.marks() {
        return Err(invalid("jointly driven models need the same mark space"));
    }
    let driving = sample_driving(window, model_a.marks(), model_a.alpha_bar(), seed);
    let a = embed(model_a, &driving, boundary_a, opts).accepted;
    let b = embed(model_b, &driving, boundary_b, opts).accepted;
    Ok((a, b, driving))
}

/// The three samplers of a finite Gibbs process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    Rejection,
    KernelThin,
    Embed,
}

impl Sampler {
    pub const ALL: [Sampler; 3] = [Sampler::Rejection, Sampler::KernelThin, Sampler::Embed];

    pub fn name(self) -> &'static str {
        match self {
            Sampler::Rejection => "rejection",
            Sampler::KernelThin => "kernel_thin",
            Sampler::Embed => "embed",
        }
    }

    /// One draw of the Gibbs process on `window` with boundary `boundary`.
    pub fn sample<M: Intensity + ?Sized>(
        self,
        model: &M,
        window: &Window,
        boundary: &[Point],
        opts: &SamplerOptions,
        seed: StreamSeed,
    ) -> Result<PointConfig> {
        match self {
            Sampler::Rejection => rejection_sample(model, window, boundary, opts.rejection, seed).map(|r| r.0),
            Sampler::KernelThin => {
                let proposal = sample_proposal(model, window, seed);
                Ok(kernel_thin(model, window, &proposal, boundary, &opts.retention, seed))
            }
            Sampler::Embed => {
                let driving = sample_driving(window, model.marks(), model.alpha_bar(), seed);
                Ok(embed(model, &driving, boundary, &opts.retention).accepted)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{MarkSpec, RadiusLaw};
    use crate::models::{Model, ModelKind, ModelSpec};

    fn hardcore() -> Model {
        Model::new(ModelSpec {
            dim: 2,
            marks: MarkSpec::radius(RadiusLaw::PointMass { r: 0.05 }).unwrap(),
            kind: ModelKind::Hardcore { alpha: 2.0 },
        })
        .unwrap()
    }

    #[test]
    fn driving_is_deterministic_and_sorted() {
        let w = Window::unit(2);
        let a = sample_driving(&w, &MarkSpec::none(), 3.0, StreamSeed::new(4));
        let b = sample_driving(&w, &MarkSpec::none(), 3.0, StreamSeed::new(4));
        assert_eq!(a.entries, b.entries);
        let km = a.keymap();
        for pair in a.entries.windows(2) {
            assert!(km.key(&pair[0].point, 0) < km.key(&pair[1].point, 0));
        }
        assert!(a.entries.iter().all(|e| (0.0..=3.0).contains(&e.t)));
    }

    #[test]
    fn poisson_embedding_is_independent_thinning() {
        let m = Model::new(ModelSpec { dim: 2, marks: MarkSpec::none(), kind: ModelKind::Poisson { alpha: 1.0 } }).unwrap();
        let w = Window::unit(2);
        let d = DrivingProcess::from_entries(
            vec![(Point::new(&[0.2, 0.2]), 0.5), (Point::new(&[0.6, 0.3]), 1.5), (Point::new(&[0.9, 0.9]), 0.99)],
            w,
            MarkSpec::none(),
            2.0,
            StreamSeed::new(1),
        )
        .unwrap();
        let tr = embed(&m, &d, &[], &RetentionConfig::default());
        assert_eq!(tr.accepted.len(), 2);
        assert!(!tr.accepted.contains(&Point::new(&[0.6, 0.3])));
    }

    #[test]
    fn hardcore_embedding_has_no_overlaps() {
        let m = hardcore();
        let w = Window::unit(2);
        for s in 0..30 {
            let d = sample_driving(&w, m.marks(), 2.0, StreamSeed::new(s));
            let tr = embed(&m, &d, &[], &RetentionConfig { n_z: 512, ..Default::default() });
            let pts = tr.accepted.points();
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    assert!(pts[i].dist(&pts[j]) > 0.1);
                }
            }
            let support = d.support();
            assert!(pts.iter().all(|p| support.contains(p)));
        }
    }

    #[test]
    fn identical_inputs_identical_outputs() {
        let m = hardcore();
        let w = Window::unit(2);
        let (a, b, _) = joint_dominated_pair(&m, &m, &w, &[], &[], &RetentionConfig { n_z: 256, ..Default::default() }, StreamSeed::new(9)).unwrap();
        assert_eq!(a, b);
    }
}
