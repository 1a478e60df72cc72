//! Disagreement coupling of two boundary conditions.
//!
//! Stage `n` runs the embedding for both chains on `W \ W_{n-1}` from the
//! same driving points, with the layer `Y_n` scanned before the rest. Only
//! the part in `Y_n` is kept. The next layer collects the remaining points
//! related to what either chain just accepted; once a layer stays empty in
//! both chains the rest of the window is no longer related to anything the
//! chains disagree on, and it is sampled once and shared.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Point, Window};
use crate::gibbs::RetentionConfig;
use crate::models::Intensity;
use crate::rng::StreamSeed;
use crate::samplers::{embed_in, sample_driving, DrivingProcess};
use crate::space::{component_labels, Layering, PointConfig, Relation};

/// Layering of stage `n`: points of earlier layers are inactive, `Y_n` is
/// layer 0 and the rest of the window layer 1.
pub struct StageLayering<'a> {
    relation: Relation,
    /// Seeds of `Y_1, ..., Y_{n-1}`.
    earlier: &'a [Vec<Point>],
    /// Seeds of `Y_n`, or `None` when `Y_n` is the whole remainder.
    current: Option<&'a [Point]>,
}

impl StageLayering<'_> {
    fn in_earlier(&self, p: &Point) -> bool {
        self.earlier.iter().any(|s| self.relation.related_to_any(p, s))
    }
}

impl Layering for StageLayering<'_> {
    fn layer(&self, p: &Point) -> Option<u32> {
        if self.in_earlier(p) {
            return None;
        }
        match self.current {
            None => Some(0),
            Some(seeds) if self.relation.related_to_any(p, seeds) => Some(0),
            Some(_) => Some(1),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LayerRecord {
    pub stage: usize,
    /// Points whose neighbourhood defines `Y_n`; empty for the final stage.
    pub seeds: Vec<Point>,
    /// `Y_n` is everything not yet covered.
    pub remainder: bool,
    /// Driving points inside `Y_n`.
    pub driving_points: usize,
    pub xi: PointConfig,
    pub xi_prime: PointConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingResult {
    pub xi: PointConfig,
    pub xi_prime: PointConfig,
    /// Support of `|ξ - ξ'|`.
    pub disagreement: PointConfig,
    pub layers: Vec<LayerRecord>,
    pub driving: DrivingProcess,
    /// First stage whose layer stayed empty in both chains.
    pub terminated_at: usize,
    pub psi: PointConfig,
    pub psi_prime: PointConfig,
    /// Retention estimates that hit their sample cap.
    pub capped: usize,
}

/// Couples `Gibbs(κ_{W,ψ})` and `Gibbs(κ_{W,ψ'})` through one driving process.
pub fn disagreement_couple<M: Intensity + ?Sized>(
    model: &M,
    window: &Window,
    psi: &PointConfig,
    psi_prime: &PointConfig,
    opts: &RetentionConfig,
    seed: StreamSeed,
) -> Result<CouplingResult> {
    let driving = sample_driving(window, model.marks(), model.alpha_bar(), seed);
    couple_on(model, driving, psi, psi_prime, opts)
}

/// Coupling on a given driving process.
pub fn couple_on<M: Intensity + ?Sized>(
    model: &M,
    driving: DrivingProcess,
    psi: &PointConfig,
    psi_prime: &PointConfig,
    opts: &RetentionConfig,
) -> Result<CouplingResult> {
    if !model.locality().is_cluster_local() {
        return Err(Error::NotClusterLocal);
    }
    let window = *driving.window();
    if let Some(p) = psi.iter().chain(psi_prime.iter()).find(|p| window.contains(p.loc())) {
        return Err(Error::InvalidParameter(format!("boundary point {p:?} lies inside the window")));
    }
    let rel = model.relation();
    let limit = driving.len() + 2;
    let mut earlier: Vec<Vec<Point>> = Vec::new();
    let mut seeds: Option<Vec<Point>> = Some(psi.union(psi_prime).into_points());
    let mut bound_a: Vec<Point> = psi.points().to_vec();
    let mut bound_b: Vec<Point> = psi_prime.points().to_vec();
    let mut xi: Vec<Point> = Vec::new();
    let mut xi_prime: Vec<Point> = Vec::new();
    let mut layers = Vec::new();
    let mut terminated_at = 0;
    let mut capped = 0;
    for stage in 1.. {
        if stage > limit {
            return Err(Error::LayerOverflow { limit });
        }
        let layering = StageLayering { relation: rel, earlier: &earlier, current: seeds.as_deref() };
        let in_layer = driving.entries().iter().filter(|e| layering.layer(&e.point) == Some(0)).count();
        if seeds.is_none() {
            // nothing left here is related to a point where the chains differ
            let tr = embed_in(model, &driving, &bound_a, &layering, None, opts);
            capped += tr.capped;
            xi.extend_from_slice(tr.accepted.points());
            xi_prime.extend_from_slice(tr.accepted.points());
            layers.push(LayerRecord {
                stage,
                seeds: Vec::new(),
                remainder: true,
                driving_points: in_layer,
                xi: tr.accepted.clone(),
                xi_prime: tr.accepted,
            });
            break;
        }
        let (a, b) = if in_layer == 0 {
            (PointConfig::empty(), PointConfig::empty())
        } else {
            let ta = embed_in(model, &driving, &bound_a, &layering, Some(0), opts);
            let tb = embed_in(model, &driving, &bound_b, &layering, Some(0), opts);
            capped += ta.capped + tb.capped;
            (ta.accepted, tb.accepted)
        };
        let current = seeds.take().unwrap_or_default();
        let next = a.union(&b);
        if next.is_empty() && terminated_at == 0 {
            terminated_at = stage;
        }
        bound_a.extend_from_slice(a.points());
        bound_b.extend_from_slice(b.points());
        xi.extend_from_slice(a.points());
        xi_prime.extend_from_slice(b.points());
        layers.push(LayerRecord { stage, seeds: current.clone(), remainder: false, driving_points: in_layer, xi: a, xi_prime: b });
        earlier.push(current);
        seeds = if next.is_empty() { None } else { Some(next.into_points()) };
    }
    let xi = PointConfig::from_distinct(xi);
    let xi_prime = PointConfig::from_distinct(xi_prime);
    let disagreement = xi.symmetric_difference(&xi_prime);
    Ok(CouplingResult {
        xi,
        xi_prime,
        disagreement,
        layers,
        driving,
        terminated_at,
        psi: psi.clone(),
        psi_prime: psi_prime.clone(),
        capped,
    })
}

/// Recomputes the relation graph on `ξ + ξ' + ψ + ψ'` and checks that the
/// component of every disagreement point contains a boundary point.
pub fn certify_disagreement(res: &CouplingResult, rel: &Relation, reach: f64) -> bool {
    if res.disagreement.is_empty() {
        return true;
    }
    let boundary = res.psi.union(&res.psi_prime);
    let all = res.xi.union(&res.xi_prime).union(&boundary);
    let pts = all.points();
    let labels = component_labels(pts, rel, reach);
    let mut touching = std::collections::HashSet::new();
    for (i, p) in pts.iter().enumerate() {
        if boundary.contains(p) {
            touching.insert(labels[i]);
        }
    }
    res.disagreement.iter().all(|d| {
        let i = pts.binary_search_by(|q| q.total_cmp(d)).expect("disagreement point present");
        touching.contains(&labels[i])
    })
}

/// Checks `supp(ξ + ξ') ⊆ supp(driving)`.
pub fn dominated(res: &CouplingResult) -> bool {
    let support = res.driving.support();
    res.xi.iter().chain(res.xi_prime.iter()).all(|p| support.contains(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{MarkSpec, RadiusLaw};
    use crate::models::{Model, ModelKind, ModelSpec};

    fn hardcore() -> Model {
        Model::new(ModelSpec {
            dim: 2,
            marks: MarkSpec::radius(RadiusLaw::PointMass { r: 0.25 }).unwrap(),
            kind: ModelKind::Hardcore { alpha: 1.0 },
        })
        .unwrap()
    }

    fn opts() -> RetentionConfig {
        RetentionConfig { n_z: 256, ..Default::default() }
    }

    #[test]
    fn equal_boundaries_agree() {
        let m = hardcore();
        let w = Window::new(&[0.0, 0.0], &[3.0, 1.0]).unwrap();
        let psi = PointConfig::new(vec![Point::new(&[-0.1, 0.5]).with_radius(0.25)]).unwrap();
        for s in 0..10 {
            let r = disagreement_couple(&m, &w, &psi, &psi, &opts(), StreamSeed::new(s)).unwrap();
            assert!(r.disagreement.is_empty());
            assert_eq!(r.xi, r.xi_prime);
        }
    }

    #[test]
    fn far_boundary_point_changes_nothing() {
        let m = hardcore();
        let w = Window::new(&[0.0, 0.0], &[3.0, 1.0]).unwrap();
        let psi = PointConfig::new(vec![Point::new(&[-0.1, 0.5]).with_radius(0.25)]).unwrap();
        let psi2 = psi.union(&PointConfig::new(vec![Point::new(&[10.0, 10.0]).with_radius(0.25)]).unwrap());
        for s in 0..10 {
            let r = disagreement_couple(&m, &w, &psi, &psi2, &opts(), StreamSeed::new(s)).unwrap();
            assert!(r.disagreement.is_empty());
        }
    }

    #[test]
    fn coupling_certifies() {
        let m = hardcore();
        let w = Window::new(&[0.0, 0.0], &[3.0, 1.0]).unwrap();
        let psi = PointConfig::new(vec![Point::new(&[-0.1, 0.5]).with_radius(0.25)]).unwrap();
        let empty = PointConfig::empty();
        for s in 0..20 {
            let r = disagreement_couple(&m, &w, &psi, &empty, &opts(), StreamSeed::new(s)).unwrap();
            assert!(certify_disagreement(&r, &m.relation(), m.reach()));
            assert!(dominated(&r));
        }
    }

    #[test]
    fn isolated_disagreement_fails_certification() {
        let m = hardcore();
        let w = Window::new(&[0.0, 0.0], &[3.0, 1.0]).unwrap();
        let mut r = disagreement_couple(&m, &w, &PointConfig::empty(), &PointConfig::empty(), &opts(), StreamSeed::new(1)).unwrap();
        let lonely = Point::new(&[2.5, 0.5]).with_radius(0.25);
        r.xi = PointConfig::new(vec![lonely]).unwrap();
        r.xi_prime = PointConfig::empty();
        r.disagreement = r.xi.clone();
        assert!(!certify_disagreement(&r, &m.relation(), m.reach()));
    }
}
