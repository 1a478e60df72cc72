use gibbs_forge::geometry::sample_point;
use gibbs_forge::models::{check_cocycle, corpus, kappa_m, Intensity, Locality, Model};
use gibbs_forge::space::{cluster, neighbors};
use gibbs_forge::{PointConfig, StreamSeed, Window};
use proptest::prelude::*;

fn models() -> Vec<Model> {
    corpus().into_iter().map(|s| Model::new(s).unwrap()).collect()
}

#[test]
fn corpus_satisfies_cocycle() {
    for m in models() {
        let tol = if m.name() == "area_interaction" { 1e-6 } else { 1e-12 };
        let r = check_cocycle(&m, 2000, tol, StreamSeed::new(11));
        assert_eq!(r.failures, 0, "{}: {r:?}", m.name());
    }
}

#[test]
fn negative_beta_is_rejected() {
    let mut spec = corpus()[1].clone();
    spec.kind = gibbs_forge::models::ModelKind::Strauss { alpha: 2.0, beta: -0.1 };
    assert!(Model::new(spec).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kappa_two_is_symmetric(which in 0usize..7, seed in any::<u64>(), n in 0usize..8) {
        let m = &models()[which];
        let w = Window::cube(2, 0.4).unwrap();
        let mut rng = StreamSeed::new(seed).rng();
        let mu: Vec<_> = (0..n).map(|_| sample_point(&mut rng, &w, m.marks())).collect();
        let x = sample_point(&mut rng, &w, m.marks());
        let y = sample_point(&mut rng, &w, m.marks());
        let a = kappa_m(m, &[x, y], &mu);
        let b = kappa_m(m, &[y, x], &mu);
        let tol = if m.name() == "area_interaction" { 1e-6 } else { 1e-12 };
        prop_assert!((a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300));
    }

    #[test]
    fn kappa_is_local_and_bounded(which in 0usize..7, seed in any::<u64>(), n in 0usize..20) {
        let m = &models()[which];
        let w = Window::cube(2, 0.6).unwrap();
        let mut rng = StreamSeed::new(seed).rng();
        let mu = PointConfig::new((0..n).map(|_| sample_point(&mut rng, &w, m.marks())).collect()).unwrap();
        let x = sample_point(&mut rng, &w, m.marks());
        let full = m.kappa(&x, mu.points());
        prop_assert!(full >= 0.0 && full <= m.alpha_bar() + 1e-12);
        let part = match m.locality() {
            Locality::Loc2 => neighbors(&x, &mu, &m.relation()),
            Locality::Loc1 => cluster(&x, &mu, &m.relation()),
            Locality::None => mu.clone(),
        };
        let local = m.kappa(&x, part.points());
        prop_assert!((full - local).abs() <= 1e-9 * full.max(1.0), "{} {} {}", m.name(), full, local);
    }
}
