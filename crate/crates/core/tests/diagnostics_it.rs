use gibbs_forge::approx::{bound_validity, matern_experiment, BoundBudget, BoundGeometry, MaternBudget, ThinningRule, ValidityBudget};
use gibbs_forge::diagnostics::{decay_check, empty_space_bounds, gnz_test, one_arm, EmptySpaceBudget, TestFunction};
use gibbs_forge::models::{corpus, Model};
use gibbs_forge::samplers::{Sampler, SamplerOptions};
use gibbs_forge::{MarkSpec, Point, PointConfig, RadiusLaw, Relation, StreamSeed, Window};

fn model(i: usize) -> Model {
    Model::new(corpus()[i].clone()).unwrap()
}

#[test]
fn gnz_separates_right_and_wrong_intensity() {
    let m = model(1);
    let wrong = m.with_beta(0.9).unwrap();
    let w = Window::unit(2);
    let a = Window::new(&[0.1, 0.1], &[0.9, 0.9]).unwrap();
    let f = TestFunction::Contact { a, radius: 0.1 };
    let opts = SamplerOptions::default();
    let ok = gnz_test(&m, &m, Sampler::Rejection, &opts, &w, &[], &f, 4000, 32, StreamSeed::new(1)).unwrap();
    assert!(ok.z.abs() < 4.0, "{ok:?}");
    let bad = gnz_test(&m, &wrong, Sampler::Rejection, &opts, &w, &[], &f, 4000, 32, StreamSeed::new(1)).unwrap();
    assert!(bad.z.abs() > 4.0, "{bad:?}");
}

#[test]
fn empty_space_is_sandwiched() {
    let w = Window::unit(2);
    let b = Window::new(&[0.3, 0.3], &[0.7, 0.7]).unwrap();
    let psi = PointConfig::new(vec![Point::new(&[0.27, 0.5]).with_radius(0.05)]).unwrap();
    let budget = EmptySpaceBudget { replicates: 5000, ..Default::default() };
    for i in [1, 2] {
        let r = empty_space_bounds(&model(i), &w, &b, &psi, &budget, StreamSeed::new(2)).unwrap();
        assert!(r.sandwiched(3.0), "{r:?}");
        assert!(r.lower <= r.upper);
    }
    let p = empty_space_bounds(&model(0), &w, &b, &PointConfig::empty(), &budget, StreamSeed::new(3)).unwrap();
    let exact = (-2.0f64 * 0.16).exp();
    assert!((p.lower - exact).abs() < 1e-12 && (p.upper - exact).abs() < 1e-9);
}

#[test]
fn empty_ball_decays_no_slower_than_bound() {
    let r = decay_check(&model(2), 0.3, 3000, StreamSeed::new(4)).unwrap();
    assert!(r.holds, "{r:?}");
}

#[test]
fn one_arm_lemma_holds_on_small_grid() {
    let marks = MarkSpec::radius(RadiusLaw::PointMass { r: 0.5 }).unwrap();
    let g = one_arm(&Relation::BallsOverlap, &marks, 2, 0.3 / std::f64::consts::PI, &[0.5, 1.0], &[0.5, 1.5], 20_000, StreamSeed::new(5))
        .unwrap();
    assert!(g.cells.iter().all(|c| c.holds));
}

#[test]
fn thinned_strauss_within_bound() {
    let w = Window::unit(2);
    let geom = BoundGeometry { window: w, domain: w.expanded(0.9).unwrap(), r_radius: 0.7, s_radius: 0.8 };
    let budget = ValidityBudget {
        pilot: 2000,
        replicates: 3000,
        bootstrap: 50,
        grid_nodes: 32,
        bound: BoundBudget { replicates: 1000, pairs: 8 },
    };
    let v = bound_validity(&model(1), &ThinningRule::MaternI { radius: 0.7 }, &geom, &budget, StreamSeed::new(6)).unwrap();
    assert!(v.holds, "{v:?}");
}

#[test]
fn matern_count_matches_reference_for_poisson() {
    let budget = MaternBudget { calibration_hits: 800, replicates: 1500, bootstrap: 50, ..Default::default() };
    let e = matern_experiment(&model(0), 2.0, 250.0, &budget, StreamSeed::new(7)).unwrap();
    let closed = e.calibration.closed_form.unwrap();
    assert!((e.calibration.u_n - closed).abs() < 0.02 * closed, "{:?}", e.calibration);
    assert!((e.mean_count.estimate - e.reference_mass).abs() < 4.0 * e.mean_count.std_error + 0.05 * e.reference_mass);
}
