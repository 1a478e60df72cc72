use gibbs_forge::coupling::{certify_disagreement, disagreement_couple, dominated};
use gibbs_forge::geometry::sample_point;
use gibbs_forge::gibbs::{exponential_identity, RetentionConfig, SeriesBudget};
use gibbs_forge::models::{Intensity, Model, ModelKind, ModelSpec};
use gibbs_forge::samplers::{embed, kernel_mass, sample_driving, Sampler, SamplerOptions};
use gibbs_forge::stats::MeanAccumulator;
use gibbs_forge::{MarkSpec, Point, PointConfig, RadiusLaw, StreamSeed, Window};
use rand::Rng;

fn line_model(kind: ModelKind) -> Model {
    Model::new(ModelSpec { dim: 1, marks: MarkSpec::radius(RadiusLaw::PointMass { r: 0.1 }).unwrap(), kind }).unwrap()
}

fn plane(kind: ModelKind) -> Model {
    Model::new(ModelSpec { dim: 2, marks: MarkSpec::radius(RadiusLaw::PointMass { r: 0.05 }).unwrap(), kind }).unwrap()
}

#[test]
fn kernel_is_a_probability_kernel() {
    let m = line_model(ModelKind::Strauss { alpha: 1.0, beta: 0.3 });
    let w = Window::unit(1);
    let budget = SeriesBudget { nodes: 128, shifts: 2, tail: 1e-8 };
    let mut rng = StreamSeed::new(4).rng();
    for s in 0..5 {
        let n = rng.random_range(0..=4);
        let mu: Vec<Point> = (0..n).map(|_| sample_point(&mut rng, &w, m.marks())).collect();
        let k = kernel_mass(&m, &w, &mu, &[], budget, StreamSeed::new(s)).unwrap();
        assert!((k - 1.0).abs() < 1e-9, "{k}");
    }
}

#[test]
fn exponential_identity_for_strauss() {
    let m = line_model(ModelKind::Strauss { alpha: 1.0, beta: 0.5 });
    let w = Window::unit(1);
    let psi = PointConfig::new(vec![Point::new(&[0.3]).with_radius(0.1), Point::new(&[0.7]).with_radius(0.1)]).unwrap();
    let cfg = RetentionConfig { n_z: 1024, ..Default::default() };
    let c = exponential_identity(&m, &w, &psi, 64, 4, &cfg, SeriesBudget::default(), StreamSeed::new(8)).unwrap();
    assert!(c.z.abs() < 4.0, "{c:?}");
}

#[test]
fn poisson_embedding_mean() {
    let m = Model::new(ModelSpec { dim: 2, marks: MarkSpec::none(), kind: ModelKind::Poisson { alpha: 1.5 } }).unwrap();
    let w = Window::unit(2);
    let mut acc = MeanAccumulator::default();
    for s in 0..4000 {
        let d = sample_driving(&w, m.marks(), 2.0, StreamSeed::new(s));
        let t = embed(&m, &d, &[], &RetentionConfig::default());
        assert!(t.accepted.iter().all(|p| d.support().contains(p)));
        acc.push(t.accepted.len() as f64);
    }
    assert!((acc.mean() - 1.5).abs() < 4.0 * acc.std_error(), "{}", acc.mean());
}

#[test]
fn hardcore_samplers_never_overlap() {
    let m = plane(ModelKind::Hardcore { alpha: 2.0 });
    let w = Window::unit(2);
    let opts = SamplerOptions::default();
    for sampler in Sampler::ALL {
        for s in 0..50 {
            let x = sampler.sample(&m, &w, &[], &opts, StreamSeed::new(s)).unwrap();
            for (i, a) in x.iter().enumerate() {
                for b in x.points()[i + 1..].iter() {
                    assert!(a.dist(b) > 0.1, "{}", sampler.name());
                }
            }
        }
    }
}

#[test]
fn strauss_coupling_is_certified() {
    let m = plane(ModelKind::Strauss { alpha: 2.0, beta: 0.5 });
    let w = Window::unit(2);
    let psi = PointConfig::new(vec![Point::new(&[-0.04, 0.5]).with_radius(0.05), Point::new(&[0.5, 1.03]).with_radius(0.05)]).unwrap();
    let cfg = RetentionConfig { n_z: 512, ..Default::default() };
    for s in 0..30 {
        let r = disagreement_couple(&m, &w, &psi, &PointConfig::empty(), &cfg, StreamSeed::new(s)).unwrap();
        assert!(certify_disagreement(&r, &m.relation(), m.reach()));
        assert!(dominated(&r));
        let same = disagreement_couple(&m, &w, &psi, &psi, &cfg, StreamSeed::new(s)).unwrap();
        assert!(same.disagreement.is_empty());
    }
}
