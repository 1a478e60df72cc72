use gibbs_forge::approx::{heredity_violations, retained, thin, union_volume, Thinning, ThinningRule};
use gibbs_forge::geometry::ball_volume;
use gibbs_forge::{MarkSpec, Point, PointConfig, StreamSeed, Window};
use proptest::prelude::*;

fn pts(max: usize) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((0.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y)| Point::new(&[x, y])), 0..max)
}

proptest! {
    #[test]
    fn matern_is_hereditary(mu in pts(30), extra in pts(5), r in 0.0..0.2f64) {
        let rule = ThinningRule::MaternI { radius: r };
        let bigger: Vec<Point> = mu.iter().chain(&extra).copied().collect();
        for x in &mu {
            if !rule.retain(x, &mu) {
                prop_assert!(!rule.retain(x, &bigger));
            }
        }
    }

    #[test]
    fn matern_only_sees_its_reach(mu in pts(30), r in 0.0..0.2f64, x in pts(2)) {
        prop_assume!(!x.is_empty());
        let rule = ThinningRule::MaternI { radius: r };
        let x = x[0];
        let near: Vec<Point> = mu.iter().filter(|q| q.dist(&x) <= rule.reach()).copied().collect();
        prop_assert_eq!(rule.retain(&x, &mu), rule.retain(&x, &near));
    }

    #[test]
    fn fast_thinning_matches_definition(mu in pts(120), r in 0.0..0.15f64) {
        let rule = ThinningRule::MaternI { radius: r };
        let fast = retained(&rule, &mu);
        let slow: Vec<bool> = mu.iter().map(|p| rule.retain(p, &mu)).collect();
        prop_assert_eq!(fast, slow);
        let cfg = PointConfig::new(mu).unwrap();
        prop_assert!(thin(&rule, &cfg).len() <= cfg.len());
    }

    #[test]
    fn union_volume_is_between_one_and_two_balls(r in 0.01..2.0f64, h in 0.0..5.0f64, d in 1usize..5) {
        let v = union_volume(d, r, h);
        let b = ball_volume(d, r);
        prop_assert!(v >= b * (1.0 - 1e-9) && v <= 2.0 * b * (1.0 + 1e-9));
        prop_assert!(union_volume(d, r, h + 0.01) >= v - 1e-9);
    }
}

#[test]
fn no_heredity_violations_found() {
    let w = Window::unit(2);
    let n = heredity_violations(&ThinningRule::MaternI { radius: 0.1 }, &w, &MarkSpec::none(), 2000, StreamSeed::new(3));
    assert_eq!(n, 0);
}
