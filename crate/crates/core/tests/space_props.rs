use std::cmp::Ordering;

use gibbs_forge::space::{cluster, component_labels, components};
use gibbs_forge::{Point, PointConfig, Relation};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = Point> {
    (0.0..1.0f64, 0.0..1.0f64, 0.01..0.08f64, 1u16..3).prop_map(|(x, y, r, l)| Point::new(&[x, y]).with_radius(r).with_label(l))
}

fn relation() -> impl Strategy<Value = Relation> {
    prop_oneof![
        Just(Relation::BallsOverlap),
        Just(Relation::BallsOverlapDistinctLabels),
        (0.0..0.2f64).prop_map(|r0| Relation::Range { r0 }),
    ]
}

fn config(max: usize) -> impl Strategy<Value = PointConfig> {
    prop::collection::vec(point(), 0..max).prop_map(|v| PointConfig::new(v).unwrap())
}

proptest! {
    #[test]
    fn point_order_is_total(a in point(), b in point(), c in point()) {
        prop_assert_eq!(a.total_cmp(&b), b.total_cmp(&a).reverse());
        prop_assert_eq!(a.total_cmp(&a), Ordering::Equal);
        if a.total_cmp(&b) != Ordering::Greater && b.total_cmp(&c) != Ordering::Greater {
            prop_assert_ne!(a.total_cmp(&c), Ordering::Greater);
        }
    }

    #[test]
    fn config_is_canonical(mut v in prop::collection::vec(point(), 0..20)) {
        let a = PointConfig::new(v.clone()).unwrap();
        v.reverse();
        let b = PointConfig::new(v).unwrap();
        prop_assert_eq!(a.points(), b.points());
    }

    #[test]
    fn relation_is_symmetric(rel in relation(), a in point(), b in point()) {
        prop_assert_eq!(rel.related(&a, &b), rel.related(&b, &a));
    }

    #[test]
    fn cluster_matches_components(rel in relation(), cfg in config(40), p in point()) {
        let reach = 0.2;
        let with_p = cfg.union(&PointConfig::new(vec![p]).unwrap());
        let comps = components(&with_p, &rel, reach);
        let mine = comps.iter().find(|c| c.contains(&p)).unwrap();
        let expected = mine.restrict(|q| q != &p);
        let got = cluster(&p, &cfg, &rel);
        prop_assert_eq!(got.points(), expected.points());
    }

    #[test]
    fn components_split_under_removal(rel in relation(), cfg in config(40), k in 0usize..40) {
        prop_assume!(!cfg.is_empty());
        let gone = cfg.points()[k % cfg.len()];
        let rest = cfg.restrict(|q| q != &gone);
        let before = component_labels(cfg.points(), &rel, 0.2);
        let after = component_labels(rest.points(), &rel, 0.2);
        // points together after the removal were together before
        let idx = |q: &Point| cfg.points().iter().position(|x| x == q).unwrap();
        for (i, a) in rest.iter().enumerate() {
            for (j, b) in rest.iter().enumerate() {
                if after[i] == after[j] {
                    prop_assert_eq!(before[idx(a)], before[idx(b)]);
                }
            }
        }
    }

    #[test]
    fn grid_labels_match_pairwise(cfg in config(150)) {
        let rel = Relation::BallsOverlap;
        let fast = component_labels(cfg.points(), &rel, 0.16);
        let slow = component_labels(cfg.points(), &rel, f64::INFINITY);
        prop_assert_eq!(fast, slow);
    }
}
