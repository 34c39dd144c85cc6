use proptest::prelude::*;
use vrvi::oracle::{refresh_snapshot, vr_estimate, NoiseModel};
use vrvi::problems::{
    decode_stored, encode_stored, gen_strongly_monotone, parse_libsvm_str, serialize_libsvm, SparseDataset, SparseRow,
    StoredProblem, SyntheticSpec,
};
use vrvi::rng::stream_rng;
use vrvi::savrep::{check_param_constraints, default_params};
use vrvi::savrep_m::{check_conditions, SavrepMParams};
use vrvi::{ConstraintSet, Point};

fn point(n: usize) -> impl Strategy<Value = Point> {
    prop::collection::vec(-10.0f64..10.0, n).prop_map(|v| Point::new(v).unwrap())
}

fn set3() -> impl Strategy<Value = ConstraintSet> {
    prop_oneof![
        Just(ConstraintSet::Whole(3)),
        Just(ConstraintSet::NonnegOrthant(3)),
        (point(3), 0.1f64..5.0).prop_map(|(c, r)| ConstraintSet::ball(c, r).unwrap()),
        (point(3), prop::collection::vec(0.0f64..4.0, 3)).prop_map(|(lo, w)| {
            let hi = Point::new(lo.iter().zip(&w).map(|(l, w)| l + w).collect()).unwrap();
            ConstraintSet::boxed(lo, hi).unwrap()
        }),
        (0.1f64..3.0).prop_map(|r| ConstraintSet::product(vec![
            ConstraintSet::ball(Point::zeros(2), r).unwrap(),
            ConstraintSet::NonnegOrthant(1)
        ])
        .unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn projection_is_idempotent_and_nonexpansive(set in set3(), a in point(3), b in point(3)) {
        let pa = set.project(&a).unwrap();
        let pb = set.project(&b).unwrap();
        prop_assert!(set.contains(&pa, 1e-9));
        prop_assert!(set.project(&pa).unwrap().dist(&pa) <= 1e-12);
        prop_assert!(pa.dist(&pb) <= a.dist(&b) + 1e-12);
        // variational characterization with y = P(b) feasible
        prop_assert!(a.sub(&pa).dot(&pb.sub(&pa)) <= 1e-9 * (1.0 + a.norm() * b.norm()));
    }

    #[test]
    fn vr_estimate_is_exactly_unbiased(seed in 0u64..1000, m1 in 2usize..8) {
        let inst = gen_strongly_monotone(&SyntheticSpec::new(3, m1, 0, 0.1, 1.5, 1.0, seed)).unwrap();
        let prob = inst.problem().unwrap();
        let mut rng = stream_rng(seed, 1);
        let w = prob.set.sample(&mut rng, 2.0);
        let x = prob.set.sample(&mut rng, 2.0);
        let mut calls = 0;
        let cache = refresh_snapshot(&prob.h, &NoiseModel::none(), &w, &mut rng, &mut calls);
        prop_assert_eq!(calls, m1 as u64);
        let mut mean = Point::zeros(3);
        for i in 0..m1 {
            mean.axpy(prob.h.probability(i), &vr_estimate(&cache, &prob.h, &NoiseModel::none(), i, &x, &mut rng, &mut calls));
        }
        prop_assert!(mean.dist(&prob.h_sum(&x)) <= 1e-12 * (1.0 + x.norm()));
        prop_assert_eq!(calls, 2 * m1 as u64);
    }

    #[test]
    fn closed_form_parameters_satisfy_constraints(
        log_mu in -5.0f64..0.0,
        log_ratio in 0.0f64..4.0,
        log_lg in -3.0f64..3.0,
        m1 in 2usize..500,
        m2 in 0usize..500,
    ) {
        let mu = 10f64.powf(log_mu);
        let lh = mu * 10f64.powf(log_ratio);
        let lg = 10f64.powf(log_lg);
        let p = default_params(mu, lh, lg, m1, m2).unwrap();
        prop_assert!(check_param_constraints(&p, lh, lg).is_ok());
        let pm = SavrepMParams { q: 0.75, p1: 1.0 / m1 as f64, omega_z: Some(1.0), delta_cap: 0.0, l_h: lh, l_g: lg, m1, m2, batch: 1 };
        prop_assert!(check_conditions(&pm, 50).unwrap().is_ok());
    }

    #[test]
    fn libsvm_round_trip(rows in prop::collection::vec(
        (any::<bool>(), prop::collection::btree_map(0usize..40, -1e3f64..1e3, 0..6)), 0..10)
    ) {
        let rows: Vec<SparseRow> = rows
            .into_iter()
            .map(|(pos, f)| SparseRow { label: if pos { 1.0 } else { -1.0 }, features: f.into_iter().collect() })
            .collect();
        let n_features = rows.iter().filter_map(|r| r.features.last().map(|f| f.0 + 1)).max().unwrap_or(0);
        let ds = SparseDataset { rows, n_features };
        let text = serialize_libsvm(&ds);
        prop_assert_eq!(parse_libsvm_str(&text).unwrap(), ds);
    }

    #[test]
    fn stored_problems_round_trip(seed in 0u64..200, n in 1usize..5, m1 in 2usize..4, m2 in 0usize..3) {
        let inst = gen_strongly_monotone(&SyntheticSpec::new(n, m1, m2, 0.5, 2.0, 1.0, seed)).unwrap();
        let stored = StoredProblem::Affine(inst);
        prop_assert_eq!(decode_stored(&encode_stored(&stored).unwrap()).unwrap(), stored);
    }

    #[test]
    fn point_linear_algebra(a in point(4), b in point(4), s in -3.0f64..3.0) {
        let c = Point::lincomb(1.0, &a, s, &b);
        let mut d = a.clone();
        d.axpy(s, &b);
        prop_assert!(c.dist(&d) <= 1e-12);
        prop_assert!((a.dist_sq(&b) - a.sub(&b).norm_sq()).abs() <= 1e-9 * (1.0 + a.dist_sq(&b)));
        prop_assert!(a.dot(&b).abs() <= a.norm() * b.norm() * (1.0 + 1e-12) + 1e-12);
    }
}
