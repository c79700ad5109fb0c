use epidp_core::measures::{
    ar1_ols_fit, ar1_simulate, bounded_lipschitz_distance, DistributionSpec, EmpiricalMeasure, SampleStream, TestFamily,
};
use epidp_core::valuefn::{Grid1D, Grid2D, ValueFn1D, ValueFn2D};
use proptest::prelude::*;

fn law() -> impl Strategy<Value = DistributionSpec> {
    prop_oneof![
        (0.1..5.0f64).prop_map(DistributionSpec::exponential),
        (-2.0..2.0f64, 0.01..2.0f64).prop_map(|(m, s)| DistributionSpec::normal(m, s)),
        Just(DistributionSpec::levy_standard()),
        (-3.0..3.0f64).prop_map(DistributionSpec::PointMass),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn streams_are_reproducible_and_addressable(seed in any::<u64>(), d in law(), a in 1usize..50, b in 1usize..50) {
        let all = SampleStream::new(seed, d.clone()).sample(a + b).unwrap();
        let mut s = SampleStream::new(seed, d.clone());
        let head = s.sample(a).unwrap();
        let tail = s.sample(b).unwrap();
        prop_assert_eq!(&all[..a], &head[..]);
        prop_assert_eq!(&all[a..], &tail[..]);
        let jumped = SampleStream::new(seed, d).at(a as u64).sample(b).unwrap();
        prop_assert_eq!(&all[a..], &jumped[..]);
    }

    #[test]
    fn spec_strings_round_trip(d in law()) {
        let back: DistributionSpec = d.to_string().parse().unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn empirical_csv_is_lossless(v in prop::collection::vec(-1e6..1e6f64, 1..40)) {
        let m = EmpiricalMeasure::uniform(v).unwrap();
        prop_assert_eq!(EmpiricalMeasure::from_csv(&m.to_csv()).unwrap(), m.clone());
        let total: f64 = m.weights().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn truncations_split_the_mean(v in prop::collection::vec(-10.0..10.0f64, 1..40), a in -10.0..10.0f64) {
        let m = EmpiricalMeasure::uniform(v).unwrap();
        let lo = m.truncated_lower_expectation(|t| t, a).unwrap();
        let hi = m.truncated_upper_expectation(|t| t, a).unwrap();
        let at = m.expectation(|t| if t == a { t } else { 0.0 }).unwrap();
        prop_assert!((lo + hi - at - m.mean()).abs() <= 1e-9);
    }

    #[test]
    fn bl_distance_is_a_symmetric_premetric(p in prop::collection::vec(-3.0..3.0f64, 1..30), q in prop::collection::vec(-3.0..3.0f64, 1..30)) {
        let (p, q) = (EmpiricalMeasure::uniform(p).unwrap(), EmpiricalMeasure::uniform(q).unwrap());
        let fam = TestFamily::default_for(&p, &q);
        let d = bounded_lipschitz_distance(&p, &q, &fam).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert_eq!(d, bounded_lipschitz_distance(&q, &p, &fam).unwrap());
        prop_assert_eq!(bounded_lipschitz_distance(&p, &p, &fam).unwrap(), 0.0);
    }

    #[test]
    fn value_csv_round_trips(v in prop::collection::vec(-1e3..1e3f64, 12)) {
        let f = ValueFn1D::new(Grid1D::uniform(0.0, 2.0, 12).unwrap(), v.clone()).unwrap();
        prop_assert_eq!(ValueFn1D::from_csv(&f.to_csv()).unwrap(), f);
        let g = Grid2D { x: Grid1D::uniform(0.0, 1.0, 4).unwrap(), ell: Grid1D::uniform(-1.0, 1.0, 3).unwrap() };
        let f2 = ValueFn2D::new(g.x, g.ell, v).unwrap();
        prop_assert_eq!(ValueFn2D::from_csv(&f2.to_csv()).unwrap(), f2);
    }
}

#[test]
fn ols_estimate_tightens_with_sample_size() {
    let noise = DistributionSpec::normal(0.0, 0.1);
    let errs: Vec<f64> = [100usize, 1000, 10_000]
        .iter()
        .map(|&n| {
            let mut e: Vec<f64> = (1..=5)
                .map(|seed| {
                    let path = ar1_simulate(0.8, 0.0, &noise, n, seed).unwrap();
                    (ar1_ols_fit(&path).unwrap().alpha_hat - 0.8).abs()
                })
                .collect();
            e.sort_by(f64::total_cmp);
            e[2]
        })
        .collect();
    assert!(errs[2] < errs[0], "{errs:?}");
    assert!(errs[2] <= 0.02);
}
