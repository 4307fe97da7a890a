use gpsselect::dataset::standardize;
use gpsselect::dof;
use gpsselect::path::{self, PathOptions};
use gpsselect::penalty::PenaltySpec;
use gpsselect::sim::random_instance;
use proptest::prelude::*;

fn penalty() -> impl Strategy<Value = PenaltySpec> {
    prop_oneof![
        Just(PenaltySpec::Lasso),
        (0.05f64..0.95).prop_map(PenaltySpec::ElasticNet),
        (0.05f64..0.95).prop_map(PenaltySpec::GeneralizedElasticNet),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn path_invariants(seed in 0u64..10_000, n in 12usize..60, p in 2usize..7, pen in penalty()) {
        let d = standardize(&random_instance(n, p, seed).unwrap()).unwrap();
        let fitted = path::fit(&d, &pen, &PathOptions::default().with_budget(800)).unwrap();
        let df = dof::reduced_replay(&fitted, &d).unwrap();
        let q = fitted.selected.len() as f64;
        let mut prev_rss = f64::INFINITY;
        for (s, step) in fitted.steps.iter().enumerate() {
            // Each update changes the l1 norm by at most one increment.
            if s > 0 {
                let dl = (step.l1 - fitted.steps[s - 1].l1).abs();
                prop_assert!(dl <= fitted.delta_t * (1.0 + 1e-9));
                prop_assert!(step.alpha_t > 0.0 && step.alpha_t <= 1.0);
                prop_assert!(step.m > 0.0 && step.m.is_finite());
            }
            prop_assert!(df.values[s] >= -1e-12 && df.values[s] <= q + 1e-9);
            prev_rss = prev_rss.min(step.rss);
        }
        prop_assert!(prev_rss <= d.y.dot(&d.y) + 1e-9);
        let dense = dof::dense_series(&fitted, &d).unwrap();
        prop_assert!(dense.max_abs_diff(&df) < 1e-8);
    }

    #[test]
    fn scaling_the_response_scales_coefficients(seed in 0u64..10_000, c in 0.5f64..4.0) {
        let raw = random_instance(30, 4, seed).unwrap();
        let mut scaled = raw.clone();
        scaled.y.mapv_inplace(|v| v * c);
        let a = standardize(&raw).unwrap();
        let b = standardize(&scaled).unwrap();
        let fa = path::fit(&a, &PenaltySpec::Lasso, &PathOptions::default().with_budget(500)).unwrap();
        let fb = path::fit(&b, &PenaltySpec::Lasso, &PathOptions::default().with_budget(500)).unwrap();
        prop_assert!((fb.delta_t - c * fa.delta_t).abs() <= 1e-9 * fb.delta_t);
        // Same selection order and multiplicity factors when increments scale.
        let n = fa.len().min(fb.len()).min(50);
        for s in 1..n {
            prop_assert_eq!(fa.steps[s].k, fb.steps[s].k);
        }
    }
}
