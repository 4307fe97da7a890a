use gpsselect::criteria::{self, argmin_finite, criterion_row, AiccForm, Criterion};
use gpsselect::dataset::{standardize, RawDataset};
use gpsselect::dof;
use gpsselect::path::{self, PathOptions};
use gpsselect::penalty::PenaltySpec;
use gpsselect::sim::random_instance;

fn table_for(seed: u64, tau2: Option<f64>) -> (criteria::CriterionTable, usize) {
    let d = standardize(&random_instance(30, 6, seed).unwrap()).unwrap();
    let fitted = path::fit(&d, &PenaltySpec::Lasso, &PathOptions::default().with_budget(2000)).unwrap();
    let df = dof::reduced_replay(&fitted, &d).unwrap();
    let t = criteria::evaluate(&fitted, &df, tau2, AiccForm::Plus).unwrap();
    (t, fitted.len())
}

#[test]
fn cp_and_aic_share_their_argmin() {
    for seed in 0..25 {
        let (t, _) = table_for(seed, Some(1.0 + seed as f64 * 0.1));
        assert_eq!(t.argmin(Criterion::Cp).unwrap(), t.argmin(Criterion::Aic).unwrap());
    }
}

#[test]
fn aicc_and_gcv_ignore_tau2() {
    let (a, _) = table_for(3, Some(0.5));
    let (b, _) = table_for(3, Some(40.0));
    let (c, _) = table_for(3, None);
    for ((x, y), z) in a.rows.iter().zip(&b.rows).zip(&c.rows) {
        assert_eq!(x.aicc.to_bits(), y.aicc.to_bits());
        assert_eq!(x.gcv.to_bits(), z.gcv.to_bits());
    }
    assert!(c.argmin(Criterion::Cp).is_err());
}

#[test]
fn argmin_is_invariant_to_shifts() {
    let (t, _) = table_for(8, Some(2.0));
    for c in [Criterion::Cp, Criterion::Bic, Criterion::Gcv, Criterion::Aicc] {
        let col = t.column(c).unwrap();
        let shifted: Vec<f64> = col.iter().map(|v| v + 123.0).collect();
        assert_eq!(argmin_finite(&col), argmin_finite(&shifted));
    }
}

#[test]
fn thresholds_are_exact() {
    for n in [5.0, 20.0, 442.0] {
        let just_below = f64::from_bits((n - 1.0f64).to_bits() - 1);
        assert!(criterion_row(1.0, just_below, n, None, AiccForm::Plus).aicc.is_finite());
        assert!(criterion_row(1.0, n - 1.0, n, None, AiccForm::Plus).aicc.is_infinite());
        let below_n = f64::from_bits(n.to_bits() - 1);
        assert!(criterion_row(1.0, below_n, n, None, AiccForm::Plus).gcv.is_finite());
        assert!(criterion_row(1.0, n, n, None, AiccForm::Plus).gcv.is_infinite());
    }
}

#[test]
fn tau2_estimate_is_unbiased_under_the_null() {
    // With pure noise the residual variance of the full fit averages to the
    // noise variance.
    let reps = 4000;
    let mut acc = 0.0;
    for r in 0..reps {
        let raw = random_instance(20, 8, 10_000 + r).unwrap();
        let mut rng_y = dof::perturbed_response(ndarray::Array1::zeros(20).view(), 4.0, 99, r);
        rng_y += 1.0;
        let d = standardize(&RawDataset::unnamed(raw.x, rng_y).unwrap()).unwrap();
        acc += criteria::estimate_tau2(&d).unwrap();
    }
    let mean = acc / reps as f64;
    // Standard error is about 4 * sqrt(2 / 11 / 4000) = 0.027.
    assert!((mean - 4.0).abs() < 0.12, "mean {mean}");
}

#[test]
fn cross_validation_ignores_row_order() {
    let raw = random_instance(40, 5, 21).unwrap();
    let opts = PathOptions::default().with_budget(1000);
    let a = criteria::cross_validate(&raw, &PenaltySpec::Lasso, &opts, 10, 4).unwrap();
    let rev: Vec<usize> = (0..40).rev().collect();
    let shuffled = raw.select_rows(&rev).unwrap();
    let b = criteria::cross_validate(&shuffled, &PenaltySpec::Lasso, &opts, 10, 4).unwrap();
    assert_eq!(a.best_fraction, b.best_fraction);
    assert_eq!(a.mean_error, b.mean_error);
    assert_eq!(a.grid.len(), 101);
}
