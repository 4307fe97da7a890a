use gpsselect::dataset::standardize;
use gpsselect::dof;
use gpsselect::path::{self, PathOptions, SolutionPath};
use gpsselect::penalty::PenaltySpec;
use gpsselect::sim::orthonormal_instance;

/// `sum_j 1 - (1 - alpha)^{T_j}` where `T_j` accumulates the multiplicity
/// factors of the updates to coordinate `j`.
fn closed_form(path: &SolutionPath) -> Vec<f64> {
    let log_keep = (-path.alpha).ln_1p();
    let mut acc = vec![0.0; path.p];
    path.steps
        .iter()
        .map(|s| {
            if let Some(k) = s.k {
                acc[k] += s.m;
            }
            acc.iter().map(|t| -(t * log_keep).exp_m1()).sum()
        })
        .collect()
}

#[test]
fn standardization_keeps_orthonormal_columns() {
    let raw = orthonormal_instance(32, 8, 3).unwrap();
    let d = standardize(&raw).unwrap();
    let gram = d.x.t().dot(&d.x);
    for i in 0..8 {
        for j in 0..8 {
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((gram[[i, j]] - e).abs() < 1e-12);
        }
    }
}

#[test]
fn tracked_df_matches_closed_form() {
    for seed in 0..5 {
        let raw = orthonormal_instance(32, 8, seed).unwrap();
        let d = standardize(&raw).unwrap();
        for pen in [PenaltySpec::Lasso, PenaltySpec::ElasticNet(0.5)] {
            let fitted = path::fit(&d, &pen, &PathOptions::default()).unwrap();
            let expect = closed_form(&fitted);
            for method in [dof::DfMethod::Dense, dof::DfMethod::Reduced] {
                let got = dof::series(&fitted, &d, method).unwrap();
                let gap = got
                    .values
                    .iter()
                    .zip(&expect)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                assert!(gap < 1e-10, "seed {seed} {pen} {method:?}: gap {gap:e}");
            }
        }
    }
}

#[test]
fn update_counts_alone_do_not_give_the_closed_form() {
    // The raw number of updates per coordinate understates the exponent
    // whenever m > 1, so the closed form must use accumulated multiplicity.
    let raw = orthonormal_instance(32, 8, 1).unwrap();
    let d = standardize(&raw).unwrap();
    let fitted = path::fit(&d, &PenaltySpec::Lasso, &PathOptions::default()).unwrap();
    let dense = dof::dense_series(&fitted, &d).unwrap();
    let log_keep = (-fitted.alpha).ln_1p();
    let mut counts = vec![0.0f64; 8];
    for s in &fitted.steps {
        if let Some(k) = s.k {
            counts[k] += 1.0;
        }
    }
    let naive: f64 = counts.iter().map(|c| -(c * log_keep).exp_m1()).sum();
    let last = *dense.values.last().unwrap();
    assert!((naive - last).abs() > 1e-6, "naive {naive} tracked {last}");
}
