use gpsselect::dataset::standardize;
use gpsselect::dof::{self, DenseTracker, ReducedTracker};
use gpsselect::oracle::explicit_df_product;
use gpsselect::path::{self, PathOptions};
use gpsselect::penalty::PenaltySpec;
use gpsselect::sim::random_instance;

const PENALTIES: [PenaltySpec; 3] = [
    PenaltySpec::Lasso,
    PenaltySpec::ElasticNet(0.5),
    PenaltySpec::GeneralizedElasticNet(0.5),
];

#[test]
fn reduced_matches_dense_across_shapes() {
    let opts = PathOptions::default().with_budget(2000);
    let mut seed = 0;
    for n in [30, 100] {
        for p in [5, 8, 10] {
            for pen in &PENALTIES {
                seed += 1;
                let d = standardize(&random_instance(n, p, seed).unwrap()).unwrap();
                let fitted = path::fit(&d, pen, &opts).unwrap();
                let dense = dof::dense_series(&fitted, &d).unwrap();
                let reduced = dof::reduced_replay(&fitted, &d).unwrap();
                assert_eq!(reduced.method, dof::DfMethod::Reduced);
                let gap = dense.max_abs_diff(&reduced);
                assert!(gap < 1e-8, "n={n} p={p} {pen}: {gap:e}");
            }
        }
    }
}

#[test]
fn dense_matches_explicit_product() {
    for (i, pen) in PENALTIES.iter().enumerate() {
        let d = standardize(&random_instance(30, 5, 100 + i as u64).unwrap()).unwrap();
        let fitted = path::fit(&d, pen, &PathOptions::default().with_budget(500)).unwrap();
        let dense = dof::dense_series(&fitted, &d).unwrap();
        let explicit = explicit_df_product(&fitted, &d).unwrap();
        let gap = dense.max_abs_diff(&explicit);
        assert!(gap < 1e-10, "{pen}: {gap:e}");
    }
}

#[test]
fn df_is_monotone_and_bounded() {
    let d = standardize(&random_instance(40, 6, 7).unwrap()).unwrap();
    let fitted = path::fit(&d, &PenaltySpec::Lasso, &PathOptions::default()).unwrap();
    let df = dof::reduced_replay(&fitted, &d).unwrap();
    assert_eq!(df.values[0], 0.0);
    for w in df.values.windows(2) {
        assert!(w[1] >= w[0] - 1e-12);
    }
    let q = fitted.selected.len() as f64;
    assert!(*df.values.last().unwrap() <= q + 1e-9);
}

#[test]
fn reduced_tracker_declines_collinear_columns() {
    let mut raw = random_instance(20, 3, 5).unwrap();
    let copy = raw.x.column(0).to_owned();
    raw.x.column_mut(2).assign(&copy);
    let d = standardize(&raw).unwrap();
    assert!(ReducedTracker::new(&d, &[0, 2]).unwrap().is_none());
    assert!(ReducedTracker::new(&d, &[0, 1]).unwrap().is_some());
}

#[test]
fn single_update_trackers_agree() {
    let d = standardize(&random_instance(25, 4, 9).unwrap()).unwrap();
    let mut dense = DenseTracker::new(25);
    let mut reduced = ReducedTracker::new(&d, &[2, 0]).unwrap().unwrap();
    for (k, a) in [(2, 0.3), (0, 0.1), (2, 0.05), (0, 0.9)] {
        let x = dense.update(d.x.column(k), a).unwrap();
        let y = reduced.update(k, a).unwrap();
        assert!((x - y).abs() < 1e-12);
    }
    assert!(reduced.update(1, 0.1).is_err());
}
