use std::path::PathBuf;

use gpsselect::criteria::{self, AiccForm, Criterion};
use gpsselect::dataset::{load_csv, standardize};
use gpsselect::dof;
use gpsselect::path::{self, PathOptions};
use gpsselect::penalty::PenaltySpec;

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/diabetes.csv")
}

const LASSO: [f64; 11] = [152.0, 0.0, -209.0, 522.0, 303.0, -120.0, 0.0, -224.0, 12.0, 518.0, 58.0];
const ENET: [f64; 11] = [152.0, -2.0, -220.0, 504.0, 309.0, -93.0, -81.0, -188.0, 122.0, 460.0, 87.0];
const GENET: [f64; 11] = [152.0, 0.0, -228.0, 532.0, 326.0, 0.0, -70.0, -288.0, 0.0, 489.0, 0.0];

fn cp_coefficients(penalty: PenaltySpec) -> Vec<f64> {
    let raw = load_csv(fixture(), "y").unwrap();
    let design = standardize(&raw).unwrap();
    let fitted = path::fit(&design, &penalty, &PathOptions::default()).unwrap();
    let df = dof::reduced_replay(&fitted, &design).unwrap();
    let tau2 = criteria::estimate_tau2(&design).unwrap();
    let table = criteria::evaluate(&fitted, &df, Some(tau2), AiccForm::Plus).unwrap();
    let sel = criteria::select(Criterion::Cp, &table, &fitted, &df, &design).unwrap();
    let mut out = vec![sel.intercept];
    out.extend(sel.beta.iter().copied());
    out
}

fn check(name: &str, got: &[f64], want: &[f64], zero_pattern: bool) {
    eprintln!("{name}: {:?}", got.iter().map(|v| v.round()).collect::<Vec<_>>());
    for (j, (g, w)) in got.iter().zip(want).enumerate() {
        assert!((g - w).abs() <= 5.0, "{name} coefficient {j}: {g} vs {w}");
        if zero_pattern && j > 0 {
            assert_eq!(*g == 0.0, *w == 0.0, "{name} zero pattern at {j}");
        }
    }
}

#[test]
fn lasso_cp_selection() {
    check("lasso", &cp_coefficients(PenaltySpec::Lasso), &LASSO, true);
}

#[test]
fn enet_cp_selection() {
    check("enet", &cp_coefficients(PenaltySpec::ElasticNet(0.5)), &ENET, false);
}

#[test]
fn genet_cp_selection() {
    check("genet", &cp_coefficients(PenaltySpec::GeneralizedElasticNet(0.5)), &GENET, true);
}
