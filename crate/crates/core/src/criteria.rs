//! Model selection along a path: Cp, AIC, AICc, BIC, GCV from the tracked
//! degrees of freedom, the residual variance estimate they rely on, K-fold
//! cross-validation as a comparator, and a simulation estimate of the
//! expected prediction error.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{destandardize, predict_raw, standardize, RawDataset, StandardizedDesign};
use crate::dof::{self, DfMethod, DfSeries, McEstimate};
use crate::error::{GpsError, Result};
use crate::path::{self, PathOptions, SolutionPath};
use crate::penalty::PenaltySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Cp,
    Aic,
    Aicc,
    Bic,
    Gcv,
    Cv,
}

impl Criterion {
    pub const ALL: [Criterion; 6] = [
        Criterion::Cp,
        Criterion::Aic,
        Criterion::Aicc,
        Criterion::Bic,
        Criterion::Gcv,
        Criterion::Cv,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Criterion::Cp => "cp",
            Criterion::Aic => "aic",
            Criterion::Aicc => "aicc",
            Criterion::Bic => "bic",
            Criterion::Gcv => "gcv",
            Criterion::Cv => "cv",
        }
    }

    pub fn needs_tau2(&self) -> bool {
        matches!(self, Criterion::Cp | Criterion::Aic | Criterion::Bic)
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = GpsError;

    fn from_str(s: &str) -> Result<Self> {
        Criterion::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| {
                GpsError::InvalidParameter(format!(
                    "unknown criterion `{s}` (expected cp, aic, aicc, bic, gcv or cv)"
                ))
            })
    }
}

/// Sign of the complexity term in AICc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AiccForm {
    /// `N log(2 pi rss/N) + N + 2 N df / (N - df - 1)`
    #[default]
    Plus,
    /// `N log(2 pi rss/N) + N - 2 N df / (N - df - 1)`
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionRow {
    pub rss: f64,
    pub df: f64,
    pub cp: Option<f64>,
    pub aic: Option<f64>,
    pub aicc: f64,
    pub bic: Option<f64>,
    pub gcv: f64,
}

impl CriterionRow {
    pub fn value(&self, c: Criterion) -> Option<f64> {
        match c {
            Criterion::Cp => self.cp,
            Criterion::Aic => self.aic,
            Criterion::Aicc => Some(self.aicc),
            Criterion::Bic => self.bic,
            Criterion::Gcv => Some(self.gcv),
            Criterion::Cv => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionTable {
    pub n: usize,
    pub tau2: Option<f64>,
    pub aicc_form: AiccForm,
    pub rows: Vec<CriterionRow>,
}

impl CriterionTable {
    /// Values of one criterion along the path.
    pub fn column(&self, c: Criterion) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r.value(c)).collect()
    }

    /// Step minimizing `c` over the steps where it is finite; ties go to the
    /// smallest index.
    pub fn argmin(&self, c: Criterion) -> Result<usize> {
        if c == Criterion::Cv {
            return Err(GpsError::InvalidParameter(
                "cross-validation is not a tabulated criterion".into(),
            ));
        }
        let values = self.column(c).ok_or_else(|| {
            GpsError::InvalidParameter(format!("{c} needs an error variance estimate"))
        })?;
        argmin_finite(&values)
            .ok_or_else(|| GpsError::Numerical(format!("{c} is not finite at any step")))
    }
}

/// Index of the smallest finite entry, lowest index on ties.
pub fn argmin_finite(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_finite() && best.map_or(true, |(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Unbiased residual variance of the full least-squares fit,
/// `rss / (N - p - 1)` (one degree of freedom goes to centering).
pub fn estimate_tau2(design: &StandardizedDesign) -> Result<f64> {
    let (n, p) = (design.n(), design.p());
    if n <= p + 1 {
        return Err(GpsError::RankDeficient(format!(
            "cannot estimate the error variance with {n} observations and {p} predictors"
        )));
    }
    let beta = path::ols_fit(design)?;
    let resid = &design.y - &design.x.dot(&beta);
    let tau2 = resid.dot(&resid) / (n - p - 1) as f64;
    if tau2 <= f64::EPSILON * design.y.dot(&design.y) {
        log::warn!("response lies in the column span; Cp, AIC and BIC degenerate with zero error variance");
    }
    Ok(tau2)
}

/// Tabulates every criterion along the path.
pub fn evaluate(
    path: &SolutionPath,
    df: &DfSeries,
    tau2: Option<f64>,
    aicc_form: AiccForm,
) -> Result<CriterionTable> {
    if df.len() != path.len() {
        return Err(GpsError::DimensionMismatch {
            expected: path.len(),
            found: df.len(),
        });
    }
    if let Some(t) = tau2 {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(GpsError::InvalidParameter(format!("invalid error variance {t}")));
        }
    }
    let n = path.n as f64;
    let rows = path
        .steps
        .iter()
        .zip(&df.values)
        .map(|(step, &d)| criterion_row(step.rss, d, n, tau2, aicc_form))
        .collect();
    Ok(CriterionTable {
        n: path.n,
        tau2,
        aicc_form,
        rows,
    })
}

pub fn criterion_row(rss: f64, df: f64, n: f64, tau2: Option<f64>, form: AiccForm) -> CriterionRow {
    let aicc = if df < n - 1.0 {
        let term = 2.0 * n * df / (n - df - 1.0);
        let base = n * (2.0 * PI * rss / n).ln() + n;
        match form {
            AiccForm::Plus => base + term,
            AiccForm::Minus => base - term,
        }
    } else {
        f64::INFINITY
    };
    let gcv = if df < n {
        rss / n / (1.0 - df / n).powi(2)
    } else {
        f64::INFINITY
    };
    let (cp, aic, bic) = match tau2 {
        Some(t) => {
            let cp = rss + 2.0 * t * df;
            let base = n * (2.0 * PI * t).ln();
            // AIC is an increasing affine map of Cp, so both share their argmin.
            let aic = base + cp / t;
            let bic = base + rss / t + n.ln() * df;
            (Some(cp), Some(aic), Some(bic))
        }
        None => (None, None, None),
    };
    CriterionRow {
        rss,
        df,
        cp,
        aic,
        aicc,
        bic,
        gcv,
    }
}

/// A chosen model on the path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub criterion: Criterion,
    pub step: usize,
    pub t: f64,
    pub l1: f64,
    pub df: f64,
    pub beta_std: Vec<f64>,
    pub intercept: f64,
    pub beta: Vec<f64>,
}

impl SelectionResult {
    pub fn at_step(
        criterion: Criterion,
        step: usize,
        path: &SolutionPath,
        df: &DfSeries,
        design: &StandardizedDesign,
    ) -> Result<Self> {
        if step >= path.len() {
            return Err(GpsError::Internal(format!(
                "step {step} beyond path of length {}",
                path.len()
            )));
        }
        let beta_std = path.beta_at(step);
        let (intercept, beta) = destandardize(beta_std.view(), design)?;
        Ok(Self {
            criterion,
            step,
            t: path.steps[step].t,
            l1: path.steps[step].l1,
            df: df.values[step],
            beta_std: beta_std.to_vec(),
            intercept,
            beta: beta.to_vec(),
        })
    }

    /// Fitted values on the standardized scale.
    pub fn fitted_std(&self, design: &StandardizedDesign) -> Array1<f64> {
        design.x.dot(&Array1::from(self.beta_std.clone()))
    }
}

/// Minimizes a tabulated criterion and returns the chosen model.
pub fn select(
    criterion: Criterion,
    table: &CriterionTable,
    path: &SolutionPath,
    df: &DfSeries,
    design: &StandardizedDesign,
) -> Result<SelectionResult> {
    let step = table.argmin(criterion)?;
    SelectionResult::at_step(criterion, step, path, df, design)
}

/// `E_y E_ynew ||mu_hat - y_new||^2` by simulation: replicate `b` draws `y`
/// from stream `2b` and an independent `y_new` from stream `2b + 1`.
pub fn expected_error_oracle<F>(
    fitter: F,
    mu: ArrayView1<f64>,
    tau2: f64,
    replicates: usize,
    seed: u64,
) -> Result<McEstimate>
where
    F: Fn(&Array1<f64>) -> Result<Array1<f64>> + Sync,
{
    check_mc(replicates, tau2)?;
    let errs: Vec<f64> = (0..replicates as u64)
        .into_par_iter()
        .map(|b| {
            let y = dof::perturbed_response(mu, tau2, seed, 2 * b);
            let y_new = dof::perturbed_response(mu, tau2, seed, 2 * b + 1);
            let mu_hat = fitter(&y)?;
            Ok((&mu_hat - &y_new).mapv(|v| v * v).sum())
        })
        .collect::<Result<_>>()?;
    Ok(mean_se(&errs))
}

/// `E_y[rss + 2 tau2 df]` on the same response draws as
/// [`expected_error_oracle`] (stream `2b` of `seed`). The fitter returns the
/// fitted values and the degrees of freedom it attributes to them.
pub fn expected_cp<F>(
    fitter: F,
    mu: ArrayView1<f64>,
    tau2: f64,
    replicates: usize,
    seed: u64,
) -> Result<McEstimate>
where
    F: Fn(&Array1<f64>) -> Result<(Array1<f64>, f64)> + Sync,
{
    check_mc(replicates, tau2)?;
    let cps: Vec<f64> = (0..replicates as u64)
        .into_par_iter()
        .map(|b| {
            let y = dof::perturbed_response(mu, tau2, seed, 2 * b);
            let (mu_hat, df) = fitter(&y)?;
            let rss = (&y - &mu_hat).mapv(|v| v * v).sum();
            Ok(rss + 2.0 * tau2 * df)
        })
        .collect::<Result<_>>()?;
    Ok(mean_se(&cps))
}

fn check_mc(replicates: usize, tau2: f64) -> Result<()> {
    if replicates < 2 {
        return Err(GpsError::InvalidParameter("need at least 2 replicates".into()));
    }
    if !(tau2 >= 0.0 && tau2.is_finite()) {
        return Err(GpsError::InvalidParameter(format!("invalid noise variance {tau2}")));
    }
    Ok(())
}

/// Sample mean and its standard error.
pub fn mean_se(values: &[f64]) -> McEstimate {
    let b = values.len() as f64;
    let mean = values.iter().sum::<f64>() / b;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1.0);
    McEstimate {
        estimate: mean,
        std_error: (var / b).sqrt(),
        replicates: values.len(),
    }
}

/// Normalized ℓ1 grid `{0, 0.01, ..., 1}`.
pub fn cv_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: usize,
    pub grid: Vec<f64>,
    /// Mean over folds of the held-out mean squared error.
    pub mean_error: Vec<f64>,
    pub std_error: Vec<f64>,
    pub best_fraction: f64,
    pub selection: SelectionResult,
}

/// Row order used by cross-validation: lexicographic on (response,
/// predictors) with a total order on floats, so fold membership depends on
/// row contents rather than storage order.
pub fn canonical_row_order(raw: &RawDataset) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..raw.n()).collect();
    idx.sort_by(|&a, &b| {
        raw.y[a].total_cmp(&raw.y[b]).then_with(|| {
            raw.x
                .row(a)
                .iter()
                .zip(raw.x.row(b).iter())
                .map(|(u, v)| u.total_cmp(v))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
    });
    idx
}

/// Fold label of each canonical position.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut positions: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    positions.shuffle(&mut rng);
    let mut label = vec![0; n];
    for (rank, &pos) in positions.iter().enumerate() {
        label[pos] = rank % folds;
    }
    label
}

/// K-fold cross-validation over the normalized ℓ1 grid, then a refit on the
/// full data at the selected fraction.
pub fn cross_validate(
    raw: &RawDataset,
    penalty: &PenaltySpec,
    opts: &PathOptions,
    folds: usize,
    seed: u64,
) -> Result<CvResult> {
    let n = raw.n();
    if folds < 2 || n < folds {
        return Err(GpsError::InvalidParameter(format!(
            "cross-validation needs 2 <= folds <= N, got {folds} folds for {n} rows"
        )));
    }
    penalty.validate()?;
    let order = canonical_row_order(raw);
    let canon = raw.select_rows(&order)?;
    let labels = fold_assignment(n, folds, seed);
    let grid = cv_grid();

    let fold_errors: Vec<Vec<f64>> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| labels[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| labels[i] == f).collect();
            let train_raw = canon.select_rows(&train)?;
            let design = standardize(&train_raw)
                .map_err(|e| GpsError::Degenerate(format!("fold {f}: {e}")))?;
            let path = path::fit(&design, penalty, opts)?;
            let steps: Vec<usize> = grid.iter().map(|&s| path.step_at_l1_fraction(s)).collect();
            let betas = path.betas_at(&steps);
            let x_test = canon.x.select(ndarray::Axis(0), &test);
            let y_test = canon.y.select(ndarray::Axis(0), &test);
            betas
                .iter()
                .map(|b| {
                    let (b0, bo) = destandardize(b.view(), &design)?;
                    let pred = predict_raw(&x_test, b0, bo.view());
                    Ok((&y_test - &pred).mapv(|v| v * v).mean().unwrap_or(0.0))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let kf = folds as f64;
    let mut mean_error = Vec::with_capacity(grid.len());
    let mut std_error = Vec::with_capacity(grid.len());
    for g in 0..grid.len() {
        let vals: Vec<f64> = fold_errors.iter().map(|e| e[g]).collect();
        let m = vals.iter().sum::<f64>() / kf;
        let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (kf - 1.0);
        mean_error.push(m);
        std_error.push((v / kf).sqrt());
    }
    let best = argmin_finite(&mean_error)
        .ok_or_else(|| GpsError::Numerical("cross-validation error is not finite".into()))?;
    let best_fraction = grid[best];

    let design = standardize(&canon)?;
    let path = path::fit(&design, penalty, opts)?;
    let df = dof::series(&path, &design, DfMethod::Reduced)?;
    let step = path.step_at_l1_fraction(best_fraction);
    let selection = SelectionResult::at_step(Criterion::Cv, step, &path, &df, &design)?;
    Ok(CvResult {
        folds,
        grid,
        mean_error,
        std_error,
        best_fraction,
        selection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_model_rows() {
        let yy = 37.5;
        let row = criterion_row(yy, 0.0, 20.0, Some(2.0), AiccForm::Plus);
        assert_eq!(row.cp, Some(yy));
        assert!((row.gcv - yy / 20.0).abs() < 1e-15);
    }

    #[test]
    fn infinite_exactly_at_thresholds() {
        let n = 10.0;
        let below = criterion_row(1.0, 8.999, n, None, AiccForm::Plus);
        assert!(below.aicc.is_finite() && below.gcv.is_finite());
        let at = criterion_row(1.0, 9.0, n, None, AiccForm::Plus);
        assert!(at.aicc.is_infinite() && at.gcv.is_finite());
        let full = criterion_row(1.0, 10.0, n, None, AiccForm::Plus);
        assert!(full.aicc.is_infinite() && full.gcv.is_infinite());
    }

    #[test]
    fn aicc_forms_differ_by_twice_the_penalty() {
        let a = criterion_row(5.0, 2.0, 20.0, None, AiccForm::Plus);
        let b = criterion_row(5.0, 2.0, 20.0, None, AiccForm::Minus);
        assert!((a.aicc - b.aicc - 2.0 * 2.0 * 40.0 / 17.0).abs() < 1e-12);
    }

    #[test]
    fn argmin_skips_non_finite_and_prefers_first() {
        assert_eq!(argmin_finite(&[f64::INFINITY, 2.0, 1.0, 1.0]), Some(2));
        assert_eq!(argmin_finite(&[f64::NAN, f64::INFINITY]), None);
    }

    #[test]
    fn criterion_names_parse() {
        for c in Criterion::ALL {
            assert_eq!(c.name().parse::<Criterion>().unwrap(), c);
        }
        assert!("mdl".parse::<Criterion>().is_err());
    }

    #[test]
    fn folds_are_balanced() {
        let labels = fold_assignment(23, 10, 3);
        let mut counts = [0usize; 10];
        for l in labels {
            counts[l] += 1;
        }
        assert!(counts.iter().all(|&c| c == 2 || c == 3));
    }
}
