//! Monte Carlo harness: the four simulated designs, per-criterion prediction
//! error and support recovery, the nonzero-count comparator, and the timing
//! study of the two degrees-of-freedom trackers.

use std::time::Instant;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{self, argmin_finite, AiccForm, Criterion};
use crate::dataset::{generate_gaussian_with, standardize, Correlation, RawDataset, TrueModel};
use crate::dof::{self, replicate_rng, DfMethod};
use crate::error::{GpsError, Result};
use crate::linalg;
use crate::path::{self, PathOptions};
use crate::penalty::PenaltySpec;

/// One of the four built-in designs, or a custom model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Example(u8),
    Custom { model: TrueModel, n: usize },
}

impl Scenario {
    /// `(model, N)` for the scenario.
    pub fn resolve(&self) -> Result<(TrueModel, usize)> {
        match self {
            Scenario::Example(k) => example_model(*k),
            Scenario::Custom { model, n } => {
                model.validate()?;
                Ok((model.clone(), *n))
            }
        }
    }
}

/// Built-in designs. Examples 1-3 use eight AR(1) predictors with
/// `rho = 0.5` and `N = 20`; Example 4 uses forty equicorrelated predictors
/// and `N = 100`.
pub fn example_model(k: u8) -> Result<(TrueModel, usize)> {
    let ar = Correlation::Ar1(0.5);
    let (beta, sigma, corr, n) = match k {
        1 => (vec![3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0], 3.0, ar, 20),
        2 => (vec![0.85; 8], 3.0, ar, 20),
        3 => (vec![5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 2.0, ar, 20),
        4 => {
            let beta = [0.0, 2.0, 0.0, 2.0]
                .iter()
                .flat_map(|&b| std::iter::repeat(b).take(10))
                .collect();
            (beta, 15.0, Correlation::Equi(0.5), 100)
        }
        other => {
            return Err(GpsError::InvalidParameter(format!(
                "unknown example {other} (expected 1-4)"
            )))
        }
    };
    Ok((
        TrueModel {
            beta_true: beta,
            sigma,
            correlation: corr,
        },
        n,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tau2Mode {
    True,
    Estimated,
}

/// What the squared error of a replicate measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorTarget {
    /// `||X_c (beta_hat - beta_true)||^2 / N` on the centered realized
    /// design; the intercept is treated as a nuisance parameter.
    #[default]
    Slopes,
    /// `||y_bar + X_c beta_hat - X beta_true||^2 / N`, which adds the
    /// sampling error of the intercept (about `sigma^2 / N`).
    FullMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub replicates: usize,
    pub seed: u64,
    pub penalties: Vec<PenaltySpec>,
    pub criteria: Vec<Criterion>,
    pub tau2_mode: Tau2Mode,
    pub path: PathOptions,
    pub cv_folds: usize,
    pub aicc_form: AiccForm,
    pub error_target: ErrorTarget,
}

impl SimConfig {
    pub fn example(k: u8) -> Self {
        Self {
            scenario: Scenario::Example(k),
            replicates: 200,
            seed: 1,
            penalties: vec![PenaltySpec::Lasso],
            criteria: vec![
                Criterion::Cp,
                Criterion::Aicc,
                Criterion::Gcv,
                Criterion::Bic,
                Criterion::Cv,
            ],
            tau2_mode: Tau2Mode::Estimated,
            path: PathOptions::default(),
            cv_folds: 10,
            aicc_form: AiccForm::Plus,
            error_target: ErrorTarget::Slopes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(GpsError::InvalidParameter("need at least 2 replicates".into()));
        }
        if self.penalties.is_empty() || self.criteria.is_empty() {
            return Err(GpsError::InvalidParameter(
                "at least one penalty and one criterion are required".into(),
            ));
        }
        for p in &self.penalties {
            p.validate()?;
        }
        self.scenario.resolve().map(|_| ())
    }
}

/// Outcome of one selection rule on one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    /// `||mu_hat - X beta_true||^2 / N`
    pub se: f64,
    pub zero_hits: usize,
    pub zero_total: usize,
    pub nonzero_hits: usize,
    pub nonzero_total: usize,
}

/// Aggregated results for one (penalty, rule) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimCell {
    pub penalty: String,
    pub rule: String,
    pub mse: f64,
    pub sd: f64,
    /// `sd / sqrt(replicates)`
    pub mse_std_error: f64,
    /// Absent when the true model has no zero coefficients.
    pub zz: Option<f64>,
    pub nn: Option<f64>,
    pub zz_denominator: usize,
    pub nn_denominator: usize,
    pub se_values: Vec<f64>,
}

impl SimCell {
    pub fn aggregate(penalty: &str, rule: &str, outcomes: &[ReplicateOutcome]) -> Self {
        let se_values: Vec<f64> = outcomes.iter().map(|o| o.se).collect();
        let r = se_values.len() as f64;
        let mse = se_values.iter().sum::<f64>() / r;
        let sd = if se_values.len() > 1 {
            (se_values.iter().map(|v| (v - mse).powi(2)).sum::<f64>() / (r - 1.0)).sqrt()
        } else {
            0.0
        };
        let zz_den: usize = outcomes.iter().map(|o| o.zero_total).sum();
        let nn_den: usize = outcomes.iter().map(|o| o.nonzero_total).sum();
        let zz_hits: usize = outcomes.iter().map(|o| o.zero_hits).sum();
        let nn_hits: usize = outcomes.iter().map(|o| o.nonzero_hits).sum();
        log::debug!("{penalty}/{rule}: ZZ {zz_hits}/{zz_den}, NN {nn_hits}/{nn_den}");
        Self {
            penalty: penalty.to_string(),
            rule: rule.to_string(),
            mse,
            sd,
            mse_std_error: sd / r.sqrt(),
            zz: (zz_den > 0).then(|| zz_hits as f64 / zz_den as f64),
            nn: (nn_den > 0).then(|| nn_hits as f64 / nn_den as f64),
            zz_denominator: zz_den,
            nn_denominator: nn_den,
            se_values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub n: usize,
    pub p: usize,
    pub cells: Vec<SimCell>,
}

impl SimResult {
    pub fn cell(&self, penalty: &str, rule: &str) -> Option<&SimCell> {
        self.cells
            .iter()
            .find(|c| c.penalty == penalty && c.rule == rule)
    }
}

/// Data for replicate `r`: ChaCha8 stream `r` of the configured seed.
pub fn replicate_data(model: &TrueModel, n: usize, seed: u64, r: usize) -> Result<RawDataset> {
    let mut rng = replicate_rng(seed, r as u64);
    generate_gaussian_with(model, n, &mut rng)
}

/// Seed for the fold shuffle of replicate `r`.
fn cv_seed(seed: u64, r: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (r as u64).wrapping_add(0xD1B5_4A32_D192_ED03)
}

/// Squared error and support recovery for a standardized coefficient vector.
pub fn score(
    raw: &RawDataset,
    model: &TrueModel,
    target: ErrorTarget,
    y_mean: f64,
    fitted_std: &Array1<f64>,
    beta_std: &[f64],
) -> ReplicateOutcome {
    let mut truth = model.mean_response(raw);
    let mu_hat = match target {
        ErrorTarget::Slopes => {
            let centre = truth.mean().unwrap_or(0.0);
            truth -= centre;
            fitted_std.clone()
        }
        ErrorTarget::FullMean => fitted_std + y_mean,
    };
    let se = (&mu_hat - &truth).mapv(|v| v * v).sum() / raw.n() as f64;
    let mut o = ReplicateOutcome {
        se,
        zero_hits: 0,
        zero_total: 0,
        nonzero_hits: 0,
        nonzero_total: 0,
    };
    for (b, &t) in beta_std.iter().zip(&model.beta_true) {
        if t == 0.0 {
            o.zero_total += 1;
            o.zero_hits += usize::from(*b == 0.0);
        } else {
            o.nonzero_total += 1;
            o.nonzero_hits += usize::from(*b != 0.0);
        }
    }
    o
}

/// Runs every (penalty, criterion) pair on `replicates` generated datasets.
pub fn run_example(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let (model, n) = config.scenario.resolve()?;
    let per_rep: Vec<Vec<ReplicateOutcome>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            one_replicate(config, &model, n, r).map_err(|e| GpsError::Replicate {
                replicate: r,
                seed: config.seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    let mut slot = 0;
    for pen in &config.penalties {
        for crit in &config.criteria {
            let outcomes: Vec<ReplicateOutcome> = per_rep.iter().map(|v| v[slot]).collect();
            cells.push(SimCell::aggregate(&pen.to_string(), crit.name(), &outcomes));
            slot += 1;
        }
    }
    Ok(SimResult {
        config: config.clone(),
        n,
        p: model.p(),
        cells,
    })
}

fn one_replicate(
    config: &SimConfig,
    model: &TrueModel,
    n: usize,
    r: usize,
) -> Result<Vec<ReplicateOutcome>> {
    let raw = replicate_data(model, n, config.seed, r)?;
    let design = standardize(&raw)?;
    let tau2 = match config.tau2_mode {
        Tau2Mode::True => Some(model.sigma * model.sigma),
        Tau2Mode::Estimated => {
            if config.criteria.iter().any(Criterion::needs_tau2) {
                Some(criteria::estimate_tau2(&design)?)
            } else {
                None
            }
        }
    };
    let mut out = Vec::with_capacity(config.penalties.len() * config.criteria.len());
    for pen in &config.penalties {
        let fitted = path::fit(&design, pen, &config.path)?;
        let df = dof::reduced_replay(&fitted, &design)?;
        let table = criteria::evaluate(&fitted, &df, tau2, config.aicc_form)?;
        for crit in &config.criteria {
            let beta_std = if *crit == Criterion::Cv {
                let cv = criteria::cross_validate(
                    &raw,
                    pen,
                    &config.path,
                    config.cv_folds,
                    cv_seed(config.seed, r),
                )?;
                fitted.beta_at(fitted.step_at_l1_fraction(cv.best_fraction))
            } else {
                fitted.beta_at(table.argmin(*crit)?)
            };
            let fitted_std = design.x.dot(&beta_std);
            out.push(score(
                &raw,
                model,
                config.error_target,
                design.y_mean,
                &fitted_std,
                beta_std.as_slice().unwrap_or(&[]),
            ));
        }
    }
    Ok(out)
}

/// Degrees-of-freedom rule used inside Cp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DfRule {
    /// Tracked trace of the covariance product.
    Gps,
    /// Number of nonzero coefficients.
    Zou,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfComparison {
    pub gps: SimCell,
    pub zou: SimCell,
    /// Mean of `SE_gps - SE_zou` over replicates.
    pub mean_difference: f64,
    pub difference_std_error: f64,
}

impl DfComparison {
    /// Two-sided 95% normal interval for the mean paired difference.
    pub fn difference_interval(&self) -> (f64, f64) {
        let h = 1.959_963_984_540_054 * self.difference_std_error;
        (self.mean_difference - h, self.mean_difference + h)
    }
}

/// Lasso with Cp and the true error variance, selecting once with the
/// tracked degrees of freedom and once with the nonzero count, on the same
/// datasets.
pub fn compare_df(config: &SimConfig) -> Result<DfComparison> {
    config.validate()?;
    let (model, n) = config.scenario.resolve()?;
    let tau2 = model.sigma * model.sigma;
    let pairs: Vec<(ReplicateOutcome, ReplicateOutcome)> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            compare_one(config, &model, n, r, tau2).map_err(|e| GpsError::Replicate {
                replicate: r,
                seed: config.seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let gps: Vec<ReplicateOutcome> = pairs.iter().map(|p| p.0).collect();
    let zou: Vec<ReplicateOutcome> = pairs.iter().map(|p| p.1).collect();
    let diffs: Vec<f64> = pairs.iter().map(|(a, b)| a.se - b.se).collect();
    let d = criteria::mean_se(&diffs);
    Ok(DfComparison {
        gps: SimCell::aggregate("lasso", "cp_df_gps", &gps),
        zou: SimCell::aggregate("lasso", "cp_df_zou", &zou),
        mean_difference: d.estimate,
        difference_std_error: d.std_error,
    })
}

fn compare_one(
    config: &SimConfig,
    model: &TrueModel,
    n: usize,
    r: usize,
    tau2: f64,
) -> Result<(ReplicateOutcome, ReplicateOutcome)> {
    let raw = replicate_data(model, n, config.seed, r)?;
    let design = standardize(&raw)?;
    let fitted = path::fit(&design, &PenaltySpec::Lasso, &config.path)?;
    let df = dof::reduced_replay(&fitted, &design)?;
    let nonzero = fitted.nonzero_counts();
    let pick = |rule: DfRule| -> Result<ReplicateOutcome> {
        let cp: Vec<f64> = fitted
            .steps
            .iter()
            .enumerate()
            .map(|(s, step)| {
                let d = match rule {
                    DfRule::Gps => df.values[s],
                    DfRule::Zou => nonzero[s] as f64,
                };
                step.rss + 2.0 * tau2 * d
            })
            .collect();
        let step = argmin_finite(&cp).ok_or_else(|| GpsError::Numerical("Cp not finite".into()))?;
        let beta = fitted.beta_at(step);
        let fitted_std = design.x.dot(&beta);
        Ok(score(
            &raw,
            model,
            config.error_target,
            design.y_mean,
            &fitted_std,
            beta.as_slice().unwrap_or(&[]),
        ))
    };
    Ok((pick(DfRule::Gps)?, pick(DfRule::Zou)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub n: usize,
    pub reps: usize,
    pub dense_seconds: f64,
    pub reduced_seconds: f64,
    pub ratio: f64,
    pub steps: usize,
}

/// Wall-clock of path + df + criteria with each tracker, on Example 1's
/// model with `N` rows, averaged over `reps` datasets.
pub fn bench_timing(n_list: &[usize], reps: usize, seed: u64, opts: &PathOptions) -> Result<Vec<TimingRow>> {
    if reps == 0 {
        return Err(GpsError::InvalidParameter("reps must be positive".into()));
    }
    let (model, _) = example_model(1)?;
    let mut rows = Vec::new();
    for &n in n_list {
        let mut dense = 0.0;
        let mut reduced = 0.0;
        let mut steps = 0;
        for r in 0..reps {
            let raw = replicate_data(&model, n, seed, r)?;
            for method in [DfMethod::Dense, DfMethod::Reduced] {
                let start = Instant::now();
                let design = standardize(&raw)?;
                let fitted = path::fit(&design, &PenaltySpec::Lasso, opts)?;
                let df = dof::series(&fitted, &design, method)?;
                let tau2 = criteria::estimate_tau2(&design).ok();
                let table = criteria::evaluate(&fitted, &df, tau2, AiccForm::Plus)?;
                std::hint::black_box(table.argmin(Criterion::Gcv)?);
                let secs = start.elapsed().as_secs_f64();
                match method {
                    DfMethod::Dense => dense += secs,
                    DfMethod::Reduced => {
                        reduced += secs;
                        steps += fitted.len();
                    }
                }
            }
        }
        let k = reps as f64;
        rows.push(TimingRow {
            n,
            reps,
            dense_seconds: dense / k,
            reduced_seconds: reduced / k,
            ratio: dense / reduced,
            steps: steps / reps,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `log(seconds)` on `log(N)`.
pub fn loglog_slope(points: &[(usize, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Test instance with `p` AR(1) predictors (`rho = 0.3`), unit noise and a
/// seed-dependent coefficient vector in which every third entry is zero.
pub fn random_instance(n: usize, p: usize, seed: u64) -> Result<RawDataset> {
    let mut rng = replicate_rng(seed, 0);
    let beta_true = (0..p)
        .map(|j| {
            if j % 3 == 2 {
                0.0
            } else {
                let b: f64 = rng.random_range(0.5..3.0);
                if rng.random::<bool>() { b } else { -b }
            }
        })
        .collect();
    let model = TrueModel {
        beta_true,
        sigma: 1.0,
        correlation: Correlation::Ar1(0.3),
    };
    generate_gaussian_with(&model, n, &mut rng)
}

/// Design whose centered, unit-norm columns are exactly orthonormal, with a
/// Gaussian response.
pub fn orthonormal_instance(n: usize, p: usize, seed: u64) -> Result<RawDataset> {
    if n <= p {
        return Err(GpsError::TooFewRows { needed: p + 1, found: n });
    }
    let mut rng = replicate_rng(seed, 0);
    let z = Array2::from_shape_simple_fn((n, p), || rng.sample::<f64, _>(StandardNormal));
    let centered = &z - &z.mean_axis(Axis(0)).expect("n > 0");
    let qr = linalg::householder_qr(centered.view())?;
    let y = Array1::from_shape_simple_fn(n, || 5.0 * rng.sample::<f64, _>(StandardNormal))
        + qr.q.column(0).mapv(|v| 20.0 * v);
    RawDataset::unnamed(qr.q, y)
}
