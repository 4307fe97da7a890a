//! Independent reference computations used to check the main code paths:
//! a cyclic coordinate-descent lasso, the explicit matrix product behind the
//! degrees of freedom, and a normal-equations least-squares solve.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dataset::StandardizedDesign;
use crate::dof::{self, DfMethod, DfSeries};
use crate::error::{GpsError, Result};
use crate::linalg;
use crate::path::{self, PathOptions, SolutionPath};
use crate::penalty::PenaltySpec;

pub const CD_TOLERANCE: f64 = 1e-10;
pub const CD_MAX_SWEEPS: usize = 100_000;

/// Largest useful penalty: every coefficient is zero at and above it.
pub fn lambda_max(design: &StandardizedDesign) -> f64 {
    let n = design.n() as f64;
    design
        .x
        .t()
        .dot(&design.y)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        * 2.0
        / n
}

/// Geometric grid from `lambda_max` down to `lambda_max * ratio`.
pub fn lambda_grid(design: &StandardizedDesign, len: usize, ratio: f64) -> Vec<f64> {
    let top = lambda_max(design);
    if len < 2 {
        return vec![top];
    }
    (0..len)
        .map(|i| top * ratio.powf(i as f64 / (len - 1) as f64))
        .collect()
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Minimizes `||y - X b||^2 / N + lambda * ||b||_1` for each `lambda`, warm
/// starting along the grid. The grid must be positive and decreasing.
pub fn cd_lasso(design: &StandardizedDesign, lambda_grid: &[f64]) -> Result<Vec<Array1<f64>>> {
    if lambda_grid.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(GpsError::InvalidParameter("penalty grid must be positive".into()));
    }
    if lambda_grid.windows(2).any(|w| w[1] > w[0]) {
        return Err(GpsError::InvalidParameter("penalty grid must be decreasing".into()));
    }
    let (n, p) = (design.n(), design.p());
    let xt = design.x.t().to_owned();
    let norms: Vec<f64> = xt.rows().into_iter().map(|r| r.dot(&r)).collect();
    let mut beta = Array1::<f64>::zeros(p);
    let mut resid = design.y.clone();
    let mut out = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let gamma = lambda * n as f64 / 2.0;
        let mut converged = false;
        for _ in 0..CD_MAX_SWEEPS {
            let mut max_change = 0.0f64;
            let mut scale = 1.0f64;
            for j in 0..p {
                let xj = xt.row(j);
                let old = beta[j];
                let z = xj.dot(&resid) + norms[j] * old;
                let new = soft_threshold(z, gamma) / norms[j];
                if new != old {
                    resid.scaled_add(old - new, &xj);
                    beta[j] = new;
                    max_change = max_change.max((new - old).abs());
                }
                scale = scale.max(new.abs());
            }
            if max_change <= CD_TOLERANCE * scale {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(GpsError::Numerical(format!(
                "coordinate descent did not converge for lambda = {lambda}"
            )));
        }
        out.push(beta.clone());
    }
    Ok(out)
}

/// Largest violation of the lasso optimality conditions at `beta`.
pub fn kkt_violation(design: &StandardizedDesign, beta: &Array1<f64>, lambda: f64) -> f64 {
    let n = design.n() as f64;
    let resid = &design.y - &design.x.dot(beta);
    let grad = design.x.t().dot(&resid) * (2.0 / n);
    grad.iter()
        .zip(beta.iter())
        .map(|(&g, &b)| {
            if b == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g - lambda * b.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Degrees of freedom by forming `I - prod_s (I - alpha_s x_k(s) x_k(s)ᵀ)`
/// with full matrix products. Costs `O(N^3)` per step.
pub fn explicit_df_product(path: &SolutionPath, design: &StandardizedDesign) -> Result<DfSeries> {
    let n = design.n();
    let mut product = Array2::<f64>::eye(n);
    let mut values = Vec::with_capacity(path.len());
    for step in &path.steps {
        if let Some(k) = step.k {
            let x = design.x.column(k);
            let outer = Array2::from_shape_fn((n, n), |(i, j)| x[i] * x[j]);
            let factor = Array2::<f64>::eye(n) - outer * step.alpha_t;
            product = factor.dot(&product);
        }
        let trace_m: f64 = (0..n).map(|i| 1.0 - product[[i, i]]).sum();
        values.push(trace_m);
    }
    Ok(DfSeries {
        values,
        method: DfMethod::Dense,
    })
}

/// Least squares through the normal equations.
pub fn ols_normal_equations(design: &StandardizedDesign) -> Result<Array1<f64>> {
    linalg::lstsq_normal(design.x.view(), design.y.view())
}

/// Maximum coefficient gap between a path and lasso solutions with the same
/// ℓ1 norm. For each reference solution the path step with the closest ℓ1
/// norm is used.
pub fn matched_l1_gap(path: &SolutionPath, reference: &[Array1<f64>]) -> f64 {
    let steps: Vec<usize> = reference
        .iter()
        .map(|b| {
            let l1: f64 = b.iter().map(|v| v.abs()).sum();
            closest_l1_step(path, l1)
        })
        .collect();
    path.betas_at(&steps)
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .fold(0.0, f64::max)
}

fn closest_l1_step(path: &SolutionPath, l1: f64) -> usize {
    let mut best = 0;
    let mut gap = f64::INFINITY;
    for (s, step) in path.steps.iter().enumerate() {
        let d = (step.l1 - l1).abs();
        if d < gap {
            gap = d;
            best = s;
        }
    }
    best
}

/// One main-versus-reference comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub penalty: String,
    pub metric: String,
    pub main: f64,
    pub oracle: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(
        design: &StandardizedDesign,
        seed: u64,
        penalty: &PenaltySpec,
        metric: &str,
        main: f64,
        oracle: f64,
        tolerance: f64,
    ) -> Self {
        Self {
            n: design.n(),
            p: design.p(),
            seed,
            penalty: penalty.to_string(),
            metric: metric.to_string(),
            main,
            oracle,
            tolerance,
            pass: (main - oracle).abs() <= tolerance,
        }
    }
}

/// Largest `N` for which [`verify`] runs the `O(N^3)` explicit product.
pub const EXPLICIT_PRODUCT_MAX_N: usize = 60;

/// Runs every applicable oracle on a design and reports each comparison.
pub fn verify(
    design: &StandardizedDesign,
    penalty: &PenaltySpec,
    opts: &PathOptions,
    seed: u64,
) -> Result<Vec<OracleReport>> {
    let mut reports = Vec::new();
    let (n, p) = (design.n(), design.p());

    let ols = if n > p + 1 {
        let qr = path::ols_fit(design)?;
        let ne = ols_normal_equations(design)?;
        let rss = |b: &Array1<f64>| {
            let r = &design.y - &design.x.dot(b);
            r.dot(&r)
        };
        let (a, b) = (rss(&qr), rss(&ne));
        reports.push(OracleReport::new(
            design,
            seed,
            penalty,
            "ols_rss_qr_vs_normal_equations",
            a,
            b,
            1e-8 * b.max(1.0),
        ));
        Some(qr)
    } else {
        None
    };

    let fitted = path::fit(design, penalty, opts)?;
    let reduced = dof::reduced_replay(&fitted, design)?;
    let dense = dof::dense_series(&fitted, design)?;
    reports.push(OracleReport::new(
        design,
        seed,
        penalty,
        "df_reduced_vs_dense_max_abs_diff",
        reduced.max_abs_diff(&dense),
        0.0,
        1e-8,
    ));
    if n <= EXPLICIT_PRODUCT_MAX_N {
        let explicit = explicit_df_product(&fitted, design)?;
        reports.push(OracleReport::new(
            design,
            seed,
            penalty,
            "df_dense_vs_explicit_product_max_abs_diff",
            dense.max_abs_diff(&explicit),
            0.0,
            1e-10,
        ));
    }

    // Fitted values carried incrementally versus recomputed from coefficients.
    let last = fitted.last_index();
    let probe: Vec<usize> = (0..=last).step_by(1000.max(1)).chain([last]).collect();
    let drift = fitted
        .betas_at(&probe)
        .iter()
        .zip(&probe)
        .map(|(b, &s)| {
            let r = &design.y - &design.x.dot(b);
            (r.dot(&r) - fitted.steps[s].rss).abs() / r.dot(&r).max(1.0)
        })
        .fold(0.0, f64::max);
    reports.push(OracleReport::new(
        design,
        seed,
        penalty,
        "rss_incremental_vs_recomputed_rel",
        drift,
        0.0,
        1e-8,
    ));

    // Lasso path against coordinate descent at matched ℓ1 norms.
    if let Some(ols) = ols.as_ref() {
        let lasso_path = if *penalty == PenaltySpec::Lasso {
            fitted.clone()
        } else {
            path::fit(design, &PenaltySpec::Lasso, opts)?
        };
        let grid = lambda_grid(design, 30, 1e-3);
        let cd = cd_lasso(design, &grid)?;
        let kkt = cd
            .iter()
            .zip(&grid)
            .map(|(b, &l)| kkt_violation(design, b, l))
            .fold(0.0, f64::max);
        let lasso_spec = PenaltySpec::Lasso;
        reports.push(OracleReport::new(
            design, seed, &lasso_spec, "cd_lasso_kkt_violation", kkt, 0.0, 1e-8,
        ));
        let ols_inf = ols.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = (1e-2 * ols_inf).max(2.0 * lasso_path.delta_t);
        reports.push(OracleReport::new(
            design,
            seed,
            &lasso_spec,
            "lasso_path_vs_coordinate_descent_max_gap",
            matched_l1_gap(&lasso_path, &cd),
            0.0,
            tol,
        ));
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{standardize, RawDataset};
    use ndarray::array;

    fn small() -> StandardizedDesign {
        let raw = RawDataset::unnamed(
            array![
                [1.0, 0.2, -0.3],
                [0.5, -1.0, 0.8],
                [-0.7, 0.4, 1.1],
                [0.3, 0.9, -0.5],
                [-1.2, -0.1, 0.2],
                [0.8, 0.6, 0.9],
                [0.1, -0.6, -0.4]
            ],
            array![2.0, -1.0, 0.5, 1.5, -2.0, 1.0, 0.2],
        )
        .unwrap();
        standardize(&raw).unwrap()
    }

    #[test]
    fn cd_zero_at_lambda_max() {
        let d = small();
        let top = lambda_max(&d);
        let b = cd_lasso(&d, &[top, top * 1.0000001_f64.recip()]).unwrap();
        assert!(b[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn cd_approaches_ols() {
        let d = small();
        let ols = path::ols_fit(&d).unwrap();
        let b = cd_lasso(&d, &[1e-9]).unwrap();
        assert!((&b[0] - &ols).iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn cd_grid_validation() {
        let d = small();
        assert!(cd_lasso(&d, &[0.1, 0.2]).is_err());
        assert!(cd_lasso(&d, &[0.1, -0.2]).is_err());
    }

    #[test]
    fn kkt_holds_along_grid() {
        let d = small();
        let grid = lambda_grid(&d, 15, 1e-3);
        for (b, l) in cd_lasso(&d, &grid).unwrap().iter().zip(&grid) {
            assert!(kkt_violation(&d, b, *l) <= 1e-8);
        }
    }

    #[test]
    fn single_step_product() {
        let d = small();
        let path = path::fit(&d, &PenaltySpec::Lasso, &PathOptions::default().with_budget(200)).unwrap();
        let explicit = explicit_df_product(&path, &d).unwrap();
        assert_eq!(explicit.values[0], 0.0);
        assert!((explicit.values[1] - path.steps[1].alpha_t).abs() < 1e-14);
    }
}
