//! Degrees of freedom along a path.
//!
//! Each logged update `k` with factor `alpha_t` multiplies the complement
//! `I - M` on the left by `I - alpha_t x_k x_kᵀ`; the degrees of freedom are
//! `tr M`. The dense tracker keeps the `N x N` complement. The reduced tracker
//! works in the QR basis of the selected columns, where the same product is
//! `q x q` and `tr M = q - tr(product)`.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::StandardizedDesign;
use crate::error::{GpsError, Result};
use crate::linalg;
use crate::path::SolutionPath;

/// Relative tolerance on the diagonal of `R` below which the selected
/// columns are treated as collinear.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DfMethod {
    Dense,
    Reduced,
}

/// Degrees of freedom aligned with the steps of a [`SolutionPath`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfSeries {
    pub values: Vec<f64>,
    pub method: DfMethod,
}

impl DfSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs_diff(&self, other: &DfSeries) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_alpha_t(alpha_t: f64) -> Result<()> {
    if alpha_t > 0.0 && alpha_t <= 1.0 {
        Ok(())
    } else {
        Err(GpsError::Internal(format!(
            "step factor {alpha_t} outside (0, 1]"
        )))
    }
}

/// Left-multiplies `c` by `I - a v vᵀ` and returns the change in `tr(c)`.
fn rank_one_left(c: &mut Array2<f64>, v: ArrayView1<f64>, a: f64) -> f64 {
    // w = vᵀc, accumulated row by row so the matrix is read contiguously.
    let mut w = Array1::<f64>::zeros(c.ncols());
    for (row, &vi) in c.rows().into_iter().zip(v.iter()) {
        if vi != 0.0 {
            w.scaled_add(vi, &row);
        }
    }
    let mut trace_drop = 0.0;
    for (i, mut row) in c.axis_iter_mut(Axis(0)).enumerate() {
        let vi = v[i];
        if vi != 0.0 {
            row.scaled_add(-a * vi, &w);
            trace_drop += vi * w[i];
        }
    }
    a * trace_drop
}

/// Stores `I - M(t)` as a full `N x N` matrix.
#[derive(Debug, Clone)]
pub struct DenseTracker {
    complement: Array2<f64>,
    trace: f64,
}

impl DenseTracker {
    pub fn new(n: usize) -> Self {
        Self {
            complement: Array2::eye(n),
            trace: n as f64,
        }
    }

    pub fn complement(&self) -> &Array2<f64> {
        &self.complement
    }

    pub fn df(&self) -> f64 {
        self.complement.nrows() as f64 - self.trace
    }

    /// One `O(N^2)` update; returns the new degrees of freedom.
    pub fn update(&mut self, x_k: ArrayView1<f64>, alpha_t: f64) -> Result<f64> {
        check_alpha_t(alpha_t)?;
        if x_k.len() != self.complement.nrows() {
            return Err(GpsError::DimensionMismatch {
                expected: self.complement.nrows(),
                found: x_k.len(),
            });
        }
        self.trace -= rank_one_left(&mut self.complement, x_k, alpha_t);
        Ok(self.df())
    }
}

/// Stores the `q x q` product in the QR basis of the selected columns.
#[derive(Debug, Clone)]
pub struct ReducedTracker {
    pub q: Array2<f64>,
    pub r: Array2<f64>,
    pub selected_columns: Vec<usize>,
    /// Position of each predictor in `selected_columns`.
    slot: Vec<Option<usize>>,
    product: Array2<f64>,
    trace: f64,
}

impl ReducedTracker {
    /// Factorizes the selected columns. Returns `Ok(None)` when they are
    /// numerically collinear.
    pub fn new(design: &StandardizedDesign, selected: &[usize]) -> Result<Option<Self>> {
        let p = design.p();
        let mut slot = vec![None; p];
        for (pos, &j) in selected.iter().enumerate() {
            if j >= p || slot[j].is_some() {
                return Err(GpsError::Internal(format!(
                    "selected column list is not a set of distinct predictors (index {j})"
                )));
            }
            slot[j] = Some(pos);
        }
        let xs = design.x.select(Axis(1), selected);
        if xs.nrows() < xs.ncols() {
            return Ok(None);
        }
        let qr = linalg::householder_qr(xs.view())?;
        if qr.is_rank_deficient(linalg::frobenius(xs.view()), RANK_TOLERANCE) {
            return Ok(None);
        }
        let k = selected.len();
        Ok(Some(Self {
            q: qr.q,
            r: qr.r,
            selected_columns: selected.to_vec(),
            slot,
            product: Array2::eye(k),
            trace: k as f64,
        }))
    }

    pub fn dim(&self) -> usize {
        self.selected_columns.len()
    }

    pub fn product(&self) -> &Array2<f64> {
        &self.product
    }

    pub fn df(&self) -> f64 {
        self.dim() as f64 - self.trace
    }

    /// One `O(q^2)` update for predictor `k`.
    pub fn update(&mut self, k: usize, alpha_t: f64) -> Result<f64> {
        check_alpha_t(alpha_t)?;
        let pos = self
            .slot
            .get(k)
            .copied()
            .flatten()
            .ok_or_else(|| GpsError::Internal(format!("step updates unselected column {k}")))?;
        let r_k = self.r.column(pos);
        self.trace -= rank_one_left(&mut self.product, r_k, alpha_t);
        Ok(self.df())
    }
}

/// Replays a path through the dense tracker.
pub fn dense_series(path: &SolutionPath, design: &StandardizedDesign) -> Result<DfSeries> {
    check_aligned(path, design)?;
    let mut tracker = DenseTracker::new(design.n());
    let mut values = Vec::with_capacity(path.len());
    for step in &path.steps {
        let df = match step.k {
            Some(k) => tracker.update(design.x.column(k), step.alpha_t)?,
            None => tracker.df(),
        };
        values.push(df);
    }
    Ok(DfSeries {
        values,
        method: DfMethod::Dense,
    })
}

/// Replays a path through the reduced tracker, falling back to the dense
/// tracker when the selected columns are collinear.
pub fn reduced_replay(path: &SolutionPath, design: &StandardizedDesign) -> Result<DfSeries> {
    check_aligned(path, design)?;
    let Some(mut tracker) = ReducedTracker::new(design, &path.selected)? else {
        log::warn!(
            "selected columns are numerically collinear; using the dense tracker instead"
        );
        return dense_series(path, design);
    };
    let mut values = Vec::with_capacity(path.len());
    for step in &path.steps {
        let df = match step.k {
            Some(k) => tracker.update(k, step.alpha_t)?,
            None => tracker.df(),
        };
        values.push(df);
    }
    Ok(DfSeries {
        values,
        method: DfMethod::Reduced,
    })
}

pub fn series(
    path: &SolutionPath,
    design: &StandardizedDesign,
    method: DfMethod,
) -> Result<DfSeries> {
    match method {
        DfMethod::Dense => dense_series(path, design),
        DfMethod::Reduced => reduced_replay(path, design),
    }
}

fn check_aligned(path: &SolutionPath, design: &StandardizedDesign) -> Result<()> {
    if path.n != design.n() || path.p != design.p() {
        return Err(GpsError::DimensionMismatch {
            expected: design.n() * design.p(),
            found: path.n * path.p,
        });
    }
    Ok(())
}

/// Number of nonzero coefficients.
pub fn zou_df(beta: ArrayView1<f64>) -> usize {
    beta.iter().filter(|b| **b != 0.0).count()
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub replicates: usize,
}

/// Replicate `b`'s generator: the seed's ChaCha8 stream number `b`.
pub fn replicate_rng(seed: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b);
    rng
}

/// Draws `y = center + tau * eps` for replicate `b`.
pub fn perturbed_response(center: ArrayView1<f64>, tau2: f64, seed: u64, b: u64) -> Array1<f64> {
    let mut rng = replicate_rng(seed, b);
    let tau = tau2.sqrt();
    center.mapv(|c| {
        let e: f64 = StandardNormal.sample(&mut rng);
        c + tau * e
    })
}

/// Estimates `sum_i cov(mu_hat_i, y_i) / tau2` by simulation.
///
/// Replicates run in parallel; each uses its own stream so the result does
/// not depend on scheduling. The standard error is the delete-one jackknife.
pub fn monte_carlo_df<F>(
    fitter: F,
    center: ArrayView1<f64>,
    tau2: f64,
    replicates: usize,
    seed: u64,
) -> Result<McEstimate>
where
    F: Fn(&Array1<f64>) -> Result<Array1<f64>> + Sync,
{
    if replicates < 100 {
        return Err(GpsError::InvalidParameter(format!(
            "need at least 100 replicates, got {replicates}"
        )));
    }
    if !(tau2 > 0.0 && tau2.is_finite()) {
        return Err(GpsError::InvalidParameter(format!(
            "noise variance must be positive, got {tau2}"
        )));
    }
    let draws: Vec<(Array1<f64>, Array1<f64>)> = (0..replicates as u64)
        .into_par_iter()
        .map(|b| {
            let y = perturbed_response(center, tau2, seed, b);
            let mu = fitter(&y)?;
            if mu.len() != y.len() {
                return Err(GpsError::DimensionMismatch {
                    expected: y.len(),
                    found: mu.len(),
                });
            }
            Ok((y, mu))
        })
        .collect::<Result<_>>()?;
    Ok(covariance_df(&draws, tau2))
}

/// Sum of per-coordinate sample covariances divided by `tau2`, with a
/// jackknife standard error.
pub fn covariance_df(draws: &[(Array1<f64>, Array1<f64>)], tau2: f64) -> McEstimate {
    let b = draws.len();
    let n = draws[0].0.len();
    let bf = b as f64;
    let mut sy = vec![0.0; n];
    let mut sm = vec![0.0; n];
    let mut smy = vec![0.0; n];
    for (y, mu) in draws {
        for i in 0..n {
            sy[i] += y[i];
            sm[i] += mu[i];
            smy[i] += y[i] * mu[i];
        }
    }
    let full: f64 = (0..n)
        .map(|i| (smy[i] - sm[i] * sy[i] / bf) / (bf - 1.0))
        .sum::<f64>()
        / tau2;
    let m = bf - 1.0;
    let loo: Vec<f64> = draws
        .iter()
        .map(|(y, mu)| {
            (0..n)
                .map(|i| {
                    let sy_ = sy[i] - y[i];
                    let sm_ = sm[i] - mu[i];
                    let smy_ = smy[i] - y[i] * mu[i];
                    (smy_ - sm_ * sy_ / m) / (m - 1.0)
                })
                .sum::<f64>()
                / tau2
        })
        .collect();
    let mean_loo = loo.iter().sum::<f64>() / bf;
    let var = loo.iter().map(|v| (v - mean_loo).powi(2)).sum::<f64>() * (bf - 1.0) / bf;
    McEstimate {
        estimate: full,
        std_error: var.sqrt(),
        replicates: b,
    }
}
