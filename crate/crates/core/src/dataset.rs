//! Tabular input, centering/scaling, and synthetic Gaussian designs.
//!
//! Predictors are centered and divided by the root sum of squares of the
//! centered column, so every column of the standardized design has zero mean
//! and unit Euclidean norm. The response is centered only.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{GpsError, Result};
use crate::linalg;

/// Raw predictors and response, before any transformation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    /// `N x p` predictor matrix in file order.
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub predictor_names: Vec<String>,
    pub response_name: String,
}

impl RawDataset {
    pub fn new(
        x: Array2<f64>,
        y: Array1<f64>,
        predictor_names: Vec<String>,
        response_name: impl Into<String>,
    ) -> Result<Self> {
        let (n, p) = x.dim();
        if y.len() != n {
            return Err(GpsError::DimensionMismatch {
                expected: n,
                found: y.len(),
            });
        }
        if predictor_names.len() != p {
            return Err(GpsError::DimensionMismatch {
                expected: p,
                found: predictor_names.len(),
            });
        }
        if n < 2 {
            return Err(GpsError::TooFewRows {
                needed: 2,
                found: n,
            });
        }
        Ok(Self {
            x,
            y,
            predictor_names,
            response_name: response_name.into(),
        })
    }

    /// Builds a dataset with generated column names `x1..xp` and response `y`.
    pub fn unnamed(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(x, y, names, "y")
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Rows selected by `idx`, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let x = self.x.select(Axis(0), idx);
        let y = self.y.select(Axis(0), idx);
        Self::new(
            x,
            y,
            self.predictor_names.clone(),
            self.response_name.clone(),
        )
    }
}

/// Centered response and unit-norm centered predictors, plus what is needed
/// to map coefficients back to the original units.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedDesign {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub y_mean: f64,
    pub x_means: Array1<f64>,
    /// Root sum of squares of each centered raw column.
    pub x_scales: Array1<f64>,
    pub predictor_names: Vec<String>,
    pub response_name: String,
}

impl StandardizedDesign {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Fitted values `X beta` on the standardized scale.
    pub fn fitted(&self, beta: ArrayView1<f64>) -> Array1<f64> {
        self.x.dot(&beta)
    }
}

/// Reads a comma-separated file with a header row.
pub fn load_csv(path: impl AsRef<Path>, response: &str) -> Result<RawDataset> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| GpsError::Io {
        path: display.clone(),
        source,
    })?;
    read_csv(file, response, &display)
}

/// Same as [`load_csv`] but from any reader; `origin` labels error messages.
pub fn read_csv<R: std::io::Read>(reader: R, response: &str, origin: &str) -> Result<RawDataset> {
    let csv_err = |e: csv::Error| GpsError::Csv {
        path: origin.to_string(),
        message: e.to_string(),
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let resp_idx = header
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| GpsError::MissingColumn(response.to_string()))?;
    let predictor_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != resp_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let p = predictor_names.len();

    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        // Header is line 1, first data row is line 2.
        let line = r + 2;
        if rec.len() != header.len() {
            return Err(GpsError::Csv {
                path: origin.to_string(),
                message: format!(
                    "line {line}: expected {} fields, found {}",
                    header.len(),
                    rec.len()
                ),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| GpsError::NonNumeric {
                row: line,
                column: header[c].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(GpsError::NonFinite {
                    row: line,
                    column: header[c].clone(),
                });
            }
            if c == resp_idx {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    let n = ys.len();
    if n < 2 {
        return Err(GpsError::TooFewRows {
            needed: 2,
            found: n,
        });
    }
    let x = Array2::from_shape_vec((n, p), xs)
        .map_err(|e| GpsError::Internal(format!("csv shape: {e}")))?;
    RawDataset::new(x, Array1::from(ys), predictor_names, response)
}

/// Centers the response, centers and unit-normalizes every predictor.
pub fn standardize(raw: &RawDataset) -> Result<StandardizedDesign> {
    let n = raw.n();
    let p = raw.p();
    let y_mean = raw.y.sum() / n as f64;
    let y = raw.y.mapv(|v| v - y_mean);

    let mut x = raw.x.clone();
    let mut x_means = Array1::<f64>::zeros(p);
    let mut x_scales = Array1::<f64>::zeros(p);
    for (j, mut col) in x.axis_iter_mut(Axis(1)).enumerate() {
        let mean = col.sum() / n as f64;
        col.mapv_inplace(|v| v - mean);
        let ss: f64 = col.iter().map(|v| v * v).sum();
        let magnitude = raw.x.column(j).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if ss <= 0.0 || ss.sqrt() <= 1e-12 * magnitude.max(f64::MIN_POSITIVE) * (n as f64).sqrt()
        {
            return Err(GpsError::ZeroVariance(raw.predictor_names[j].clone()));
        }
        let scale = ss.sqrt();
        col.mapv_inplace(|v| v / scale);
        x_means[j] = mean;
        x_scales[j] = scale;
    }
    Ok(StandardizedDesign {
        x,
        y,
        y_mean,
        x_means,
        x_scales,
        predictor_names: raw.predictor_names.clone(),
        response_name: raw.response_name.clone(),
    })
}

/// Coefficients in the original units: returns `(intercept, beta)`.
pub fn destandardize(
    beta_std: ArrayView1<f64>,
    design: &StandardizedDesign,
) -> Result<(f64, Array1<f64>)> {
    if beta_std.len() != design.p() {
        return Err(GpsError::DimensionMismatch {
            expected: design.p(),
            found: beta_std.len(),
        });
    }
    let beta = &beta_std / &design.x_scales;
    let intercept = design.y_mean - beta.dot(&design.x_means);
    Ok((intercept, beta))
}

/// Predictions for raw-unit predictor rows from original-unit coefficients.
pub fn predict_raw(x_raw: &Array2<f64>, intercept: f64, beta: ArrayView1<f64>) -> Array1<f64> {
    x_raw.dot(&beta) + intercept
}

/// Correlation structure of Gaussian predictors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "rho", rename_all = "lowercase")]
pub enum Correlation {
    /// `cor(i, j) = rho^|i-j|`
    Ar1(f64),
    /// `cor(i, j) = rho` for `i != j`
    Equi(f64),
    Identity,
}

impl Correlation {
    pub fn validate(&self, p: usize) -> Result<()> {
        match *self {
            Correlation::Ar1(rho) if !(rho > -1.0 && rho < 1.0) => Err(
                GpsError::InvalidParameter(format!("AR(1) correlation {rho} outside (-1, 1)")),
            ),
            Correlation::Equi(rho) => {
                let lower = if p > 1 { -1.0 / (p as f64 - 1.0) } else { -1.0 };
                if rho > lower && rho < 1.0 {
                    Ok(())
                } else {
                    Err(GpsError::InvalidParameter(format!(
                        "equicorrelation {rho} outside ({lower}, 1) for p = {p}"
                    )))
                }
            }
            _ => Ok(()),
        }
    }

    pub fn matrix(&self, p: usize) -> Array2<f64> {
        Array2::from_shape_fn((p, p), |(i, j)| {
            if i == j {
                return 1.0;
            }
            match *self {
                Correlation::Ar1(rho) => rho.powi((i as i32 - j as i32).abs()),
                Correlation::Equi(rho) => rho,
                Correlation::Identity => 0.0,
            }
        })
    }
}

/// Data-generating model for simulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueModel {
    pub beta_true: Vec<f64>,
    /// Noise standard deviation.
    pub sigma: f64,
    pub correlation: Correlation,
}

impl TrueModel {
    pub fn p(&self) -> usize {
        self.beta_true.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta_true.is_empty() {
            return Err(GpsError::InvalidParameter("empty coefficient vector".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(GpsError::InvalidParameter(format!(
                "noise s.d. must be finite and non-negative, got {}",
                self.sigma
            )));
        }
        if self.beta_true.iter().any(|b| !b.is_finite()) {
            return Err(GpsError::InvalidParameter("non-finite coefficient".into()));
        }
        self.correlation.validate(self.p())
    }

    /// Noise-free mean `X beta_true` on a realized design.
    pub fn mean_response(&self, raw: &RawDataset) -> Array1<f64> {
        raw.x.dot(&Array1::from(self.beta_true.clone()))
    }
}

/// Draws `n` rows: predictors `N(0, C)` via the Cholesky factor of the
/// correlation matrix, response `X beta + eps` with `eps ~ N(0, sigma^2)`.
///
/// The stream is ChaCha8 seeded with `seed`; predictors are filled row by
/// row, then the `n` noise draws follow.
pub fn generate_gaussian(model: &TrueModel, n: usize, seed: u64) -> Result<RawDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_gaussian_with(model, n, &mut rng)
}

/// [`generate_gaussian`] drawing from a caller-supplied generator.
pub fn generate_gaussian_with<R: rand::Rng + ?Sized>(
    model: &TrueModel,
    n: usize,
    rng: &mut R,
) -> Result<RawDataset> {
    model.validate()?;
    if n < 2 {
        return Err(GpsError::TooFewRows {
            needed: 2,
            found: n,
        });
    }
    let p = model.p();
    let chol = linalg::cholesky(model.correlation.matrix(p).view())?;
    let mut z = Array2::<f64>::zeros((n, p));
    for v in z.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
    // Rows of Z are iid N(0, I); X = Z Lᵀ gives rows N(0, L Lᵀ).
    let x = z.dot(&chol.t());
    let beta = Array1::from(model.beta_true.clone());
    let mut y = x.dot(&beta);
    for v in y.iter_mut() {
        let e: f64 = StandardNormal.sample(rng);
        *v += model.sigma * e;
    }
    RawDataset::unnamed(x, y)
}
