//! Penalty families expressed through their derivative with respect to
//! `|beta_j|`, which is all the path engine needs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{GpsError, Result};

/// Lower bound applied to a penalty weight before it is used as a divisor.
pub const WEIGHT_FLOOR: f64 = 1e-12;

/// A penalty usable by the path engine: `weight(|b|)` must be strictly
/// positive for every coefficient magnitude.
pub trait AbsGradient: Send + Sync {
    /// `dP/d|beta_j|` evaluated at `|beta_j| = abs_beta`.
    fn weight(&self, abs_beta: f64) -> f64;

    /// Whether every coordinate's weight is identically 1, which lets the
    /// engine skip the division.
    fn is_unit(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "alpha", rename_all = "lowercase")]
pub enum PenaltySpec {
    /// `sum |b|`
    Lasso,
    /// `sum { a b^2 / 2 + (1 - a) |b| }`, `0 <= a <= 1`
    #[serde(rename = "enet")]
    ElasticNet(f64),
    /// `sum log{ a + (1 - a) |b| }`, `0 < a < 1`
    #[serde(rename = "genet")]
    GeneralizedElasticNet(f64),
}

impl PenaltySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PenaltySpec::Lasso => Ok(()),
            PenaltySpec::ElasticNet(a) => {
                if (0.0..=1.0).contains(&a) {
                    Ok(())
                } else {
                    Err(GpsError::InvalidParameter(format!(
                        "elastic net mixing parameter must lie in [0, 1], got {a}"
                    )))
                }
            }
            PenaltySpec::GeneralizedElasticNet(a) => {
                if a > 0.0 && a < 1.0 {
                    Ok(())
                } else {
                    Err(GpsError::InvalidParameter(format!(
                        "generalized elastic net mixing parameter must lie in (0, 1), got {a}"
                    )))
                }
            }
        }
    }

    /// Builds from a family name and optional mixing parameter.
    pub fn from_parts(family: &str, alpha: Option<f64>) -> Result<Self> {
        let spec = match family {
            "lasso" => PenaltySpec::Lasso,
            "enet" => PenaltySpec::ElasticNet(alpha.unwrap_or(0.5)),
            "genet" => PenaltySpec::GeneralizedElasticNet(alpha.unwrap_or(0.5)),
            other => {
                return Err(GpsError::InvalidParameter(format!(
                    "unknown penalty `{other}` (expected lasso, enet or genet)"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            PenaltySpec::Lasso => "lasso",
            PenaltySpec::ElasticNet(_) => "enet",
            PenaltySpec::GeneralizedElasticNet(_) => "genet",
        }
    }

    pub fn mixing(&self) -> Option<f64> {
        match *self {
            PenaltySpec::Lasso => None,
            PenaltySpec::ElasticNet(a) | PenaltySpec::GeneralizedElasticNet(a) => Some(a),
        }
    }

    /// Penalty weights `p_j` for a whole coefficient vector.
    pub fn gradient_abs(&self, beta: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(beta.iter().map(|b| self.weight(b.abs())).collect())
    }
}

impl AbsGradient for PenaltySpec {
    #[inline]
    fn weight(&self, abs_beta: f64) -> f64 {
        match *self {
            PenaltySpec::Lasso => 1.0,
            PenaltySpec::ElasticNet(a) => a * abs_beta + (1.0 - a),
            PenaltySpec::GeneralizedElasticNet(a) => (1.0 - a) / (a + (1.0 - a) * abs_beta),
        }
    }

    fn is_unit(&self) -> bool {
        match *self {
            PenaltySpec::Lasso => true,
            PenaltySpec::ElasticNet(a) => a == 0.0,
            PenaltySpec::GeneralizedElasticNet(_) => false,
        }
    }
}

impl fmt::Display for PenaltySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mixing() {
            None => write!(f, "{}", self.family_name()),
            Some(a) => write!(f, "{}({a})", self.family_name()),
        }
    }
}

impl FromStr for PenaltySpec {
    type Err = GpsError;

    /// Accepts `lasso`, `enet`, `genet`, or `enet(0.3)` style strings.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(open) = s.find('(') {
            let close = s
                .strip_suffix(')')
                .ok_or_else(|| GpsError::InvalidParameter(format!("malformed penalty `{s}`")))?;
            let alpha: f64 = close[open + 1..].trim().parse().map_err(|_| {
                GpsError::InvalidParameter(format!("malformed mixing parameter in `{s}`"))
            })?;
            PenaltySpec::from_parts(&s[..open], Some(alpha))
        } else {
            PenaltySpec::from_parts(s, None)
        }
    }
}
