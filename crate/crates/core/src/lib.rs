//! Regularization paths by generalized path seeking, with online
//! degrees-of-freedom tracking and model selection.

pub mod criteria;
pub mod dataset;
pub mod dof;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod path;
pub mod penalty;
pub mod sim;

pub use criteria::{AiccForm, Criterion, CriterionTable, SelectionResult};
pub use dataset::{RawDataset, StandardizedDesign};
pub use dof::{DfMethod, DfSeries};
pub use error::{ErrorKind, GpsError, Result};
pub use path::{DeltaT, PathOptions, SolutionPath, StopReason};
pub use penalty::{AbsGradient, PenaltySpec};
