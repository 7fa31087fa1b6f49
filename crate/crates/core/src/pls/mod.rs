//! Single-response PLS regression, cross-validated model-order selection and
//! fit statistics.
//!
//! Predictors are mean-centred only. Component extraction follows SIMPLS, so
//! the coefficient vector of every nested model is available directly.

mod cv;
mod file;
mod metrics;
mod model;

use thiserror::Error;

use crate::data::DataError;

pub use cv::{cross_validate, cross_validate_matrix, select_lv, CvCurve, FoldSpec, Folds};
pub use file::{decode_model, encode_model, PLS_MAGIC, PLS_VERSION};
pub(crate) use file::{read_model, Reader};
pub(crate) use cv::rows;
pub use metrics::{metrics, Metrics};
pub use model::{pls_fit, pls_predict, PlsModel, DEGENERATE_TOL};

#[derive(Debug, Error)]
pub enum PlsError {
    #[error("requested {requested} latent variables, at most {max} allowed")]
    ComponentsOutOfRange { requested: usize, max: usize },
    #[error("response has zero variance")]
    ZeroVarianceResponse,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("model expects {expected} predictor columns, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("fold {fold} leaves {train} training samples, need at least {needed}")]
    FoldTooSmall { fold: usize, train: usize, needed: usize },
    #[error("k = {k} folds, but only {n} samples")]
    TooManyFolds { k: usize, n: usize },
    #[error("k-fold needs k >= 2, got {0}")]
    InvalidFoldCount(usize),
    #[error("correlation undefined (zero variance); rmse = {rmse}")]
    UndefinedCorrelation { rmse: f64 },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

pub type Result<T> = std::result::Result<T, PlsError>;
