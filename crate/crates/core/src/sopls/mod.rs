//! Two-block sequentially orthogonalized PLS.
//!
//! Block 1 is modelled first. Block 2 is then centred, stripped of everything
//! block-1 scores can explain, and modelled against the block-1 residual. The
//! fused prediction is the sum of both parts. Block order matters and is kept
//! in the model file.

mod cv;
mod file;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::data::{DataBlock, DataError, ResponseVector};
use crate::pls::{PlsError, PlsModel, DEGENERATE_TOL};

pub use cv::{sopls_cv, sopls_cv_matrix, LvGrid};
pub use file::{decode_sopls, encode_sopls, SOPLS_MAGIC, SOPLS_VERSION};

#[derive(Debug, Error)]
pub enum SoplsError {
    #[error("block 1 needs at least one latent variable")]
    NoBlock1Components,
    #[error("block {block}: requested {requested} latent variables, at most {max} allowed")]
    ComponentsOutOfRange { block: u8, requested: usize, max: usize },
    #[error("block {block}: expected {expected} columns, got {got}")]
    WidthMismatch { block: u8, expected: usize, got: usize },
    #[error("blocks have {0} and {1} rows")]
    RowMismatch(usize, usize),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Pls(#[from] PlsError),
    #[error(transparent)]
    Data(#[from] DataError),
}

pub type Result<T> = std::result::Result<T, SoplsError>;

/// A fitted two-block model.
///
/// `ortho_map` is `D = (T1'T1)^-1 T1' X2c` from training. New block-2 rows are
/// orthogonalized as `X2c - T1_new D`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoplsModel {
    pub(crate) tags: [String; 2],
    pub(crate) y_mean: f64,
    pub(crate) block1: Option<PlsModel>,
    pub(crate) x2_mean: DVector<f64>,
    pub(crate) ortho_map: DMatrix<f64>,
    pub(crate) block2: Option<PlsModel>,
}

fn centre(x: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut c = x.clone();
    for (j, mut col) in c.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    c
}

fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.mean()))
}

/// Least-squares map `(T'T)^-1 T' X`.
fn regression_map(t: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let gram = t.tr_mul(t);
    let rhs = t.tr_mul(x);
    match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram.pseudo_inverse(1e-12).map(|g| g * rhs).unwrap_or_else(|_| DMatrix::zeros(t.ncols(), x.ncols())),
    }
}

impl SoplsModel {
    /// Fits `a1 >= 1` block-1 and `a2 >= 0` block-2 components on row-aligned
    /// matrices.
    pub fn fit(x1: &DMatrix<f64>, x2: &DMatrix<f64>, y: &[f64], a1: usize, a2: usize) -> Result<Self> {
        if a1 == 0 {
            return Err(SoplsError::NoBlock1Components);
        }
        Self::fit_any(x1, x2, y, a1, a2)
    }

    /// As [`SoplsModel::fit`], but `a1 = 0` gives a pure block-2 model.
    pub(crate) fn fit_any(x1: &DMatrix<f64>, x2: &DMatrix<f64>, y: &[f64], a1: usize, a2: usize) -> Result<Self> {
        let n = x1.nrows();
        if x2.nrows() != n {
            return Err(SoplsError::RowMismatch(n, x2.nrows()));
        }
        if y.len() != n {
            return Err(PlsError::LengthMismatch { expected: n, got: y.len() }.into());
        }
        let max2 = n.saturating_sub(1).min(x2.ncols());
        if a2 > max2 {
            return Err(SoplsError::ComponentsOutOfRange { block: 2, requested: a2, max: max2 });
        }
        let block1 = if a1 == 0 {
            None
        } else {
            let max1 = n.saturating_sub(1).min(x1.ncols());
            if a1 > max1 {
                return Err(SoplsError::ComponentsOutOfRange { block: 1, requested: a1, max: max1 });
            }
            Some(PlsModel::fit(x1, y, a1)?)
        };
        Self::from_block1(block1, x2, y, a2)
    }

    /// Completes a model given an already fitted block-1 model (or none).
    pub(crate) fn from_block1(block1: Option<PlsModel>, x2: &DMatrix<f64>, y: &[f64], a2: usize) -> Result<Self> {
        let n = y.len();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let x2_mean = column_means(x2);
        let x2c = centre(x2, &x2_mean);
        let (residual, ortho_map, x2_perp) = match &block1 {
            Some(m) => {
                let fitted = m.fitted();
                let r: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
                let t1 = m.scores();
                let d = regression_map(t1, &x2c);
                let perp = &x2c - t1 * &d;
                (r, d, perp)
            }
            None => (y.iter().map(|v| v - y_mean).collect(), DMatrix::zeros(0, x2.ncols()), x2c),
        };
        let spread = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>().sqrt();
        let left = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
        // A residual at round-off level carries nothing for block 2 to model.
        let block2 = if a2 == 0 || left <= DEGENERATE_TOL * spread {
            None
        } else {
            match PlsModel::fit(&x2_perp, &residual, a2) {
                Ok(m) => Some(m),
                // Block 1 already explains y exactly.
                Err(PlsError::ZeroVarianceResponse) => None,
                Err(e) => return Err(e.into()),
            }
        };
        Ok(Self { tags: [String::from("block1"), String::from("block2")], y_mean, block1, x2_mean, ortho_map, block2 })
    }

    pub fn a1(&self) -> usize {
        self.block1.as_ref().map_or(0, PlsModel::n_lv)
    }

    /// Achieved block-2 components; may be below the request when the
    /// residual is exhausted.
    pub fn a2(&self) -> usize {
        self.block2.as_ref().map_or(0, PlsModel::n_lv)
    }

    pub fn block1(&self) -> Option<&PlsModel> {
        self.block1.as_ref()
    }

    pub fn block2(&self) -> Option<&PlsModel> {
        self.block2.as_ref()
    }

    pub fn block_tags(&self) -> [&str; 2] {
        [&self.tags[0], &self.tags[1]]
    }

    pub fn x2_mean(&self) -> &DVector<f64> {
        &self.x2_mean
    }

    pub fn ortho_map(&self) -> &DMatrix<f64> {
        &self.ortho_map
    }

    pub fn n_vars(&self) -> (usize, usize) {
        let p1 = self.block1.as_ref().map_or(0, PlsModel::n_vars);
        (p1, self.x2_mean.len())
    }

    /// Block-2 rows centred and orthogonalized against block-1 scores.
    pub fn orthogonalize(&self, x1: &DMatrix<f64>, x2: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (p1, p2) = self.n_vars();
        if x2.ncols() != p2 {
            return Err(SoplsError::WidthMismatch { block: 2, expected: p2, got: x2.ncols() });
        }
        if x1.nrows() != x2.nrows() {
            return Err(SoplsError::RowMismatch(x1.nrows(), x2.nrows()));
        }
        let x2c = centre(x2, &self.x2_mean);
        match &self.block1 {
            Some(m) => {
                if x1.ncols() != p1 {
                    return Err(SoplsError::WidthMismatch { block: 1, expected: p1, got: x1.ncols() });
                }
                Ok(x2c - m.transform(x1)? * &self.ortho_map)
            }
            None => Ok(x2c),
        }
    }

    /// Block-1 part and block-2 part of the prediction.
    pub fn predict_parts(&self, x1: &DMatrix<f64>, x2: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        let perp = self.orthogonalize(x1, x2)?;
        let y1 = match &self.block1 {
            Some(m) => m.predict(x1)?,
            None => vec![self.y_mean; x1.nrows()],
        };
        let y2 = match &self.block2 {
            Some(m) => m.predict(&perp)?,
            None => vec![0.0; x1.nrows()],
        };
        Ok((y1, y2))
    }

    pub fn predict(&self, x1: &DMatrix<f64>, x2: &DMatrix<f64>) -> Result<Vec<f64>> {
        let (y1, y2) = self.predict_parts(x1, x2)?;
        if self.block2.is_none() {
            return Ok(y1);
        }
        Ok(y1.iter().zip(&y2).map(|(a, b)| a + b).collect())
    }
}

/// Block 2 must carry the same sample ids as block 1; rows follow block 1.
fn align(x1: &DataBlock, x2: &DataBlock, y: &ResponseVector) -> Result<(DataBlock, Vec<f64>)> {
    if x1.n_samples() != x2.n_samples() {
        let missing: Vec<String> = x2.ids().iter().filter(|id| !x1.ids().contains(id)).cloned().collect();
        return Err(DataError::Misaligned { missing_in_x: missing, missing_in_y: vec![] }.into());
    }
    let x2 = x2.select(x1.ids())?;
    let y = y.aligned_to(x1)?;
    Ok((x2, y))
}

pub fn sopls_fit(x1: &DataBlock, x2: &DataBlock, y: &ResponseVector, a1: usize, a2: usize) -> Result<SoplsModel> {
    let (x2, y) = align(x1, x2, y)?;
    let mut m = SoplsModel::fit(x1.x(), x2.x(), &y, a1, a2)?;
    m.tags = [x1.tag().to_string(), x2.tag().to_string()];
    Ok(m)
}

/// Block 2 rows are matched to block 1 by id.
pub fn sopls_predict(model: &SoplsModel, x1: &DataBlock, x2: &DataBlock) -> Result<Vec<f64>> {
    if x1.n_samples() != x2.n_samples() {
        return Err(SoplsError::RowMismatch(x1.n_samples(), x2.n_samples()));
    }
    let x2 = x2.select(x1.ids())?;
    model.predict(x1.x(), x2.x())
}
