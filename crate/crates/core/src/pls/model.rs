use nalgebra::{DMatrix, DVector};

use crate::data::{DataBlock, ResponseVector};

use super::{PlsError, Result};

/// Extraction stops once the remaining covariance `X'y` falls below this
/// fraction of its initial norm.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// A fitted single-response PLS model (SIMPLS, mean-centred, unscaled).
///
/// `weights` (R) map centred predictors to scores: `T = (X - x_mean) R`.
/// Score columns are orthonormal.
#[derive(Debug, Clone, PartialEq)]
pub struct PlsModel {
    pub(crate) x_mean: DVector<f64>,
    pub(crate) y_mean: f64,
    pub(crate) weights: DMatrix<f64>,
    pub(crate) x_loadings: DMatrix<f64>,
    pub(crate) y_loadings: DVector<f64>,
    pub(crate) scores: DMatrix<f64>,
    pub(crate) beta_aug: DVector<f64>,
}

impl PlsModel {
    /// Fits on a raw matrix. `n_lv` must satisfy `1 <= n_lv <= min(n - 1, p)`.
    ///
    /// The fitted model may hold fewer components than requested when the
    /// remaining covariance vanishes; see [`PlsModel::n_lv`].
    pub fn fit(x: &DMatrix<f64>, y: &[f64], n_lv: usize) -> Result<Self> {
        let (n, p) = x.shape();
        if y.len() != n {
            return Err(PlsError::LengthMismatch { expected: n, got: y.len() });
        }
        if n < 2 {
            return Err(PlsError::TooFewSamples(n));
        }
        let max = (n - 1).min(p);
        if n_lv == 0 || n_lv > max {
            return Err(PlsError::ComponentsOutOfRange { requested: n_lv, max });
        }
        let x_mean = DVector::from_iterator(p, x.column_iter().map(|c| c.mean()));
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        if yc.norm() == 0.0 {
            return Err(PlsError::ZeroVarianceResponse);
        }
        let mut xc = x.clone();
        for (j, mut col) in xc.column_iter_mut().enumerate() {
            col.add_scalar_mut(-x_mean[j]);
        }

        let mut s = xc.tr_mul(&yc);
        let s0 = s.norm();
        let mut r_cols: Vec<DVector<f64>> = Vec::with_capacity(n_lv);
        let mut t_cols: Vec<DVector<f64>> = Vec::with_capacity(n_lv);
        let mut p_cols: Vec<DVector<f64>> = Vec::with_capacity(n_lv);
        let mut v_cols: Vec<DVector<f64>> = Vec::with_capacity(n_lv);
        let mut q = Vec::with_capacity(n_lv);
        for _ in 0..n_lv {
            if s.norm() <= DEGENERATE_TOL * s0 {
                break;
            }
            let mut r = s.clone();
            let mut t = &xc * &r;
            // Re-orthogonalize against earlier scores, keeping t = Xc r exact.
            for (tj, rj) in t_cols.iter().zip(&r_cols) {
                let c = tj.dot(&t);
                t.axpy(-c, tj, 1.0);
                r.axpy(-c, rj, 1.0);
            }
            let tn = t.norm();
            if tn.is_nan() || tn == 0.0 {
                break;
            }
            t /= tn;
            r /= tn;
            let pa = xc.tr_mul(&t);
            let qa = yc.dot(&t);
            let mut v = pa.clone();
            for _ in 0..2 {
                for vj in &v_cols {
                    let c = vj.dot(&v);
                    v.axpy(-c, vj, 1.0);
                }
            }
            let vn = v.norm();
            if vn > 0.0 {
                v /= vn;
                let c = v.dot(&s);
                s.axpy(-c, &v, 1.0);
            }
            r_cols.push(r);
            t_cols.push(t);
            p_cols.push(pa);
            v_cols.push(v);
            q.push(qa);
        }
        if r_cols.is_empty() {
            return Err(PlsError::ZeroVarianceResponse);
        }
        let weights = DMatrix::from_columns(&r_cols);
        let scores = DMatrix::from_columns(&t_cols);
        let x_loadings = DMatrix::from_columns(&p_cols);
        let y_loadings = DVector::from_vec(q);
        let beta_aug = augmented_beta(&weights, &y_loadings, &x_mean, y_mean, r_cols.len());
        Ok(Self { x_mean, y_mean, weights, x_loadings, y_loadings, scores, beta_aug })
    }

    pub fn n_lv(&self) -> usize {
        self.weights.ncols()
    }

    pub fn n_vars(&self) -> usize {
        self.x_mean.len()
    }

    pub fn x_mean(&self) -> &DVector<f64> {
        &self.x_mean
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn x_loadings(&self) -> &DMatrix<f64> {
        &self.x_loadings
    }

    pub fn y_loadings(&self) -> &DVector<f64> {
        &self.y_loadings
    }

    /// Training scores, n x A.
    pub fn scores(&self) -> &DMatrix<f64> {
        &self.scores
    }

    /// `[intercept, b_1, ..., b_p]` with `y_hat = [1 X] beta_aug`.
    pub fn beta_aug(&self) -> &DVector<f64> {
        &self.beta_aug
    }

    /// Augmented coefficients of the nested model using the first `a` components.
    pub fn beta_aug_for(&self, a: usize) -> DVector<f64> {
        augmented_beta(&self.weights, &self.y_loadings, &self.x_mean, self.y_mean, a.min(self.n_lv()))
    }

    /// The nested model holding the first `a` components. SIMPLS components do
    /// not depend on how many follow, so this equals a fresh fit with `a`.
    pub fn truncated(&self, a: usize) -> PlsModel {
        let a = a.clamp(1, self.n_lv());
        PlsModel {
            x_mean: self.x_mean.clone(),
            y_mean: self.y_mean,
            weights: self.weights.columns(0, a).into_owned(),
            x_loadings: self.x_loadings.columns(0, a).into_owned(),
            y_loadings: self.y_loadings.rows(0, a).into_owned(),
            scores: self.scores.columns(0, a).into_owned(),
            beta_aug: self.beta_aug_for(a),
        }
    }

    /// Training fitted values, `y_mean + T q`.
    pub fn fitted(&self) -> Vec<f64> {
        (&self.scores * &self.y_loadings).iter().map(|v| v + self.y_mean).collect()
    }

    fn check_width(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.ncols() != self.n_vars() {
            return Err(PlsError::WidthMismatch { expected: self.n_vars(), got: x.ncols() });
        }
        Ok(())
    }

    /// Scores of new rows, `(X - x_mean) R`.
    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_width(x)?;
        let mut xc = x.clone();
        for (j, mut col) in xc.column_iter_mut().enumerate() {
            col.add_scalar_mut(-self.x_mean[j]);
        }
        Ok(xc * &self.weights)
    }

    /// `[1 X] beta_aug`.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        self.check_width(x)?;
        let b = self.beta_aug.rows(1, self.n_vars());
        Ok((x * b).iter().map(|v| v + self.beta_aug[0]).collect())
    }

    /// Predictions of every nested model, `out[a - 1][i]` for `a` in `1..=n_lv`,
    /// accumulated through the scores.
    pub fn predict_nested(&self, x: &DMatrix<f64>) -> Result<Vec<Vec<f64>>> {
        let t = self.transform(x)?;
        let mut acc = vec![self.y_mean; x.nrows()];
        let mut out = Vec::with_capacity(self.n_lv());
        for a in 0..self.n_lv() {
            let qa = self.y_loadings[a];
            for (i, v) in acc.iter_mut().enumerate() {
                *v += t[(i, a)] * qa;
            }
            out.push(acc.clone());
        }
        Ok(out)
    }
}

fn augmented_beta(
    weights: &DMatrix<f64>,
    q: &DVector<f64>,
    x_mean: &DVector<f64>,
    y_mean: f64,
    a: usize,
) -> DVector<f64> {
    let beta = weights.columns(0, a) * q.rows(0, a);
    let mut out = DVector::zeros(beta.len() + 1);
    out[0] = y_mean - x_mean.dot(&beta);
    out.rows_mut(1, beta.len()).copy_from(&beta);
    out
}

/// Fits after aligning the response to the block's sample order.
pub fn pls_fit(x: &DataBlock, y: &ResponseVector, n_lv: usize) -> Result<PlsModel> {
    let y = y.aligned_to(x)?;
    PlsModel::fit(x.x(), &y, n_lv)
}

pub fn pls_predict(model: &PlsModel, x: &DataBlock) -> Result<Vec<f64>> {
    model.predict(x.x())
}
