use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data::{DataBlock, ResponseVector};
use crate::rng::SplitMix64;

use super::{PlsError, PlsModel, Result};

/// How samples are assigned to held-out folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoldSpec {
    LeaveOneOut,
    /// Seeded Fisher-Yates shuffle of sample positions, then a contiguous
    /// split; the first `n % k` folds get one extra sample.
    KFold { k: usize, seed: u64 },
}

impl FoldSpec {
    pub const DEFAULT_SEED: u64 = 42;

    /// `assignment[i]` is the fold holding sample `i`.
    pub fn assign(&self, n: usize) -> Result<Folds> {
        match *self {
            FoldSpec::LeaveOneOut => Ok(Folds { k: n, assignment: (0..n).collect() }),
            FoldSpec::KFold { k, seed } => {
                if k < 2 {
                    return Err(PlsError::InvalidFoldCount(k));
                }
                if k > n {
                    return Err(PlsError::TooManyFolds { k, n });
                }
                let mut order: Vec<usize> = (0..n).collect();
                SplitMix64::new(seed).shuffle(&mut order);
                let mut assignment = vec![0; n];
                let (base, extra) = (n / k, n % k);
                let mut pos = 0;
                for fold in 0..k {
                    let size = base + usize::from(fold < extra);
                    for &i in &order[pos..pos + size] {
                        assignment[i] = fold;
                    }
                    pos += size;
                }
                Ok(Folds { k, assignment })
            }
        }
    }
}

impl fmt::Display for FoldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FoldSpec::LeaveOneOut => f.write_str("loo"),
            FoldSpec::KFold { k, seed } => write!(f, "kfold:{k}:{seed}"),
        }
    }
}

/// Parses `loo`, `kfold:K` (seed 42) or `kfold:K:SEED`.
impl FromStr for FoldSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("loo") {
            return Ok(FoldSpec::LeaveOneOut);
        }
        let mut parts = s.split(':');
        if parts.next().map(str::to_ascii_lowercase).as_deref() != Some("kfold") {
            return Err(format!("`{s}`: expected loo or kfold:K[:SEED]"));
        }
        let k: usize = parts
            .next()
            .ok_or_else(|| format!("`{s}`: missing fold count"))?
            .parse()
            .map_err(|e| format!("`{s}`: fold count: {e}"))?;
        let seed = match parts.next() {
            Some(v) => v.parse().map_err(|e| format!("`{s}`: seed: {e}"))?,
            None => Self::DEFAULT_SEED,
        };
        if parts.next().is_some() {
            return Err(format!("`{s}`: too many fields"));
        }
        if k < 2 {
            return Err(format!("`{s}`: k must be at least 2"));
        }
        Ok(FoldSpec::KFold { k, seed })
    }
}

/// A concrete fold assignment, kept for audit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Folds {
    k: usize,
    assignment: Vec<usize>,
}

impl Folds {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// (training rows, held-out rows) of `fold`, both ascending.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.assignment.len()).partition(|&i| self.assignment[i] != fold)
    }

    /// Smallest training-set size over all folds.
    pub fn min_train(&self) -> (usize, usize) {
        let n = self.assignment.len();
        let mut sizes = vec![0usize; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes.iter().enumerate().map(|(f, s)| (f, n - s)).min_by_key(|&(_, t)| t).unwrap_or((0, 0))
    }

    pub(crate) fn check(&self, needed: usize) -> Result<()> {
        let (fold, train) = self.min_train();
        if train < needed {
            return Err(PlsError::FoldTooSmall { fold, train, needed });
        }
        Ok(())
    }
}

/// RMSECV for every model order `1..=a_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct CvCurve {
    rmsecv: Vec<f64>,
    /// Held-out predictions, `predictions[a - 1][i]`.
    predictions: Vec<Vec<f64>>,
    folds: Folds,
    spec: FoldSpec,
}

impl CvCurve {
    pub fn rmsecv(&self) -> &[f64] {
        &self.rmsecv
    }

    pub fn predictions(&self) -> &[Vec<f64>] {
        &self.predictions
    }

    pub fn folds(&self) -> &Folds {
        &self.folds
    }

    pub fn spec(&self) -> FoldSpec {
        self.spec
    }

    pub fn a_max(&self) -> usize {
        self.rmsecv.len()
    }

    /// `lv,rmsecv` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lv,rmsecv\n");
        for (a, v) in self.rmsecv.iter().enumerate() {
            out.push_str(&format!("{},{}\n", a + 1, v));
        }
        out
    }
}

pub(crate) fn rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    x.select_rows(idx.iter())
}

pub fn cross_validate(x: &DataBlock, y: &ResponseVector, a_max: usize, spec: FoldSpec) -> Result<CvCurve> {
    let y = y.aligned_to(x)?;
    cross_validate_matrix(x.x(), &y, a_max, spec)
}

/// Per-fold refits run in parallel; squared errors are reduced in fold order,
/// so the curve does not depend on scheduling.
pub fn cross_validate_matrix(x: &DMatrix<f64>, y: &[f64], a_max: usize, spec: FoldSpec) -> Result<CvCurve> {
    let n = x.nrows();
    if y.len() != n {
        return Err(PlsError::LengthMismatch { expected: n, got: y.len() });
    }
    if a_max == 0 || a_max > x.ncols() {
        return Err(PlsError::ComponentsOutOfRange { requested: a_max, max: x.ncols() });
    }
    let folds = spec.assign(n)?;
    folds.check(a_max + 1)?;

    let per_fold: Vec<(Vec<usize>, Vec<Vec<f64>>)> = (0..folds.k)
        .into_par_iter()
        .map(|fold| {
            let (train, test) = folds.split(fold);
            let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let model = PlsModel::fit(&rows(x, &train), &ytr, a_max)?;
            let mut nested = model.predict_nested(&rows(x, &test))?;
            // Orders beyond an early stop repeat the last achieved model.
            while nested.len() < a_max {
                let last = nested.last().cloned().unwrap_or_default();
                nested.push(last);
            }
            Ok((test, nested))
        })
        .collect::<Result<_>>()?;

    let mut predictions = vec![vec![0.0; n]; a_max];
    let mut sse = vec![0.0; a_max];
    for (test, nested) in &per_fold {
        for a in 0..a_max {
            for (j, &i) in test.iter().enumerate() {
                let e = y[i] - nested[a][j];
                sse[a] += e * e;
                predictions[a][i] = nested[a][j];
            }
        }
    }
    let rmsecv = sse.iter().map(|s| (s / n as f64).sqrt()).collect();
    Ok(CvCurve { rmsecv, predictions, folds, spec })
}

/// 1-based order at the curve minimum; ties go to fewer components.
pub fn select_lv(curve: &CvCurve) -> usize {
    first_min(curve.rmsecv()) + 1
}

pub(crate) fn first_min(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}
