use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data::{DataBlock, ResponseVector};
use crate::pls::{rows, FoldSpec, Folds, PlsError, PlsModel};

use super::{align, Result, SoplsError, SoplsModel};

/// RMSECV over `a1 in 0..=a1_max` by `a2 in 0..=a2_max`.
///
/// Cell `(0, 0)` is the mean predictor and is never selected. Selection is the
/// global minimum; ties go to the smaller `a1 + a2`, then the smaller `a1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LvGrid {
    rmsecv: DMatrix<f64>,
    folds: Folds,
    spec: FoldSpec,
    selected: (usize, usize),
}

impl LvGrid {
    pub fn rmsecv(&self) -> &DMatrix<f64> {
        &self.rmsecv
    }

    pub fn get(&self, a1: usize, a2: usize) -> f64 {
        self.rmsecv[(a1, a2)]
    }

    pub fn folds(&self) -> &Folds {
        &self.folds
    }

    pub fn spec(&self) -> FoldSpec {
        self.spec
    }

    pub fn selected(&self) -> (usize, usize) {
        self.selected
    }

    /// The selected pair uses no block-1 components.
    pub fn block2_only(&self) -> bool {
        self.selected.0 == 0
    }

    /// `a1,a2,rmsecv` rows, a1-major.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("a1,a2,rmsecv\n");
        for a1 in 0..self.rmsecv.nrows() {
            for a2 in 0..self.rmsecv.ncols() {
                out.push_str(&format!("{a1},{a2},{}\n", self.rmsecv[(a1, a2)]));
            }
        }
        out
    }
}

/// Grid argmin under the documented tie rule, skipping `(0, 0)`.
pub(crate) fn select_pair(grid: &DMatrix<f64>) -> (usize, usize) {
    let mut cells: Vec<(usize, usize)> =
        (0..grid.nrows()).flat_map(|a| (0..grid.ncols()).map(move |b| (a, b))).filter(|&c| c != (0, 0)).collect();
    cells.sort_by_key(|&(a, b)| (a + b, a));
    let mut best = cells[0];
    for &c in &cells[1..] {
        if grid[c] < grid[best] {
            best = c;
        }
    }
    best
}

pub fn sopls_cv(
    x1: &DataBlock,
    x2: &DataBlock,
    y: &ResponseVector,
    a1_max: usize,
    a2_max: usize,
    spec: FoldSpec,
) -> Result<LvGrid> {
    let (x2, y) = align(x1, x2, y)?;
    sopls_cv_matrix(x1.x(), x2.x(), &y, a1_max, a2_max, spec)
}

/// Every fold refits block 1, re-orthogonalizes block 2 and refits it for each
/// `a1`. Block-1 models of lower order are prefixes of the `a1_max` fit, and
/// likewise for block 2 within one `a1`.
pub fn sopls_cv_matrix(
    x1: &DMatrix<f64>,
    x2: &DMatrix<f64>,
    y: &[f64],
    a1_max: usize,
    a2_max: usize,
    spec: FoldSpec,
) -> Result<LvGrid> {
    let n = x1.nrows();
    if x2.nrows() != n {
        return Err(SoplsError::RowMismatch(n, x2.nrows()));
    }
    if y.len() != n {
        return Err(PlsError::LengthMismatch { expected: n, got: y.len() }.into());
    }
    if a1_max + a2_max == 0 {
        return Err(SoplsError::ComponentsOutOfRange { block: 1, requested: 0, max: x1.ncols() });
    }
    if a1_max > x1.ncols() {
        return Err(SoplsError::ComponentsOutOfRange { block: 1, requested: a1_max, max: x1.ncols() });
    }
    if a2_max > x2.ncols() {
        return Err(SoplsError::ComponentsOutOfRange { block: 2, requested: a2_max, max: x2.ncols() });
    }
    let folds = spec.assign(n).map_err(SoplsError::from)?;
    folds.check(a1_max.max(a2_max) + 1)?;
    let cols = a2_max + 1;
    let cells = (a1_max + 1) * cols;

    let per_fold: Vec<(Vec<usize>, Vec<Vec<f64>>)> = (0..folds.k())
        .into_par_iter()
        .map(|fold| {
            let (train, test) = folds.split(fold);
            let (x1tr, x2tr) = (rows(x1, &train), rows(x2, &train));
            let (x1te, x2te) = (rows(x1, &test), rows(x2, &test));
            let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let full1 = if a1_max > 0 { Some(PlsModel::fit(&x1tr, &ytr, a1_max)?) } else { None };
            let mut pred = vec![Vec::new(); cells];
            for a1 in 0..=a1_max {
                let block1 = if a1 == 0 { None } else { full1.as_ref().map(|m| m.truncated(a1)) };
                let model = SoplsModel::from_block1(block1, &x2tr, &ytr, a2_max)?;
                let (y1, _) = model.predict_parts(&x1te, &x2te)?;
                let nested = match model.block2() {
                    Some(b2) => b2.predict_nested(&model.orthogonalize(&x1te, &x2te)?)?,
                    None => Vec::new(),
                };
                for a2 in 0..=a2_max {
                    pred[a1 * cols + a2] = if a2 == 0 || nested.is_empty() {
                        y1.clone()
                    } else {
                        let part = &nested[(a2 - 1).min(nested.len() - 1)];
                        y1.iter().zip(part).map(|(a, b)| a + b).collect()
                    };
                }
            }
            Ok((test, pred))
        })
        .collect::<Result<_>>()?;

    let mut sse = vec![0.0; cells];
    for (test, pred) in &per_fold {
        for (c, p) in pred.iter().enumerate() {
            for (j, &i) in test.iter().enumerate() {
                let e = y[i] - p[j];
                sse[c] += e * e;
            }
        }
    }
    let rmsecv = DMatrix::from_fn(a1_max + 1, cols, |a1, a2| (sse[a1 * cols + a2] / n as f64).sqrt());
    let selected = select_pair(&rmsecv);
    Ok(LvGrid { rmsecv, folds, spec, selected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn tie_rule() {
        let mut g = DMatrix::from_element(4, 4, 9.0);
        g[(3, 2)] = 1.0;
        g[(2, 3)] = 1.0;
        assert_eq!(select_pair(&g), (2, 3));
        g[(1, 3)] = 1.0;
        assert_eq!(select_pair(&g), (1, 3));
        g[(0, 0)] = 0.0;
        assert_eq!(select_pair(&g), (1, 3));
    }

    #[test]
    fn single_block_truth_selects_block1_only() {
        // Rank-1 block 1 with y on its only factor.
        let mut rng = SplitMix64::new(8);
        let t: Vec<f64> = (0..25).map(|_| rng.normal()).collect();
        let load = [0.5, -1.0, 2.0, 0.25];
        let x1 = DMatrix::from_fn(25, 4, |i, j| t[i] * load[j]);
        let x2 = DMatrix::from_fn(25, 5, |_, _| rng.normal());
        let y: Vec<f64> = t.iter().map(|v| 3.0 * v + 1.0).collect();
        let g = sopls_cv_matrix(&x1, &x2, &y, 3, 3, FoldSpec::KFold { k: 5, seed: 42 }).unwrap();
        assert_eq!(g.selected(), (1, 0));
        assert!(!g.block2_only());
    }

    #[test]
    fn zero_block2_column_is_plain_pls_cv() {
        let mut rng = SplitMix64::new(9);
        let x1 = DMatrix::from_fn(20, 4, |_, _| rng.normal());
        let x2 = DMatrix::from_fn(20, 3, |_, _| rng.normal());
        let y: Vec<f64> = (0..20).map(|i| x1[(i, 2)] - x2[(i, 0)] + 0.2 * rng.normal()).collect();
        let spec = FoldSpec::KFold { k: 4, seed: 3 };
        let g = sopls_cv_matrix(&x1, &x2, &y, 3, 2, spec).unwrap();
        let c = crate::pls::cross_validate_matrix(&x1, &y, 3, spec).unwrap();
        for a in 1..=3 {
            assert!((g.get(a, 0) - c.rmsecv()[a - 1]).abs() < 1e-12);
        }
        assert_eq!(g.to_csv().lines().count(), 1 + 4 * 3);
    }

    #[test]
    fn fold_too_small() {
        let x = DMatrix::from_fn(6, 5, |i, j| ((i + 2 * j) % 7) as f64);
        let y = [1.0, 0.0, 2.0, 5.0, 3.0, 1.0];
        assert!(matches!(
            sopls_cv_matrix(&x, &x, &y, 4, 1, FoldSpec::KFold { k: 2, seed: 1 }),
            Err(SoplsError::Pls(PlsError::FoldTooSmall { .. }))
        ));
    }
}
