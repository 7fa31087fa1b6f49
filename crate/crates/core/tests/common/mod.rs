//! Brute-force oracles and seeded problem generators shared by the
//! integration tests and the acceptance runner. Nothing here calls into the
//! library's numerical code; the oracles are written for clarity, not speed.
#![allow(dead_code)]

use std::path::PathBuf;

use deepchem::rng::SplitMix64;
use deepchem::tensor::{
    add, batchnorm_infer, conv2d, global_avg_pool, maxpool2d, BatchNormParams, ConvParams, Tensor,
};
use nalgebra::{DMatrix, DVector};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn max_abs_diff(a: &[f32], b: &[f32]) -> f32 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max)
}

pub fn max_abs_diff64(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------- tensors

pub fn random_tensor(rng: &mut SplitMix64, c: usize, h: usize, w: usize) -> Tensor {
    let data = (0..c * h * w).map(|_| rng.uniform(-1.0, 1.0) as f32).collect();
    Tensor::new(c, h, w, data).unwrap()
}

fn range(rng: &mut SplitMix64, lo: usize, hi: usize) -> usize {
    lo + rng.below(hi - lo + 1)
}

/// Direct seven-loop convolution in f64 with explicit zero padding.
pub fn conv_oracle(x: &Tensor, p: &ConvParams) -> (usize, usize, usize, Vec<f32>) {
    let (c, h, w) = x.dims();
    let (kh, kw) = p.kernel();
    let (sh, sw) = p.stride();
    let (ph, pw) = p.padding();
    let ho = (h + 2 * ph - kh) / sh + 1;
    let wo = (w + 2 * pw - kw) / sw + 1;
    let mut out = Vec::new();
    for oc in 0..p.out_channels() {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = p.bias()[oc] as f64;
                for ic in 0..c {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = (oy * sh + ky) as isize - ph as isize;
                            let ix = (ox * sw + kx) as isize - pw as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            acc += p.weight(oc, ic, ky, kx) as f64 * x.at(ic, iy as usize, ix as usize) as f64;
                        }
                    }
                }
                out.push(acc as f32);
            }
        }
    }
    (p.out_channels(), ho, wo, out)
}

pub fn bn_oracle(x: &Tensor, p: &BatchNormParams) -> Vec<f32> {
    let (c, h, w) = x.dims();
    let mut out = Vec::new();
    for ch in 0..c {
        let scale = p.gamma()[ch] as f64 / (p.running_var()[ch] as f64 + p.epsilon() as f64).sqrt();
        for y in 0..h {
            for xx in 0..w {
                let v = (x.at(ch, y, xx) as f64 - p.running_mean()[ch] as f64) * scale + p.beta()[ch] as f64;
                out.push(v as f32);
            }
        }
    }
    out
}

/// Window maximum over the unpadded positions of each window.
pub fn maxpool_oracle(x: &Tensor, k: usize, s: usize, pad: usize) -> (usize, usize, Vec<f32>) {
    let (c, h, w) = x.dims();
    let ho = (h + 2 * pad - k) / s + 1;
    let wo = (w + 2 * pad - k) / s + 1;
    let mut out = Vec::new();
    for ch in 0..c {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best: Option<f32> = None;
                for ky in 0..k {
                    for kx in 0..k {
                        let iy = (oy * s + ky) as isize - pad as isize;
                        let ix = (ox * s + kx) as isize - pad as isize;
                        if iy >= 0 && ix >= 0 && iy < h as isize && ix < w as isize {
                            let v = x.at(ch, iy as usize, ix as usize);
                            best = Some(best.map_or(v, |b| b.max(v)));
                        }
                    }
                }
                out.push(best.unwrap_or(0.0));
            }
        }
    }
    (ho, wo, out)
}

pub fn gap_oracle(x: &Tensor) -> Vec<f32> {
    let (c, h, w) = x.dims();
    (0..c)
        .map(|ch| {
            let mut s = 0.0f64;
            for y in 0..h {
                for xx in 0..w {
                    s += x.at(ch, y, xx) as f64;
                }
            }
            (s / (h * w) as f64) as f32
        })
        .collect()
}

/// Outcome of the randomized tensor-op comparison.
#[derive(Debug, Default)]
pub struct OpSuite {
    pub cases: usize,
    pub worst: f32,
    pub worst_op: &'static str,
}

impl OpSuite {
    fn record(&mut self, op: &'static str, delta: f32) {
        self.cases += 1;
        if delta > self.worst || delta.is_nan() {
            self.worst = if delta.is_nan() { f32::INFINITY } else { delta };
            self.worst_op = op;
        }
    }
}

/// Runs `per_op` random shapes of each of conv2d, batchnorm, maxpool, GAP and add.
pub fn tensor_op_suite(per_op: usize, seed: u64) -> OpSuite {
    let mut rng = SplitMix64::new(seed);
    let mut suite = OpSuite::default();
    for _ in 0..per_op {
        let ic = range(&mut rng, 1, 8);
        let oc = range(&mut rng, 1, 8);
        let (h, w) = (range(&mut rng, 1, 14), range(&mut rng, 1, 14));
        let pad = range(&mut rng, 0, 3);
        let kh = range(&mut rng, 1, (h + 2 * pad).min(7));
        let kw = range(&mut rng, 1, (w + 2 * pad).min(7));
        let stride = (range(&mut rng, 1, 3), range(&mut rng, 1, 3));
        let x = random_tensor(&mut rng, ic, h, w);
        let weights = (0..oc * ic * kh * kw).map(|_| rng.uniform(-1.0, 1.0) as f32).collect();
        let bias = (0..oc).map(|_| rng.uniform(-0.5, 0.5) as f32).collect();
        let p = ConvParams::new(oc, ic, (kh, kw), weights, Some(bias), stride, (pad, pad)).unwrap();
        let got = conv2d(&x, &p).unwrap();
        let (c, ho, wo, want) = conv_oracle(&x, &p);
        assert_eq!(got.dims(), (c, ho, wo), "conv dims");
        suite.record("conv2d", max_abs_diff(got.data(), &want));

        let c = range(&mut rng, 1, 16);
        let (h, w) = (range(&mut rng, 1, 12), range(&mut rng, 1, 12));
        let x = random_tensor(&mut rng, c, h, w);
        let mut draw = |lo: f64, hi: f64| (0..c).map(|_| rng.uniform(lo, hi) as f32).collect::<Vec<_>>();
        let p = BatchNormParams::new(draw(0.5, 2.0), draw(-1.0, 1.0), draw(-0.5, 0.5), draw(0.1, 2.0), 1e-5).unwrap();
        let got = batchnorm_infer(&x, &p).unwrap();
        suite.record("batchnorm", max_abs_diff(got.data(), &bn_oracle(&x, &p)));

        let c = range(&mut rng, 1, 6);
        let k = range(&mut rng, 1, 4);
        let pad = range(&mut rng, 0, k / 2);
        let (h, w) = (range(&mut rng, k, 15), range(&mut rng, k, 15));
        let s = range(&mut rng, 1, 3);
        let x = random_tensor(&mut rng, c, h, w);
        let got = maxpool2d(&x, (k, k), (s, s), (pad, pad)).unwrap();
        let (ho, wo, want) = maxpool_oracle(&x, k, s, pad);
        assert_eq!(got.dims(), (c, ho, wo), "maxpool dims");
        suite.record("maxpool", max_abs_diff(got.data(), &want));

        let (c, h, w) = (range(&mut rng, 1, 32), range(&mut rng, 1, 9), range(&mut rng, 1, 9));
        let x = random_tensor(&mut rng, c, h, w);
        suite.record("gap", max_abs_diff(&global_avg_pool(&x).values, &gap_oracle(&x)));

        let (c, h, w) = (range(&mut rng, 1, 8), range(&mut rng, 1, 10), range(&mut rng, 1, 10));
        let a = random_tensor(&mut rng, c, h, w);
        let b = random_tensor(&mut rng, c, h, w);
        let want: Vec<f32> = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
        suite.record("add", max_abs_diff(add(&a, &b).unwrap().data(), &want));
    }
    suite
}

// ---------------------------------------------------------------- images

/// Half-pixel-centre bilinear resize with edge clamping and half-up rounding.
pub fn resize_oracle(px: &[u8], w: usize, h: usize, ow: usize, oh: usize) -> Vec<u8> {
    let mut out = vec![0u8; ow * oh * 3];
    let at = |x: usize, y: usize, c: usize| px[(y * w + x) * 3 + c] as f64;
    let clamp = |v: f64, n: usize| v.max(0.0).min((n - 1) as f64) as usize;
    for dy in 0..oh {
        let sy = (dy as f64 + 0.5) * (h as f64 / oh as f64) - 0.5;
        let (y0, fy) = (sy.floor(), sy - sy.floor());
        for dx in 0..ow {
            let sx = (dx as f64 + 0.5) * (w as f64 / ow as f64) - 0.5;
            let (x0, fx) = (sx.floor(), sx - sx.floor());
            let (xa, xb) = (clamp(x0, w), clamp(x0 + 1.0, w));
            let (ya, yb) = (clamp(y0, h), clamp(y0 + 1.0, h));
            for c in 0..3 {
                let top = at(xa, ya, c) * (1.0 - fx) + at(xb, ya, c) * fx;
                let bottom = at(xa, yb, c) * (1.0 - fx) + at(xb, yb, c) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                out[(dy * ow + dx) * 3 + c] = (v + 0.5).floor().clamp(0.0, 255.0) as u8;
            }
        }
    }
    out
}

// ---------------------------------------------------------------- cubes

/// Lowest index among the bands at minimal distance from `target`.
pub fn nearest_band_oracle(wavelengths: &[f32], target: f64) -> usize {
    let d: Vec<f64> = wavelengths.iter().map(|&w| (w as f64 - target).abs()).collect();
    let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    d.iter().position(|&v| v == min).unwrap()
}

/// Band lookup composed with a foreground min-max stretch to 0..=255.
/// `data` is band-major; `None` marks a channel with no spread.
pub fn pseudo_rgb_oracle(
    data: &[f32],
    wavelengths: &[f32],
    h: usize,
    w: usize,
    mask: Option<&[u8]>,
    targets: [f64; 3],
) -> (Vec<u8>, [bool; 3]) {
    let n = h * w;
    let fg: Vec<usize> = (0..n).filter(|&p| mask.is_none_or(|m| m[p] != 0)).collect();
    let mut out = vec![0u8; 3 * n];
    let mut degenerate = [false; 3];
    for c in 0..3 {
        let band = nearest_band_oracle(wavelengths, targets[c]);
        let v = |p: usize| data[band * n + p] as f64;
        let lo = fg.iter().map(|&p| v(p)).fold(f64::INFINITY, f64::min);
        let hi = fg.iter().map(|&p| v(p)).fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            degenerate[c] = true;
            continue;
        }
        for &p in &fg {
            out[3 * p + c] = ((v(p) - lo) / (hi - lo) * 255.0 + 0.5).floor() as u8;
        }
    }
    (out, degenerate)
}

// ---------------------------------------------------------------- regression

pub fn gaussian_matrix(rng: &mut SplitMix64, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.normal())
}

/// Intercept plus slopes from the normal equations `[1 X]'[1 X] b = [1 X]' y`.
pub fn ols_oracle(x: &DMatrix<f64>, y: &[f64]) -> DVector<f64> {
    let n = x.nrows();
    let design = DMatrix::from_fn(n, x.ncols() + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
    let gram = design.transpose() * &design;
    let rhs = design.transpose() * DVector::from_column_slice(y);
    gram.cholesky().expect("full-rank design").solve(&rhs)
}

pub fn affine_predict(coef: &DVector<f64>, x: &DMatrix<f64>) -> Vec<f64> {
    (0..x.nrows()).map(|i| coef[0] + (0..x.ncols()).map(|j| coef[j + 1] * x[(i, j)]).sum::<f64>()).collect()
}

/// Textbook NIPALS PLS1 with explicit deflation.
pub struct Nipals {
    x_mean: Vec<f64>,
    y_mean: f64,
    /// `W (P'W)^-1`, mapping centred rows straight to scores.
    rotation: DMatrix<f64>,
    q: DVector<f64>,
}

impl Nipals {
    pub fn fit(x: &DMatrix<f64>, y: &[f64], a: usize) -> Self {
        let (n, p) = x.shape();
        let x_mean: Vec<f64> = (0..p).map(|j| x.column(j).sum() / n as f64).collect();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let mut e = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - x_mean[j]);
        let mut f = DVector::from_fn(n, |i, _| y[i] - y_mean);
        let (mut ws, mut ps, mut qs) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..a {
            let mut w = e.transpose() * &f;
            let norm = w.norm();
            if norm <= 1e-12 {
                break;
            }
            w /= norm;
            let t = &e * &w;
            let tt = t.dot(&t);
            let load = e.transpose() * &t / tt;
            let q = f.dot(&t) / tt;
            e -= &t * load.transpose();
            f -= &t * q;
            ws.push(w);
            ps.push(load);
            qs.push(q);
        }
        if ws.is_empty() {
            return Self { x_mean, y_mean, rotation: DMatrix::zeros(p, 0), q: DVector::zeros(0) };
        }
        let w = DMatrix::from_columns(&ws);
        let pl = DMatrix::from_columns(&ps);
        let rotation = &w * (pl.transpose() * &w).try_inverse().expect("P'W invertible");
        Self { x_mean, y_mean, rotation, q: DVector::from_vec(qs) }
    }

    pub fn scores(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let xc = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - self.x_mean[j]);
        xc * &self.rotation
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let t = self.scores(x);
        (0..x.nrows()).map(|i| self.y_mean + (0..self.q.len()).map(|c| t[(i, c)] * self.q[c]).sum::<f64>()).collect()
    }
}

pub fn nipals_predict(xtr: &DMatrix<f64>, ytr: &[f64], xte: &DMatrix<f64>, a: usize) -> Vec<f64> {
    Nipals::fit(xtr, ytr, a).predict(xte)
}

/// Centres `x` with the column means of `reference`.
fn centre_by(x: &DMatrix<f64>, reference: &DMatrix<f64>) -> DMatrix<f64> {
    let n = reference.nrows() as f64;
    let means: Vec<f64> = (0..reference.ncols()).map(|j| reference.column(j).sum() / n).collect();
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - means[j])
}

/// SO-PLS prediction from first principles: NIPALS on block 1, least-squares
/// removal of the block-1 scores from centred block 2, NIPALS on the residual.
pub fn naive_sopls_predict(
    x1: &DMatrix<f64>,
    x2: &DMatrix<f64>,
    y: &[f64],
    x1_test: &DMatrix<f64>,
    x2_test: &DMatrix<f64>,
    a1: usize,
    a2: usize,
) -> Vec<f64> {
    let n = y.len();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let (fitted1, pred1, t1, t1_test) = if a1 == 0 {
        (vec![y_mean; n], vec![y_mean; x1_test.nrows()], DMatrix::zeros(n, 0), DMatrix::zeros(x1_test.nrows(), 0))
    } else {
        let m = Nipals::fit(x1, y, a1);
        (m.predict(x1), m.predict(x1_test), m.scores(x1), m.scores(x1_test))
    };
    if a2 == 0 {
        return pred1;
    }
    let resid: Vec<f64> = y.iter().zip(&fitted1).map(|(a, b)| a - b).collect();
    let x2c = centre_by(x2, x2);
    let x2c_test = centre_by(x2_test, x2);
    let (x2o, x2o_test) = if t1.ncols() == 0 {
        (x2c, x2c_test)
    } else {
        let d = (t1.transpose() * &t1).try_inverse().expect("T1'T1 invertible") * t1.transpose() * &x2c;
        (&x2c - &t1 * &d, &x2c_test - &t1_test * &d)
    };
    let pred2 = Nipals::fit(&x2o, &resid, a2).predict(&x2o_test);
    pred1.iter().zip(&pred2).map(|(a, b)| a + b).collect()
}

/// RMSECV over the `(a1, a2)` grid by refitting [`naive_sopls_predict`] on every split.
pub fn naive_sopls_cv(
    x1: &DMatrix<f64>,
    x2: &DMatrix<f64>,
    y: &[f64],
    a1_max: usize,
    a2_max: usize,
    fold: &[usize],
) -> DMatrix<f64> {
    let n = y.len();
    let k = fold.iter().max().map_or(0, |m| m + 1);
    DMatrix::from_fn(a1_max + 1, a2_max + 1, |a1, a2| {
        let mut sse = 0.0;
        for f in 0..k {
            let train: Vec<usize> = (0..n).filter(|&i| fold[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| fold[i] == f).collect();
            let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let pred = naive_sopls_predict(
                &x1.select_rows(train.iter()),
                &x2.select_rows(train.iter()),
                &ytr,
                &x1.select_rows(test.iter()),
                &x2.select_rows(test.iter()),
                a1,
                a2,
            );
            sse += test.iter().zip(&pred).map(|(&i, p)| (y[i] - p).powi(2)).sum::<f64>();
        }
        (sse / n as f64).sqrt()
    })
}

/// Fold of each sample: SplitMix64 Fisher-Yates shuffle from the back, then
/// contiguous chunks with the first `n % k` folds one larger.
pub fn kfold_oracle(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut state = seed;
    let mut next = move || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = ((next() as u128 * (i as u128 + 1)) >> 64) as usize;
        order.swap(i, j);
    }
    let mut fold = vec![0; n];
    let mut pos = 0;
    for f in 0..k {
        let size = n / k + usize::from(f < n % k);
        for &i in &order[pos..pos + size] {
            fold[i] = f;
        }
        pos += size;
    }
    fold
}

/// RMSECV for orders `1..=a_max` by refitting NIPALS on every training split.
pub fn naive_cv(x: &DMatrix<f64>, y: &[f64], a_max: usize, fold: &[usize]) -> Vec<f64> {
    let n = x.nrows();
    let k = fold.iter().max().map_or(0, |m| m + 1);
    (1..=a_max)
        .map(|a| {
            let mut sse = 0.0;
            for f in 0..k {
                let train: Vec<usize> = (0..n).filter(|&i| fold[i] != f).collect();
                let test: Vec<usize> = (0..n).filter(|&i| fold[i] == f).collect();
                let xtr = x.select_rows(train.iter());
                let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
                let xte = x.select_rows(test.iter());
                let pred = nipals_predict(&xtr, &ytr, &xte, a);
                sse += test.iter().zip(&pred).map(|(&i, p)| (y[i] - p).powi(2)).sum::<f64>();
            }
            (sse / n as f64).sqrt()
        })
        .collect()
}

/// `n x p` data driven by `factors` latent variables, with small noise on
/// both X and y so the CV curve bottoms out at the true order.
pub fn latent_factor_data(seed: u64, n: usize, p: usize, factors: usize) -> (DMatrix<f64>, Vec<f64>) {
    let mut rng = SplitMix64::new(seed);
    let t = gaussian_matrix(&mut rng, n, factors);
    let loadings = gaussian_matrix(&mut rng, p, factors);
    let noise = gaussian_matrix(&mut rng, n, p) * 0.01;
    let x = &t * loadings.transpose() + noise;
    let coef: Vec<f64> = (0..factors).map(|i| 3.0 - i as f64 * 0.8).collect();
    let y = (0..n).map(|i| 10.0 + (0..factors).map(|c| coef[c] * t[(i, c)]).sum::<f64>() + 0.05 * rng.normal()).collect();
    (x, y)
}

/// Two blocks with independent latent structure whose contributions to y add.
pub struct TwoBlockTrial {
    pub x1: DMatrix<f64>,
    pub x2: DMatrix<f64>,
    pub y: Vec<f64>,
    pub x1_test: DMatrix<f64>,
    pub x2_test: DMatrix<f64>,
    pub y_test: Vec<f64>,
}

pub fn two_block_trial(seed: u64, n_train: usize, n_test: usize) -> TwoBlockTrial {
    let mut rng = SplitMix64::new(seed);
    let (p1, p2) = (14, 10);
    let l1 = gaussian_matrix(&mut rng, p1, 2);
    let l2 = gaussian_matrix(&mut rng, p2, 2);
    let mut draw = |n: usize| {
        let t1 = gaussian_matrix(&mut rng, n, 2);
        let t2 = gaussian_matrix(&mut rng, n, 2);
        let x1 = &t1 * l1.transpose() + gaussian_matrix(&mut rng, n, p1) * 0.1;
        let x2 = &t2 * l2.transpose() + gaussian_matrix(&mut rng, n, p2) * 0.1;
        let y = (0..n)
            .map(|i| 2.0 * t1[(i, 0)] - t1[(i, 1)] + 1.5 * t2[(i, 0)] + t2[(i, 1)] + 0.2 * rng.normal())
            .collect();
        (x1, x2, y)
    };
    let (x1, x2, y) = draw(n_train);
    let (x1_test, x2_test, y_test) = draw(n_test);
    TwoBlockTrial { x1, x2, y, x1_test, x2_test, y_test }
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending,
/// each paired with its unit eigenvector.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> Vec<(f64, Vec<f64>)> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[(i, j)].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n).map(|i| (m[(i, i)], v.column(i).iter().copied().collect())).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

/// Sample covariance (divisor n - 1) of the foreground spectra of a band-major cube.
pub fn spectral_covariance(data: &[f32], bands: usize, pixels: &[usize], plane: usize) -> DMatrix<f64> {
    let n = pixels.len() as f64;
    let mean: Vec<f64> = (0..bands).map(|b| pixels.iter().map(|&p| data[b * plane + p] as f64).sum::<f64>() / n).collect();
    DMatrix::from_fn(bands, bands, |i, j| {
        pixels.iter().map(|&p| (data[i * plane + p] as f64 - mean[i]) * (data[j * plane + p] as f64 - mean[j])).sum::<f64>() / (n - 1.0)
    })
}
