use rayon::prelude::*;

use super::{window_out, Result, Tensor, TensorError};

/// Weights `C_out x C_in x kH x kW` (row-major), bias, stride and zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    out_channels: usize,
    in_channels: usize,
    kernel: (usize, usize),
    weights: Vec<f32>,
    bias: Vec<f32>,
    stride: (usize, usize),
    padding: (usize, usize),
}

impl ConvParams {
    /// `bias = None` means a zero bias, which is how every ResNet convolution is stored.
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel: (usize, usize),
        weights: Vec<f32>,
        bias: Option<Vec<f32>>,
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 || kernel.0 == 0 || kernel.1 == 0 {
            return Err(TensorError::ZeroDim(out_channels, kernel.0, kernel.1));
        }
        if stride.0 == 0 || stride.1 == 0 {
            return Err(TensorError::ZeroStride);
        }
        let expected = out_channels * in_channels * kernel.0 * kernel.1;
        if weights.len() != expected {
            return Err(TensorError::ParamLength { name: "weights", expected, got: weights.len() });
        }
        let bias = bias.unwrap_or_else(|| vec![0.0; out_channels]);
        if bias.len() != out_channels {
            return Err(TensorError::ParamLength { name: "bias", expected: out_channels, got: bias.len() });
        }
        Ok(Self { out_channels, in_channels, kernel, weights, bias, stride, padding })
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn kernel(&self) -> (usize, usize) {
        self.kernel
    }

    pub fn stride(&self) -> (usize, usize) {
        self.stride
    }

    pub fn padding(&self) -> (usize, usize) {
        self.padding
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    pub fn bias(&self) -> &[f32] {
        &self.bias
    }

    pub fn weight(&self, oc: usize, ic: usize, ky: usize, kx: usize) -> f32 {
        self.weights[((oc * self.in_channels + ic) * self.kernel.0 + ky) * self.kernel.1 + kx]
    }

    /// Output dims for an input of the given spatial size.
    pub fn output_dims(&self, height: usize, width: usize) -> Result<(usize, usize, usize)> {
        let too_large = || TensorError::KernelTooLarge {
            kernel: self.kernel,
            padded: (height + 2 * self.padding.0, width + 2 * self.padding.1),
        };
        let ho = window_out(height, self.padding.0, self.kernel.0, self.stride.0).ok_or_else(too_large)?;
        let wo = window_out(width, self.padding.1, self.kernel.1, self.stride.1).ok_or_else(too_large)?;
        Ok((self.out_channels, ho, wo))
    }
}

// Register tile: MR output channels by NR output positions.
const MR: usize = 4;
const NR: usize = 16;

/// 2-D cross-correlation with zero padding.
///
/// Lowered to a packed GEMM: every output element is
/// `bias + sum over (c_in, ky, kx)` accumulated in `f64` in that fixed order,
/// so results do not depend on how output channels are split across threads.
pub fn conv2d(input: &Tensor, params: &ConvParams) -> Result<Tensor> {
    let (c, h, w) = input.dims();
    if c != params.in_channels {
        return Err(TensorError::ChannelMismatch { input: c, expected: params.in_channels });
    }
    let (m, ho, wo) = params.output_dims(h, w)?;
    let (kh, kw) = params.kernel;
    let k = c * kh * kw;
    let n = ho * wo;

    let packed_b = pack_input(input, params, ho, wo);
    let n_panels = n.div_ceil(NR);

    let mut out = vec![0f32; m * n];
    out.par_chunks_mut(MR * n).enumerate().for_each(|(mp, rows)| {
        let m0 = mp * MR;
        let rows_here = rows.len() / n;
        let mut panel_a = vec![0f64; k * MR];
        for i in 0..rows_here {
            let src = &params.weights[(m0 + i) * k..(m0 + i + 1) * k];
            for (kk, &v) in src.iter().enumerate() {
                panel_a[kk * MR + i] = v as f64;
            }
        }
        let bias: Vec<f64> = (0..rows_here).map(|i| params.bias[m0 + i] as f64).collect();
        run_panel(&panel_a, &packed_b, k, n, n_panels, &bias, rows);
    });
    Ok(Tensor::from_parts(m, ho, wo, out))
}

/// im2col into NR-wide column panels: `packed[p][k][j]` is the input value
/// feeding output position `p * NR + j` through reduction index `k`.
fn pack_input(input: &Tensor, params: &ConvParams, ho: usize, wo: usize) -> Vec<f64> {
    let (c, h, w) = input.dims();
    let (kh, kw) = params.kernel;
    let (sh, sw) = params.stride;
    let (ph, pw) = params.padding;
    let k = c * kh * kw;
    let n = ho * wo;
    let n_panels = n.div_ceil(NR);
    let mut packed = vec![0f64; n_panels * k * NR];
    let data = input.data();
    for ci in 0..c {
        let plane = &data[ci * h * w..(ci + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let kk = (ci * kh + ky) * kw + kx;
                for y in 0..ho {
                    let iy = (y * sh + ky) as isize - ph as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let row = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for x in 0..wo {
                        let ix = (x * sw + kx) as isize - pw as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let pos = y * wo + x;
                        packed[(pos / NR) * k * NR + kk * NR + pos % NR] = row[ix as usize] as f64;
                    }
                }
            }
        }
    }
    packed
}

fn run_panel(a: &[f64], b: &[f64], k: usize, n: usize, n_panels: usize, bias: &[f64], out: &mut [f32]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            // SAFETY: the feature was detected at runtime.
            unsafe { run_panel_avx512(a, b, k, n, n_panels, bias, out) };
            return;
        }
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the feature was detected at runtime.
            unsafe { run_panel_avx2(a, b, k, n, n_panels, bias, out) };
            return;
        }
    }
    run_panel_generic(a, b, k, n, n_panels, bias, out);
}

// Multiplies and adds stay separate (no FMA), so every dispatch target
// rounds identically.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn run_panel_avx512(a: &[f64], b: &[f64], k: usize, n: usize, n_panels: usize, bias: &[f64], out: &mut [f32]) {
    run_panel_generic(a, b, k, n, n_panels, bias, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn run_panel_avx2(a: &[f64], b: &[f64], k: usize, n: usize, n_panels: usize, bias: &[f64], out: &mut [f32]) {
    run_panel_generic(a, b, k, n, n_panels, bias, out)
}

#[inline(always)]
fn run_panel_generic(a: &[f64], b: &[f64], k: usize, n: usize, n_panels: usize, bias: &[f64], out: &mut [f32]) {
    let rows = bias.len();
    for p in 0..n_panels {
        let panel_b = &b[p * k * NR..(p + 1) * k * NR];
        let mut acc = [[0f64; NR]; MR];
        for (ak, bk) in a.chunks_exact(MR).zip(panel_b.chunks_exact(NR)) {
            for i in 0..MR {
                let av = ak[i];
                for j in 0..NR {
                    acc[i][j] += av * bk[j];
                }
            }
        }
        let n0 = p * NR;
        let cols = NR.min(n - n0);
        for i in 0..rows {
            let dst = &mut out[i * n + n0..i * n + n0 + cols];
            for (j, d) in dst.iter_mut().enumerate() {
                *d = (acc[i][j] + bias[i]) as f32;
            }
        }
    }
}
