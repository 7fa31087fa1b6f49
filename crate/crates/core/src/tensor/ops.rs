use super::{window_out, FeatureVector, Result, Tensor, TensorError};

/// Inference-mode batch normalization parameters (running statistics).
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams {
    gamma: Vec<f32>,
    beta: Vec<f32>,
    running_mean: Vec<f32>,
    running_var: Vec<f32>,
    epsilon: f32,
}

impl BatchNormParams {
    pub const DEFAULT_EPSILON: f32 = 1e-5;

    pub fn new(
        gamma: Vec<f32>,
        beta: Vec<f32>,
        running_mean: Vec<f32>,
        running_var: Vec<f32>,
        epsilon: f32,
    ) -> Result<Self> {
        let c = gamma.len();
        for (name, v) in [("beta", &beta), ("running_mean", &running_mean), ("running_var", &running_var)] {
            if v.len() != c {
                return Err(TensorError::ParamLength { name, expected: c, got: v.len() });
            }
        }
        if !(epsilon > 0.0) {
            return Err(TensorError::InvalidEpsilon(epsilon));
        }
        if let Some(i) = running_var.iter().position(|&v| !(v >= 0.0)) {
            return Err(TensorError::NegativeVariance(i));
        }
        Ok(Self { gamma, beta, running_mean, running_var, epsilon })
    }

    /// gamma = 1, beta = 0, mean = 0, var = 1.
    pub fn identity(channels: usize) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            epsilon: Self::DEFAULT_EPSILON,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f32] {
        &self.gamma
    }

    pub fn beta(&self) -> &[f32] {
        &self.beta
    }

    pub fn running_mean(&self) -> &[f32] {
        &self.running_mean
    }

    pub fn running_var(&self) -> &[f32] {
        &self.running_var
    }

    pub fn epsilon(&self) -> f32 {
        self.epsilon
    }
}

/// `gamma * (x - mean) / sqrt(var + eps) + beta`, per channel.
pub fn batchnorm_infer(input: &Tensor, params: &BatchNormParams) -> Result<Tensor> {
    let (c, h, w) = input.dims();
    if c != params.channels() {
        return Err(TensorError::ChannelMismatch { input: c, expected: params.channels() });
    }
    let plane = h * w;
    let mut out = Vec::with_capacity(input.len());
    for ch in 0..c {
        let scale = params.gamma[ch] as f64 / (params.running_var[ch] as f64 + params.epsilon as f64).sqrt();
        let mean = params.running_mean[ch] as f64;
        let beta = params.beta[ch] as f64;
        out.extend(
            input.data()[ch * plane..(ch + 1) * plane]
                .iter()
                .map(|&v| (scale * (v as f64 - mean) + beta) as f32),
        );
    }
    Ok(Tensor::from_parts(c, h, w, out))
}

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|v| v.max(0.0))
}

/// Max pooling; padded positions are treated as negative infinity.
pub fn maxpool2d(
    input: &Tensor,
    kernel: (usize, usize),
    stride: (usize, usize),
    padding: (usize, usize),
) -> Result<Tensor> {
    let (c, h, w) = input.dims();
    if stride.0 == 0 || stride.1 == 0 {
        return Err(TensorError::ZeroStride);
    }
    let too_large = || TensorError::KernelTooLarge { kernel, padded: (h + 2 * padding.0, w + 2 * padding.1) };
    let ho = window_out(h, padding.0, kernel.0, stride.0).ok_or_else(too_large)?;
    let wo = window_out(w, padding.1, kernel.1, stride.1).ok_or_else(too_large)?;
    let mut out = Vec::with_capacity(c * ho * wo);
    for ch in 0..c {
        let plane = input.channel(ch);
        for y in 0..ho {
            let y0 = (y * stride.0) as isize - padding.0 as isize;
            let ys = y0.max(0) as usize..((y0 + kernel.0 as isize).min(h as isize)).max(0) as usize;
            for x in 0..wo {
                let x0 = (x * stride.1) as isize - padding.1 as isize;
                let xs = x0.max(0) as usize..((x0 + kernel.1 as isize).min(w as isize)).max(0) as usize;
                let mut best = f32::NEG_INFINITY;
                for yy in ys.clone() {
                    for &v in &plane[yy * w + xs.start..yy * w + xs.end] {
                        best = best.max(v);
                    }
                }
                // A window lying entirely in the padding has no real element.
                out.push(if best == f32::NEG_INFINITY { 0.0 } else { best });
            }
        }
    }
    Ok(Tensor::from_parts(c, ho, wo, out))
}

/// Per-channel spatial mean, accumulated in `f64`.
pub fn global_avg_pool(input: &Tensor) -> FeatureVector {
    let plane = (input.height() * input.width()) as f64;
    let values = (0..input.channels())
        .map(|c| (input.channel(c).iter().map(|&v| v as f64).sum::<f64>() / plane) as f32)
        .collect();
    FeatureVector { values, tap_name: "gap".to_string() }
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.dims() != b.dims() {
        return Err(TensorError::DimsMismatch { left: a.dims(), right: b.dims() });
    }
    let (c, h, w) = a.dims();
    Ok(Tensor::from_parts(c, h, w, a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect()))
}
