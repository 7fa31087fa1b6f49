//! Dense rank-3 feature maps and the layer primitives of the CNN engine.
//!
//! Layout is channel-major, then row-major inside a channel:
//! `index = c * H * W + y * W + x`. Storage is `f32`; convolution and
//! pooling accumulate in `f64`.

mod conv;
mod ops;

pub use conv::{conv2d, ConvParams};
pub use ops::{add, batchnorm_infer, global_avg_pool, maxpool2d, relu, BatchNormParams};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("tensor dims must all be >= 1, got ({0}, {1}, {2})")]
    ZeroDim(usize, usize, usize),
    #[error("data length {got} does not match dims product {expected}")]
    DataLength { expected: usize, got: usize },
    #[error("tensor contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("channel mismatch: input has {input}, parameters expect {expected}")]
    ChannelMismatch { input: usize, expected: usize },
    #[error("dims mismatch: {left:?} vs {right:?}")]
    DimsMismatch { left: (usize, usize, usize), right: (usize, usize, usize) },
    #[error("kernel {kernel:?} larger than padded input {padded:?}")]
    KernelTooLarge { kernel: (usize, usize), padded: (usize, usize) },
    #[error("stride must be positive")]
    ZeroStride,
    #[error("parameter `{name}` has length {got}, expected {expected}")]
    ParamLength { name: &'static str, expected: usize, got: usize },
    #[error("batch-norm epsilon must be positive, got {0}")]
    InvalidEpsilon(f32),
    #[error("batch-norm running variance is negative at channel {0}")]
    NegativeVariance(usize),
}

pub type Result<T> = std::result::Result<T, TensorError>;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(TensorError::ZeroDim(channels, height, width));
        }
        let expected = channels * height * width;
        if data.len() != expected {
            return Err(TensorError::DataLength { expected, got: data.len() });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite(i));
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        Self::filled(channels, height, width, 0.0)
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Result<Self> {
        Self::new(channels, height, width, vec![value; channels * height * width])
    }

    /// Builds a tensor from data known to satisfy the invariants.
    pub(crate) fn from_parts(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), channels * height * width);
        Self { channels, height, width, data }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn at(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor::from_parts(self.channels, self.height, self.width, self.data.iter().map(|&v| f(v)).collect())
    }
}

/// A feature vector read from a named tap of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f32>,
    pub tap_name: String,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Output extent of a sliding window along one axis, floor division.
pub(crate) fn window_out(size: usize, pad: usize, kernel: usize, stride: usize) -> Option<usize> {
    let padded = size + 2 * pad;
    if kernel > padded || stride == 0 {
        None
    } else {
        Some((padded - kernel) / stride + 1)
    }
}
