//! Deep feature extraction for chemometrics.
//!
//! A from-scratch ResNet-18 forward pass turns images (RGB photos, X-ray
//! projections, pseudo-RGB renderings of hyperspectral cubes) into feature
//! vectors, which are then modelled with PLS1 regression or fused with mean
//! spectra through sequentially orthogonalized PLS.
//!
//! | module | role |
//! |---|---|
//! | [`tensor`] | layer primitives (conv, batch norm, ReLU, pooling) |
//! | [`net`] | `NNW1` weight archives and the ResNet-18 graph |
//! | [`image`] | PPM decoding, bilinear resize, normalization |
//! | [`cube`] | hyperspectral cubes, pseudo-RGB, PCA compression, mean spectra |
//! | [`pls`] | PLS1 fit/predict, cross-validation, metrics |
//! | [`sopls`] | two-block SO-PLS fusion |
//! | [`pipeline`] | the batch commands behind the `deepchem` binary |

// Negated float comparisons in this crate are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cube;
pub mod data;
pub mod demo;
pub mod image;
pub mod io;
pub mod net;
pub mod pipeline;
pub mod plot;
pub mod pls;
pub mod rng;
pub mod sopls;
pub mod tensor;
