//! Collinearity enhancement for oriented edge maps.
//!
//! The processing chain is a stack of three layers:
//!
//! 1. [`gabor`]: an oriented Gabor filter bank, half-rectified.
//! 2. [`pooling`]: strided separable Lanczos3 resampling of every plane.
//! 3. [`collinearity`]: a recurrent layer whose lateral connections link
//!    same-orientation units lying on a straight line. Aligned edges
//!    multiplicatively amplify each other until the rates settle.
//!
//! On top of the model sit the application heads in [`detectors`]
//! (difference and fault maps, preprocessing channels, saliency with
//! inhibition of return, a long-Gabor comparator) and the synthetic
//! experiment harness in [`stimuli`].
//!
//! Everything operates on `f64` fields in row-major layout. Layer outputs
//! are deterministic regardless of the rayon thread count: parallelism is
//! only ever spread across independent planes or output pixels, and every
//! reduction runs in a fixed sequential order.

pub mod collinearity;
pub mod config;
pub mod detectors;
pub mod error;
pub mod field;
pub mod gabor;
pub mod io;
pub mod pooling;
pub mod stimuli;

pub use crate::collinearity::{
    build_collinearity_kernels, collinearity_influence, collinearity_layer, CollinearityKernel,
    CollinearityKernelConfig, CollinearityKernelSet, Convergence, DynamicsConfig,
};
pub use crate::config::{Model, ModelConfig, ModelOutput};
pub use crate::error::{Error, Result};
pub use crate::field::{FeatureStack, GrayImage, LabelMask, ScalarMap};
pub use crate::gabor::{GaborBank, GaborConfig};
pub use crate::pooling::PoolingConfig;
