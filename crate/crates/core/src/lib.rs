//! Bidirectional cascaded convolutional network for three-class pavement
//! distress classification (fatigue cracks, linear cracks, potholes).
//!
//! Numeric code is generic over [`Scalar`]; parameters are stored as `f32`
//! and the gradient oracle re-runs everything at `f64`.

pub mod data;
pub mod checkpoint;
pub mod error;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod scalar;
pub mod seed;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use metrics::{ConfusionMatrix, MetricsReport};
pub use model::{ModelConfig, ParameterSet};
pub use scalar::Scalar;
pub use tensor::Tensor;

/// Storage precision tensors.
pub type Tensor32 = Tensor<f32>;
/// Oracle precision tensors.
pub type Tensor64 = Tensor<f64>;
pub type Params32 = ParameterSet<f32>;
pub type Params64 = ParameterSet<f64>;
