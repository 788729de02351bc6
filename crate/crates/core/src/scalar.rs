//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! Parameters are stored as `f32`; the gradient oracle re-runs the same code
//! at `f64`. Anything that implements [`Scalar`] can flow through the tensor
//! primitives and the model.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps};

pub trait Scalar:
    Float + FromPrimitive + NumAssignOps + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal. Every scalar we support can represent the
    /// literals used in this crate (possibly rounded).
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
