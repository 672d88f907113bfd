//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::Serialize;

/// Floating point type the solvers and falsifiers run on: `f32` or `f64`.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Debug + Display + Serialize + Send + Sync + 'static {
    /// Converts an `f64` constant, saturating to infinity on overflow.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(|| if v < 0.0 { Self::neg_infinity() } else { Self::infinity() })
    }

    /// Lossy widening used for error payloads and serialization.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
