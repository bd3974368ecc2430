//! Scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the field, screen and collapse code is generic over.
///
/// Everything is exercised with `f64`; `f32` instantiates and is fine for
/// phase arithmetic, but the quadrature tolerances used throughout the crate
/// (1e-6 on norms) are only reachable in double precision.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn tau() -> Self {
        Self::TAU()
    }
}

impl Real for f32 {}
impl Real for f64 {}
