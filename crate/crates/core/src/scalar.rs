use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar the deterministic formula layer is written against: f32 or f64.
///
/// Everything in `specfun`, `scaling` and the CDF evaluation in `limits` is generic over
/// this trait. The stochastic layers (sampling, eigenvalues, empirical distances) are
/// f64-only.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Complementary error function.
    fn erfc(self) -> Self;

    /// Lossy conversion from an f64 literal.
    #[inline]
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(v: u64) -> Self {
        Self::from_u64(v).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }
}

impl Real for f64 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfc(self)
    }
}

impl Real for f32 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }
}
