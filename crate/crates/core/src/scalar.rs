//! Scalar abstraction shared by every numerical routine in the crate.

use nalgebra::{Complex, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar the toolkit can run on (`f32` or `f64`).
///
/// Everything numerical is generic over this trait; the crate root exports
/// `f64` aliases for day-to-day use.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Default {
    /// Converts an `f64` literal. Never fails for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    /// Widens an absolute tolerance stated for double precision so that it
    /// stays meaningful at this type's precision.
    #[inline]
    fn tol(base: f64) -> f64 {
        base.max(Self::default_epsilon().as_f64() * 1e3)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex number over a [`Real`] scalar.
pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn c<T: Real>(re: T, im: T) -> C<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn c_re<T: Real>(re: T) -> C<T> {
    Complex::new(re, T::zero())
}

/// `exp(i·theta)`.
#[inline]
pub(crate) fn cis<T: Real>(theta: T) -> C<T> {
    Complex::new(theta.cos(), theta.sin())
}
