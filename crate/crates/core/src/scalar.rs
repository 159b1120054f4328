//! Scalar abstraction: all numeric kernels are generic over the real scalar
//! type backing the complex arithmetic (`f32` or `f64`).

use num_complex::Complex;
use num_traits::{Float, FromPrimitive, NumAssign};
use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

/// Real scalar type underlying all complex matrix arithmetic.
///
/// Implemented for `f32` and `f64`. Tolerances throughout the crate are
/// stated for `f64`; [`Scalar::spec_tol`] widens them by the machine-epsilon
/// ratio so the same contracts hold in lower precision.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Send + Sync + Debug + Display + LowerExp + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }

    /// A tolerance stated for `f64`, rescaled to this type's precision.
    #[inline]
    fn spec_tol(tol_f64: f64) -> Self {
        let ratio = Self::epsilon() / Self::c(f64::EPSILON);
        Self::c(tol_f64) * ratio.max(Self::one())
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Complex number over a [`Scalar`].
pub type C<T> = Complex<T>;

/// Zero of the complex type.
#[inline]
pub fn czero<T: Scalar>() -> C<T> {
    C::new(T::zero(), T::zero())
}

/// Real constant as a complex number.
#[inline]
pub fn cre<T: Scalar>(x: T) -> C<T> {
    C::new(x, T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_tol_is_identity_for_f64() {
        assert_eq!(f64::spec_tol(1e-10), 1e-10);
    }

    #[test]
    fn spec_tol_widens_for_f32() {
        let t = f32::spec_tol(1e-12);
        assert!(t > 1e-12 && t < 1e-2, "got {t}");
    }
}
