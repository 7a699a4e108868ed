//! Floating point abstraction shared by every numeric module.

use clarabel::algebra::FloatT;
use num_complex::Complex;

/// Real scalar used throughout the crate: `f32` or `f64`.
///
/// The bound is the conic backend's float trait (itself a bundle of
/// `num_traits` bounds), so any scalar accepted here can be handed straight
/// to the interior-point solver.
pub trait Scalar:
    FloatT + std::iter::Sum + serde::Serialize + serde::de::DeserializeOwned
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Complex number over a [`Scalar`].
pub type Cplx<T> = Complex<T>;

/// Converts an `f64` literal to `T`.
#[inline]
pub fn cst<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("constant representable in scalar type")
}

/// Converts a count to `T`.
#[inline]
pub fn from_usize<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub fn cplx<T: Scalar>(re: T, im: T) -> Cplx<T> {
    Complex::new(re, im)
}

#[inline]
pub fn czero<T: Scalar>() -> Cplx<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub fn cone<T: Scalar>() -> Cplx<T> {
    Complex::new(T::one(), T::zero())
}

/// `exp(j*phase)`.
#[inline]
pub fn cis<T: Scalar>(phase: T) -> Cplx<T> {
    Complex::new(phase.cos(), phase.sin())
}
