//! Real and complex scalar fields.
//!
//! A tensor is homogeneously real or complex; the field is carried by the
//! element type, never per entry.

use core::fmt::Debug;
use core::iter::Sum;
use core::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Field {
    Real,
    Complex,
}

impl Field {
    pub fn tag(self) -> char {
        match self {
            Field::Real => 'r',
            Field::Complex => 'c',
        }
    }
}

impl core::str::FromStr for Field {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "r" | "real" => Ok(Field::Real),
            "c" | "complex" => Ok(Field::Complex),
            other => Err(crate::Error::InvalidShape(alloc::format!(
                "unknown field `{other}` (expected real or complex)"
            ))),
        }
    }
}

impl core::fmt::Display for Field {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Field::Real => "real",
            Field::Complex => "complex",
        })
    }
}

/// Element type of tensors and matrices: `f64` or [`Complex64`].
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
{
    const FIELD: Field;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(re: f64) -> Self;
    /// Builds a scalar from real and imaginary parts; the imaginary part is
    /// dropped for the real field.
    fn from_parts(re: f64, im: f64) -> Self;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn conj(self) -> Self;
    /// Squared modulus.
    fn abs_sqr(self) -> f64;
    fn abs(self) -> f64;
    fn scale(self, factor: f64) -> Self;
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    const FIELD: Field = Field::Real;

    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn one() -> Self {
        1.0
    }
    #[inline]
    fn from_real(re: f64) -> Self {
        re
    }
    #[inline]
    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
    #[inline]
    fn im(self) -> f64 {
        0.0
    }
    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn abs_sqr(self) -> f64 {
        self * self
    }
    #[inline]
    fn abs(self) -> f64 {
        libm::fabs(self)
    }
    #[inline]
    fn scale(self, factor: f64) -> Self {
        self * factor
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for Complex64 {
    const FIELD: Field = Field::Complex;

    #[inline]
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    #[inline]
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    #[inline]
    fn from_real(re: f64) -> Self {
        Complex64::new(re, 0.0)
    }
    #[inline]
    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
    #[inline]
    fn im(self) -> f64 {
        self.im
    }
    #[inline]
    fn conj(self) -> Self {
        Complex64::new(self.re, -self.im)
    }
    #[inline]
    fn abs_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
    #[inline]
    fn abs(self) -> f64 {
        libm::hypot(self.re, self.im)
    }
    #[inline]
    fn scale(self, factor: f64) -> Self {
        Complex64::new(self.re * factor, self.im * factor)
    }
    #[inline]
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// `sum_i conj(x_i) * y_i`.
#[inline]
pub(crate) fn dot_conj<S: Scalar>(x: &[S], y: &[S]) -> S {
    let mut acc = S::zero();
    for (&a, &b) in x.iter().zip(y) {
        acc += a.conj() * b;
    }
    acc
}

/// `y += alpha * x`.
#[inline]
pub(crate) fn axpy<S: Scalar>(alpha: S, x: &[S], y: &mut [S]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub(crate) fn norm_sqr<S: Scalar>(x: &[S]) -> f64 {
    x.iter().map(|v| v.abs_sqr()).sum()
}
