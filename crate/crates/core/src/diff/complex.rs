//! Complex arithmetic over pairs of [`Real`] scalars.
//!
//! No holomorphic structure is assumed: derivatives of every operation come
//! from the real and imaginary components separately, which keeps
//! non-holomorphic maps such as the modulus and intensity detection exact.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::Real;
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Default)]
pub struct Complex<T = f64> {
    pub re: T,
    pub im: T,
}

/// Optical field amplitude `A e^{i phi}` stored as a real pair.
pub type ComplexValue = Complex<f64>;

impl<T: fmt::Debug> fmt::Debug for Complex<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}, {:?})", self.re, self.im)
    }
}

impl<T> Complex<T> {
    pub const fn new(re: T, im: T) -> Self {
        Self { re, im }
    }
}

impl<T: Real> Complex<T> {
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn one() -> Self {
        Self::new(T::one(), T::zero())
    }

    pub fn i() -> Self {
        Self::new(T::zero(), T::one())
    }

    pub fn from_real(re: T) -> Self {
        Self::new(re, T::zero())
    }

    pub fn lift(z: ComplexValue) -> Self {
        Self::new(T::from_f64(z.re), T::from_f64(z.im))
    }

    /// `e^{i angle}`.
    pub fn cis(angle: T) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    pub fn from_polar(r: T, angle: T) -> Self {
        Self::new(r * angle.cos(), r * angle.sin())
    }

    pub fn conj(self) -> Self {
        Self::new(self.re, -self.im)
    }

    pub fn modulus_sq(self) -> T {
        self.re * self.re + self.im * self.im
    }

    /// Not differentiable at the origin.
    pub fn modulus(self) -> T {
        self.modulus_sq().sqrt()
    }

    pub fn phase(self) -> T {
        self.im.atan2(self.re)
    }

    pub fn exp(self) -> Self {
        Self::from_polar(self.re.exp(), self.im)
    }

    pub fn scale(self, k: T) -> Self {
        Self::new(self.re * k, self.im * k)
    }

    /// Multiplication by `i`.
    pub fn mul_i(self) -> Self {
        Self::new(-self.im, self.re)
    }

    pub fn checked_div(self, rhs: Self) -> Result<Self> {
        let den = rhs.modulus_sq();
        if den.value() == 0.0 {
            return Err(Error::Domain("complex division by zero modulus".into()));
        }
        Ok(Self::new(
            (self.re * rhs.re + self.im * rhs.im) / den,
            (self.im * rhs.re - self.re * rhs.im) / den,
        ))
    }

    pub fn value(self) -> ComplexValue {
        Complex::new(self.re.value(), self.im.value())
    }
}

impl ComplexValue {
    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl<T: Real> Add for Complex<T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl<T: Real> Sub for Complex<T> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl<T: Real> Mul for Complex<T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Self::new(
            self.re * rhs.re - self.im * rhs.im,
            self.re * rhs.im + self.im * rhs.re,
        )
    }
}

impl<T: Real> Neg for Complex<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.im)
    }
}

/// `sin` of a real operand.
pub fn sin_real<T: Real>(x: T) -> T {
    x.sin()
}

pub fn sqrt_real<T: Real>(x: T) -> Result<T> {
    if x.value() < 0.0 {
        return Err(Error::Domain(format!(
            "sqrt of negative real {}",
            x.value()
        )));
    }
    Ok(x.sqrt())
}

pub fn atan2_real<T: Real>(y: T, x: T) -> T {
    y.atan2(x)
}

// Serialized as a two-element array `[re, im]`.
impl Serialize for ComplexValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.re, self.im].serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex::new(re, im))
    }
}
