use std::ops::{Add, Div, Mul, Neg, Sub};

use super::Real;

/// A real value paired with its derivative along one seed direction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DualReal {
    pub value: f64,
    pub deriv: f64,
}

impl DualReal {
    pub const fn new(value: f64, deriv: f64) -> Self {
        Self { value, deriv }
    }

    /// The seeded variable: derivative 1.
    pub const fn variable(value: f64) -> Self {
        Self { value, deriv: 1.0 }
    }

    pub const fn constant(value: f64) -> Self {
        Self { value, deriv: 0.0 }
    }
}

/// `deriv * factor`, except that a zero tangent stays zero even where the
/// local derivative is infinite (a constant passing through `sqrt(0)`).
#[inline]
fn chain(deriv: f64, factor: f64) -> f64 {
    if deriv == 0.0 {
        0.0
    } else {
        deriv * factor
    }
}

impl Add for DualReal {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self::new(self.value + rhs.value, self.deriv + rhs.deriv)
    }
}

impl Sub for DualReal {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.value - rhs.value, self.deriv - rhs.deriv)
    }
}

impl Mul for DualReal {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Self::new(
            self.value * rhs.value,
            self.deriv * rhs.value + self.value * rhs.deriv,
        )
    }
}

impl Div for DualReal {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.value;
        Self::new(
            self.value * inv,
            (self.deriv * rhs.value - self.value * rhs.deriv) * inv * inv,
        )
    }
}

impl Neg for DualReal {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.value, -self.deriv)
    }
}

impl Real for DualReal {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Self::constant(v)
    }
    #[inline]
    fn value(self) -> f64 {
        self.value
    }
    #[inline]
    fn sin(self) -> Self {
        Self::new(self.value.sin(), self.deriv * self.value.cos())
    }
    #[inline]
    fn cos(self) -> Self {
        Self::new(self.value.cos(), -self.deriv * self.value.sin())
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.value.exp();
        Self::new(e, self.deriv * e)
    }
    #[inline]
    fn ln(self) -> Self {
        Self::new(self.value.ln(), chain(self.deriv, 1.0 / self.value))
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        Self::new(s, chain(self.deriv, 0.5 / s))
    }
    #[inline]
    fn asin(self) -> Self {
        Self::new(
            self.value.asin(),
            chain(self.deriv, 1.0 / (1.0 - self.value * self.value).sqrt()),
        )
    }
    #[inline]
    fn atan2(self, x: Self) -> Self {
        let r2 = self.value * self.value + x.value * x.value;
        Self::new(
            self.value.atan2(x.value),
            chain(self.deriv, x.value / r2) - chain(x.deriv, self.value / r2),
        )
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        Self::new(self.value * k, self.deriv * k)
    }
}
