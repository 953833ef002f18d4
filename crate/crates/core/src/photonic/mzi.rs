use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::diff::{Complex, Real};
use crate::error::{Error, Result};

/// Phase settings of one Mach-Zehnder interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MZIParams {
    /// Internal phase, sets the splitting ratio.
    pub theta: f64,
    /// External phase on the top input arm.
    pub phi: f64,
}

pub(crate) fn wrap_phase(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

impl MZIParams {
    /// Both phases are wrapped into `[0, 2pi)`.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::Validation(format!(
                "MZI phases must be finite, got theta={theta}, phi={phi}"
            )));
        }
        Ok(Self {
            theta: wrap_phase(theta),
            phi: wrap_phase(phi),
        })
    }

    pub fn transfer(&self) -> [[Complex<f64>; 2]; 2] {
        mzi_transfer(self.theta, self.phi)
    }
}

/// 2x2 transfer matrix of an MZI:
///
/// ```text
/// T(theta, phi) = i e^{i theta/2} [[e^{i phi} sin(theta/2),  cos(theta/2)],
///                                  [e^{i phi} cos(theta/2), -sin(theta/2)]]
/// ```
///
/// `theta = pi` is the bar state and `theta = 0` the cross state.
pub fn mzi_transfer<T: Real>(theta: T, phi: T) -> [[Complex<T>; 2]; 2] {
    let half = theta.scale(0.5);
    let (s, c) = (half.sin(), half.cos());
    // i e^{i theta/2} = (-sin(theta/2), cos(theta/2))
    let global = Complex::new(-s, c);
    let ephi = Complex::cis(phi);
    let top = global * ephi;
    [
        [top.scale(s), global.scale(c)],
        [top.scale(c), -global.scale(s)],
    ]
}
