//! Real-pair complex numerics and the two differentiation modes built on them.
//!
//! Forward mode ([`DualReal`]) drives input sensitivities, reverse mode
//! ([`GradTape`]/[`Var`]) drives training, and [`finite_diff`] is the oracle
//! both are checked against.

mod complex;
mod dual;
mod real;
mod tape;

pub use complex::{atan2_real, sin_real, sqrt_real, Complex, ComplexValue};
pub use dual::DualReal;
pub use real::Real;
pub use tape::{reverse_grad, Adjoints, GradTape, Var};

use crate::error::{Error, Result};

/// Result of a forward-mode evaluation seeded on one input coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Jvp {
    pub values: Vec<ComplexValue>,
    /// `(d re y_c / d x_j, d im y_c / d x_j)` for every output `c`.
    pub derivs: Vec<ComplexValue>,
    /// Set when the program passed through a non-smooth point; derivatives
    /// there follow the zero-subgradient convention.
    pub non_smooth: bool,
}

/// Output of a program that can be fed to [`forward_jvp`].
pub trait ProgramOutput {
    fn into_parts(self) -> (Vec<Complex<DualReal>>, bool);
}

impl ProgramOutput for Vec<Complex<DualReal>> {
    fn into_parts(self) -> (Vec<Complex<DualReal>>, bool) {
        (self, false)
    }
}

impl ProgramOutput for (Vec<Complex<DualReal>>, bool) {
    fn into_parts(self) -> (Vec<Complex<DualReal>>, bool) {
        self
    }
}

/// Evaluate `program` at `x` with a unit tangent on `x[seed_index]`.
pub fn forward_jvp<F, O>(program: F, x: &[f64], seed_index: usize) -> Result<Jvp>
where
    F: Fn(&[DualReal]) -> O,
    O: ProgramOutput,
{
    if seed_index >= x.len() {
        return Err(Error::Usage(format!(
            "seed index {seed_index} out of range for {} inputs",
            x.len()
        )));
    }
    let duals: Vec<DualReal> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if i == seed_index {
                DualReal::variable(v)
            } else {
                DualReal::constant(v)
            }
        })
        .collect();
    let (out, non_smooth) = program(&duals).into_parts();
    let values = out
        .iter()
        .map(|z| Complex::new(z.re.value, z.im.value))
        .collect();
    let derivs = out
        .iter()
        .map(|z| Complex::new(z.re.deriv, z.im.deriv))
        .collect();
    Ok(Jvp {
        values,
        derivs,
        non_smooth,
    })
}

/// Central-difference Jacobian, `jac[i][j] = d f_i / d x_j`.
pub fn finite_diff<F>(program: F, x: &[f64], h: f64) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if !(h > 0.0) {
        return Err(Error::Usage(format!(
            "finite-difference step must be > 0, got {h}"
        )));
    }
    let n_out = program(x).len();
    let mut jac = vec![vec![0.0; x.len()]; n_out];
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        probe[j] = x[j] + h;
        let plus = program(&probe);
        probe[j] = x[j] - h;
        let minus = program(&probe);
        probe[j] = x[j];
        if plus.len() != n_out || minus.len() != n_out {
            return Err(Error::shape(
                n_out,
                plus.len(),
                "finite_diff program output",
            ));
        }
        for i in 0..n_out {
            jac[i][j] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Flatten complex values into `[re0, im0, re1, im1, ...]`.
pub fn flatten(values: &[ComplexValue]) -> Vec<f64> {
    values.iter().flat_map(|z| [z.re, z.im]).collect()
}
