use serde::{Deserialize, Serialize};

use crate::diff::{Complex, ComplexValue, Real};

/// Optical nonlinearity applied elementwise after the bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Activation {
    Identity,
    /// `(|z| + b) z/|z|` where positive, zero elsewhere; `b` is trainable.
    Modrelu {
        b: f64,
    },
}

impl Activation {
    pub fn param_count(&self) -> usize {
        match self {
            Activation::Identity => 0,
            Activation::Modrelu { .. } => 1,
        }
    }
}

/// modReLU with its non-smooth marker.
///
/// Returns `(output, non_smooth)`. The flag is raised at `|z| + b = 0` and at
/// `z = 0` with `b >= 0`; both points take the zero output and zero
/// subgradient.
pub fn modrelu_traced<T: Real>(z: Complex<T>, b: T) -> (Complex<T>, bool) {
    let m2 = z.modulus_sq();
    if m2.value() == 0.0 {
        return (Complex::zero(), b.value() >= 0.0);
    }
    let m = m2.sqrt();
    let shifted = m + b;
    let s = shifted.value();
    if s > 0.0 {
        (z.scale(shifted / m), false)
    } else {
        (Complex::zero(), s == 0.0)
    }
}

pub fn modrelu(z: ComplexValue, b: f64) -> ComplexValue {
    modrelu_traced(z, b).0
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn shrinks_modulus() {
        assert_eq!(
            modrelu(Complex::new(2.0, 0.0), -1.0),
            Complex::new(1.0, 0.0)
        );
    }

    #[test]
    fn kills_small_inputs() {
        assert_eq!(modrelu(Complex::new(0.3, 0.4), -1.0), Complex::zero());
    }

    #[test]
    fn flags_kink_and_origin() {
        assert!(modrelu_traced(Complex::new(0.6, 0.8), -1.0).1);
        assert!(modrelu_traced(Complex::<f64>::zero(), 0.1).1);
        assert!(!modrelu_traced(Complex::<f64>::zero(), -0.1).1);
        assert!(!modrelu_traced(Complex::new(0.6, 0.8), 0.1).1);
    }

    #[test]
    fn preserves_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let z = Complex::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let b = rng.gen_range(-1.0..1.0);
            let y = modrelu(z, b);
            if y != Complex::zero() {
                assert!((y.phase() - z.phase()).abs() < 1e-12);
            }
        }
    }
}
