use serde::{Deserialize, Serialize};

use super::activation::{modrelu_traced, Activation};
use super::matrix::{CMatrix, ComplexMatrix};
use super::mesh::{mesh_matrix, Mesh};
use crate::diff::{Complex, ComplexValue, Real};
use crate::error::{Error, Result};

/// Upper bound on svd-mesh gains: passive attenuation only.
pub const MAX_GAIN: f64 = 1.0;

/// How a layer realizes its weight matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LayerWeights {
    /// Unconstrained complex matrix (idealized, not a physical circuit).
    FreeMatrix { weights: ComplexMatrix },
    /// A single MZI mesh.
    UnitaryMesh { mesh: Mesh },
    /// `U diag(s) V^H`: the input mesh realizes `V^H`, then per-port
    /// attenuators `s` in `[0, MAX_GAIN]`, then the output mesh `U`.
    SvdMesh {
        input_mesh: Mesh,
        gains: Vec<f64>,
        output_mesh: Mesh,
    },
}

/// One layer: `y = sigma(W x + b)`.
///
/// The bias is added as a complex field before the activation; on a chip it
/// would be injected by an extra coherent source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PNNLayer {
    #[serde(flatten)]
    pub weights: LayerWeights,
    pub bias: Vec<ComplexValue>,
    pub activation: Activation,
}

pub(crate) struct RealizedLayer<T> {
    matrix: CMatrix<T>,
    bias: Vec<Complex<T>>,
    act_bias: Option<T>,
}

impl<T: Real> RealizedLayer<T> {
    pub(crate) fn apply(&self, x: &[Complex<T>], non_smooth: &mut bool) -> Vec<Complex<T>> {
        let mut z = self.matrix.matvec_unchecked(x);
        for (zi, &bi) in z.iter_mut().zip(&self.bias) {
            *zi = *zi + bi;
        }
        if let Some(b) = self.act_bias {
            for zi in z.iter_mut() {
                let (y, kink) = modrelu_traced(*zi, b);
                *zi = y;
                *non_smooth |= kink;
            }
        }
        z
    }
}

impl PNNLayer {
    pub fn input_dim(&self) -> usize {
        match &self.weights {
            LayerWeights::FreeMatrix { weights } => weights.cols(),
            LayerWeights::UnitaryMesh { mesh } => mesh.n(),
            LayerWeights::SvdMesh { input_mesh, .. } => input_mesh.n(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match &self.weights {
            LayerWeights::FreeMatrix { weights } => weights.rows(),
            LayerWeights::UnitaryMesh { mesh } => mesh.n(),
            LayerWeights::SvdMesh { output_mesh, .. } => output_mesh.n(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.weights {
            LayerWeights::FreeMatrix { weights } => {
                if weights.entries().iter().any(|z| !z.is_finite()) {
                    return Err(Error::Validation(
                        "free-matrix weights must be finite".into(),
                    ));
                }
            }
            LayerWeights::UnitaryMesh { mesh } => mesh.validate()?,
            LayerWeights::SvdMesh {
                input_mesh,
                gains,
                output_mesh,
            } => {
                input_mesh.validate()?;
                output_mesh.validate()?;
                if input_mesh.n() != output_mesh.n() {
                    return Err(Error::shape(
                        input_mesh.n(),
                        output_mesh.n(),
                        "svd-mesh port counts",
                    ));
                }
                if gains.len() != input_mesh.n() {
                    return Err(Error::shape(input_mesh.n(), gains.len(), "svd-mesh gains"));
                }
                if let Some(g) = gains.iter().find(|g| !(0.0..=MAX_GAIN).contains(*g)) {
                    return Err(Error::Validation(format!(
                        "svd-mesh gain {g} outside [0, {MAX_GAIN}]"
                    )));
                }
            }
        }
        if self.bias.len() != self.output_dim() {
            return Err(Error::shape(
                self.output_dim(),
                self.bias.len(),
                "layer bias",
            ));
        }
        if let Activation::Modrelu { b } = self.activation {
            if !b.is_finite() {
                return Err(Error::Validation("modrelu bias must be finite".into()));
            }
        }
        Ok(())
    }

    /// Number of trainable real parameters.
    pub fn param_count(&self) -> usize {
        let weights = match &self.weights {
            LayerWeights::FreeMatrix { weights } => 2 * weights.rows() * weights.cols(),
            LayerWeights::UnitaryMesh { mesh } => mesh.param_count(),
            LayerWeights::SvdMesh {
                input_mesh,
                gains,
                output_mesh,
            } => input_mesh.param_count() + gains.len() + output_mesh.param_count(),
        };
        weights + 2 * self.bias.len() + self.activation.param_count()
    }

    pub(crate) fn write_params(&self, out: &mut Vec<f64>) {
        match &self.weights {
            LayerWeights::FreeMatrix { weights } => {
                for z in weights.entries() {
                    out.push(z.re);
                    out.push(z.im);
                }
            }
            LayerWeights::UnitaryMesh { mesh } => mesh.write_params(out),
            LayerWeights::SvdMesh {
                input_mesh,
                gains,
                output_mesh,
            } => {
                input_mesh.write_params(out);
                out.extend_from_slice(gains);
                output_mesh.write_params(out);
            }
        }
        for b in &self.bias {
            out.push(b.re);
            out.push(b.im);
        }
        if let Activation::Modrelu { b } = self.activation {
            out.push(b);
        }
    }

    /// Inverse of `write_params`; mesh phases are re-wrapped and gains
    /// clipped to `[0, MAX_GAIN]`.
    pub(crate) fn read_params(&mut self, p: &[f64]) -> Result<()> {
        if let Some(i) = p.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("parameter {i} is not finite")));
        }
        let mut at = 0;
        match &mut self.weights {
            LayerWeights::FreeMatrix { weights } => {
                let (rows, cols) = (weights.rows(), weights.cols());
                *weights = CMatrix::from_fn(rows, cols, |i, j| {
                    let k = 2 * (i * cols + j);
                    Complex::new(p[k], p[k + 1])
                });
                at += 2 * rows * cols;
            }
            LayerWeights::UnitaryMesh { mesh } => {
                mesh.read_params(&p[..mesh.param_count()])?;
                at += mesh.param_count();
            }
            LayerWeights::SvdMesh {
                input_mesh,
                gains,
                output_mesh,
            } => {
                input_mesh.read_params(&p[at..at + input_mesh.param_count()])?;
                at += input_mesh.param_count();
                for g in gains.iter_mut() {
                    *g = p[at].clamp(0.0, MAX_GAIN);
                    at += 1;
                }
                output_mesh.read_params(&p[at..at + output_mesh.param_count()])?;
                at += output_mesh.param_count();
            }
        }
        for b in self.bias.iter_mut() {
            *b = Complex::new(p[at], p[at + 1]);
            at += 2;
        }
        if let Activation::Modrelu { b } = &mut self.activation {
            *b = p[at];
        }
        Ok(())
    }

    /// Build the layer's operators from a flat parameter slice laid out as in
    /// `write_params`.
    pub(crate) fn realize<T: Real>(&self, p: &[T]) -> RealizedLayer<T> {
        let mut at = 0;
        let matrix = match &self.weights {
            LayerWeights::FreeMatrix { weights } => {
                let cols = weights.cols();
                at += 2 * weights.rows() * cols;
                CMatrix::from_fn(weights.rows(), cols, |i, j| {
                    let k = 2 * (i * cols + j);
                    Complex::new(p[k], p[k + 1])
                })
            }
            LayerWeights::UnitaryMesh { mesh } => {
                at += mesh.param_count();
                mesh_matrix(&mesh.layout, &p[..at])
            }
            LayerWeights::SvdMesh {
                input_mesh,
                gains,
                output_mesh,
            } => {
                let n_in = input_mesh.param_count();
                let mut v = mesh_matrix(&input_mesh.layout, &p[..n_in]);
                at += n_in;
                for row in 0..gains.len() {
                    let s = p[at + row];
                    for col in 0..v.cols() {
                        v.set(row, col, v.get(row, col).scale(s));
                    }
                }
                at += gains.len();
                let n_out = output_mesh.param_count();
                let u = mesh_matrix(&output_mesh.layout, &p[at..at + n_out]);
                at += n_out;
                u.matmul(&v).expect("svd-mesh factors share the port count")
            }
        };
        let bias = (0..self.bias.len())
            .map(|i| Complex::new(p[at + 2 * i], p[at + 2 * i + 1]))
            .collect();
        at += 2 * self.bias.len();
        let act_bias = match self.activation {
            Activation::Identity => None,
            Activation::Modrelu { .. } => Some(p[at]),
        };
        RealizedLayer {
            matrix,
            bias,
            act_bias,
        }
    }

    /// The realized weight matrix `W`.
    pub fn weight_matrix(&self) -> ComplexMatrix {
        let mut p = Vec::with_capacity(self.param_count());
        self.write_params(&mut p);
        self.realize::<f64>(&p).matrix
    }
}
