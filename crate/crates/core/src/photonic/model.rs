use std::f64::consts::FRAC_1_SQRT_2;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::layer::{LayerWeights, PNNLayer, RealizedLayer, MAX_GAIN};
use super::matrix::CMatrix;
use super::mesh::Mesh;
use crate::diff::{Complex, ComplexValue, Real};
use crate::error::{Error, Result};

/// What is measured at the output ports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Detection {
    /// Photodetectors: `|y_i|^2`, phase discarded.
    #[default]
    Intensity,
    /// Coherent readout of the full field.
    Field,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelOutput {
    Intensity(Vec<f64>),
    Field(Vec<ComplexValue>),
}

pub fn detect(y: &[ComplexValue], mode: Detection) -> ModelOutput {
    match mode {
        Detection::Intensity => ModelOutput::Intensity(y.iter().map(|z| z.modulus_sq()).collect()),
        Detection::Field => ModelOutput::Field(y.to_vec()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerKind {
    FreeMatrix,
    UnitaryMesh,
    SvdMesh,
}

fn default_depth() -> usize {
    2
}

fn default_activation() -> Activation {
    Activation::Modrelu { b: 0.1 }
}

/// Shape and initialization of a freshly sampled network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    #[serde(default = "ArchitectureConfig::default_kind")]
    pub kind: LayerKind,
    /// Number of layers `L`.
    #[serde(default = "default_depth")]
    pub depth: usize,
    /// Port count `N`; defaults to `max(inputs, classes)`.
    #[serde(default)]
    pub ports: Option<usize>,
    /// Activation between layers, with its initial bias.
    #[serde(default = "default_activation")]
    pub activation: Activation,
    /// Also apply the activation after the last layer.
    #[serde(default)]
    pub activate_last: bool,
    #[serde(default)]
    pub detection: Detection,
}

impl ArchitectureConfig {
    fn default_kind() -> LayerKind {
        LayerKind::SvdMesh
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Validation("architecture depth must be >= 1".into()));
        }
        if self.ports == Some(0) {
            return Err(Error::Validation("architecture ports must be >= 1".into()));
        }
        Ok(())
    }

    pub fn port_count(&self, inputs: usize, classes: usize) -> usize {
        self.ports.unwrap_or(inputs.max(classes))
    }
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        Self {
            kind: LayerKind::SvdMesh,
            depth: 2,
            ports: None,
            activation: default_activation(),
            activate_last: false,
            detection: Detection::Intensity,
        }
    }
}

/// A feed-forward photonic network of `L` layers on `N` ports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PNNModel {
    pub n_inputs: usize,
    pub layers: Vec<PNNLayer>,
    pub detection: Detection,
}

/// A model with every layer operator built for one scalar type.
pub(crate) struct RealizedModel<T> {
    layers: Vec<RealizedLayer<T>>,
}

impl<T: Real> RealizedModel<T> {
    /// Field at the output ports and whether any activation hit a kink.
    pub(crate) fn field(&self, input: &[Complex<T>]) -> (Vec<Complex<T>>, bool) {
        let mut non_smooth = false;
        let mut y = input.to_vec();
        for layer in &self.layers {
            y = layer.apply(&y, &mut non_smooth);
        }
        (y, non_smooth)
    }
}

impl PNNModel {
    pub fn new(n_inputs: usize, layers: Vec<PNNLayer>, detection: Detection) -> Result<Self> {
        let model = Self {
            n_inputs,
            layers,
            detection,
        };
        model.validate()?;
        Ok(model)
    }

    /// Single identity layer without activation, read out as a field.
    pub fn identity(n: usize) -> Self {
        Self {
            n_inputs: n,
            layers: vec![PNNLayer {
                weights: LayerWeights::FreeMatrix {
                    weights: CMatrix::identity(n),
                },
                bias: vec![Complex::zero(); n],
                activation: Activation::Identity,
            }],
            detection: Detection::Field,
        }
    }

    /// Sample a fresh network on `ports` ports.
    ///
    /// Mesh phases are uniform in `[0, 2pi)`, free-matrix entries complex
    /// Gaussian with `E|w|^2 = 1/N`, svd-mesh gains start at `MAX_GAIN`,
    /// biases at zero.
    pub fn random<R: Rng + ?Sized>(
        arch: &ArchitectureConfig,
        ports: usize,
        rng: &mut R,
    ) -> Result<Self> {
        arch.validate()?;
        let std = FRAC_1_SQRT_2 / (ports as f64).sqrt();
        let layers = (0..arch.depth)
            .map(|l| {
                let weights = match arch.kind {
                    LayerKind::FreeMatrix => LayerWeights::FreeMatrix {
                        weights: CMatrix::from_fn(ports, ports, |_, _| {
                            let re: f64 = rng.sample(StandardNormal);
                            let im: f64 = rng.sample(StandardNormal);
                            Complex::new(re * std, im * std)
                        }),
                    },
                    LayerKind::UnitaryMesh => LayerWeights::UnitaryMesh {
                        mesh: Mesh::random(ports, rng),
                    },
                    LayerKind::SvdMesh => LayerWeights::SvdMesh {
                        input_mesh: Mesh::random(ports, rng),
                        gains: vec![MAX_GAIN; ports],
                        output_mesh: Mesh::random(ports, rng),
                    },
                };
                let last = l + 1 == arch.depth;
                PNNLayer {
                    weights,
                    bias: vec![Complex::zero(); ports],
                    activation: if last && !arch.activate_last {
                        Activation::Identity
                    } else {
                        arch.activation
                    },
                }
            })
            .collect();
        Self::new(ports, layers, arch.detection)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Validation("model needs at least one layer".into()));
        }
        let mut width = self.n_inputs;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.validate()?;
            if layer.input_dim() != width {
                return Err(Error::shape(
                    width,
                    layer.input_dim(),
                    format!("layer {i} input"),
                ));
            }
            width = layer.output_dim();
        }
        Ok(())
    }

    /// Parse and validate a serialized model.
    pub fn from_json(json: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(json)
            .map_err(|e| Error::Validation(format!("model json: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    /// Floats are written in shortest round-trip form, so a reload is
    /// bit-identical.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization is infallible")
    }

    pub fn n_outputs(&self) -> usize {
        self.layers
            .last()
            .map_or(self.n_inputs, PNNLayer::output_dim)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(PNNLayer::param_count).sum()
    }

    /// Flattened trainable parameters, layer by layer.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            layer.write_params(&mut out);
        }
        out
    }

    /// Load flattened parameters. Mesh phases are wrapped into `[0, 2pi)` and
    /// svd-mesh gains clipped to `[0, MAX_GAIN]`.
    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::shape(
                self.param_count(),
                params.len(),
                "model parameters",
            ));
        }
        let mut at = 0;
        for layer in &mut self.layers {
            let n = layer.param_count();
            layer.read_params(&params[at..at + n])?;
            at += n;
        }
        Ok(())
    }

    pub(crate) fn realize<T: Real>(&self, params: &[T]) -> RealizedModel<T> {
        let mut at = 0;
        let layers = self
            .layers
            .iter()
            .map(|layer| {
                let n = layer.param_count();
                let r = layer.realize(&params[at..at + n]);
                at += n;
                r
            })
            .collect();
        RealizedModel { layers }
    }

    pub(crate) fn realize_f64(&self) -> RealizedModel<f64> {
        self.realize(&self.params())
    }

    /// Realize the model with parameters lifted to `T` as constants.
    pub(crate) fn realize_const<T: Real>(&self) -> RealizedModel<T> {
        let params: Vec<T> = self.params().into_iter().map(T::from_f64).collect();
        self.realize(&params)
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.n_inputs {
            return Err(Error::shape(self.n_inputs, len, "model input"));
        }
        Ok(())
    }

    /// Pre-detection output field `y^(L)` and the non-smooth flag.
    pub fn forward_field(&self, input: &[ComplexValue]) -> Result<(Vec<ComplexValue>, bool)> {
        self.check_input(input.len())?;
        Ok(self.realize_f64().field(input))
    }

    /// Field-mode evaluation generic over the scalar type, parameters held
    /// constant. Used for input sensitivities.
    pub fn forward_field_with<T: Real>(
        &self,
        input: &[Complex<T>],
    ) -> Result<(Vec<Complex<T>>, bool)> {
        self.check_input(input.len())?;
        Ok(self.realize_const::<T>().field(input))
    }
}

/// Apply every layer then the model's detection.
pub fn model_forward(model: &PNNModel, input: &[ComplexValue]) -> Result<ModelOutput> {
    let (y, _) = model.forward_field(input)?;
    Ok(detect(&y, model.detection))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn identity_layer_adds_bias() {
        let mut model = PNNModel::identity(2);
        model.layers[0].bias = vec![Complex::new(0.5, -0.25), Complex::new(0.0, 1.0)];
        let x = [Complex::new(1.0, 2.0), Complex::new(-3.0, 0.5)];
        match model_forward(&model, &x).unwrap() {
            ModelOutput::Field(y) => {
                assert_eq!(y[0], Complex::new(1.5, 1.75));
                assert_eq!(y[1], Complex::new(-3.0, 1.5));
            }
            other => panic!("expected field, got {other:?}"),
        }
    }

    #[test]
    fn zero_model_detects_zero() {
        let mut model = PNNModel::identity(3);
        model.detection = Detection::Intensity;
        let zeros = vec![0.0; model.param_count()];
        model.set_params(&zeros).unwrap();
        let out = model_forward(&model, &[Complex::new(1.0, 1.0); 3]).unwrap();
        assert_eq!(out, ModelOutput::Intensity(vec![0.0; 3]));
    }

    #[test]
    fn detect_intensity() {
        assert_eq!(
            detect(&[Complex::new(3.0, 4.0)], Detection::Intensity),
            ModelOutput::Intensity(vec![25.0])
        );
        assert_eq!(
            detect(&[Complex::zero(); 2], Detection::Intensity),
            ModelOutput::Intensity(vec![0.0; 2])
        );
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for kind in [
            LayerKind::FreeMatrix,
            LayerKind::UnitaryMesh,
            LayerKind::SvdMesh,
        ] {
            let arch = ArchitectureConfig {
                kind,
                ..Default::default()
            };
            let model = PNNModel::random(&arch, 4, &mut rng).unwrap();
            let p = model.params();
            assert_eq!(p.len(), model.param_count());
            let mut other = model.clone();
            other.set_params(&p).unwrap();
            assert_eq!(other, model);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let model = PNNModel::identity(3);
        assert!(matches!(
            model_forward(&model, &[Complex::zero(); 2]),
            Err(Error::Shape { .. })
        ));
        assert!(matches!(
            PNNModel::identity(3).clone().set_params(&[0.0; 2]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn gains_are_clipped() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut model = PNNModel::random(&ArchitectureConfig::default(), 3, &mut rng).unwrap();
        let p: Vec<f64> = model.params().iter().map(|v| v + 5.0).collect();
        model.set_params(&p).unwrap();
        for layer in &model.layers {
            if let LayerWeights::SvdMesh { gains, .. } = &layer.weights {
                assert!(gains.iter().all(|&g| g == MAX_GAIN));
            }
        }
    }

    #[test]
    fn json_round_trip_is_bit_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for kind in [
            LayerKind::FreeMatrix,
            LayerKind::UnitaryMesh,
            LayerKind::SvdMesh,
        ] {
            let arch = ArchitectureConfig {
                kind,
                ..Default::default()
            };
            let model = PNNModel::random(&arch, 3, &mut rng).unwrap();
            let json = serde_json::to_string(&model).unwrap();
            let back: PNNModel = serde_json::from_str(&json).unwrap();
            assert_eq!(back, model);
            let bits = |m: &PNNModel| m.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&back), bits(&model));
            assert_eq!(serde_json::to_string(&back).unwrap(), json);
        }
    }
}
