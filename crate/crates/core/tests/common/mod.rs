#![allow(dead_code)]

use pel_core::encodings::{EncodingKind, EncodingSpec, FeaturePairing};
use pel_core::photonic::{Activation, ArchitectureConfig, Detection, LayerKind, PNNModel};
use rand::Rng;

pub const COMBINED_KINDS: [EncodingKind; 5] = [
    EncodingKind::Linear,
    EncodingKind::Exponential,
    EncodingKind::HwLinear,
    EncodingKind::HwExponential,
    EncodingKind::EngineeredRadial { beta: 0.0 },
];

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn paired_spec(kind: EncodingKind) -> EncodingSpec {
    EncodingSpec::raw(
        kind,
        FeaturePairing {
            pairs: vec![(0, 1), (2, 3)],
            singles: vec![],
        },
    )
    .unwrap()
    .with_arcsin(true)
}

/// A point inside every encoding's domain with no coordinate near zero, so
/// no ratio hits a sentinel.
pub fn safe_point<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m: f64 = rng.gen_range(0.05..0.95);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect()
}

/// Random multi-layer mesh network without modReLU: complex linear in its
/// input, so the network factor cancels in relative importance.
pub fn linear_model<R: Rng>(rng: &mut R, kind: LayerKind, ports: usize) -> PNNModel {
    let arch = ArchitectureConfig {
        kind,
        depth: 3,
        activation: Activation::Identity,
        detection: Detection::Field,
        ..Default::default()
    };
    let mut model = PNNModel::random(&arch, ports, rng).unwrap();
    randomize_biases(&mut model, rng);
    model
}

/// Default architecture (svd-mesh, modReLU) with random biases.
pub fn nonlinear_model<R: Rng>(rng: &mut R, ports: usize) -> PNNModel {
    let mut model = PNNModel::random(&ArchitectureConfig::default(), ports, rng).unwrap();
    randomize_biases(&mut model, rng);
    model
}

pub fn randomize_biases<R: Rng>(model: &mut PNNModel, rng: &mut R) {
    for layer in &mut model.layers {
        for b in &mut layer.bias {
            *b = pel_core::diff::Complex::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
        }
    }
}
