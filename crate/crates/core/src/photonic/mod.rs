//! Photonic circuit primitives composed into complex-valued network layers.

mod activation;
mod clements;
mod layer;
mod matrix;
mod mesh;
mod model;
mod mzi;

pub use activation::{modrelu, modrelu_traced, Activation};
pub use clements::{clements_decompose, haar_unitary, mesh_from_unitary, UNITARITY_TOLERANCE};
pub use layer::{LayerWeights, PNNLayer, MAX_GAIN};
pub use matrix::{CMatrix, ComplexMatrix};
pub use mesh::{mesh_forward, mesh_matrix, Mesh, MeshLayout};
pub use model::{
    detect, model_forward, ArchitectureConfig, Detection, LayerKind, ModelOutput, PNNModel,
};
pub use mzi::{mzi_transfer, MZIParams};

pub(crate) use model::RealizedModel;
