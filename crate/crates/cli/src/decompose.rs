//! Program a Clements mesh from a unitary given as JSON.

use std::fs;
use std::path::Path;

use pel_core::diff::ComplexValue;
use pel_core::photonic::{mesh_from_unitary, CMatrix, ComplexMatrix, Mesh, UNITARITY_TOLERANCE};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Printed on success: the phase schedule and how well it rebuilds the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub n: usize,
    pub mesh: Mesh,
    pub reconstruction_error: f64,
}

/// Parse rows of `[re, im]` pairs into a square matrix.
pub fn parse_matrix(text: &str) -> CliResult<ComplexMatrix> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let rows: Vec<Vec<ComplexValue>> = serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::Config(format!("matrix {}: {}", e.path(), e.inner())))?;
    let m = CMatrix::from_rows(rows).map_err(|e| CliError::Config(format!("matrix: {e}")))?;
    if !m.is_square() || m.rows() == 0 {
        return Err(CliError::Config(format!(
            "matrix: expected a non-empty square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if m.entries()
        .iter()
        .any(|z| !(z.re.is_finite() && z.im.is_finite()))
    {
        return Err(CliError::Config("matrix: entries must be finite".into()));
    }
    Ok(m)
}

/// Decompose; a non-unitary input is a validation error carrying
/// `||U^dagger U - I||_F`, a poor rebuild a numeric one.
pub fn decompose(u: &ComplexMatrix) -> CliResult<Decomposition> {
    let residual = u.unitarity_residual();
    if residual > UNITARITY_TOLERANCE {
        return Err(CliError::Validation(format!(
            "matrix is not unitary: ||U^dagger U - I||_F = {residual:e}"
        )));
    }
    let mesh = mesh_from_unitary(u)?;
    let reconstruction_error = mesh.matrix().frobenius_distance(u);
    if !(reconstruction_error < UNITARITY_TOLERANCE) {
        return Err(CliError::Numeric(format!(
            "reconstruction error {reconstruction_error:e} exceeds {UNITARITY_TOLERANCE:e}"
        )));
    }
    Ok(Decomposition {
        n: u.rows(),
        mesh,
        reconstruction_error,
    })
}

pub fn decompose_file(path: &Path) -> CliResult<Decomposition> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    decompose(&parse_matrix(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swap_decomposes() {
        let d = decompose(&parse_matrix("[[[0,0],[1,0]],[[1,0],[0,0]]]").unwrap()).unwrap();
        assert_eq!(d.mesh.mzis.len(), 1);
        assert!(d.reconstruction_error < 1e-12);
    }

    #[test]
    fn bad_shapes_are_config_errors() {
        for text in ["[]", "[[[1,0],[0,0]]]", "[[1,0]]", "{\"a\":1}"] {
            assert!(
                matches!(parse_matrix(text), Err(CliError::Config(_))),
                "{text}"
            );
        }
    }
}
