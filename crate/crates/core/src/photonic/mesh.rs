use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::CMatrix;
use super::mzi::{mzi_transfer, wrap_phase, MZIParams};
use crate::diff::{Complex, ComplexValue, Real};
use crate::error::{Error, Result};

/// Where each MZI of a rectangular (Clements) mesh sits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshLayout {
    pub n: usize,
    /// `(column, top port)` per MZI, column-major.
    pub placements: Vec<(usize, usize)>,
    /// Phase screen applied after the last column.
    pub output_phases: Vec<f64>,
}

impl MeshLayout {
    /// Rectangular layout on `n` ports: `n` columns, even columns start at
    /// port 0 and odd columns at port 1.
    pub fn clements(n: usize) -> Self {
        let mut placements = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for col in 0..n {
            let mut top = col % 2;
            while top + 1 < n {
                placements.push((col, top));
                top += 2;
            }
        }
        Self {
            n,
            placements,
            output_phases: vec![0.0; n],
        }
    }

    pub fn mzi_count(&self) -> usize {
        self.placements.len()
    }

    pub fn validate(&self) -> Result<()> {
        let expected = self.n * self.n.saturating_sub(1) / 2;
        if self.placements.len() != expected {
            return Err(Error::Validation(format!(
                "mesh on {} ports needs {expected} MZIs, layout has {}",
                self.n,
                self.placements.len()
            )));
        }
        if let Some(&(col, top)) = self.placements.iter().find(|&&(_, top)| top + 1 >= self.n) {
            return Err(Error::Validation(format!(
                "MZI at column {col} has top port {top}, must be < {}",
                self.n - 1
            )));
        }
        if self.output_phases.len() != self.n {
            return Err(Error::shape(
                self.n,
                self.output_phases.len(),
                "mesh output phases",
            ));
        }
        if self.output_phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::Validation(
                "mesh output phases must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// A programmed MZI mesh: layout plus one phase pair per MZI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub layout: MeshLayout,
    pub mzis: Vec<MZIParams>,
}

impl Mesh {
    pub fn new(layout: MeshLayout, mzis: Vec<MZIParams>) -> Result<Self> {
        let mesh = Self { layout, mzis };
        mesh.validate()?;
        Ok(mesh)
    }

    /// All phases (internal, external and output) uniform in `[0, 2pi)`.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut layout = MeshLayout::clements(n);
        let mzis = (0..layout.mzi_count())
            .map(|_| MZIParams {
                theta: rng.gen_range(0.0..TAU),
                phi: rng.gen_range(0.0..TAU),
            })
            .collect();
        for p in &mut layout.output_phases {
            *p = rng.gen_range(0.0..TAU);
        }
        Self { layout, mzis }
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        if self.mzis.len() != self.layout.mzi_count() {
            return Err(Error::shape(
                self.layout.mzi_count(),
                self.mzis.len(),
                "mesh phase count",
            ));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.layout.n
    }

    /// Real parameters: `theta, phi` per MZI then the output phases.
    pub fn param_count(&self) -> usize {
        2 * self.mzis.len() + self.layout.n
    }

    pub(crate) fn write_params(&self, out: &mut Vec<f64>) {
        for m in &self.mzis {
            out.push(m.theta);
            out.push(m.phi);
        }
        out.extend_from_slice(&self.layout.output_phases);
    }

    pub(crate) fn read_params(&mut self, params: &[f64]) -> Result<()> {
        let m = self.mzis.len();
        for (i, mzi) in self.mzis.iter_mut().enumerate() {
            *mzi = MZIParams::new(params[2 * i], params[2 * i + 1])?;
        }
        for (dst, &src) in self.layout.output_phases.iter_mut().zip(&params[2 * m..]) {
            if !src.is_finite() {
                return Err(Error::Validation("mesh output phase must be finite".into()));
            }
            *dst = wrap_phase(src);
        }
        Ok(())
    }

    pub fn matrix(&self) -> CMatrix<f64> {
        let mut params = Vec::with_capacity(self.param_count());
        self.write_params(&mut params);
        mesh_matrix(&self.layout, &params)
    }
}

/// Transfer matrix of a mesh from its flattened phases (see
/// [`Mesh::param_count`]): MZIs applied in placement order, then the output
/// phase screen.
pub fn mesh_matrix<T: Real>(layout: &MeshLayout, params: &[T]) -> CMatrix<T> {
    let m = layout.placements.len();
    let mut u = CMatrix::identity(layout.n);
    for (i, &(_, top)) in layout.placements.iter().enumerate() {
        let block = mzi_transfer(params[2 * i], params[2 * i + 1]);
        u.apply_rows(top, &block);
    }
    for row in 0..layout.n {
        let phase = Complex::cis(params[2 * m + row]);
        for col in 0..layout.n {
            u.set(row, col, phase * u.get(row, col));
        }
    }
    u
}

/// Propagate a field vector through the mesh.
pub fn mesh_forward(
    layout: &MeshLayout,
    phases: &[MZIParams],
    input: &[ComplexValue],
) -> Result<Vec<ComplexValue>> {
    if input.len() != layout.n {
        return Err(Error::shape(layout.n, input.len(), "mesh input"));
    }
    if phases.len() != layout.placements.len() {
        return Err(Error::shape(
            layout.placements.len(),
            phases.len(),
            "mesh phase count",
        ));
    }
    let mut y = input.to_vec();
    for (&(_, top), p) in layout.placements.iter().zip(phases) {
        let t = p.transfer();
        let (a, b) = (y[top], y[top + 1]);
        y[top] = t[0][0] * a + t[0][1] * b;
        y[top + 1] = t[1][0] * a + t[1][1] * b;
    }
    for (v, &phase) in y.iter_mut().zip(&layout.output_phases) {
        *v = Complex::cis(phase) * *v;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn norm(v: &[ComplexValue]) -> f64 {
        v.iter().map(|z| z.modulus_sq()).sum::<f64>().sqrt()
    }

    #[test]
    fn layout_sizes() {
        for n in 1..10 {
            let l = MeshLayout::clements(n);
            assert_eq!(l.mzi_count(), n * (n - 1) / 2);
            assert!(l.placements.iter().all(|&(_, top)| top < n - 1));
            l.validate().unwrap();
        }
    }

    #[test]
    fn single_bar_state_mzi() {
        let layout = MeshLayout::clements(2);
        let out = mesh_forward(
            &layout,
            &[MZIParams::new(PI, 0.0).unwrap()],
            &[Complex::new(1.0, 0.0), Complex::zero()],
        )
        .unwrap();
        assert!((out[0].re + 1.0).abs() < 1e-12 && out[0].im.abs() < 1e-12);
        assert!(out[1].modulus() < 1e-12);
    }

    #[test]
    fn zero_in_zero_out() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mesh = Mesh::random(5, &mut rng);
        let out = mesh_forward(&mesh.layout, &mesh.mzis, &[Complex::zero(); 5]).unwrap();
        assert!(out.iter().all(|z| *z == Complex::zero()));
    }

    #[test]
    fn forward_matches_matrix_and_conserves_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let mesh = Mesh::random(4, &mut rng);
            let x: Vec<ComplexValue> = (0..4)
                .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let y = mesh_forward(&mesh.layout, &mesh.mzis, &x).unwrap();
            let y2 = mesh.matrix().matvec(&x).unwrap();
            for (a, b) in y.iter().zip(&y2) {
                assert!((*a - *b).modulus() < 1e-12);
            }
            assert!((norm(&y) - norm(&x)).abs() < 1e-10);
        }
    }

    #[test]
    fn shape_errors() {
        let layout = MeshLayout::clements(3);
        let phases = vec![MZIParams::new(0.0, 0.0).unwrap(); 3];
        assert!(matches!(
            mesh_forward(&layout, &phases, &[Complex::zero(); 2]),
            Err(Error::Shape { .. })
        ));
        assert!(matches!(
            mesh_forward(&layout, &phases[..2], &[Complex::zero(); 3]),
            Err(Error::Shape { .. })
        ));
    }
}
