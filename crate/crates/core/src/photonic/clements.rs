//! Decomposition of an arbitrary unitary into a rectangular MZI mesh.
//!
//! Off-diagonal entries are nulled along successive anti-diagonals, alternating
//! between right-multiplication by inverse MZI blocks and left-multiplication
//! by MZI blocks. The remaining diagonal is then pushed through the
//! left-multiplied blocks so that every MZI ends up before a single output
//! phase screen.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::Rng;
use rand_distr::StandardNormal;

use super::matrix::{CMatrix, ComplexMatrix};
use super::mesh::{Mesh, MeshLayout};
use super::mzi::{mzi_transfer, wrap_phase, MZIParams};
use crate::diff::{Complex, ComplexValue};
use crate::error::{Error, Result};

/// Tolerance on `||U^H U - I||_F` accepted by [`clements_decompose`].
pub const UNITARITY_TOLERANCE: f64 = 1e-8;

type Block = [[ComplexValue; 2]; 2];

fn block_adjoint(b: &Block) -> Block {
    [
        [b[0][0].conj(), b[1][0].conj()],
        [b[0][1].conj(), b[1][1].conj()],
    ]
}

fn unit(z: ComplexValue) -> ComplexValue {
    let m = z.modulus();
    if m == 0.0 {
        Complex::one()
    } else {
        z.scale(1.0 / m)
    }
}

/// MZI on columns `(k, k+1)` whose inverse, applied from the right, zeroes
/// `u[row][k]`.
fn null_from_right(u: &ComplexMatrix, row: usize, k: usize) -> (f64, f64) {
    let a = u.get(row, k);
    let b = u.get(row, k + 1);
    let half = b.modulus().atan2(a.modulus());
    let phi = a.phase() - (-b).phase();
    (2.0 * half, phi)
}

/// MZI on rows `(k, k+1)` that, applied from the left, zeroes `u[k+1][col]`.
fn null_from_left(u: &ComplexMatrix, k: usize, col: usize) -> (f64, f64) {
    let a = u.get(k, col);
    let b = u.get(k + 1, col);
    let half = a.modulus().atan2(b.modulus());
    let phi = b.phase() - a.phase();
    (2.0 * half, phi)
}

/// Factor a 2x2 unitary as `diag(a, b) * T(theta, phi)`.
fn factor_phase_then_mzi(m: &Block) -> (ComplexValue, ComplexValue, f64, f64) {
    let [[p, q], [r, t]] = *m;
    let half = p.modulus().atan2(q.modulus());
    let (s, c) = (half.sin(), half.cos());
    let global = Complex::new(-s, c); // i e^{i theta/2}
    let ginv = global.conj();
    let (a, b, ephi);
    if s >= c {
        // a e^{i phi} = p / (g s),  b = -t / (g s)
        let a_ephi = (p * ginv).scale(1.0 / s);
        b = unit((-t * ginv).scale(1.0 / s));
        a = if q.modulus() > 0.0 {
            unit(q * ginv)
        } else {
            Complex::one()
        };
        ephi = unit(a_ephi * a.conj());
    } else {
        // a = q / (g c),  b e^{i phi} = r / (g c)
        a = unit((q * ginv).scale(1.0 / c));
        let b_ephi = (r * ginv).scale(1.0 / c);
        ephi = if p.modulus() > 0.0 {
            unit(p * ginv * a.conj())
        } else {
            Complex::one()
        };
        b = unit(b_ephi * ephi.conj());
    }
    (a, b, 2.0 * half, ephi.phase())
}

/// Program a rectangular mesh that realizes `u`.
///
/// Fails with [`Error::NotUnitary`] when `||u^H u - I||_F` exceeds
/// [`UNITARITY_TOLERANCE`].
pub fn clements_decompose(u: &ComplexMatrix) -> Result<(MeshLayout, Vec<MZIParams>)> {
    if !u.is_square() {
        return Err(Error::shape(
            u.rows(),
            u.cols(),
            "decomposition requires a square matrix",
        ));
    }
    let residual = u.unitarity_residual();
    if !(residual < UNITARITY_TOLERANCE) {
        return Err(Error::NotUnitary { residual });
    }
    let n = u.rows();
    let mut work = u.clone();
    // (mode, theta, phi) in the order they act on the input.
    let mut right: Vec<(usize, f64, f64)> = Vec::new();
    let mut left: Vec<(usize, f64, f64)> = Vec::new();

    for i in 1..n {
        if i % 2 == 1 {
            for j in 0..i {
                let k = i - j - 1;
                let row = n - 1 - j;
                let (theta, phi) = null_from_right(&work, row, k);
                let inv = block_adjoint(&mzi_transfer(theta, phi));
                work.apply_cols(k, &inv);
                right.push((k, theta, phi));
            }
        } else {
            for j in 1..=i {
                let k = n + j - i - 2;
                let col = j - 1;
                let (theta, phi) = null_from_left(&work, k, col);
                work.apply_rows(k, &mzi_transfer(theta, phi));
                left.push((k, theta, phi));
            }
        }
    }

    // work = L u R is diagonal; move it through L^{-1} one block at a time.
    let mut diag: Vec<ComplexValue> = (0..n).map(|i| unit(work.get(i, i))).collect();
    let mut moved = Vec::with_capacity(left.len());
    for &(k, theta, phi) in left.iter().rev() {
        let inv = block_adjoint(&mzi_transfer(theta, phi));
        let local = [
            [inv[0][0] * diag[k], inv[0][1] * diag[k + 1]],
            [inv[1][0] * diag[k], inv[1][1] * diag[k + 1]],
        ];
        let (a, b, theta2, phi2) = factor_phase_then_mzi(&local);
        diag[k] = a;
        diag[k + 1] = b;
        moved.push((k, theta2, phi2));
    }
    // u = D * T'_{l1} ... T'_{lm} * T_{r_last} ... T_{r1}; `moved` holds
    // T'_{lm} first, which is the order they act after the right blocks.
    let schedule: Vec<(usize, f64, f64)> = right.into_iter().chain(moved).collect();

    let mut layout = MeshLayout::clements(n);
    let mut slots: Vec<Option<MZIParams>> = vec![None; layout.mzi_count()];
    let mut free_from = vec![0usize; n];
    for (k, theta, phi) in schedule {
        let mut col = free_from[k].max(free_from[k + 1]);
        if col % 2 != k % 2 {
            col += 1;
        }
        let idx = layout
            .placements
            .iter()
            .position(|&p| p == (col, k))
            .ok_or_else(|| Error::Validation(format!("no mesh slot at column {col}, port {k}")))?;
        if slots[idx].is_some() {
            return Err(Error::Validation(format!(
                "mesh slot at column {col}, port {k} assigned twice"
            )));
        }
        slots[idx] = Some(MZIParams::new(theta, phi)?);
        free_from[k] = col + 1;
        free_from[k + 1] = col + 1;
    }
    let mzis = slots
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Validation("mesh schedule left empty slots".into()))?;
    layout.output_phases = diag.iter().map(|d| wrap_phase(d.phase())).collect();
    Ok((layout, mzis))
}

/// Haar-random unitary: QR of a complex Ginibre matrix with the phases of
/// `R`'s diagonal folded back into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let mut cols: Vec<Vec<ComplexValue>> = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
                })
                .collect()
        })
        .collect();
    // Modified Gram-Schmidt; the diagonal of R comes out real positive, which
    // is exactly the phase fix that makes Q Haar distributed.
    for j in 0..n {
        for prev in 0..j {
            let proj = cols[prev]
                .iter()
                .zip(&cols[j])
                .fold(Complex::zero(), |acc, (&q, &v)| acc + q.conj() * v);
            let (head, tail) = cols.split_at_mut(j);
            for (v, &q) in tail[0].iter_mut().zip(&head[prev]) {
                *v = *v - proj * q;
            }
        }
        let norm = cols[j].iter().map(|z| z.modulus_sq()).sum::<f64>().sqrt();
        for v in &mut cols[j] {
            *v = v.scale(1.0 / norm);
        }
    }
    CMatrix::from_fn(n, n, |i, j| cols[j][i])
}

/// Program a mesh realizing `u`; see [`clements_decompose`].
pub fn mesh_from_unitary(u: &ComplexMatrix) -> Result<Mesh> {
    let (layout, mzis) = clements_decompose(u)?;
    Mesh::new(layout, mzis)
}
