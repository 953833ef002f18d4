use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::Real;
use crate::error::{Error, Result};

const NO_PARENT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Node {
    parents: [u32; 2],
    partials: [f64; 2],
    value: f64,
}

/// Append-only record of real-valued primitive operations.
///
/// Nodes are pushed in evaluation order, so every node's parents precede it
/// and a single reverse sweep accumulates adjoints. A tape belongs to one
/// computation at a time; use [`GradTape::clear`] to reuse its allocation.
#[derive(Default)]
pub struct GradTape {
    nodes: RefCell<Vec<Node>>,
}

impl fmt::Debug for GradTape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GradTape")
            .field("len", &self.len())
            .finish()
    }
}

impl GradTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            nodes: RefCell::new(Vec::with_capacity(capacity)),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
    }

    /// Register an independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        let index = self.push(Node {
            parents: [NO_PARENT; 2],
            partials: [0.0; 2],
            value,
        });
        Var {
            tape: Some(self),
            index,
            value,
        }
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    fn push(&self, node: Node) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let index = nodes.len() as u32;
        nodes.push(node);
        index
    }

    /// Index of the first node holding a NaN or infinity, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.nodes
            .borrow()
            .iter()
            .position(|n| !n.value.is_finite())
    }

    /// Reverse sweep seeded at `output`; returns the adjoint of every node.
    pub fn backward(&self, output: Var<'_>) -> Adjoints {
        let nodes = self.nodes.borrow();
        let mut adjoints = vec![0.0; nodes.len()];
        if output.tape.is_none() {
            return Adjoints(adjoints);
        }
        adjoints[output.index as usize] = 1.0;
        for i in (0..=output.index as usize).rev() {
            let adj = adjoints[i];
            if adj == 0.0 {
                continue;
            }
            let node = &nodes[i];
            for (p, w) in node.parents.iter().zip(node.partials) {
                if *p != NO_PARENT {
                    adjoints[*p as usize] += w * adj;
                }
            }
        }
        Adjoints(adjoints)
    }
}

/// Adjoints produced by [`GradTape::backward`].
#[derive(Debug, Clone)]
pub struct Adjoints(Vec<f64>);

impl Adjoints {
    /// Adjoint of `v`; constants have zero adjoint.
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        if v.tape.is_none() {
            return 0.0;
        }
        self.0[v.index as usize]
    }

    pub fn wrt_all(&self, vars: &[Var<'_>]) -> Vec<f64> {
        vars.iter().map(|&v| self.wrt(v)).collect()
    }
}

/// A scalar that records its provenance on a [`GradTape`].
///
/// Constants carry no tape and cost nothing to combine.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t GradTape>,
    index: u32,
    value: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tape {
            Some(_) => write!(f, "Var(#{} = {})", self.index, self.value),
            None => write!(f, "Var(const {})", self.value),
        }
    }
}

impl<'t> Var<'t> {
    pub fn constant(value: f64) -> Self {
        Self {
            tape: None,
            index: NO_PARENT,
            value,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.tape.is_none()
    }

    fn parent(&self) -> u32 {
        if self.tape.is_some() {
            self.index
        } else {
            NO_PARENT
        }
    }

    #[inline]
    fn unary(self, value: f64, partial: f64) -> Self {
        match self.tape {
            None => Var::constant(value),
            Some(tape) => {
                let index = tape.push(Node {
                    parents: [self.index, NO_PARENT],
                    partials: [partial, 0.0],
                    value,
                });
                Var {
                    tape: Some(tape),
                    index,
                    value,
                }
            }
        }
    }

    #[inline]
    fn binary(self, other: Self, value: f64, da: f64, db: f64) -> Self {
        match self.tape.or(other.tape) {
            None => Var::constant(value),
            Some(tape) => {
                let index = tape.push(Node {
                    parents: [self.parent(), other.parent()],
                    partials: [da, db],
                    value,
                });
                Var {
                    tape: Some(tape),
                    index,
                    value,
                }
            }
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, self.value + rhs.value, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, self.value - rhs.value, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        self.binary(rhs, self.value * rhs.value, rhs.value, self.value)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.value;
        let q = self.value * inv;
        self.binary(rhs, q, inv, -q * inv)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.unary(-self.value, -1.0)
    }
}

impl<'t> Real for Var<'t> {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Var::constant(v)
    }
    #[inline]
    fn value(self) -> f64 {
        self.value
    }
    #[inline]
    fn sin(self) -> Self {
        self.unary(self.value.sin(), self.value.cos())
    }
    #[inline]
    fn cos(self) -> Self {
        self.unary(self.value.cos(), -self.value.sin())
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.value.exp();
        self.unary(e, e)
    }
    #[inline]
    fn ln(self) -> Self {
        self.unary(self.value.ln(), 1.0 / self.value)
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        self.unary(s, 0.5 / s)
    }
    #[inline]
    fn asin(self) -> Self {
        self.unary(
            self.value.asin(),
            1.0 / (1.0 - self.value * self.value).sqrt(),
        )
    }
    #[inline]
    fn atan2(self, x: Self) -> Self {
        let r2 = self.value * self.value + x.value * x.value;
        self.binary(x, self.value.atan2(x.value), x.value / r2, -self.value / r2)
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        self.unary(self.value * k, k)
    }
}

/// Gradient of a real scalar program with respect to every parameter.
///
/// Fails with [`Error::Numeric`] naming the first tape node whose value is
/// not finite.
pub fn reverse_grad<F>(loss: F, params: &[f64]) -> Result<Vec<f64>>
where
    F: for<'t> Fn(&[Var<'t>]) -> Var<'t>,
{
    let tape = GradTape::new();
    let vars = tape.vars(params);
    let out = loss(&vars);
    if let Some(node) = tape.first_non_finite() {
        return Err(Error::Numeric { node });
    }
    if !out.value.is_finite() {
        return Err(Error::Numeric {
            node: tape.len().saturating_sub(1),
        });
    }
    let adjoints = tape.backward(out);
    Ok(adjoints.wrt_all(&vars))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modulus_squared_gradient() {
        let g = reverse_grad(|w| w[0] * w[0] + w[1] * w[1], &[3.0, 4.0]).unwrap();
        assert_eq!(g, vec![6.0, 8.0]);
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let g = reverse_grad(|_| Var::constant(2.5), &[1.0, -1.0, 0.3]).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn non_finite_forward_reports_node() {
        let err = reverse_grad(|w| (w[0] - w[0]).ln() + w[1], &[1.0, 2.0]).unwrap_err();
        // nodes: w0, w1, (w0 - w0), ln(.) = -inf
        assert_eq!(err, Error::Numeric { node: 3 });
    }

    #[test]
    fn reused_variable_accumulates() {
        // f = x * sin(x), f' = sin x + x cos x
        let x = 0.7_f64;
        let g = reverse_grad(|v| v[0] * v[0].sin(), &[x]).unwrap();
        assert!((g[0] - (x.sin() + x * x.cos())).abs() < 1e-15);
    }

    #[test]
    fn tape_is_topologically_ordered() {
        let tape = GradTape::new();
        let a = tape.var(1.0);
        let b = tape.var(2.0);
        let c = a * b + a.exp();
        let nodes = tape.nodes.borrow();
        for (i, node) in nodes.iter().enumerate() {
            for &p in &node.parents {
                assert!(p == NO_PARENT || (p as usize) < i);
            }
        }
        assert_eq!(c.index as usize, nodes.len() - 1);
    }
}
