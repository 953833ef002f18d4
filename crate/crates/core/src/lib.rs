//! Simulator for coherent photonic neural networks.
//!
//! The crate covers the full path from real-valued features to trained
//! networks: complex-valued numerics with forward- and reverse-mode
//! differentiation ([`diff`]), MZI meshes and network layers ([`photonic`]),
//! encodings of features into optical amplitudes ([`encodings`]),
//! gradient-based feature importance ([`importance`]), datasets ([`data`]) and
//! seeded training studies ([`training`]).

// `!(a < b)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod diff;
pub mod encodings;
mod error;
pub mod importance;
pub mod photonic;
pub mod training;

pub use error::{Error, Result};
