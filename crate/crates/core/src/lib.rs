//! Structure-preserving finite element solver for the fractional porous
//! medium equation
//!
//! ```text
//! ∂ρ/∂t = εΔρ − ∇·(ρ∇c),    −(−Δ_N)^s c = ρ − ρ̄,
//! ```
//!
//! posed on a rectangle with homogeneous Neumann data. Space is discretised
//! with continuous piecewise linear elements on a nonobtuse triangulation,
//! time with implicit Euler. The fractional Neumann Laplacian is evaluated
//! exactly through the generalized eigendecomposition of the P1 stiffness
//! and mass matrices.
//!
//! The crate is `no_std` (it needs `alloc`); file formats and the command
//! line live in the `fpme` companion crate.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod diagnostics;
mod error;
pub mod fem;
mod math;
pub mod mesh;
pub mod nonlinearity;
pub mod sparse;
pub mod spectral;
pub mod stepper;

pub use error::{Error, Result};
