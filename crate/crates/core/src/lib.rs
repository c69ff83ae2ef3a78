//! Spatio-temporal decomposition of dense optical flow.
//!
//! A sequence `f(x, y, t)` sampled on an `M x N x T` grid is explained by a flow
//! `u = u1 + u2`, where `u1` is smooth in space and time and `u2` is cheap in the
//! temporal H^-1 norm (it absorbs flicker and oscillatory motion). The split is
//! found by a semi-implicit fixed-point iteration on the variational energy
//!
//! ```text
//! F(u1, u2) = ∫ (∇f·(u1 + u2) + f_t)^2 + α1 ∫ ν(|∇₃u1₁|² + |∇₃u1₂|²) + α2 ∫ |û2|²
//! ```
//!
//! where `û2` is the running time primitive of `u2`.
//!
//! The crate is `no_std` (it needs `alloc`); file formats, rendering and the
//! command line live in the `flowsplit` crate.

#![no_std]
#![deny(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analytic1d;
pub mod baselines;
mod error;
pub mod grid;
mod math;
pub mod operators;
pub mod regularizer;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use grid::{
    BoundaryPolicy, DecompositionResult, FlowComponent, Frame, GridSpec, ScalarField3,
    SolverConfig, StopReason, VectorField3,
};
