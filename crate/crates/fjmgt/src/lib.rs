//! Spectral-Galerkin simulation and analysis toolkit for a third-order-in-time
//! nonlinear acoustic wave model with fractional memory damping
//! (Jordan–Moore–Gibson–Thompson type):
//!
//! ```text
//! τ ψ_ttt + (1 + 2k ψ_t) ψ_tt − c² Δψ − τ c² Δψ_t − δ (𝔎 ∗ Δψ_tt) = 0
//! ```
//!
//! on a box with homogeneous Dirichlet conditions, where 𝔎 is an Abel
//! (fractional), exponential, or zero memory kernel. Expanding in the
//! Dirichlet–Laplace sine eigenbasis turns the PDE into a Volterra system of
//! modal ODEs, integrated here by an IMEX Crank–Nicolson scheme with product
//! integration for the memory term.
//!
//! The crate is organised along the pipeline:
//!
//! - [`kernel`] — memory kernels, quadrature weights, discrete convolution,
//!   and the empirical coercivity check for the memory form;
//! - [`spectral`] — eigenpairs, projection of initial data, the cubic
//!   interaction tensor, and spectral/grid norms;
//! - [`dynamics`] — the semi-discrete system and the time stepper;
//! - [`diagnostics`] — energy functionals, dissipation, blow-up indicators,
//!   and interpolation-inequality verification corpora;
//! - [`bounds`] — closed-form Gronwall comparisons and existence-time bounds;
//! - [`config`] / [`cli`] — TOML run configuration and the command-line
//!   front end (simulate / sweep / bounds / verify-kernel /
//!   verify-inequalities);
//! - [`checkpoint`] — versioned binary snapshots for bit-identical resume.
//!
//! With the default `parallel` feature, sweeps, corpus verification, and
//! tensor assembly fan out via rayon; `--no-default-features` builds a fully
//! sequential crate with the same results.

// `!(x > 0.0)`-style guards are used throughout on purpose: unlike the
// `x <= 0.0` rewrite clippy suggests, they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod dynamics;
mod error;
pub mod kernel;
pub mod spectral;

pub use error::{Error, Result};
