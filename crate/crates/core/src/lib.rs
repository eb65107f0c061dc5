//! Radial solver for positive and sign-changing solutions of the nonlocal
//! Kirchhoff equation `−(a + b∫|∇u|²)Δu + V(|x|)u = f(u)` on ℝ³.
//!
//! Module map:
//!
//! * [`radial`]: grid, quadrature, sign decomposition;
//! * [`model`]: parameters, hypothesis checks, energies and residuals;
//! * [`flow`]: the fixed-point operator `T`, invariant cones and the
//!   damped descending flow;
//! * [`minimax`]: simplex and mountain-pass minimax, continuation in the
//!   perturbation strength, multi-bump search;
//! * [`study`]: shooting and dilation oracles, energy doubling and the
//!   `b → 0` limit;
//! * [`suite`]: seeded invariant and property checks;
//! * [`config`] and [`report`]: configuration loading and deterministic
//!   output;
//! * [`tridiag`]: banded solves used by the fixed-point operator.

pub mod config;
pub mod error;
pub mod flow;
pub mod minimax;
pub mod model;
pub mod radial;
pub mod report;
pub mod study;
pub mod suite;
pub mod tridiag;

pub use error::{Error, Result};
pub use model::{ModelParams, PerturbationParams, Problem};
pub use radial::{build_grid, Field, RadialGrid};
