//! Numerics for the variable-exponent problem
//!
//! ```text
//! -div(|∇u|^{p(x)-2} ∇u) + V(x)|u|^{p(x)-2} u = f(x, u)   in R^N
//! ```
//!
//! posed on a truncated box with zero Dirichlet trace. The crate is `no_std`
//! (it needs `alloc`) and contains only the algorithmic parts:
//!
//! - [`grid`]: uniform tensor grids, trapezoid quadrature, cell gradients.
//! - [`spaces`]: exponent fields, modulars, Luxemburg norms and the X-norm.
//! - [`problem`]: problem instances and sample-based hypothesis checks.
//! - [`energy`]: the discrete energy, its exact gradient and truncations.
//! - [`mountain_pass`]: the minimax solver plus geometric verifications.
//! - [`multiplicity`]: tail-subspace embedding constants and the symmetric
//!   minimax premises.
//!
//! File formats, configuration and the command line live in the `vexp` crate.

#![no_std]
// NaN has to fail every positivity and range check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod energy;
pub mod grid;
pub mod linalg;
pub mod mountain_pass;
pub mod multiplicity;
pub mod problem;
pub mod quadrature;
pub mod sampling;
pub mod spaces;

pub use energy::{EnergyAssembly, EnergyError, Truncation};
pub use grid::{Grid, GridError, GridFunction};
pub use mountain_pass::{SolverConfig, SolverReport};
pub use problem::{HypothesisReport, ProblemInstance, Verdict};
pub use spaces::{ExponentField, SpaceError};
