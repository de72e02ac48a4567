//! Mountain-pass solver and the geometric checks around it.
//!
//! The solver deforms a discretized path from `0` to an endpoint `e` with
//! `φ(e) < 0`. The path is kept straight: every outer iteration takes the
//! path maximum, refines it to the exact maximum along its ray, moves it one
//! preconditioned descent step and re-threads the path through the result.

mod diagnostics;
mod geometry;
mod solver;

pub use diagnostics::{
    cerami_check, cerami_telemetry, decay_row, decay_study, decay_verdict, positivity_check, tail_measure,
    CeramiVerdict, DecayRow, DecayVerdict, PositivityReport, TailMeasure,
};
pub use geometry::{
    default_endpoint, verify_blowdown, verify_cone_lemma, verify_mp_geometry, BlowdownOutcome, BlowdownReport,
    ConeLemmaReport, ConeLemmaRow, ConeSet, ConeTestFunction, GeometryRow, MpGeometryReport, BLOWDOWN_LEVEL, MP_DELTA0,
};
pub use solver::{mountain_pass_solve, ray_maximum};

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::energy::{EnergyError, Truncation};
use crate::grid::GridFunction;
use crate::linalg::LinalgError;
use crate::problem::ProblemError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("endpoint energy {energy} is not negative")]
    EndpointNotNegative { energy: f64 },
    #[error("endpoint is zero")]
    ZeroEndpoint,
    #[error("path maximum sits at endpoint index {index}")]
    InvalidGeometry { index: usize },
    #[error("no maximum of the energy along the ray through the current point")]
    NoRayMaximum,
    #[error("invalid solver configuration: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("grad p vanishes at x0 = {x0:?}; the cone lemma does not apply")]
    LemmaInapplicable { x0: Vec<f64> },
    #[error("cone of radius {radius} around {center:?} leaves the box")]
    ConeOutsideBox { center: Vec<f64>, radius: f64 },
    #[error("invalid cone parameters: {0}")]
    InvalidCone(&'static str),
    #[error("no endpoint with negative energy up to t = {t_max:e}")]
    NoNegativeEndpoint { t_max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub path_points: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub initial_step: f64,
    pub max_backtracks: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            path_points: 41,
            tol: 1e-6,
            max_iter: 5000,
            armijo_c: 1e-4,
            backtrack: 0.5,
            initial_step: 1.0,
            max_backtracks: 40,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.path_points < 3 {
            return Err(SolverError::Config("path_points must be at least 3"));
        }
        if !(self.tol > 0.0) {
            return Err(SolverError::Config("tol must be positive"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(SolverError::Config("armijo_c must lie in (0, 1)"));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(SolverError::Config("backtrack must lie in (0, 1)"));
        }
        if !(self.initial_step > 0.0) {
            return Err(SolverError::Config("initial_step must be positive"));
        }
        Ok(())
    }
}

/// Outcome of one mountain-pass run. Complete even when the run failed.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub variant: Truncation,
    pub converged: bool,
    pub iterations: usize,
    /// `φ(u_n)` of the refined path maximum per outer iteration.
    pub energies: Vec<f64>,
    /// `s_n = |φ'(u_n)|₂ (1 + ‖u_n‖)`.
    pub cerami: Vec<f64>,
    /// `‖u_n‖`, the X-norm.
    pub norms: Vec<f64>,
    pub residual: f64,
    /// `max_i |φ'(u)_i|` at the final iterate.
    pub gradient_inf: f64,
    pub energy: f64,
    pub profile: GridFunction,
    /// Strict sign check: `u > 0` for the plus variant, `u < 0` for minus,
    /// `u > 0` or `u < 0` for the full functional.
    pub positivity: PositivityReport,
    pub tail: TailMeasure,
    pub failure: Option<String>,
}
