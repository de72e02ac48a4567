use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::{mountain_pass_solve, GeometryError, SolverConfig, SolverReport};
use crate::energy::{EnergyAssembly, Truncation};
use crate::grid::Grid;
use crate::problem::ProblemInstance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityReport {
    pub positive: bool,
    pub min_interior: f64,
    pub min_node: usize,
}

/// `u > 0` at every interior node.
pub fn positivity_check(grid: &Grid, u: &[f64]) -> PositivityReport {
    let mut best = PositivityReport { positive: true, min_interior: f64::INFINITY, min_node: 0 };
    for i in grid.interior_nodes() {
        if u[i] < best.min_interior {
            best.min_interior = u[i];
            best.min_node = i;
        }
    }
    best.positive = best.min_interior > 0.0;
    best
}

/// Largest `|u|` over nodes and `|∇u|` over cells at distance at least
/// half the box half-width from the center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailMeasure {
    pub max_u: f64,
    pub max_grad: f64,
}

pub fn tail_measure(grid: &Grid, u: &[f64]) -> TailMeasure {
    let center = [grid.center(); 2];
    let cut = 0.5 * grid.half_width();
    let mut max_u: f64 = 0.0;
    for (i, v) in u.iter().enumerate() {
        if grid.distance(i, &center) >= cut {
            max_u = max_u.max(v.abs());
        }
    }
    let mut max_grad: f64 = 0.0;
    let mut g = [0.0; 2];
    for c in 0..grid.cell_count() {
        let m = grid.cell_center(c);
        let r = ((m[0] - center[0]).powi(2) + if grid.dim() == 2 { (m[1] - center[1]).powi(2) } else { 0.0 }).sqrt();
        if r >= cut {
            grid.gradient_on_cell(u, c, &mut g);
            max_grad = max_grad.max((g[0] * g[0] + g[1] * g[1]).sqrt());
        }
    }
    TailMeasure { max_u, max_grad }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayRow {
    pub radius: f64,
    pub tail: TailMeasure,
    pub converged: bool,
    pub iterations: usize,
    pub energy: f64,
}

/// Solves on `[-R, R]^N` with spacing close to `h` and measures the tail.
pub fn decay_row(
    instance: &ProblemInstance,
    radius: f64,
    h: f64,
    variant: Truncation,
    cone_radius: f64,
    config: &SolverConfig,
) -> Result<(DecayRow, SolverReport), GeometryError> {
    let n = (2.0 * radius / h).round() as usize + 1;
    let grid = Grid::centered(instance.dim(), radius, n).map_err(crate::energy::EnergyError::from)?;
    let assembly = EnergyAssembly::new(instance.clone(), grid)?.truncated(variant);
    let sign = if variant == Truncation::Minus { -1.0 } else { 1.0 };
    let e = super::default_endpoint(&assembly, cone_radius, sign)?;
    let report = mountain_pass_solve(&assembly, &e, config)?;
    Ok((
        DecayRow {
            radius,
            tail: report.tail,
            converged: report.converged,
            iterations: report.iterations,
            energy: report.energy,
        },
        report,
    ))
}

/// Sequential decay study over `radii`.
pub fn decay_study(
    instance: &ProblemInstance,
    radii: &[f64],
    h: f64,
    variant: Truncation,
    cone_radius: f64,
    config: &SolverConfig,
) -> Result<Vec<DecayRow>, GeometryError> {
    radii.iter().map(|&r| decay_row(instance, r, h, variant, cone_radius, config).map(|(row, _)| row)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayVerdict {
    pub decreasing: bool,
    pub final_below: bool,
    pub all_converged: bool,
}

impl DecayVerdict {
    pub fn passed(&self) -> bool {
        self.decreasing && self.final_below && self.all_converged
    }
}

/// Strict decrease of both tail measures across rows and final values
/// below `threshold`.
pub fn decay_verdict(rows: &[DecayRow], threshold: f64) -> DecayVerdict {
    let decreasing =
        rows.windows(2).all(|w| w[1].tail.max_u < w[0].tail.max_u && w[1].tail.max_grad < w[0].tail.max_grad);
    let final_below = rows.last().is_some_and(|r| r.tail.max_u < threshold && r.tail.max_grad < threshold);
    DecayVerdict { decreasing, final_below, all_converged: rows.iter().all(|r| r.converged) }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CeramiVerdict {
    pub bounded: bool,
    pub max_norm: f64,
    pub limit: f64,
    /// First iterate whose norm exceeds the limit.
    pub witness: Option<usize>,
}

/// Iterates with `|φ_n| ≤ band` must satisfy `‖u_n‖ ≤ bound (1 + final_norm)`.
pub fn cerami_check(energies: &[f64], norms: &[f64], final_norm: f64, band: f64, bound: f64) -> CeramiVerdict {
    let limit = bound * (1.0 + final_norm);
    let mut max_norm: f64 = 0.0;
    let mut witness = None;
    for (n, (&phi, &norm)) in energies.iter().zip(norms).enumerate() {
        if phi.abs() > band {
            continue;
        }
        max_norm = max_norm.max(norm);
        if witness.is_none() && !(norm <= limit) {
            witness = Some(n);
        }
    }
    CeramiVerdict { bounded: witness.is_none(), max_norm, limit, witness }
}

/// [`cerami_check`] on a solver history with band `B (1 + |φ_final|)`.
pub fn cerami_telemetry(report: &SolverReport, bound: f64) -> CeramiVerdict {
    let final_norm = report.norms.last().copied().unwrap_or(0.0);
    cerami_check(&report.energies, &report.norms, final_norm, bound * (1.0 + report.energy.abs()), bound)
}
