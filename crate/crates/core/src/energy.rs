//! The discrete energy
//!
//! ```text
//! φ(u) = Σ_c h^N |∇u|_c^{p_c} / p_c + Σ_i w_i V_i |u_i|^{p_i} / p_i - Σ_i w_i F(x_i, u_i)
//! ```
//!
//! and its exact gradient with respect to the nodal values.

use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

use crate::grid::{Grid, GridError, GridFunction};
use crate::problem::{ProblemError, ProblemInstance};
use crate::spaces::{self, ExponentField, SpaceError};

/// Regularization of `|∇u|` inside gradients: `(|∇u|² + ε²)^{1/2}`.
pub const GRADIENT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("u has nonzero boundary value at node {node}")]
    BoundaryTrace { node: usize },
    #[error("{term} overflows at index {index}; use a smaller amplitude or a finer grid")]
    Overflow { term: &'static str, index: usize },
}

/// Which part of the nonlinearity enters the energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Truncation {
    /// `f` itself.
    Full,
    /// `f⁺(x,t) = f(x,t)` for `t ≥ 0`, zero for `t < 0`.
    Plus,
    /// `f⁻(x,t) = f(x,t)` for `t ≤ 0`, zero for `t > 0`.
    Minus,
}

impl Truncation {
    pub fn name(self) -> &'static str {
        match self {
            Truncation::Full => "full",
            Truncation::Plus => "plus",
            Truncation::Minus => "minus",
        }
    }

    #[inline]
    fn keeps(self, t: f64) -> bool {
        match self {
            Truncation::Full => true,
            Truncation::Plus => t >= 0.0,
            Truncation::Minus => t <= 0.0,
        }
    }
}

/// Frozen-coefficient linearization at `u`: the energy gradient equals
/// `Σ_c cell[c] Gᵀ_c G_c u + diag(node) u - W f(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub cell: Vec<f64>,
    pub node: Vec<f64>,
}

#[derive(Debug)]
pub struct EnergyAssembly {
    instance: ProblemInstance,
    grid: Grid,
    field: ExponentField,
    potential: Vec<f64>,
    truncation: Truncation,
    mask_boundary: bool,
    energy_evals: AtomicUsize,
    gradient_evals: AtomicUsize,
}

impl Clone for EnergyAssembly {
    fn clone(&self) -> Self {
        Self {
            instance: self.instance.clone(),
            grid: self.grid.clone(),
            field: self.field.clone(),
            potential: self.potential.clone(),
            truncation: self.truncation,
            mask_boundary: self.mask_boundary,
            energy_evals: AtomicUsize::new(0),
            gradient_evals: AtomicUsize::new(0),
        }
    }
}

impl EnergyAssembly {
    /// Full-nonlinearity assembly; the exponent orderings are validated.
    pub fn new(instance: ProblemInstance, grid: Grid) -> Result<Self, EnergyError> {
        let field = instance.exponent_field(&grid)?;
        Ok(Self::from_parts(instance, grid, field))
    }

    /// Assembly without exponent-ordering validation (only `p ≥ 1` matters
    /// for the energy itself).
    pub fn new_unchecked(instance: ProblemInstance, grid: Grid) -> Self {
        let field = instance.exponent_field_unchecked(&grid);
        Self::from_parts(instance, grid, field)
    }

    fn from_parts(instance: ProblemInstance, grid: Grid, field: ExponentField) -> Self {
        Self {
            potential: instance.potential_on(&grid),
            instance,
            grid,
            field,
            truncation: Truncation::Full,
            mask_boundary: true,
            energy_evals: AtomicUsize::new(0),
            gradient_evals: AtomicUsize::new(0),
        }
    }

    /// The same assembly with another truncation.
    pub fn truncated(&self, truncation: Truncation) -> Self {
        Self { truncation, ..self.clone() }
    }

    /// Disables the zero-trace precondition and the boundary zeroing of the
    /// gradient, so that the sums run over every node.
    pub fn without_boundary_mask(mut self) -> Self {
        self.mask_boundary = false;
        self
    }

    pub fn instance(&self) -> &ProblemInstance {
        &self.instance
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn field(&self) -> &ExponentField {
        &self.field
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    /// Bound on the error that quadrature of `F` adds to [`energy`] at the
    /// value `phi`; only rounding remains for a closed-form primitive.
    ///
    /// [`energy`]: Self::energy
    pub fn energy_noise(&self, phi: f64) -> f64 {
        let rounding = 64.0 * f64::EPSILON * phi.abs().max(1.0);
        match self.instance.quadrature_tolerance() {
            Some(tol) => rounding + tol.abs * self.grid.measure() + tol.rel * phi.abs(),
            None => rounding,
        }
    }

    pub fn energy_evaluations(&self) -> usize {
        self.energy_evals.load(Ordering::Relaxed)
    }

    pub fn gradient_evaluations(&self) -> usize {
        self.gradient_evals.load(Ordering::Relaxed)
    }

    fn check_input(&self, u: &[f64]) -> Result<(), EnergyError> {
        if u.len() != self.grid.len() {
            return Err(GridError::LengthMismatch { expected: self.grid.len(), got: u.len() }.into());
        }
        for (node, &v) in u.iter().enumerate() {
            if !v.is_finite() {
                return Err(GridError::NonFinite { node, value: v }.into());
            }
            if self.mask_boundary && v != 0.0 && self.grid.is_boundary(node) {
                return Err(EnergyError::BoundaryTrace { node });
            }
        }
        Ok(())
    }

    #[inline]
    fn f_at(&self, node: usize, t: f64, truncation: Truncation) -> f64 {
        if truncation.keeps(t) {
            self.instance.f(self.grid.point(node), t)
        } else {
            0.0
        }
    }

    #[inline]
    fn big_f_at(&self, node: usize, t: f64, truncation: Truncation) -> Result<f64, EnergyError> {
        if t != 0.0 && truncation.keeps(t) {
            Ok(self.instance.primitive(self.grid.point(node), t)?)
        } else {
            Ok(0.0)
        }
    }

    fn quadratic_parts(&self, u: &[f64]) -> Result<f64, EnergyError> {
        let vol = self.grid.cell_volume();
        let mut acc = 0.0;
        let mut g = [0.0; 2];
        for (cell, &pc) in self.field.p_cell().iter().enumerate() {
            self.grid.gradient_on_cell(u, cell, &mut g);
            let m2 = g[0] * g[0] + g[1] * g[1];
            if m2 > 0.0 {
                let term = vol * m2.powf(0.5 * pc) / pc;
                if !term.is_finite() {
                    return Err(EnergyError::Overflow { term: "gradient term", index: cell });
                }
                acc += term;
            }
        }
        let p = self.field.p();
        for (i, (&w, &v)) in self.grid.weights().iter().zip(u).enumerate() {
            if v != 0.0 {
                let term = w * self.potential[i] * v.abs().powf(p[i]) / p[i];
                if !term.is_finite() {
                    return Err(EnergyError::Overflow { term: "potential term", index: i });
                }
                acc += term;
            }
        }
        Ok(acc)
    }

    fn energy_with(&self, u: &[f64], truncation: Truncation) -> Result<f64, EnergyError> {
        self.check_input(u)?;
        self.energy_evals.fetch_add(1, Ordering::Relaxed);
        let mut acc = self.quadratic_parts(u)?;
        for (i, (&w, &v)) in self.grid.weights().iter().zip(u).enumerate() {
            let big_f = self.big_f_at(i, v, truncation)?;
            if !big_f.is_finite() {
                return Err(EnergyError::Overflow { term: "primitive", index: i });
            }
            acc -= w * big_f;
        }
        if !acc.is_finite() {
            return Err(EnergyError::Overflow { term: "energy sum", index: 0 });
        }
        Ok(acc)
    }

    fn gradient_with(&self, u: &[f64], truncation: Truncation, with_f: bool) -> Result<GridFunction, EnergyError> {
        self.check_input(u)?;
        self.gradient_evals.fetch_add(1, Ordering::Relaxed);
        let mut out = vec![0.0; u.len()];
        let vol = self.grid.cell_volume();
        let mut g = [0.0; 2];
        for (cell, &pc) in self.field.p_cell().iter().enumerate() {
            self.grid.gradient_on_cell(u, cell, &mut g);
            let m2 = g[0] * g[0] + g[1] * g[1];
            if m2 > 0.0 {
                let coef = vol * (m2 + GRADIENT_EPS * GRADIENT_EPS).powf(0.5 * (pc - 2.0));
                self.grid.scatter_cell_gradient(cell, &[coef * g[0], coef * g[1]], 1.0, &mut out);
            }
        }
        let p = self.field.p();
        for (i, (&w, &v)) in self.grid.weights().iter().zip(u).enumerate() {
            let mut nodal = 0.0;
            if v != 0.0 {
                nodal += self.potential[i] * v.abs().powf(p[i] - 1.0) * v.signum();
            }
            if with_f {
                nodal -= self.f_at(i, v, truncation);
            }
            out[i] += w * nodal;
        }
        if self.mask_boundary {
            for (o, &b) in out.iter_mut().zip(self.grid.boundary_mask()) {
                if b {
                    *o = 0.0;
                }
            }
        }
        if let Some(index) = out.iter().position(|v| !v.is_finite()) {
            return Err(EnergyError::Overflow { term: "gradient", index });
        }
        Ok(GridFunction::from_values(&self.grid, out)?)
    }

    /// `φ(u)` with the assembly's truncation.
    pub fn energy(&self, u: &[f64]) -> Result<f64, EnergyError> {
        self.energy_with(u, self.truncation)
    }

    /// `∂φ/∂u_i`, zero on boundary nodes.
    pub fn gradient(&self, u: &[f64]) -> Result<GridFunction, EnergyError> {
        self.gradient_with(u, self.truncation, true)
    }

    pub fn energy_plus(&self, u: &[f64]) -> Result<f64, EnergyError> {
        self.energy_with(u, Truncation::Plus)
    }

    pub fn gradient_plus(&self, u: &[f64]) -> Result<GridFunction, EnergyError> {
        self.gradient_with(u, Truncation::Plus, true)
    }

    pub fn energy_minus(&self, u: &[f64]) -> Result<f64, EnergyError> {
        self.energy_with(u, Truncation::Minus)
    }

    pub fn gradient_minus(&self, u: &[f64]) -> Result<GridFunction, EnergyError> {
        self.gradient_with(u, Truncation::Minus, true)
    }

    /// The energy without the nonlinearity.
    pub fn modular_energy(&self, u: &[f64]) -> Result<f64, EnergyError> {
        self.check_input(u)?;
        self.quadratic_parts(u)
    }

    /// The operator `L`: the gradient with `f ≡ 0`.
    pub fn operator(&self, u: &[f64]) -> Result<GridFunction, EnergyError> {
        self.gradient_with(u, self.truncation, false)
    }

    /// `Σ w_i v_i` over interior nodes (all nodes when unmasked), so that
    /// `pairing(gradient(u), v)` is the directional derivative at `u`.
    pub fn pairing(&self, w: &[f64], v: &[f64]) -> f64 {
        w.iter()
            .zip(v)
            .zip(self.grid.boundary_mask())
            .filter(|(_, &b)| !self.mask_boundary || !b)
            .map(|((a, b), _)| a * b)
            .sum()
    }

    /// `pairing(L(u) - L(v), u - v)`, strictly positive for `u ≠ v`.
    pub fn monotonicity_check(&self, u: &[f64], v: &[f64]) -> Result<f64, EnergyError> {
        let lu = self.operator(u)?;
        let lv = self.operator(v)?;
        let diff_l: Vec<f64> = lu.iter().zip(lv.iter()).map(|(a, b)| a - b).collect();
        let diff: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
        Ok(self.pairing(&diff_l, &diff))
    }

    pub fn x_norm(&self, u: &[f64]) -> Result<f64, EnergyError> {
        Ok(spaces::x_norm(&self.grid, u, &self.field, &self.potential)?)
    }

    /// Frozen coefficients of the operator at `u`.
    pub fn linearization(&self, u: &[f64]) -> Linearization {
        let vol = self.grid.cell_volume();
        let mut g = [0.0; 2];
        let cell = self
            .field
            .p_cell()
            .iter()
            .enumerate()
            .map(|(c, &pc)| {
                self.grid.gradient_on_cell(u, c, &mut g);
                let m2 = g[0] * g[0] + g[1] * g[1];
                vol * (m2 + GRADIENT_EPS * GRADIENT_EPS).powf(0.5 * (pc - 2.0))
            })
            .collect();
        let p = self.field.p();
        let node = self
            .grid
            .weights()
            .iter()
            .zip(u)
            .enumerate()
            .map(|(i, (&w, &v))| {
                let s = if v != 0.0 { v.abs() } else { GRADIENT_EPS };
                w * self.potential[i] * s.powf(p[i] - 2.0)
            })
            .collect();
        Linearization { cell, node }
    }
}
