//! Discrete variable-exponent Lebesgue and Sobolev machinery.
//!
//! Everything here is a quadrature version of the continuum object: the
//! modular `ρ(u) = ∫|u|^{p(x)}` becomes `Σ w_i |u_i|^{p_i}`, and the Luxemburg
//! norm is the root `λ` of `ρ(u/λ) = 1`, found by bracketing and bisection.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use thiserror::Error;

use crate::grid::{Grid, GridError, GridFunction};
use crate::sampling;

/// Stand-in for `p*(x) = +∞` where `p(x) ≥ N`.
/// Analytic `∇p`, writing the `N` components into the output slice.
pub type GradientFn<'a> = &'a dyn Fn(&[f64], &mut [f64]);

pub const P_STAR_SENTINEL: f64 = 1e9;

/// Minimum gap used for the strict orderings `p << α << p*` and `a >> p`.
pub const EXPONENT_MARGIN: f64 = 1e-3;

/// Relative bisection tolerance for Luxemburg norms.
pub const LUXEMBURG_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("exponent {value} < 1 at node {node}")]
    ExponentBelowOne { node: usize, value: f64 },
    #[error("exponent p = {value} must exceed 1 at node {node}")]
    ExponentNotAboveOne { node: usize, value: f64 },
    #[error("alpha = {alpha} not strictly between p = {p} and p* = {p_star} at node {node}")]
    AlphaOutOfRange { node: usize, p: f64, alpha: f64, p_star: f64 },
    #[error("a = {a} does not dominate p = {p} at node {node}")]
    ADoesNotDominate { node: usize, p: f64, a: f64 },
    #[error("exponent gradient is not finite at node {node}")]
    UnboundedGradient { node: usize },
    #[error("potential V = {value} is not positive at node {node}")]
    PotentialNotPositive { node: usize, value: f64 },
    #[error("witness exponent undefined: norm equals 1 (modular equals 1 as well)")]
    WitnessUndefined,
    #[error("witness exponent undefined for the zero function")]
    ZeroFunction,
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Per-node exponent data: `p`, its gradient, `α`, `a` and derived constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentField {
    dim: usize,
    p: Vec<f64>,
    grad_p: Vec<f64>,
    alpha: Vec<f64>,
    a: Vec<f64>,
    p_star: Vec<f64>,
    p_cell: Vec<f64>,
    p_minus: f64,
    p_plus: f64,
}

impl ExponentField {
    /// Samples the exponent functions on `grid` and validates the orderings
    /// `1 < p`, `p << α << p*`, `a >> p`. When `grad_p` is `None` the gradient
    /// is taken by central differences.
    pub fn from_fns(
        grid: &Grid,
        p: impl Fn(&[f64]) -> f64,
        grad_p: Option<GradientFn<'_>>,
        alpha: impl Fn(&[f64]) -> f64,
        a: impl Fn(&[f64]) -> f64,
    ) -> Result<Self, SpaceError> {
        let field = Self::sample(grid, p, grad_p, alpha, a);
        field.validate(EXPONENT_MARGIN)?;
        Ok(field)
    }

    /// Same as [`ExponentField::from_fns`] without validation. Used to build
    /// deliberately inadmissible exponents for counterexamples.
    pub fn from_fns_unchecked(
        grid: &Grid,
        p: impl Fn(&[f64]) -> f64,
        grad_p: Option<GradientFn<'_>>,
        alpha: impl Fn(&[f64]) -> f64,
        a: impl Fn(&[f64]) -> f64,
    ) -> Self {
        Self::sample(grid, p, grad_p, alpha, a)
    }

    /// Constant `p`, `α`, `a`.
    pub fn constant(grid: &Grid, p: f64, alpha: f64, a: f64) -> Result<Self, SpaceError> {
        let zero = |_: &[f64], g: &mut [f64]| g.iter_mut().for_each(|v| *v = 0.0);
        Self::from_fns(grid, |_| p, Some(&zero), |_| alpha, |_| a)
    }

    fn sample(
        grid: &Grid,
        p: impl Fn(&[f64]) -> f64,
        grad_p: Option<GradientFn<'_>>,
        alpha: impl Fn(&[f64]) -> f64,
        a: impl Fn(&[f64]) -> f64,
    ) -> Self {
        let dim = grid.dim();
        let pv: Vec<f64> = (0..grid.len()).map(|i| p(grid.point(i))).collect();
        let mut grad = vec![0.0; grid.len() * dim];
        match grad_p {
            Some(g) => {
                for i in 0..grid.len() {
                    g(grid.point(i), &mut grad[i * dim..(i + 1) * dim]);
                }
            }
            None => central_differences(grid, &pv, &mut grad),
        }
        let n = dim as f64;
        let p_star = pv.iter().map(|&pi| if pi < n { n * pi / (n - pi) } else { P_STAR_SENTINEL }).collect();
        let p_cell = (0..grid.cell_count()).map(|c| grid.cell_average(&pv, c)).collect();
        let p_minus = pv.iter().copied().fold(f64::INFINITY, f64::min);
        let p_plus = pv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            dim,
            alpha: (0..grid.len()).map(|i| alpha(grid.point(i))).collect(),
            a: (0..grid.len()).map(|i| a(grid.point(i))).collect(),
            p: pv,
            grad_p: grad,
            p_star,
            p_cell,
            p_minus,
            p_plus,
        }
    }

    pub fn validate(&self, margin: f64) -> Result<(), SpaceError> {
        for i in 0..self.p.len() {
            let (p, alpha, a, ps) = (self.p[i], self.alpha[i], self.a[i], self.p_star[i]);
            if !(p > 1.0) {
                return Err(SpaceError::ExponentNotAboveOne { node: i, value: p });
            }
            let upper_ok = ps >= P_STAR_SENTINEL || alpha <= ps - margin;
            if !(alpha >= p + margin && upper_ok && alpha.is_finite()) {
                return Err(SpaceError::AlphaOutOfRange { node: i, p, alpha, p_star: ps });
            }
            if !(a >= p + margin) {
                return Err(SpaceError::ADoesNotDominate { node: i, p, a });
            }
            if self.grad_p[i * self.dim..(i + 1) * self.dim].iter().any(|g| !g.is_finite()) {
                return Err(SpaceError::UnboundedGradient { node: i });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn grad_p(&self, node: usize) -> &[f64] {
        &self.grad_p[node * self.dim..(node + 1) * self.dim]
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn p_star(&self) -> &[f64] {
        &self.p_star
    }

    /// Cell exponents, the average of the corner values.
    pub fn p_cell(&self) -> &[f64] {
        &self.p_cell
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn alpha_plus(&self) -> f64 {
        self.alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn alpha_minus(&self) -> f64 {
        self.alpha.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_grad_p(&self) -> f64 {
        (0..self.p.len()).map(|i| self.grad_p(i).iter().map(|g| g * g).sum::<f64>().sqrt()).fold(0.0, f64::max)
    }
}

fn central_differences(grid: &Grid, p: &[f64], out: &mut [f64]) {
    let n = grid.nodes_per_axis();
    let h = grid.spacing();
    let dim = grid.dim();
    for node in 0..grid.len() {
        for axis in 0..dim {
            let stride = if axis == 0 { 1 } else { n };
            let idx = if axis == 0 { node % n } else { node / n };
            let (lo, hi, span) = if idx == 0 {
                (node, node + stride, h)
            } else if idx == n - 1 {
                (node - stride, node, h)
            } else {
                (node - stride, node + stride, 2.0 * h)
            };
            out[node * dim + axis] = (p[hi] - p[lo]) / span;
        }
    }
}

fn check_len(expected: usize, got: usize) -> Result<(), SpaceError> {
    if expected != got {
        return Err(SpaceError::LengthMismatch { expected, got });
    }
    Ok(())
}

/// `Σ_i w_i |u_i|^{p_i}`.
pub fn modular(grid: &Grid, u: &[f64], exponent: &[f64]) -> Result<f64, SpaceError> {
    check_len(grid.len(), u.len())?;
    check_len(grid.len(), exponent.len())?;
    let mut acc = 0.0;
    for (node, ((&w, &v), &p)) in grid.weights().iter().zip(u).zip(exponent).enumerate() {
        if !(p >= 1.0) {
            return Err(SpaceError::ExponentBelowOne { node, value: p });
        }
        if !v.is_finite() {
            return Err(GridError::NonFinite { node, value: v }.into());
        }
        if v != 0.0 {
            acc += w * v.abs().powf(p);
        }
    }
    Ok(acc)
}

/// A modular of the form `λ ↦ Σ_k c_k (m_k / λ)^{e_k}` with `c_k > 0`,
/// `m_k > 0`, `e_k ≥ 1`; strictly decreasing in `λ`.
#[derive(Debug, Clone, Default)]
pub struct ScaledModular {
    coeff: Vec<f64>,
    log_mag: Vec<f64>,
    exponent: Vec<f64>,
    max_mag: f64,
}

impl ScaledModular {
    pub fn push(&mut self, coeff: f64, magnitude: f64, exponent: f64) {
        if coeff > 0.0 && magnitude > 0.0 {
            self.coeff.push(coeff);
            self.log_mag.push(magnitude.ln());
            self.exponent.push(exponent);
            self.max_mag = self.max_mag.max(magnitude);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeff.is_empty()
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        let ll = lambda.ln();
        self.coeff.iter().zip(&self.log_mag).zip(&self.exponent).map(|((c, lm), e)| c * (e * (lm - ll)).exp()).sum()
    }

    /// `λ ↦ -λ · d/dλ eval(λ) = Σ c_k e_k (m_k/λ)^{e_k}`.
    pub fn weighted_eval(&self, lambda: f64) -> f64 {
        let ll = lambda.ln();
        self.coeff.iter().zip(&self.log_mag).zip(&self.exponent).map(|((c, lm), e)| c * e * (e * (lm - ll)).exp()).sum()
    }

    /// The unique `λ` with `eval(λ) = 1`, or 0 for the zero modular.
    ///
    /// Bracket starts at `[ε, max(1, max m · measure)]`, doubled or halved
    /// until it straddles 1, then bisected to [`LUXEMBURG_RTOL`].
    pub fn luxemburg(&self, measure: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let mut hi = (self.max_mag * measure).max(1.0);
        while self.eval(hi) > 1.0 {
            hi *= 2.0;
        }
        let mut lo = hi;
        while self.eval(lo) < 1.0 {
            lo *= 0.5;
        }
        if lo == hi {
            // eval(hi) == 1 exactly
            return hi;
        }
        while hi - lo > LUXEMBURG_RTOL * hi {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn lebesgue_modular(grid: &Grid, u: &[f64], exponent: &[f64]) -> Result<ScaledModular, SpaceError> {
    check_len(grid.len(), u.len())?;
    check_len(grid.len(), exponent.len())?;
    let mut m = ScaledModular::default();
    for (node, ((&w, &v), &p)) in grid.weights().iter().zip(u).zip(exponent).enumerate() {
        if !(p >= 1.0) {
            return Err(SpaceError::ExponentBelowOne { node, value: p });
        }
        if !v.is_finite() {
            return Err(GridError::NonFinite { node, value: v }.into());
        }
        m.push(w, v.abs(), p);
    }
    Ok(m)
}

/// `|u|_{p(·)} = inf{λ > 0 : ρ(u/λ) ≤ 1}`.
pub fn luxemburg_norm(grid: &Grid, u: &[f64], exponent: &[f64]) -> Result<f64, SpaceError> {
    Ok(lebesgue_modular(grid, u, exponent)?.luxemburg(grid.measure()))
}

/// Modular of the X-norm: cell terms `h^N |∇u|^{p_c}` plus nodal terms
/// `w_i V_i |u_i|^{p_i}`.
pub fn x_modular(
    grid: &Grid,
    u: &[f64],
    field: &ExponentField,
    potential: &[f64],
) -> Result<ScaledModular, SpaceError> {
    check_len(grid.len(), u.len())?;
    check_len(grid.len(), potential.len())?;
    if let Some((node, &value)) = potential.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(SpaceError::PotentialNotPositive { node, value });
    }
    if let Some((node, &value)) = u.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(GridError::NonFinite { node, value }.into());
    }
    let mut m = ScaledModular::default();
    let vol = grid.cell_volume();
    let mut g = [0.0; 2];
    for (cell, &pc) in field.p_cell().iter().enumerate() {
        grid.gradient_on_cell(u, cell, &mut g);
        m.push(vol, (g[0] * g[0] + g[1] * g[1]).sqrt(), pc);
    }
    for (i, ((&w, &v), &p)) in grid.weights().iter().zip(u).zip(field.p()).enumerate() {
        m.push(w * potential[i], v.abs(), p);
    }
    Ok(m)
}

/// The X-norm `inf{λ : ∫|∇u/λ|^{p} + V|u/λ|^{p} ≤ 1}`.
pub fn x_norm(grid: &Grid, u: &[f64], field: &ExponentField, potential: &[f64]) -> Result<f64, SpaceError> {
    Ok(x_modular(grid, u, field, potential)?.luxemburg(grid.measure()))
}

/// `q = p / (p - 1)` nodewise.
pub fn conjugate_exponent(p: &[f64]) -> Result<Vec<f64>, SpaceError> {
    p.iter()
        .enumerate()
        .map(
            |(node, &v)| {
                if v > 1.0 {
                    Ok(v / (v - 1.0))
                } else {
                    Err(SpaceError::ExponentNotAboveOne { node, value: v })
                }
            },
        )
        .collect()
}

/// `(1/p⁻ + 1/q⁻) |u|_p |v|_q - |∫ u v|`; nonnegative by Hölder.
pub fn holder_defect(grid: &Grid, u: &[f64], v: &[f64], p: &[f64]) -> Result<f64, SpaceError> {
    check_len(grid.len(), v.len())?;
    let q = conjugate_exponent(p)?;
    let p_minus = p.iter().copied().fold(f64::INFINITY, f64::min);
    let q_minus = q.iter().copied().fold(f64::INFINITY, f64::min);
    let nu = luxemburg_norm(grid, u, p)?;
    let nv = luxemburg_norm(grid, v, &q)?;
    let prod: Vec<f64> = u.iter().zip(v).map(|(a, b)| a * b).collect();
    let inner = grid.integrate(&prod)?;
    Ok((1.0 / p_minus + 1.0 / q_minus) * nu * nv - inner.abs())
}

/// `s = ln ρ(u) / ln |u|_{p(·)}`, the exponent with `|u|^s = ρ(u)`.
pub fn modular_norm_witness(grid: &Grid, u: &[f64], p: &[f64]) -> Result<f64, SpaceError> {
    let norm = luxemburg_norm(grid, u, p)?;
    if norm == 0.0 {
        return Err(SpaceError::ZeroFunction);
    }
    let ln_norm = norm.ln();
    if ln_norm.abs() <= 16.0 * LUXEMBURG_RTOL {
        return Err(SpaceError::WitnessUndefined);
    }
    Ok(modular(grid, u, p)?.ln() / ln_norm)
}

/// Running maximum of `|u|_{α(·)} / ‖u‖` over random test functions.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingEstimate {
    pub best: f64,
    pub history: Vec<f64>,
}

/// Lower bound for the embedding constant of X into `L^{α(·)}`.
pub fn embedding_constant<R: Rng>(
    grid: &Grid,
    field: &ExponentField,
    potential: &[f64],
    trials: usize,
    rng: &mut R,
) -> Result<EmbeddingEstimate, SpaceError> {
    let mut best: f64 = 0.0;
    let mut history = Vec::with_capacity(trials);
    while history.len() < trials {
        let u: GridFunction = if history.len() % 2 == 0 {
            sampling::random_smooth(grid, rng, 6)
        } else {
            sampling::random_dirichlet(grid, rng, 1.0)
        };
        if u.is_zero() {
            continue;
        }
        let ratio = luxemburg_norm(grid, &u, field.alpha())? / x_norm(grid, &u, field, potential)?;
        best = best.max(ratio);
        history.push(best);
    }
    Ok(EmbeddingEstimate { best, history })
}
