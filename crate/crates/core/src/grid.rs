//! Uniform tensor grids on a truncated box.
//!
//! Values live on nodes, gradients live on cells. Zero-order integrals use
//! the tensor trapezoid weights; gradient integrals use one sample per cell
//! with the cell volume `h^N` as weight.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Deref, DerefMut};

// Needed without std; std-linked builds resolve these methods inherently.
#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid dimension must be 1 or 2, got {0}")]
    InvalidDimension(usize),
    #[error("need at least 3 nodes per axis, got {0}")]
    TooFewNodes(usize),
    #[error("box extent [{lower}, {upper}] is empty or not finite")]
    InvalidExtent { lower: f64, upper: f64 },
    #[error("non-finite value {value} at node {node}")]
    NonFinite { node: usize, value: f64 },
    #[error("grid function has {got} values, grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
}

/// A uniform grid on the cube `[lower, upper]^N`, `N ∈ {1, 2}`.
///
/// Nodes are numbered with the first axis fastest: node `(i, j)` has index
/// `i + j * n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    lower: f64,
    upper: f64,
    n: usize,
    h: f64,
    coords: Vec<f64>,
    weights: Vec<f64>,
    boundary: Vec<bool>,
    cells: Vec<[usize; 4]>,
}

impl Grid {
    /// The box `[-half_width, half_width]^dim` with `n` nodes per axis.
    pub fn centered(dim: usize, half_width: f64, n: usize) -> Result<Self, GridError> {
        Self::new(dim, -half_width, half_width, n)
    }

    pub fn new(dim: usize, lower: f64, upper: f64, n: usize) -> Result<Self, GridError> {
        if dim != 1 && dim != 2 {
            return Err(GridError::InvalidDimension(dim));
        }
        if n < 3 {
            return Err(GridError::TooFewNodes(n));
        }
        if !(lower.is_finite() && upper.is_finite() && upper > lower) {
            return Err(GridError::InvalidExtent { lower, upper });
        }
        let h = (upper - lower) / (n - 1) as f64;
        let axis: Vec<f64> = (0..n).map(|i| if i == n - 1 { upper } else { lower + i as f64 * h }).collect();
        let axis_w: Vec<f64> = (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h }).collect();

        let nodes = n.pow(dim as u32);
        let mut coords = Vec::with_capacity(nodes * dim);
        let mut weights = Vec::with_capacity(nodes);
        let mut boundary = Vec::with_capacity(nodes);
        let mut cells = Vec::with_capacity((n - 1).pow(dim as u32));
        match dim {
            1 => {
                for i in 0..n {
                    coords.push(axis[i]);
                    weights.push(axis_w[i]);
                    boundary.push(i == 0 || i == n - 1);
                }
                for i in 0..n - 1 {
                    cells.push([i, i + 1, 0, 0]);
                }
            }
            _ => {
                for j in 0..n {
                    for i in 0..n {
                        coords.push(axis[i]);
                        coords.push(axis[j]);
                        weights.push(axis_w[i] * axis_w[j]);
                        boundary.push(i == 0 || i == n - 1 || j == 0 || j == n - 1);
                    }
                }
                for j in 0..n - 1 {
                    for i in 0..n - 1 {
                        let a = i + j * n;
                        // (i,j), (i+1,j), (i,j+1), (i+1,j+1)
                        cells.push([a, a + 1, a + n, a + n + 1]);
                    }
                }
            }
        }
        Ok(Self { dim, lower, upper, n, h, coords, weights, boundary, cells })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.upper + self.lower)
    }

    /// Lebesgue measure of the box.
    pub fn measure(&self) -> f64 {
        (self.upper - self.lower).powi(self.dim as i32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn point(&self, node: usize) -> &[f64] {
        &self.coords[node * self.dim..(node + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| !self.boundary[i])
    }

    pub fn interior_count(&self) -> usize {
        (self.n - 2).pow(self.dim as u32)
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn corners_per_cell(&self) -> usize {
        1 << self.dim
    }

    /// Corner node indices of `cell`; only the first `2^N` entries are used.
    pub fn cell_corners(&self, cell: usize) -> &[usize] {
        &self.cells[cell][..self.corners_per_cell()]
    }

    /// Coordinates of the cell midpoint.
    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        let c = &self.cells[cell];
        let first = self.point(c[0]);
        let mut out = [0.0; 2];
        for (k, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = first[k] + 0.5 * self.h;
        }
        out
    }

    /// Average of the corner values of `values` over `cell`.
    pub fn cell_average(&self, values: &[f64], cell: usize) -> f64 {
        let corners = self.cell_corners(cell);
        corners.iter().map(|&i| values[i]).sum::<f64>() / corners.len() as f64
    }

    fn check_len(&self, values: &[f64]) -> Result<(), GridError> {
        if values.len() != self.len() {
            return Err(GridError::LengthMismatch { expected: self.len(), got: values.len() });
        }
        Ok(())
    }

    /// Trapezoid quadrature `Σ w_i g_i`.
    pub fn integrate(&self, g: &[f64]) -> Result<f64, GridError> {
        self.check_len(g)?;
        for (node, &v) in g.iter().enumerate() {
            if !v.is_finite() {
                return Err(GridError::NonFinite { node, value: v });
            }
        }
        Ok(compensated_sum(self.weights.iter().zip(g).map(|(w, v)| w * v)))
    }

    /// Gradient of `u` on `cell`, written into `out[..N]`.
    ///
    /// In 1D this is the forward difference; in 2D each component is the
    /// difference of the two corner averages across the cell.
    #[inline]
    pub fn gradient_on_cell(&self, u: &[f64], cell: usize, out: &mut [f64; 2]) {
        let c = &self.cells[cell];
        let inv_h = 1.0 / self.h;
        if self.dim == 1 {
            out[0] = (u[c[1]] - u[c[0]]) * inv_h;
            out[1] = 0.0;
        } else {
            let (u00, u10, u01, u11) = (u[c[0]], u[c[1]], u[c[2]], u[c[3]]);
            out[0] = 0.5 * ((u10 + u11) - (u00 + u01)) * inv_h;
            out[1] = 0.5 * ((u01 + u11) - (u00 + u10)) * inv_h;
        }
    }

    /// Per-cell gradients of `u`.
    pub fn cell_gradient(&self, u: &[f64]) -> Result<CellGradients, GridError> {
        self.check_len(u)?;
        if let Some((node, &value)) = u.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(GridError::NonFinite { node, value });
        }
        let mut data = Vec::with_capacity(self.cell_count() * self.dim);
        let mut g = [0.0; 2];
        for cell in 0..self.cell_count() {
            self.gradient_on_cell(u, cell, &mut g);
            data.extend_from_slice(&g[..self.dim]);
        }
        Ok(CellGradients { dim: self.dim, data })
    }

    /// Adds `scale * (∂g_c/∂u_corner) · vector` to `out` for each corner of `cell`,
    /// i.e. the transpose of [`Grid::gradient_on_cell`] applied to `vector`.
    #[inline]
    pub(crate) fn scatter_cell_gradient(&self, cell: usize, vector: &[f64; 2], scale: f64, out: &mut [f64]) {
        let c = &self.cells[cell];
        let s = scale / self.h;
        if self.dim == 1 {
            out[c[0]] -= s * vector[0];
            out[c[1]] += s * vector[0];
        } else {
            let (gx, gy) = (0.5 * s * vector[0], 0.5 * s * vector[1]);
            out[c[0]] += -gx - gy;
            out[c[1]] += gx - gy;
            out[c[2]] += -gx + gy;
            out[c[3]] += gx + gy;
        }
    }

    /// Euclidean distance from node `node` to `x`.
    pub fn distance(&self, node: usize, x: &[f64]) -> f64 {
        let p = self.point(node);
        let mut acc = 0.0;
        for k in 0..self.dim {
            let d = p[k] - x[k];
            acc += d * d;
        }
        acc.sqrt()
    }
}

/// Cell gradients in cell order, `N` components per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGradients {
    dim: usize,
    data: Vec<f64>,
}

impl CellGradients {
    pub fn get(&self, cell: usize) -> &[f64] {
        &self.data[cell * self.dim..(cell + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn magnitude(&self, cell: usize) -> f64 {
        self.get(cell).iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Nodal values of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction(Vec<f64>);

impl GridFunction {
    pub fn zeros(grid: &Grid) -> Self {
        Self(vec![0.0; grid.len()])
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self(vec![value; grid.len()])
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self, GridError> {
        grid.check_len(&values)?;
        Ok(Self(values))
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        Self((0..grid.len()).map(|i| f(grid.point(i))).collect())
    }

    /// Like [`GridFunction::from_fn`] but zero on boundary nodes.
    pub fn from_fn_dirichlet(grid: &Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        Self((0..grid.len()).map(|i| if grid.is_boundary(i) { 0.0 } else { f(grid.point(i)) }).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn enforce_dirichlet(&mut self, grid: &Grid) {
        for (v, &b) in self.0.iter_mut().zip(grid.boundary_mask()) {
            if b {
                *v = 0.0;
            }
        }
    }

    pub fn has_zero_trace(&self, grid: &Grid) -> bool {
        self.0.iter().zip(grid.boundary_mask()).all(|(&v, &b)| !b || v == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.iter().map(|v| s * v).collect())
    }

    /// `self + s * other`
    pub fn add_scaled(&self, s: f64, other: &GridFunction) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + s * b).collect())
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|v| -v).collect())
    }
}

impl Deref for GridFunction {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for GridFunction {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_shapes() {
        assert_eq!(Grid::centered(3, 1.0, 5), Err(GridError::InvalidDimension(3)));
        assert_eq!(Grid::centered(1, 1.0, 2), Err(GridError::TooFewNodes(2)));
        assert!(matches!(Grid::new(1, 1.0, 1.0, 5), Err(GridError::InvalidExtent { .. })));
    }

    #[test]
    fn weights_partition_the_box() {
        for &(dim, r, n) in &[(1, 1.0, 3), (1, 20.0, 801), (2, 3.0, 17), (2, 0.5, 64)] {
            let g = Grid::centered(dim, r, n).unwrap();
            let total = compensated_sum(g.weights().iter().copied());
            assert_relative_eq!(total, g.measure(), max_relative = 1e-14);
            assert_eq!(g.interior_nodes().count(), g.interior_count());
            for c in 0..g.cell_count() {
                assert_eq!(g.cell_corners(c).len(), 1 << dim);
                assert!(g.cell_corners(c).iter().all(|&i| i < g.len()));
            }
        }
    }

    #[test]
    fn integrate_examples() {
        let g = Grid::new(1, 0.0, 1.0, 7).unwrap();
        assert_eq!(g.integrate(&GridFunction::constant(&g, 1.0)).unwrap(), 1.0);
        assert_eq!(g.integrate(&GridFunction::zeros(&g)).unwrap(), 0.0);
        let g = Grid::new(1, 0.0, 1.0, 101).unwrap();
        let x = GridFunction::from_fn(&g, |p| p[0]);
        assert!((g.integrate(&x).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn integrate_names_bad_node() {
        let g = Grid::new(1, 0.0, 1.0, 5).unwrap();
        let mut u = GridFunction::zeros(&g);
        u[3] = f64::NAN;
        assert!(matches!(g.integrate(&u), Err(GridError::NonFinite { node: 3, .. })));
    }

    #[test]
    fn gradient_is_exact_for_affine() {
        let g = Grid::new(1, 0.0, 1.0, 11).unwrap();
        let u = GridFunction::from_fn(&g, |p| 3.0 * p[0]);
        let grads = g.cell_gradient(&u).unwrap();
        for c in 0..grads.len() {
            assert_relative_eq!(grads.get(c)[0], 3.0, max_relative = 1e-13);
        }
        let c = GridFunction::constant(&g, 2.5);
        assert!(g.cell_gradient(&c).unwrap().data.iter().all(|&v| v == 0.0));

        let g = Grid::new(2, 0.0, 1.0, 9).unwrap();
        let u = GridFunction::from_fn(&g, |p| p[0] + 2.0 * p[1]);
        let grads = g.cell_gradient(&u).unwrap();
        for c in 0..grads.len() {
            assert_relative_eq!(grads.get(c)[0], 1.0, max_relative = 1e-13);
            assert_relative_eq!(grads.get(c)[1], 2.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn trapezoid_converges_at_second_order() {
        // ∫_{-1}^{1} cos(x) dx = 2 sin(1)
        let exact = 2.0 * 1.0f64.sin();
        let errs: Vec<f64> = [17usize, 33, 65]
            .iter()
            .map(|&n| {
                let g = Grid::centered(1, 1.0, n).unwrap();
                let u = GridFunction::from_fn(&g, |p| p[0].cos());
                (g.integrate(&u).unwrap() - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.8, "{errs:?}");
        }

        let exact2 = exact * exact;
        let errs: Vec<f64> = [17usize, 33, 65]
            .iter()
            .map(|&n| {
                let g = Grid::centered(2, 1.0, n).unwrap();
                let u = GridFunction::from_fn(&g, |p| p[0].cos() * p[1].cos());
                (g.integrate(&u).unwrap() - exact2).abs()
            })
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.8, "{errs:?}");
        }
    }

    #[test]
    fn scatter_is_transpose_of_gradient() {
        let g = Grid::centered(2, 1.0, 6).unwrap();
        let u = GridFunction::from_fn(&g, |p| (3.0 * p[0]).sin() + p[1] * p[1]);
        let v = [0.3, -1.7];
        for cell in 0..g.cell_count() {
            let mut grad = [0.0; 2];
            g.gradient_on_cell(&u, cell, &mut grad);
            let lhs = grad[0] * v[0] + grad[1] * v[1];
            let mut out = vec![0.0; g.len()];
            g.scatter_cell_gradient(cell, &v, 1.0, &mut out);
            let rhs: f64 = out.iter().zip(u.values()).map(|(a, b)| a * b).sum();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12, epsilon = 1e-12);
        }
    }
}
