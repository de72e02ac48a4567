//! Linear solves with the frozen-coefficient operator of an energy
//! linearization, restricted to interior nodes.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

use crate::energy::Linearization;
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("zero pivot at row {0}")]
    ZeroPivot(usize),
    #[error("conjugate gradients did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("operator is not positive definite along the search direction")]
    Indefinite,
}

/// Solves a tridiagonal system in place. `sub[0]` and `sup[n-1]` are ignored.
pub fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) -> Result<(), LinalgError> {
    let n = diag.len();
    if n == 0 {
        return Ok(());
    }
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(LinalgError::ZeroPivot(0));
    }
    rhs[0] /= beta;
    for i in 1..n {
        c[i - 1] = sup[i - 1] / beta;
        beta = diag[i] - sub[i] * c[i - 1];
        if beta == 0.0 {
            return Err(LinalgError::ZeroPivot(i));
        }
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

/// `out = K v` with `K = Σ_c cell[c] Gᵀ_c G_c + diag(node)`, boundary rows
/// zeroed.
pub fn apply_linearization(grid: &Grid, lin: &Linearization, v: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    let mut g = [0.0; 2];
    for (c, &a) in lin.cell.iter().enumerate() {
        grid.gradient_on_cell(v, c, &mut g);
        grid.scatter_cell_gradient(c, &g, a, out);
    }
    for (i, o) in out.iter_mut().enumerate() {
        if grid.is_boundary(i) {
            *o = 0.0;
        } else {
            *o += lin.node[i] * v[i];
        }
    }
}

/// Preconditioned conjugate gradients with a diagonal preconditioner.
/// Returns the iteration count.
pub fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    inv_diag: &[f64],
    rhs: &[f64],
    x: &mut [f64],
    rtol: f64,
    max_iter: usize,
) -> Result<usize, LinalgError> {
    let n = rhs.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for i in 0..n {
        r[i] = rhs[i] - r[i];
    }
    let target = rtol * dot(rhs, rhs).sqrt();
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    for it in 0..max_iter {
        let res = dot(&r, &r).sqrt();
        if res <= target {
            return Ok(it);
        }
        apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(LinalgError::Indefinite);
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let residual = dot(&r, &r).sqrt();
    if residual <= target {
        Ok(max_iter)
    } else {
        Err(LinalgError::NotConverged { iterations: max_iter, residual })
    }
}

/// Solves `K x = rhs` on interior nodes; boundary entries of `x` are zero.
pub fn solve_linearization(grid: &Grid, lin: &Linearization, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let h2 = grid.spacing() * grid.spacing();
    if grid.dim() == 1 {
        let n = grid.len();
        let m = n - 2;
        let mut sub = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut sup = vec![0.0; m];
        let mut b: Vec<f64> = rhs[1..n - 1].to_vec();
        for k in 0..m {
            let i = k + 1;
            let left = lin.cell[i - 1] / h2;
            let right = lin.cell[i] / h2;
            diag[k] = left + right + lin.node[i];
            if k > 0 {
                sub[k] = -left;
            }
            if k + 1 < m {
                sup[k] = -right;
            }
        }
        thomas(&sub, &diag, &sup, &mut b)?;
        let mut x = vec![0.0; n];
        x[1..n - 1].copy_from_slice(&b);
        return Ok(x);
    }
    let mut diag = lin.node.clone();
    for (c, &a) in lin.cell.iter().enumerate() {
        for &i in grid.cell_corners(c) {
            diag[i] += 0.5 * a / h2;
        }
    }
    let inv_diag: Vec<f64> =
        diag.iter().enumerate().map(|(i, &d)| if grid.is_boundary(i) || d <= 0.0 { 0.0 } else { 1.0 / d }).collect();
    let mut b = rhs.to_vec();
    for (i, v) in b.iter_mut().enumerate() {
        if grid.is_boundary(i) {
            *v = 0.0;
        }
    }
    let mut x = vec![0.0; grid.len()];
    pcg(|v, out| apply_linearization(grid, lin, v, out), &inv_diag, &b, &mut x, 1e-12, 20 * grid.len())?;
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_dirichlet, seeded};

    #[test]
    fn thomas_solves_poisson() {
        // -x'' = 2 on (0,1), x = t(1-t), exact for the 3-point stencil
        let n = 9;
        let h = 1.0 / (n + 1) as f64;
        let sub = vec![-1.0; n];
        let sup = vec![-1.0; n];
        let diag = vec![2.0; n];
        let mut rhs = vec![2.0 * h * h; n];
        thomas(&sub, &diag, &sup, &mut rhs).unwrap();
        for (k, v) in rhs.iter().enumerate() {
            let t = (k + 1) as f64 * h;
            assert!((v - t * (1.0 - t)).abs() < 1e-13);
        }
    }

    fn check_solve(dim: usize, n: usize) {
        let g = Grid::centered(dim, 1.0, n).unwrap();
        let mut rng = seeded(dim as u64);
        let cell: Vec<f64> = (0..g.cell_count()).map(|c| 0.5 + (c % 3) as f64).collect();
        let node: Vec<f64> = (0..g.len()).map(|i| 0.1 + (i % 5) as f64 * 0.01).collect();
        let lin = Linearization { cell, node };
        let x0 = random_dirichlet(&g, &mut rng, 1.0);
        let mut rhs = vec![0.0; g.len()];
        apply_linearization(&g, &lin, &x0, &mut rhs);
        let x = solve_linearization(&g, &lin, &rhs).unwrap();
        for i in 0..g.len() {
            assert!((x[i] - x0[i]).abs() < 1e-8, "{i}: {} vs {}", x[i], x0[i]);
        }
    }

    #[test]
    fn solves_linearized_operator() {
        check_solve(1, 50);
        check_solve(2, 12);
    }
}
