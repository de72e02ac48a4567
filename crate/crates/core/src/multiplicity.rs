//! Tail subspaces, embedding constants `β_k` and the symmetric minimax
//! premises on a fixed grid.
//!
//! The tail spaces `Z_k` are spans of the upper eigenvectors of the discrete
//! Dirichlet Laplacian. In 2D the bilinear cell gradient gives the
//! checkerboard mode a very small eigenvalue, so it appears early in the
//! ordering.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand::SeedableRng;
use thiserror::Error;

use crate::energy::{EnergyAssembly, EnergyError};
use crate::grid::{Grid, GridFunction};
use crate::mountain_pass::{ConeTestFunction, GeometryError};
use crate::problem::SampleSet;
use crate::sampling::{self, SampleRng};
use crate::spaces::{self, ExponentField, SpaceError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MultiplicityError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("k = {k} outside 1..={max}")]
    KOutOfRange { k: usize, max: usize },
    #[error("{requested} disjoint cones do not fit; at most {max_k} cones of radius 3h fit")]
    Capacity { requested: usize, max_k: usize },
}

/// Eigenvectors of `S e = λ W e` (stiffness against trapezoid mass) on
/// interior nodes, ascending in `λ`, `W`-orthonormal, stored as nodal
/// vectors with zero boundary values.
#[derive(Debug, Clone)]
pub struct DiscreteBasis {
    grid: Grid,
    eigenvalues: Vec<f64>,
    vectors: Vec<GridFunction>,
}

impl DiscreteBasis {
    pub fn new(grid: &Grid) -> Self {
        let interior: Vec<usize> = grid.interior_nodes().collect();
        let m = interior.len();
        let mut index = vec![usize::MAX; grid.len()];
        for (a, &i) in interior.iter().enumerate() {
            index[i] = a;
        }
        let vol = grid.cell_volume();
        let mut stiffness = DMatrix::<f64>::zeros(m, m);
        let mut g = [0.0; 2];
        let mut unit = vec![0.0; grid.len()];
        let mut col = vec![0.0; grid.len()];
        for c in 0..grid.cell_count() {
            let corners = grid.cell_corners(c);
            for &j in corners {
                if index[j] == usize::MAX {
                    continue;
                }
                unit[j] = 1.0;
                grid.gradient_on_cell(&unit, c, &mut g);
                unit[j] = 0.0;
                for &i in corners {
                    col[i] = 0.0;
                }
                grid.scatter_cell_gradient(c, &g, vol, &mut col);
                for &i in corners {
                    if index[i] != usize::MAX {
                        stiffness[(index[i], index[j])] += col[i];
                    }
                    col[i] = 0.0;
                }
            }
        }
        let inv_sqrt_w: Vec<f64> = interior.iter().map(|&i| 1.0 / grid.weights()[i].sqrt()).collect();
        for a in 0..m {
            for b in 0..m {
                stiffness[(a, b)] *= inv_sqrt_w[a] * inv_sqrt_w[b];
            }
        }
        let eig = SymmetricEigen::new(stiffness);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut eigenvalues = Vec::with_capacity(m);
        let mut vectors = Vec::with_capacity(m);
        for &k in &order {
            eigenvalues.push(eig.eigenvalues[k]);
            let mut v = GridFunction::zeros(grid);
            // fix the sign so that the first nonzero entry is positive
            let mut sign = 0.0;
            for (a, &i) in interior.iter().enumerate() {
                let x = eig.eigenvectors[(a, k)] * inv_sqrt_w[a];
                if sign == 0.0 && x.abs() > 1e-12 {
                    sign = x.signum();
                }
                v[i] = x;
            }
            vectors.push(v.scaled(if sign == 0.0 { 1.0 } else { sign }));
        }
        Self { grid: grid.clone(), eigenvalues, vectors }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Dimension of the interior-node space.
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `e_k`, 1-based.
    pub fn vector(&self, k: usize) -> &GridFunction {
        &self.vectors[k - 1]
    }

    fn check_k(&self, k: usize) -> Result<(), MultiplicityError> {
        if k == 0 || k > self.len() {
            return Err(MultiplicityError::KOutOfRange { k, max: self.len() });
        }
        Ok(())
    }

    /// `Σ_j c_j e_{k+j}`, an element of `Z_k`.
    pub fn tail_combination(&self, k: usize, coeffs: &[f64]) -> GridFunction {
        let mut u = vec![0.0; self.grid.len()];
        for (c, e) in coeffs.iter().zip(&self.vectors[k - 1..]) {
            if *c != 0.0 {
                for (ui, ei) in u.iter_mut().zip(e.iter()) {
                    *ui += c * ei;
                }
            }
        }
        GridFunction::from_values(&self.grid, u).expect("basis vectors match the grid")
    }

    /// `W`-inner products of `u` with `e_k..e_n`.
    fn tail_coordinates(&self, k: usize, u: &[f64]) -> Vec<f64> {
        self.vectors[k - 1..]
            .iter()
            .map(|e| e.iter().zip(u).zip(self.grid.weights()).map(|((a, b), w)| a * b * w).sum())
            .collect()
    }

    fn tail_gradient(&self, k: usize, g: &[f64]) -> Vec<f64> {
        self.vectors[k - 1..].iter().map(|e| e.iter().zip(g).map(|(a, b)| a * b).sum()).collect()
    }
}

/// `log |u|_{α}` and its gradient in the nodal values.
fn lebesgue_log_grad(grid: &Grid, u: &[f64], exponent: &[f64]) -> Result<(f64, Vec<f64>), SpaceError> {
    let lambda = spaces::luxemburg_norm(grid, u, exponent)?;
    let mut grad = vec![0.0; u.len()];
    if lambda == 0.0 {
        return Ok((f64::NEG_INFINITY, grad));
    }
    let mut denom = 0.0;
    for (i, (&w, &v)) in grid.weights().iter().zip(u).enumerate() {
        if v != 0.0 {
            let a = exponent[i];
            let r = (v / lambda).abs();
            denom += w * a * r.powf(a);
            grad[i] = w * a * r.powf(a - 1.0) * v.signum() / lambda;
        }
    }
    grad.iter_mut().for_each(|g| *g /= denom);
    Ok((lambda.ln(), grad))
}

/// `log ‖u‖` and its gradient in the nodal values.
fn x_log_grad(grid: &Grid, u: &[f64], field: &ExponentField, potential: &[f64]) -> Result<(f64, Vec<f64>), SpaceError> {
    let lambda = spaces::x_norm(grid, u, field, potential)?;
    let mut grad = vec![0.0; u.len()];
    if lambda == 0.0 {
        return Ok((f64::NEG_INFINITY, grad));
    }
    let vol = grid.cell_volume();
    let mut denom = 0.0;
    let mut g = [0.0; 2];
    for (c, &pc) in field.p_cell().iter().enumerate() {
        grid.gradient_on_cell(u, c, &mut g);
        let m = (g[0] * g[0] + g[1] * g[1]).sqrt() / lambda;
        if m > 0.0 {
            denom += vol * pc * m.powf(pc);
            let coef = vol * pc * m.powf(pc - 2.0) / (lambda * lambda);
            grid.scatter_cell_gradient(c, &[coef * g[0], coef * g[1]], 1.0, &mut grad);
        }
    }
    let p = field.p();
    for (i, (&w, &v)) in grid.weights().iter().zip(u).enumerate() {
        if v != 0.0 {
            let r = (v / lambda).abs();
            denom += w * potential[i] * p[i] * r.powf(p[i]);
            grad[i] += w * potential[i] * p[i] * r.powf(p[i] - 1.0) * v.signum() / lambda;
        }
    }
    grad.iter_mut().for_each(|x| *x /= denom);
    Ok((lambda.ln(), grad))
}

/// Settings for the `β_k` ascent.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaConfig {
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for BetaConfig {
    fn default() -> Self {
        Self { restarts: 2, max_iter: 200, seed: 0 }
    }
}

struct Objective<'a> {
    basis: &'a DiscreteBasis,
    field: &'a ExponentField,
    potential: &'a [f64],
    k: usize,
}

impl Objective<'_> {
    /// `log |u|_α - log ‖u‖` and its gradient in tail coordinates.
    fn eval(&self, c: &[f64]) -> Result<(f64, Vec<f64>), SpaceError> {
        let grid = &self.basis.grid;
        let u = self.basis.tail_combination(self.k, c);
        let (la, ga) = lebesgue_log_grad(grid, &u, self.field.alpha())?;
        let (lx, gx) = x_log_grad(grid, &u, self.field, self.potential)?;
        let g: Vec<f64> = ga.iter().zip(&gx).map(|(a, b)| a - b).collect();
        Ok((la - lx, self.basis.tail_gradient(self.k, &g)))
    }

    /// Normalized gradient ascent with step adaptation.
    fn ascend(&self, mut c: Vec<f64>, max_iter: usize) -> Result<(f64, Vec<f64>), SpaceError> {
        let (mut j, mut g) = self.eval(&c)?;
        let mut step = 0.1;
        for _ in 0..max_iter {
            let cn = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(gn * cn > 1e-13) || step < 1e-10 {
                break;
            }
            let trial: Vec<f64> = c.iter().zip(&g).map(|(a, b)| a + step * cn * b / gn).collect();
            let (jt, gt) = self.eval(&trial)?;
            if jt > j {
                c = trial;
                j = jt;
                g = gt;
                step = (1.5 * step).min(1.0);
            } else {
                step *= 0.5;
            }
        }
        Ok((j, c))
    }
}

/// `β_k ≈ sup{|u|_{α} : u ∈ Z_k, ‖u‖ = 1}` by gradient ascent from `e_k`
/// and `restarts` random starts.
pub fn beta_k(
    basis: &DiscreteBasis,
    k: usize,
    field: &ExponentField,
    potential: &[f64],
    config: &BetaConfig,
) -> Result<f64, MultiplicityError> {
    basis.check_k(k)?;
    let obj = Objective { basis, field, potential, k };
    let dim = basis.len() - k + 1;
    let mut start = vec![0.0; dim];
    start[0] = 1.0;
    let mut best = obj.ascend(start, config.max_iter)?.0;
    let mut rng = SampleRng::seed_from_u64(config.seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    for _ in 0..config.restarts {
        let c: Vec<f64> = (0..dim).map(|_| sampling::uniform(&mut rng, -1.0, 1.0)).collect();
        best = best.max(obj.ascend(c, config.max_iter)?.0);
    }
    Ok(best.exp())
}

/// `β_1, ..., β_n` computed from `k = n` down to `1`, each ascent also
/// started from the previous maximizer, so the sequence is non-increasing
/// in `k`.
pub fn beta_profile(
    basis: &DiscreteBasis,
    field: &ExponentField,
    potential: &[f64],
    config: &BetaConfig,
) -> Result<Vec<f64>, MultiplicityError> {
    let n = basis.len();
    let mut out = vec![0.0; n];
    let mut carry: Option<GridFunction> = None;
    for k in (1..=n).rev() {
        let obj = Objective { basis, field, potential, k };
        let dim = n - k + 1;
        let mut start = vec![0.0; dim];
        start[0] = 1.0;
        let mut best = obj.ascend(start, config.max_iter)?;
        if let Some(prev) = &carry {
            let c = basis.tail_coordinates(k, prev);
            let cand = obj.ascend(c, config.max_iter)?;
            if cand.0 > best.0 {
                best = cand;
            }
        }
        let mut rng = SampleRng::seed_from_u64(config.seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        for _ in 0..config.restarts {
            let c: Vec<f64> = (0..dim).map(|_| sampling::uniform(&mut rng, -1.0, 1.0)).collect();
            let cand = obj.ascend(c, config.max_iter)?;
            if cand.0 > best.0 {
                best = cand;
            }
        }
        out[k - 1] = best.0.exp();
        carry = Some(basis.tail_combination(k, &best.1));
    }
    Ok(out)
}

/// `(1 + λ_k)^{-1/2}`, the value of `β_k` for `p ≡ α ≡ 2`, `V ≡ 1`.
pub fn beta_closed_form(basis: &DiscreteBasis, k: usize) -> f64 {
    1.0 / (1.0 + basis.eigenvalues()[k - 1]).sqrt()
}

/// Cone test functions with pairwise disjoint closed supports.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeFamily {
    pub cones: Vec<ConeTestFunction>,
}

impl ConeFamily {
    pub fn len(&self) -> usize {
        self.cones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cones.is_empty()
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        self.cones.iter().map(|c| c.center.clone()).collect()
    }

    pub fn radii(&self) -> Vec<f64> {
        self.cones.iter().map(|c| c.radius).collect()
    }

    pub fn combination(&self, grid: &Grid, coeffs: &[f64]) -> GridFunction {
        let mut u = GridFunction::zeros(grid);
        for (c, cone) in coeffs.iter().zip(&self.cones) {
            u = u.add_scaled(*c, &cone.values);
        }
        u
    }

    /// Exhaustive scan: no node is in two supports and no cell has nonzero
    /// corners from two different cones.
    pub fn supports_disjoint(&self, grid: &Grid) -> bool {
        let mut owner = vec![usize::MAX; grid.len()];
        for (j, cone) in self.cones.iter().enumerate() {
            for i in cone.support_nodes(grid) {
                if owner[i] != usize::MAX {
                    return false;
                }
                owner[i] = j;
            }
        }
        (0..grid.cell_count()).all(|c| {
            let mut seen = usize::MAX;
            grid.cell_corners(c).iter().all(|&i| {
                let o = owner[i];
                if o == usize::MAX {
                    return true;
                }
                if seen == usize::MAX {
                    seen = o;
                }
                seen == o
            })
        })
    }
}

/// Packs `k` cones along the first axis. Each cone has radius `r h` with
/// integer `r ≥ 3` and occupies `2r + 1` node columns, its support plus one
/// zero column, so neighbouring supports never share a cell.
pub fn build_cone_family(grid: &Grid, k: usize) -> Result<ConeFamily, MultiplicityError> {
    let n = grid.nodes_per_axis();
    let max_k = n / 7;
    if k == 0 || k > max_k {
        return Err(MultiplicityError::Capacity { requested: k, max_k });
    }
    let mid = (n - 1) / 2;
    let mut r = (n / k - 1) / 2;
    if grid.dim() == 2 {
        r = r.min(mid).min(n - 1 - mid);
    }
    if r < 3 {
        return Err(MultiplicityError::Capacity { requested: k, max_k });
    }
    let offset = (n - k * (2 * r + 1)) / 2;
    let h = grid.spacing();
    let axis = |i: usize| grid.lower() + i as f64 * h;
    let cones = (0..k)
        .map(|j| {
            let ci = offset + r + j * (2 * r + 1);
            let center = if grid.dim() == 1 { vec![axis(ci)] } else { vec![axis(ci), axis(mid)] };
            // shave the radius so the outermost support nodes sit strictly inside
            ConeTestFunction::new(grid, &center, r as f64 * h * (1.0 - 1e-12))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ConeFamily { cones })
}

#[derive(Debug, Clone, PartialEq)]
pub struct A2Report {
    /// `(ρ, max sampled φ on ‖u‖ = ρ)`.
    pub rows: Vec<(f64, f64)>,
    pub certified_rho: Option<f64>,
    /// Largest `|φ(Σ c_j h_j) - Σ φ(c_j h_j)|` over the samples.
    pub additivity_defect: f64,
    /// Scale of the energies entering the additivity comparison.
    pub additivity_scale: f64,
}

/// Samples the sphere `‖u‖ = ρ` in `span{h_1..h_k}` and certifies at the
/// smallest `ρ` where every sampled energy is `≤ 0`.
pub fn verify_a2<R: Rng>(
    assembly: &EnergyAssembly,
    family: &ConeFamily,
    rho_grid: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<A2Report, MultiplicityError> {
    let grid = assembly.grid();
    let k = family.len();
    let mut dirs = Vec::with_capacity(samples);
    while dirs.len() < samples {
        let c: Vec<f64> = (0..k).map(|_| sampling::uniform(rng, -1.0, 1.0)).collect();
        let u = family.combination(grid, &c);
        let n = assembly.x_norm(&u)?;
        if n > 0.0 {
            dirs.push(c.iter().map(|v| v / n).collect::<Vec<f64>>());
        }
    }
    let mut rows = Vec::with_capacity(rho_grid.len());
    let mut certified = None;
    let mut defect: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &rho in rho_grid {
        let mut worst = f64::NEG_INFINITY;
        for c in &dirs {
            let coeffs: Vec<f64> = c.iter().map(|v| v * rho).collect();
            let joint = assembly.energy(&family.combination(grid, &coeffs))?;
            let mut parts = 0.0;
            let mut mag: f64 = 0.0;
            for (cj, cone) in coeffs.iter().zip(&family.cones) {
                let e = assembly.energy(&cone.values.scaled(*cj))?;
                parts += e;
                mag += e.abs();
            }
            defect = defect.max((joint - parts).abs());
            scale = scale.max(mag);
            worst = worst.max(joint);
        }
        if certified.is_none() && worst <= 0.0 {
            certified = Some(rho);
        }
        rows.push((rho, worst));
    }
    Ok(A2Report { rows, certified_rho: certified, additivity_defect: defect, additivity_scale: scale })
}

#[derive(Debug, Clone, PartialEq)]
pub struct A1Row {
    pub k: usize,
    pub beta: f64,
    pub gamma: f64,
    /// Sampled minimum of `φ` on `‖u‖ = γ_k` in `Z_k`; `+∞` when every
    /// sample overflowed.
    pub min_energy: f64,
    /// `codim Z_k`.
    pub codim_plus: usize,
    /// `dim span{h_1..h_k}`.
    pub dim_minus: usize,
    /// `codim + 1 == dim`.
    pub index_consistent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct A1Report {
    pub applicable: bool,
    pub sigma: f64,
    pub c_sigma: f64,
    pub rows: Vec<A1Row>,
    /// Sampled minima strictly increasing over the `k` grid.
    pub increasing: bool,
}

/// Largest `(F - σ|t|^p) / |t|^α` over samples, floored at `1e-6`.
pub fn fit_c_sigma(assembly: &EnergyAssembly, sigma: f64, xs: &SampleSet) -> Result<f64, MultiplicityError> {
    let inst = assembly.instance();
    let mut c: f64 = 0.0;
    for x in xs.iter() {
        let (p, alpha) = (inst.p_at(x), inst.alpha_at(x));
        for j in 0..=32 {
            let s = 10f64.powf(-4.0 + 8.0 * j as f64 / 32.0);
            for t in [s, -s] {
                let big_f = inst.primitive(x, t).map_err(EnergyError::from)?;
                c = c.max((big_f - sigma * s.powf(p)) / s.powf(alpha));
            }
        }
    }
    Ok(c.max(1e-6))
}

/// Desk-scale proxy for the growth of `b_k`: sampled minima of `φ` on the
/// spheres `‖u‖ = γ_k` of `Z_k`, `γ_k = (2 C(σ) α⁺ β_k^{α⁺})^{1/(p⁻-α⁺)}`,
/// `σ = V₀/8`.
pub fn verify_a1_proxy<R: Rng>(
    basis: &DiscreteBasis,
    assembly: &EnergyAssembly,
    k_grid: &[usize],
    samples: usize,
    beta_config: &BetaConfig,
    rng: &mut R,
) -> Result<A1Report, MultiplicityError> {
    for &k in k_grid {
        basis.check_k(k)?;
    }
    let field = assembly.field();
    let (p_minus, alpha_plus) = (field.p_minus(), field.alpha_plus());
    let v0 = assembly.potential().iter().copied().fold(f64::INFINITY, f64::min);
    let sigma = v0 / 8.0;
    if !(alpha_plus > p_minus) {
        return Ok(A1Report { applicable: false, sigma, c_sigma: f64::NAN, rows: Vec::new(), increasing: false });
    }
    let xs = SampleSet::from_grid(assembly.grid(), 9);
    let c_sigma = fit_c_sigma(assembly, sigma, &xs)?;
    let betas = beta_profile(basis, field, assembly.potential(), beta_config)?;
    let n = basis.len();
    let mut rows = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        let beta = betas[k - 1];
        let gamma = (2.0 * c_sigma * alpha_plus * beta.powf(alpha_plus)).powf(1.0 / (p_minus - alpha_plus));
        let mut min_energy = f64::INFINITY;
        for _ in 0..samples {
            let c: Vec<f64> = (0..n - k + 1).map(|_| sampling::uniform(rng, -1.0, 1.0)).collect();
            let u = basis.tail_combination(k, &c);
            let norm = assembly.x_norm(&u)?;
            if norm == 0.0 {
                continue;
            }
            match assembly.energy(&u.scaled(gamma / norm)) {
                Ok(e) => min_energy = min_energy.min(e),
                Err(EnergyError::Overflow { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
        rows.push(A1Row {
            k,
            beta,
            gamma,
            min_energy,
            codim_plus: k - 1,
            dim_minus: k,
            index_consistent: (k - 1) + 1 == k,
        });
    }
    let increasing = rows.windows(2).all(|w| w[1].min_energy > w[0].min_energy);
    Ok(A1Report { applicable: true, sigma, c_sigma, rows, increasing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::cubic_constant_exponent;
    use crate::sampling::seeded;
    use approx::assert_relative_eq;

    #[test]
    fn eigenvalues_match_closed_form() {
        let g = Grid::centered(1, 2.0, 33).unwrap();
        let b = DiscreteBasis::new(&g);
        let h = g.spacing();
        let n = g.nodes_per_axis();
        assert_eq!(b.len(), n - 2);
        for k in 1..=b.len() {
            let s = (k as f64 * core::f64::consts::PI / (2.0 * (n - 1) as f64)).sin();
            assert_relative_eq!(b.eigenvalues()[k - 1], 4.0 / (h * h) * s * s, max_relative = 1e-10);
        }
        // W-orthonormal
        for a in 1..=4 {
            for c in 1..=4 {
                let ip: f64 =
                    b.vector(a).iter().zip(b.vector(c).iter()).zip(g.weights()).map(|((x, y), w)| x * y * w).sum();
                assert_relative_eq!(ip, if a == c { 1.0 } else { 0.0 }, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn beta_constant_exponent_closed_form() {
        let g = Grid::centered(1, 2.0, 24).unwrap();
        let b = DiscreteBasis::new(&g);
        let field = ExponentField::from_fns_unchecked(&g, |_| 2.0, None, |_| 2.0, |_| 3.0);
        let v = vec![1.0; g.len()];
        let betas = beta_profile(&b, &field, &v, &BetaConfig::default()).unwrap();
        for k in 1..=b.len() {
            assert_relative_eq!(betas[k - 1], beta_closed_form(&b, k), max_relative = 1e-6);
        }
        assert!(betas.windows(2).all(|w| w[1] < w[0]));
        assert!(matches!(
            beta_k(&b, 0, &field, &v, &BetaConfig::default()),
            Err(MultiplicityError::KOutOfRange { .. })
        ));
    }

    #[test]
    fn cone_family_packing() {
        let g = Grid::new(1, -5.0, 5.0, 101).unwrap();
        let fam = build_cone_family(&g, 4).unwrap();
        assert_eq!(fam.len(), 4);
        assert!(fam.supports_disjoint(&g));
        let one = build_cone_family(&g, 1).unwrap();
        assert_relative_eq!(one.cones[0].center[0], 0.0, epsilon = 1e-12);
        let err = build_cone_family(&g, 15).unwrap_err();
        assert_eq!(err, MultiplicityError::Capacity { requested: 15, max_k: 14 });
        let g2 = Grid::centered(2, 3.0, 29).unwrap();
        let fam2 = build_cone_family(&g2, 3).unwrap();
        assert!(fam2.supports_disjoint(&g2));
    }

    #[test]
    fn a2_energy_is_additive() {
        let g = Grid::centered(1, 6.0, 121).unwrap();
        let asm = EnergyAssembly::new(cubic_constant_exponent(1).unwrap(), g.clone()).unwrap();
        let fam = build_cone_family(&g, 2).unwrap();
        let r = verify_a2(&asm, &fam, &[0.5, 2.0, 8.0, 32.0], 8, &mut seeded(2)).unwrap();
        assert!(r.additivity_defect <= 1e-10 * (1.0 + r.additivity_scale));
        assert!(r.certified_rho.is_some());
    }
}
