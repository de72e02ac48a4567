//! Seeded random grid functions for property sweeps and sphere sampling.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Grid, GridFunction};

pub type SampleRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent uniform values in `[-amplitude, amplitude]` on interior nodes.
pub fn random_dirichlet<R: Rng>(grid: &Grid, rng: &mut R, amplitude: f64) -> GridFunction {
    GridFunction::from_fn_dirichlet(grid, |_| amplitude * (2.0 * rng.random::<f64>() - 1.0))
}

/// Random combination of the lowest `modes` Dirichlet sine modes per axis,
/// coefficient of mode `k` drawn from `[-1/k, 1/k]`.
pub fn random_smooth<R: Rng>(grid: &Grid, rng: &mut R, modes: usize) -> GridFunction {
    let len = grid.upper() - grid.lower();
    let lower = grid.lower();
    let pi = core::f64::consts::PI;
    let dim = grid.dim();
    let coeffs: Vec<f64> = (0..modes.pow(dim as u32))
        .map(|idx| {
            let k = 1 + idx % modes;
            let l = 1 + idx / modes;
            let scale = 1.0 / (k * l) as f64;
            scale * (2.0 * rng.random::<f64>() - 1.0)
        })
        .collect();
    GridFunction::from_fn_dirichlet(grid, |x| {
        let xi = (x[0] - lower) / len;
        let mut acc = 0.0;
        if dim == 1 {
            for (k, c) in coeffs.iter().enumerate() {
                acc += c * ((k + 1) as f64 * pi * xi).sin();
            }
        } else {
            let eta = (x[1] - lower) / len;
            for (idx, c) in coeffs.iter().enumerate() {
                let k = 1 + idx % modes;
                let l = 1 + idx / modes;
                acc += c * (k as f64 * pi * xi).sin() * (l as f64 * pi * eta).sin();
            }
        }
        acc
    })
}

/// Uniform draw in `[lo, hi)`.
pub fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_samples() {
        let g = Grid::centered(2, 1.0, 9).unwrap();
        let a = random_smooth(&g, &mut seeded(5), 3);
        let b = random_smooth(&g, &mut seeded(5), 3);
        assert_eq!(a, b);
        assert!(a.has_zero_trace(&g));
        let c = random_dirichlet(&g, &mut seeded(5), 2.0);
        assert!(c.has_zero_trace(&g));
        assert!(c.max_abs() <= 2.0);
    }
}
