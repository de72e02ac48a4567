use alloc::string::ToString;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::diagnostics::{positivity_check, tail_measure};
use super::{SolverConfig, SolverError, SolverReport};
use crate::energy::{EnergyAssembly, Truncation};
use crate::grid::GridFunction;
use crate::linalg;

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `t ↦ ⟨φ'(t w), w⟩`.
fn ray_slope(assembly: &EnergyAssembly, w: &GridFunction, t: f64) -> Result<f64, SolverError> {
    let g = assembly.gradient(&w.scaled(t))?;
    Ok(assembly.pairing(&g, w))
}

/// Maximizer `t* > 0` of `t ↦ φ(t w)`, located as the sign change of the
/// slope from positive to negative inside a bracket grown from `[lo, hi]`.
pub fn ray_maximum(assembly: &EnergyAssembly, w: &GridFunction, lo: f64, hi: f64) -> Result<f64, SolverError> {
    let (mut lo, mut hi) = (lo, hi);
    let mut g_lo = ray_slope(assembly, w, lo)?;
    let mut tries = 0;
    while !(g_lo > 0.0) {
        lo *= 0.5;
        tries += 1;
        if tries > 200 {
            return Err(SolverError::NoRayMaximum);
        }
        g_lo = ray_slope(assembly, w, lo)?;
    }
    let mut g_hi = ray_slope(assembly, w, hi)?;
    tries = 0;
    while !(g_hi < 0.0) {
        lo = hi;
        g_lo = g_hi;
        hi *= 2.0;
        tries += 1;
        if tries > 200 || g_hi.is_nan() {
            return Err(SolverError::NoRayMaximum);
        }
        g_hi = match ray_slope(assembly, w, hi) {
            Ok(v) => v,
            Err(_) => return Err(SolverError::NoRayMaximum),
        };
    }
    // Illinois variant of regula falsi, with bisection fallback.
    let mut side = 0i8;
    for _ in 0..200 {
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let mut t = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
        if !(t > lo && t < hi) {
            t = 0.5 * (lo + hi);
        }
        let g = ray_slope(assembly, w, t)?;
        if g == 0.0 {
            return Ok(t);
        }
        if g > 0.0 {
            lo = t;
            g_lo = g;
            if side == 1 {
                g_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = t;
            g_hi = g;
            if side == -1 {
                g_lo *= 0.5;
            }
            side = -1;
        }
    }
    Ok(if g_lo.abs() < g_hi.abs() { lo } else { hi })
}

struct Point {
    u: GridFunction,
    phi: f64,
    grad: GridFunction,
}

fn refine(assembly: &EnergyAssembly, w: &GridFunction, lo: f64, hi: f64) -> Result<Point, SolverError> {
    let t = ray_maximum(assembly, w, lo, hi)?;
    let u = w.scaled(t);
    let phi = assembly.energy(&u)?;
    let grad = assembly.gradient(&u)?;
    Ok(Point { u, phi, grad })
}

/// Index of the largest path energy (first on ties) along `s ↦ s e`.
fn path_maximum(assembly: &EnergyAssembly, e: &GridFunction, points: usize) -> Result<(usize, f64), SolverError> {
    let mut best = (0, f64::NEG_INFINITY);
    for j in 0..points {
        let s = j as f64 / (points - 1) as f64;
        let phi = assembly.energy(&e.scaled(s))?;
        if phi > best.1 {
            best = (j, phi);
        }
    }
    if best.0 == 0 || best.0 == points - 1 {
        return Err(SolverError::InvalidGeometry { index: best.0 });
    }
    Ok(best)
}

/// Rescales `u` to the X-norm `target` and doubles it until its energy is
/// negative.
fn respline(assembly: &EnergyAssembly, u: &GridFunction, target: f64) -> Result<GridFunction, SolverError> {
    let mut e = u.scaled(target / assembly.x_norm(u)?);
    for _ in 0..64 {
        if assembly.energy(&e)? < 0.0 {
            return Ok(e);
        }
        e = e.scaled(2.0);
    }
    Err(SolverError::EndpointNotNegative { energy: assembly.energy(&e)? })
}

/// Preconditioned descent direction `K(u)⁻¹ φ'(u)` with `K` the
/// frozen-coefficient operator at `u`.
fn direction(assembly: &EnergyAssembly, p: &Point) -> Result<GridFunction, SolverError> {
    let lin = assembly.linearization(&p.u);
    let d = linalg::solve_linearization(assembly.grid(), &lin, &p.grad)?;
    Ok(GridFunction::from_values(assembly.grid(), d).expect("solver keeps grid length"))
}

/// Runs the mountain-pass iteration for `assembly` (whose truncation picks
/// the variant) from the path `[0, e]`.
pub fn mountain_pass_solve(
    assembly: &EnergyAssembly,
    e: &GridFunction,
    config: &SolverConfig,
) -> Result<SolverReport, SolverError> {
    config.validate()?;
    if e.is_zero() {
        return Err(SolverError::ZeroEndpoint);
    }
    let phi_e = assembly.energy(e)?;
    if !(phi_e < 0.0) {
        return Err(SolverError::EndpointNotNegative { energy: phi_e });
    }
    let grid = assembly.grid();
    let target = assembly.x_norm(e)?;
    let points = config.path_points;
    let step = 1.0 / (points - 1) as f64;

    let (j, _) = path_maximum(assembly, e, points)?;
    let mut current = refine(assembly, e, (j as f64 - 1.0) * step, (j as f64 + 1.0) * step)?;

    let mut energies = Vec::new();
    let mut cerami = Vec::new();
    let mut norms = Vec::new();
    let mut converged = false;
    let mut failure = None;
    let mut iterations = 0;

    loop {
        let norm = assembly.x_norm(&current.u)?;
        let s_n = l2(&current.grad) * (1.0 + norm);
        energies.push(current.phi);
        cerami.push(s_n);
        norms.push(norm);
        if s_n < config.tol {
            converged = true;
            break;
        }
        if iterations >= config.max_iter {
            failure = Some("iteration cap reached".to_string());
            break;
        }
        iterations += 1;

        let step_result = (|| -> Result<Point, SolverError> {
            let d = direction(assembly, &current)?;
            let slope = assembly.pairing(&current.grad, &d);
            let noise = assembly.energy_noise(current.phi);
            let grad_norm = l2(&current.grad);
            let mut s = config.initial_step;
            for _ in 0..=config.max_backtracks {
                let w = current.u.add_scaled(-s, &d);
                if !w.is_zero() && w != current.u {
                    if let Ok(next) = refine(assembly, &w, 0.5, 2.0) {
                        let demand = config.armijo_c * s * slope;
                        // Below the energy noise floor the decrease test is
                        // meaningless; the exact gradient decides instead.
                        let accepted = if demand > noise {
                            next.phi <= current.phi - demand
                        } else {
                            next.phi <= current.phi + noise && l2(&next.grad) < grad_norm
                        };
                        if accepted {
                            return Ok(next);
                        }
                    }
                }
                s *= config.backtrack;
            }
            Err(SolverError::Config("line search failed"))
        })();
        let next = match step_result {
            Ok(next) => next,
            Err(err) => {
                failure = Some(err.to_string());
                break;
            }
        };

        // Re-thread the path through the new maximizer and re-locate its maximum.
        let located = respline(assembly, &next.u, target).and_then(|e_new| {
            let (j, _) = path_maximum(assembly, &e_new, points)?;
            Ok((e_new, j))
        });
        match located {
            Ok(_) => current = next,
            Err(err) => {
                current = next;
                failure = Some(err.to_string());
                let norm = assembly.x_norm(&current.u)?;
                energies.push(current.phi);
                cerami.push(l2(&current.grad) * (1.0 + norm));
                norms.push(norm);
                break;
            }
        }
    }

    let sign = match assembly.truncation() {
        Truncation::Minus => -1.0,
        Truncation::Plus => 1.0,
        Truncation::Full => {
            if current.u.iter().sum::<f64>() < 0.0 {
                -1.0
            } else {
                1.0
            }
        }
    };
    let positivity = positivity_check(grid, &current.u.scaled(sign));
    Ok(SolverReport {
        variant: assembly.truncation(),
        converged,
        iterations,
        residual: *cerami.last().unwrap(),
        gradient_inf: current.grad.max_abs(),
        energy: current.phi,
        tail: tail_measure(grid, &current.u),
        positivity,
        profile: current.u,
        energies,
        cerami,
        norms,
        failure,
    })
}
