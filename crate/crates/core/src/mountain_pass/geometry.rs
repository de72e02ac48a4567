use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use super::GeometryError;
use crate::energy::{EnergyAssembly, EnergyError};
use crate::grid::{Grid, GridFunction};
use crate::problem::ProblemInstance;
use crate::sampling;

/// `h(x) = max(ε - |x - x₀|, 0)` sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeTestFunction {
    pub center: Vec<f64>,
    pub radius: f64,
    pub values: GridFunction,
}

impl ConeTestFunction {
    pub fn new(grid: &Grid, center: &[f64], radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0) || center.len() != grid.dim() {
            return Err(GeometryError::InvalidCone("radius must be positive and center must match the grid"));
        }
        if center.iter().any(|&c| c - radius < grid.lower() || c + radius > grid.upper()) {
            return Err(GeometryError::ConeOutsideBox { center: center.to_vec(), radius });
        }
        let mut node = 0;
        let values = GridFunction::from_fn(grid, |_| {
            let v = (radius - grid.distance(node, center)).max(0.0);
            node += 1;
            v
        });
        let mut values = values;
        values.enforce_dirichlet(grid);
        Ok(Self { center: center.to_vec(), radius, values })
    }

    pub fn support_nodes<'a>(&'a self, grid: &'a Grid) -> impl Iterator<Item = usize> + 'a {
        (0..grid.len()).filter(move |&i| self.values[i] > 0.0)
    }
}

/// `{x : δ ≤ |x - x₀| ≤ ε, (x - x₀)·d ≥ |x - x₀| cos θ}` with
/// `d = ∇p(x₀)/|∇p(x₀)|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSet {
    pub x0: Vec<f64>,
    pub eps: f64,
    pub delta: f64,
    pub theta: f64,
    pub direction: Vec<f64>,
}

impl ConeSet {
    pub fn new(x0: &[f64], eps: f64, delta: f64, theta: f64, direction: &[f64]) -> Result<Self, GeometryError> {
        if !(delta > 0.0 && delta <= eps) {
            return Err(GeometryError::InvalidCone("need 0 < delta <= eps"));
        }
        if !(theta > 0.0 && theta < core::f64::consts::FRAC_PI_2) {
            return Err(GeometryError::InvalidCone("theta must lie in (0, pi/2)"));
        }
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(GeometryError::LemmaInapplicable { x0: x0.to_vec() });
        }
        Ok(Self { x0: x0.to_vec(), eps, delta, theta, direction: direction.iter().map(|v| v / norm).collect() })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let mut r2 = 0.0;
        let mut dot = 0.0;
        for ((xk, ck), dk) in x.iter().zip(&self.x0).zip(&self.direction) {
            let d = xk - ck;
            r2 += d * d;
            dot += d * dk;
        }
        let r = r2.sqrt();
        r >= self.delta && r <= self.eps && dot >= r * self.theta.cos()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeLemmaRow {
    pub eps: f64,
    /// `δ ≤ ε`; rows with `δ > ε` are not checked.
    pub applicable: bool,
    /// `(x - x₀)·∇p(x) > 0` on every node of the cone set.
    pub positive_flux: bool,
    /// `max p` over the closed ball is attained on the cone cap.
    pub max_on_cap: bool,
    pub nodes_checked: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeLemmaReport {
    pub x0: Vec<f64>,
    pub rows: Vec<ConeLemmaRow>,
    /// Smallest `ε` for which both properties hold.
    pub certified_eps: Option<f64>,
}

/// Node-sampled check of the cone properties of `p` around `x0` for every
/// `ε` in `eps_grid`. The nodes form a lattice with `nodes` points per axis
/// covering the ball of the largest `ε`, centered at `x0`.
pub fn verify_cone_lemma(
    instance: &ProblemInstance,
    x0: &[f64],
    eps_grid: &[f64],
    delta: f64,
    theta: f64,
    nodes: usize,
) -> Result<ConeLemmaReport, GeometryError> {
    let dim = instance.dim();
    if x0.len() != dim {
        return Err(GeometryError::InvalidCone("x0 has the wrong dimension"));
    }
    let mut grad0 = [0.0; 2];
    instance.grad_p_at(x0, &mut grad0);
    if grad0[..dim].iter().all(|&g| g == 0.0) {
        return Err(GeometryError::LemmaInapplicable { x0: x0.to_vec() });
    }
    let mut eps_sorted = eps_grid.to_vec();
    eps_sorted.sort_by(|a, b| a.total_cmp(b));
    let eps_max = match eps_sorted.last() {
        Some(&e) if e > 0.0 && e.is_finite() => e,
        _ => return Err(GeometryError::InvalidCone("eps grid must be non-empty and positive")),
    };
    let lattice = Grid::centered(dim, eps_max, nodes).map_err(EnergyError::from)?;
    let points: Vec<[f64; 2]> = (0..lattice.len())
        .map(|i| {
            let off = lattice.point(i);
            let mut x = [0.0; 2];
            for k in 0..dim {
                x[k] = x0[k] + off[k];
            }
            x
        })
        .collect();

    let mut rows = Vec::with_capacity(eps_sorted.len());
    let mut certified = None;
    for &eps in &eps_sorted {
        if delta > eps {
            rows.push(ConeLemmaRow {
                eps,
                applicable: false,
                positive_flux: false,
                max_on_cap: false,
                nodes_checked: 0,
            });
            continue;
        }
        let cone = ConeSet::new(x0, eps, delta, theta, &grad0[..dim])?;
        let mut positive_flux = true;
        let mut nodes_checked = 0;
        let mut ball_max = instance.p_at(x0);
        let mut grad = [0.0; 2];
        for x in &points {
            let x = &x[..dim];
            let r = (0..dim).map(|k| (x[k] - x0[k]).powi(2)).sum::<f64>().sqrt();
            if r <= eps {
                ball_max = ball_max.max(instance.p_at(x));
            }
            if cone.contains(x) {
                nodes_checked += 1;
                instance.grad_p_at(x, &mut grad);
                let flux: f64 = (0..dim).map(|k| (x[k] - x0[k]) * grad[k]).sum();
                if !(flux > 0.0) {
                    positive_flux = false;
                }
            }
        }
        let cap_max =
            cap_samples(&cone, dim).iter().map(|x| instance.p_at(&x[..dim])).fold(f64::NEG_INFINITY, f64::max);
        let max_on_cap = ball_max <= cap_max + 1e-12;
        let positive_flux = positive_flux && nodes_checked > 0;
        if positive_flux && max_on_cap && certified.is_none() {
            certified = Some(eps);
        }
        rows.push(ConeLemmaRow { eps, applicable: true, positive_flux, max_on_cap, nodes_checked });
    }
    Ok(ConeLemmaReport { x0: x0.to_vec(), rows, certified_eps: certified })
}

fn cap_samples(cone: &ConeSet, dim: usize) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    if dim == 1 {
        out.push([cone.x0[0] + cone.eps * cone.direction[0], 0.0]);
    } else {
        let base = cone.direction[1].atan2(cone.direction[0]);
        let m = 64;
        for k in 0..=m {
            let a = base - cone.theta + 2.0 * cone.theta * k as f64 / m as f64;
            out.push([cone.x0[0] + cone.eps * a.cos(), cone.x0[1] + cone.eps * a.sin()]);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlowdownOutcome {
    /// `φ(t h)` crosses zero at `crossing` and is below `-10³` from `below`
    /// on, decreasing monotonically after its peak.
    Blowdown { crossing: f64, below: f64 },
    /// `φ(t h)` keeps growing over the whole grid.
    NoBlowdown,
    /// Evaluation overflowed (or the grid ended) before a verdict.
    Inconclusive { largest_t: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowdownReport {
    pub samples: Vec<(f64, f64)>,
    pub outcome: BlowdownOutcome,
}

impl BlowdownReport {
    pub fn is_blowdown(&self) -> bool {
        matches!(self.outcome, BlowdownOutcome::Blowdown { .. })
    }

    pub fn crossing(&self) -> Option<f64> {
        match self.outcome {
            BlowdownOutcome::Blowdown { crossing, .. } => Some(crossing),
            _ => None,
        }
    }
}

pub const BLOWDOWN_LEVEL: f64 = -1e3;

/// Evaluates `φ(t h)` at `t = 2^k`, `k = 0..=k_max`, stopping early once the
/// energy is below `-10³`.
pub fn verify_blowdown(
    assembly: &EnergyAssembly,
    h: &GridFunction,
    k_max: u32,
) -> Result<BlowdownReport, GeometryError> {
    let mut samples: Vec<(f64, f64)> = Vec::new();
    let mut overflow = false;
    for k in 0..=k_max {
        let t = 2f64.powi(k as i32);
        match assembly.energy(&h.scaled(t)) {
            Ok(phi) => {
                samples.push((t, phi));
                if phi < BLOWDOWN_LEVEL {
                    break;
                }
            }
            Err(EnergyError::Overflow { .. }) => {
                overflow = true;
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    let largest_t = samples.last().map_or(0.0, |s| s.0);
    let below = samples.iter().position(|s| s.1 < BLOWDOWN_LEVEL);
    let Some(below) = below else {
        let growing = samples.len() >= 4
            && samples[samples.len() - 4..].windows(2).all(|w| w[1].1 > w[0].1)
            && samples.iter().all(|s| s.1 >= 0.0);
        let outcome = if growing && !overflow {
            BlowdownOutcome::NoBlowdown
        } else {
            BlowdownOutcome::Inconclusive { largest_t }
        };
        return Ok(BlowdownReport { samples, outcome });
    };
    let peak = (0..=below).max_by(|&a, &b| samples[a].1.total_cmp(&samples[b].1).then(b.cmp(&a))).unwrap();
    let monotone = samples[peak..=below].windows(2).all(|w| w[1].1 < w[0].1);
    let first_neg = samples.iter().position(|s| s.1 < 0.0).unwrap();
    if !monotone {
        return Ok(BlowdownReport { samples, outcome: BlowdownOutcome::Inconclusive { largest_t } });
    }
    let (mut lo, mut hi) =
        if first_neg == 0 { (0.0, samples[0].0) } else { (samples[first_neg - 1].0, samples[first_neg].0) };
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if assembly.energy(&h.scaled(mid))? < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(BlowdownReport {
        outcome: BlowdownOutcome::Blowdown { crossing: 0.5 * (lo + hi), below: samples[below].0 },
        samples,
    })
}

/// `e = t h` for the cone test function of `radius` at the box center,
/// with `t` the blow-down crossing doubled until `φ(e) < 0`. `sign = -1`
/// gives the endpoint for the minus variant.
pub fn default_endpoint(assembly: &EnergyAssembly, radius: f64, sign: f64) -> Result<GridFunction, GeometryError> {
    let grid = assembly.grid();
    let center = vec![grid.center(); grid.dim()];
    let cone = ConeTestFunction::new(grid, &center, radius)?;
    let h = cone.values.scaled(sign);
    let report = verify_blowdown(assembly, &h, 200)?;
    // The crossing itself has energy at rounding level; start one doubling out.
    let mut t = match report.crossing() {
        Some(c) => 2.0 * c,
        None => return Err(GeometryError::NoNegativeEndpoint { t_max: report.samples.last().map_or(0.0, |s| s.0) }),
    };
    for _ in 0..64 {
        let e = h.scaled(t);
        if assembly.energy(&e)? < 0.0 {
            return Ok(e);
        }
        t *= 2.0;
    }
    Err(GeometryError::NoNegativeEndpoint { t_max: t })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryRow {
    pub r: f64,
    /// Sampled minimum of `φ` on `‖u‖ = r`, an upper bound for the true minimum.
    pub min_energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpGeometryReport {
    pub rows: Vec<GeometryRow>,
    /// First `r` whose sampled minimum is at least `δ₀`.
    pub r: Option<f64>,
    pub delta: Option<f64>,
    pub endpoint_energy: Option<f64>,
    pub endpoint_norm: Option<f64>,
    pub certified: bool,
}

pub const MP_DELTA0: f64 = 1e-6;

/// Samples `φ` on spheres `‖u‖ = r` along random smooth directions and
/// pairs the best sphere with the endpoint `e`.
pub fn verify_mp_geometry<R: Rng>(
    assembly: &EnergyAssembly,
    r_grid: &[f64],
    samples: usize,
    endpoint: Option<&GridFunction>,
    rng: &mut R,
) -> Result<MpGeometryReport, GeometryError> {
    let grid = assembly.grid();
    let mut dirs = Vec::with_capacity(samples);
    while dirs.len() < samples {
        let mut u = sampling::random_smooth(grid, rng, 8);
        if rng.random::<f64>() < 0.5 {
            for v in u.iter_mut() {
                *v = v.abs();
            }
        }
        let n = assembly.x_norm(&u)?;
        if n > 0.0 {
            dirs.push(u.scaled(1.0 / n));
        }
    }
    let mut rows = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let mut min_energy = f64::INFINITY;
        for d in &dirs {
            min_energy = min_energy.min(assembly.energy(&d.scaled(r))?);
        }
        rows.push(GeometryRow { r, min_energy });
    }
    let (endpoint_energy, endpoint_norm) = match endpoint {
        Some(e) => (Some(assembly.energy(e)?), Some(assembly.x_norm(e)?)),
        None => (None, None),
    };
    let pass = rows.iter().find(|row| {
        row.min_energy >= MP_DELTA0
            && matches!((endpoint_energy, endpoint_norm), (Some(pe), Some(ne)) if pe < 0.0 && ne > row.r)
    });
    Ok(MpGeometryReport {
        r: pass.map(|row| row.r),
        delta: pass.map(|row| row.min_energy),
        certified: pass.is_some(),
        rows,
        endpoint_energy,
        endpoint_norm,
    })
}
