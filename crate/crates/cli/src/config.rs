//! Run configuration: a TOML document with one table per concern.
//!
//! Every table and every key is optional; missing values take the defaults
//! below. Unknown keys are rejected.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use vexp_core::problem::{builtin, ProblemError, ProblemInstance, BUILTIN_NAMES};
use vexp_core::{SolverConfig, Truncation};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Solve,
    CheckHypotheses,
    VerifyGeometry,
    DecayStudy,
    Multiplicity,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::Solve => "solve",
            Self::CheckHypotheses => "check-hypotheses",
            Self::VerifyGeometry => "verify-geometry",
            Self::DecayStudy => "decay-study",
            Self::Multiplicity => "multiplicity",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Plus,
    Minus,
    Full,
}

impl Variant {
    pub fn truncation(self) -> Truncation {
        match self {
            Self::Plus => Truncation::Plus,
            Self::Minus => Truncation::Minus,
            Self::Full => Truncation::Full,
        }
    }

    pub fn name(self) -> &'static str {
        self.truncation().name()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Must agree with the subcommand when given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    pub seed: u64,
    pub output: OutputConfig,
    pub instance: InstanceConfig,
    pub grid: GridConfig,
    pub solver: SolverSection,
    pub hypotheses: HypothesesConfig,
    pub geometry: GeometryConfig,
    pub decay: DecayConfig,
    pub multiplicity: MultiplicityConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "vexp-out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstanceConfig {
    /// A built-in name, or a free label when `inline` is given.
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inline: Option<InlineInstance>,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        Self { name: "paper-example".into(), inline: None }
    }
}

/// `f(x, t) = Σ c_j |t|^{q_j - 2} t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerTerm {
    pub coefficient: f64,
    pub power: f64,
}

/// Constant exponent, `V(x) = v0 + v2 |x|²` and a power-sum nonlinearity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineInstance {
    pub exponent: f64,
    pub alpha: f64,
    pub log_exponent: f64,
    pub potential_constant: f64,
    #[serde(default)]
    pub potential_quadratic: f64,
    pub nonlinearity: Vec<PowerTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub dim: usize,
    pub radius: f64,
    pub nodes: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { dim: 1, radius: 15.0, nodes: 301 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub variants: Vec<Variant>,
    pub tol: f64,
    pub max_iter: usize,
    pub path_points: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub initial_step: f64,
    pub max_backtracks: usize,
    /// Radius of the cone test function that seeds the endpoint.
    pub cone_radius: f64,
    /// Bound `B` of the Cerami telemetry check.
    pub cerami_bound: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            variants: vec![Variant::Plus, Variant::Minus],
            tol: d.tol,
            max_iter: d.max_iter,
            path_points: d.path_points,
            armijo_c: d.armijo_c,
            backtrack: d.backtrack,
            initial_step: d.initial_step,
            max_backtracks: d.max_backtracks,
            cone_radius: 2.0,
            cerami_bound: 10.0,
        }
    }
}

impl SolverSection {
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            path_points: self.path_points,
            tol: self.tol,
            max_iter: self.max_iter,
            armijo_c: self.armijo_c,
            backtrack: self.backtrack,
            initial_step: self.initial_step,
            max_backtracks: self.max_backtracks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HypothesesConfig {
    /// Spatial samples per axis, strided over the grid.
    pub samples_per_axis: usize,
}

impl Default for HypothesesConfig {
    fn default() -> Self {
        Self { samples_per_axis: 31 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    /// Empty means the origin.
    pub x0: Vec<f64>,
    pub eps: Vec<f64>,
    pub delta: f64,
    pub theta: f64,
    /// Lattice nodes per axis around `x0` for the cone checks.
    pub cone_nodes: usize,
    /// Largest blow-down exponent: `t = 2^k`, `k ≤ blowdown_k_max`.
    pub blowdown_k_max: u32,
    pub sphere_radii: Vec<f64>,
    pub sphere_samples: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            x0: Vec::new(),
            eps: vec![0.05, 0.1, 0.2, 0.4, 0.8],
            delta: 0.01,
            theta: std::f64::consts::FRAC_PI_4,
            cone_nodes: 401,
            blowdown_k_max: 200,
            sphere_radii: vec![1e-3, 1e-2, 0.05, 0.1, 0.2, 0.5, 1.0],
            sphere_samples: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayConfig {
    pub radii: Vec<f64>,
    pub spacing: f64,
    pub variant: Variant,
    pub threshold: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self { radii: vec![10.0, 15.0, 20.0], spacing: 0.05, variant: Variant::Plus, threshold: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultiplicityConfig {
    /// Grid of the tail-subspace computations; dense eigen solves keep it small.
    pub radius: f64,
    pub nodes: usize,
    /// Number of cones spanning the finite-dimensional subspace.
    pub cones: usize,
    pub rho: Vec<f64>,
    pub k: Vec<usize>,
    pub samples: usize,
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for MultiplicityConfig {
    fn default() -> Self {
        Self {
            radius: 5.0,
            nodes: 64,
            cones: 3,
            rho: vec![1.0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6],
            k: vec![1, 2, 4, 8],
            samples: 16,
            restarts: 2,
            max_iter: 200,
        }
    }
}

fn finite_positive(key: &'static str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("{v} is not a finite positive number")))
    }
}

fn positive_list(key: &'static str, vs: &[f64]) -> Result<(), ConfigError> {
    if vs.is_empty() {
        return Err(invalid(key, "list is empty"));
    }
    for &v in vs {
        finite_positive(key, v)?;
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every field against the preconditions of the experiments.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.grid;
        if !(g.dim == 1 || g.dim == 2) {
            return Err(invalid("grid.dim", format!("{} is not 1 or 2", g.dim)));
        }
        finite_positive("grid.radius", g.radius)?;
        if g.nodes < 5 {
            return Err(invalid("grid.nodes", format!("{} is below the minimum of 5", g.nodes)));
        }
        match &self.instance.inline {
            None if !BUILTIN_NAMES.contains(&self.instance.name.as_str()) => {
                return Err(invalid(
                    "instance.name",
                    format!("unknown built-in `{}` (known: {})", self.instance.name, BUILTIN_NAMES.join(", ")),
                ));
            }
            None => {}
            Some(inline) => {
                if !(inline.exponent.is_finite() && inline.exponent > 1.0) {
                    return Err(invalid("instance.inline.exponent", "must exceed 1"));
                }
                finite_positive("instance.inline.alpha", inline.alpha)?;
                finite_positive("instance.inline.log_exponent", inline.log_exponent)?;
                finite_positive("instance.inline.potential_constant", inline.potential_constant)?;
                if !(inline.potential_quadratic.is_finite() && inline.potential_quadratic >= 0.0) {
                    return Err(invalid("instance.inline.potential_quadratic", "must be finite and non-negative"));
                }
                if inline.nonlinearity.is_empty() {
                    return Err(invalid("instance.inline.nonlinearity", "needs at least one term"));
                }
                for term in &inline.nonlinearity {
                    if !term.coefficient.is_finite() {
                        return Err(invalid("instance.inline.nonlinearity", "coefficient is not finite"));
                    }
                    if !(term.power.is_finite() && term.power > 1.0) {
                        return Err(invalid("instance.inline.nonlinearity", "power must exceed 1"));
                    }
                }
            }
        }

        let s = &self.solver;
        if s.variants.is_empty() {
            return Err(invalid("solver.variants", "list is empty"));
        }
        finite_positive("solver.tol", s.tol)?;
        if s.max_iter == 0 {
            return Err(invalid("solver.max_iter", "must be at least 1"));
        }
        if s.path_points < 3 {
            return Err(invalid("solver.path_points", "must be at least 3"));
        }
        if !(s.armijo_c > 0.0 && s.armijo_c < 1.0) {
            return Err(invalid("solver.armijo_c", "must lie in (0, 1)"));
        }
        if !(s.backtrack > 0.0 && s.backtrack < 1.0) {
            return Err(invalid("solver.backtrack", "must lie in (0, 1)"));
        }
        finite_positive("solver.initial_step", s.initial_step)?;
        finite_positive("solver.cone_radius", s.cone_radius)?;
        if s.cone_radius >= g.radius {
            return Err(invalid("solver.cone_radius", "must be smaller than grid.radius"));
        }
        finite_positive("solver.cerami_bound", s.cerami_bound)?;

        if self.hypotheses.samples_per_axis < 2 {
            return Err(invalid("hypotheses.samples_per_axis", "must be at least 2"));
        }

        let geo = &self.geometry;
        if !(geo.x0.is_empty() || geo.x0.len() == g.dim) || geo.x0.iter().any(|v| !v.is_finite()) {
            return Err(invalid("geometry.x0", format!("needs {} finite coordinates", g.dim)));
        }
        positive_list("geometry.eps", &geo.eps)?;
        finite_positive("geometry.delta", geo.delta)?;
        if !(geo.theta > 0.0 && geo.theta < std::f64::consts::FRAC_PI_2) {
            return Err(invalid("geometry.theta", "must lie in (0, pi/2)"));
        }
        let cone_cap = if g.dim == 1 { 100_001 } else { 1001 };
        if geo.cone_nodes < 3 || geo.cone_nodes > cone_cap {
            return Err(invalid("geometry.cone_nodes", format!("{} outside 3..={cone_cap}", geo.cone_nodes)));
        }
        if geo.blowdown_k_max == 0 || geo.blowdown_k_max > 1000 {
            return Err(invalid("geometry.blowdown_k_max", "must lie in 1..=1000"));
        }
        positive_list("geometry.sphere_radii", &geo.sphere_radii)?;
        if geo.sphere_samples == 0 {
            return Err(invalid("geometry.sphere_samples", "must be at least 1"));
        }

        let d = &self.decay;
        positive_list("decay.radii", &d.radii)?;
        finite_positive("decay.spacing", d.spacing)?;
        finite_positive("decay.threshold", d.threshold)?;
        for &r in &d.radii {
            if 2.0 * r / d.spacing < 4.0 {
                return Err(invalid("decay.spacing", format!("too coarse for radius {r}")));
            }
            if s.cone_radius >= r {
                return Err(invalid("decay.radii", format!("radius {r} does not exceed solver.cone_radius")));
            }
        }

        let m = &self.multiplicity;
        if m.k.iter().any(|&k| k > m.nodes.saturating_sub(2).pow(g.dim as u32)) {
            return Err(invalid("multiplicity.k", "exceeds the tail-basis dimension"));
        }
        finite_positive("multiplicity.radius", m.radius)?;
        let cap = if g.dim == 1 { 400 } else { 33 };
        if m.nodes < 5 || m.nodes > cap {
            return Err(invalid("multiplicity.nodes", format!("{} outside 5..={cap}", m.nodes)));
        }
        if m.cones == 0 {
            return Err(invalid("multiplicity.cones", "must be at least 1"));
        }
        positive_list("multiplicity.rho", &m.rho)?;
        if m.k.is_empty() || m.k.contains(&0) {
            return Err(invalid("multiplicity.k", "needs positive entries"));
        }
        if m.samples == 0 {
            return Err(invalid("multiplicity.samples", "must be at least 1"));
        }
        Ok(())
    }

    pub fn x0(&self) -> Vec<f64> {
        if self.geometry.x0.is_empty() {
            vec![0.0; self.grid.dim]
        } else {
            self.geometry.x0.clone()
        }
    }

    /// Builds the problem instance named (or defined inline) by the config.
    pub fn problem(&self) -> Result<ProblemInstance, ProblemError> {
        match &self.instance.inline {
            None => builtin(&self.instance.name, self.grid.dim),
            Some(inline) => inline_instance(&self.instance.name, self.grid.dim, inline),
        }
    }
}

fn inline_instance(name: &str, dim: usize, def: &InlineInstance) -> Result<ProblemInstance, ProblemError> {
    let (p, alpha, a) = (def.exponent, def.alpha, def.log_exponent);
    let (v0, v2) = (def.potential_constant, def.potential_quadratic);
    let terms: Vec<(f64, f64)> = def.nonlinearity.iter().map(|t| (t.coefficient, t.power)).collect();
    let prim = terms.clone();
    ProblemInstance::builder(name, dim)
        .exponent(move |_| p)
        .exponent_gradient(|_, g| g.iter_mut().for_each(|v| *v = 0.0))
        .alpha(move |_| alpha)
        .log_exponent(move |_| a)
        .potential(move |x| v0 + v2 * x.iter().map(|c| c * c).sum::<f64>())
        .nonlinearity(move |_, t| {
            let s = t.abs();
            if s == 0.0 {
                return 0.0;
            }
            terms.iter().map(|&(c, q)| c * s.powf(q - 2.0) * t).sum()
        })
        .primitive(move |_, t| prim.iter().map(|&(c, q)| c * t.abs().powf(q) / q).sum())
        .build()
}
