//! Experiment dispatch. Each experiment writes its CSV files into the
//! output directory and returns the list of certifications it attempted.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;
use vexp_core::energy::EnergyError;
use vexp_core::grid::GridError;
use vexp_core::mountain_pass::{
    cerami_telemetry, decay_row, decay_verdict, default_endpoint, mountain_pass_solve, verify_blowdown,
    verify_cone_lemma, verify_mp_geometry, BlowdownOutcome, ConeTestFunction, DecayRow, GeometryError, TailMeasure,
};
use vexp_core::multiplicity::{
    beta_profile, build_cone_family, verify_a1_proxy, verify_a2, BetaConfig, DiscreteBasis, MultiplicityError,
};
use vexp_core::problem::{check_all, check_h1, Hypothesis, ProblemError, SampleSet};
use vexp_core::sampling::seeded;
use vexp_core::{EnergyAssembly, Grid, SolverReport, Truncation};

use crate::config::{ConfigError, Experiment, RunConfig, Variant};
use crate::output::{ensure_dir, flag, real, write_text, OutputError, Table};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Multiplicity(#[from] MultiplicityError),
}

impl RunError {
    /// Configuration and IO problems are usage errors; everything else
    /// is a numerical failure of a run that had started.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Output(_) => 1,
            _ => 2,
        }
    }
}

/// One certification attempted by an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub experiment: Experiment,
    pub checks: Vec<Check>,
    /// Reported findings that do not count towards the exit code.
    pub notes: Vec<String>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            2
        }
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(s, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        for n in &self.notes {
            let _ = writeln!(s, "INFO {n}");
        }
        let _ = writeln!(
            s,
            "{}: {}",
            self.experiment,
            if self.passed() { "all certifications passed" } else { "some certifications failed" }
        );
        s
    }
}

/// Validates `config`, writes `manifest.toml` and runs `experiment` into
/// `out`.
pub fn run(experiment: Experiment, config: &RunConfig, out: &Path) -> Result<Outcome, RunError> {
    if let Some(e) = config.experiment {
        if e != experiment {
            return Err(ConfigError::Invalid {
                key: "experiment",
                reason: format!("config selects `{e}` but the subcommand is `{experiment}`"),
            }
            .into());
        }
    }
    config.validate()?;
    let mut resolved = config.clone();
    resolved.experiment = Some(experiment);
    resolved.output.dir = out.display().to_string();

    ensure_dir(out)?;
    let manifest = format!("# vexp {} resolved configuration\n{}", env!("CARGO_PKG_VERSION"), resolved.to_toml());
    let mut files = vec![write_text(out, "manifest.toml", &manifest)?];
    let done = match experiment {
        Experiment::Solve => solve(&resolved, out)?,
        Experiment::CheckHypotheses => check_hypotheses(&resolved, out)?,
        Experiment::VerifyGeometry => verify_geometry(&resolved, out)?,
        Experiment::DecayStudy => decay_study(&resolved, out)?,
        Experiment::Multiplicity => multiplicity(&resolved, out)?,
    };
    files.extend(done.files);
    let mut outcome = Outcome { experiment, checks: done.checks, notes: done.notes, files };
    let summary_path = write_text(out, "summary.txt", &outcome.summary())?;
    outcome.files.push(summary_path);
    Ok(outcome)
}

struct Experimented {
    checks: Vec<Check>,
    notes: Vec<String>,
    files: Vec<PathBuf>,
}

impl Experimented {
    fn new(checks: Vec<Check>, files: Vec<PathBuf>) -> Self {
        Self { checks, notes: Vec::new(), files }
    }
}

fn grid_of(config: &RunConfig) -> Result<Grid, GridError> {
    Grid::centered(config.grid.dim, config.grid.radius, config.grid.nodes)
}

fn assembly_of(config: &RunConfig) -> Result<EnergyAssembly, RunError> {
    let instance = config.problem()?;
    Ok(EnergyAssembly::new(instance, grid_of(config)?)?)
}

fn sign_of(variant: Truncation) -> f64 {
    if variant == Truncation::Minus {
        -1.0
    } else {
        1.0
    }
}

fn coord_header(dim: usize) -> Vec<&'static str> {
    ["x", "y"][..dim].to_vec()
}

fn solve(config: &RunConfig, out: &Path) -> Result<Experimented, RunError> {
    let base = assembly_of(config)?;
    let solver = config.solver.solver_config();
    let cone_radius = config.solver.cone_radius;
    let runs: Vec<(Variant, Result<SolverReport, String>)> = config
        .solver
        .variants
        .par_iter()
        .map(|&v| {
            let a = base.truncated(v.truncation());
            let report = default_endpoint(&a, cone_radius, sign_of(v.truncation()))
                .and_then(|e| Ok(mountain_pass_solve(&a, &e, &solver)?))
                .map_err(|e| e.to_string());
            (v, report)
        })
        .collect();

    let grid = base.grid();
    let dim = grid.dim();
    let mut header = vec!["variant"];
    header.extend(coord_header(dim));
    header.push("u");
    let mut profiles = Table::create(out, "profiles.csv", &header)?;
    let mut telemetry = Table::create(out, "telemetry.csv", &["variant", "iter", "phi", "s_n", "norm"])?;
    let mut checks = Vec::new();
    for (v, result) in &runs {
        let name = v.name();
        let report = match result {
            Ok(r) => r,
            Err(msg) => {
                checks.push(Check::new(format!("{name}: solve"), false, msg.clone()));
                continue;
            }
        };
        for i in 0..grid.len() {
            let mut row = vec![name.to_string()];
            row.extend(grid.point(i).iter().map(|&c| real(c)));
            row.push(real(report.profile[i]));
            profiles.row(row)?;
        }
        for (n, ((phi, s), norm)) in report.energies.iter().zip(&report.cerami).zip(&report.norms).enumerate() {
            telemetry.row([name.to_string(), n.to_string(), real(*phi), real(*s), real(*norm)])?;
        }
        let max_u = report.profile.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min_u = report.profile.iter().copied().fold(f64::INFINITY, f64::min);
        checks.push(Check::new(
            format!("{name}: converged"),
            report.converged,
            format!(
                "{} iterations, s_n = {}, |grad|_inf = {}{}",
                report.iterations,
                real(report.residual),
                real(report.gradient_inf),
                report.failure.as_ref().map(|f| format!(", stopped: {f}")).unwrap_or_default()
            ),
        ));
        checks.push(Check::new(
            format!("{name}: positive energy"),
            report.energy > 0.0,
            format!("phi(u) = {}", real(report.energy)),
        ));
        let sign_word = match v {
            Variant::Plus => "u > 0",
            Variant::Minus => "u < 0",
            Variant::Full => "u of one sign",
        };
        checks.push(Check::new(
            format!("{name}: sign"),
            report.positivity.positive,
            format!("{sign_word} on the interior; max u = {}, min u = {}", real(max_u), real(min_u)),
        ));
        let cerami = cerami_telemetry(report, config.solver.cerami_bound);
        checks.push(Check::new(
            format!("{name}: cerami telemetry"),
            cerami.bounded,
            format!("max |u_n| = {} vs limit {}", real(cerami.max_norm), real(cerami.limit)),
        ));
    }
    Ok(Experimented::new(checks, vec![profiles.finish()?, telemetry.finish()?]))
}

fn check_hypotheses(config: &RunConfig, out: &Path) -> Result<Experimented, RunError> {
    let instance = config.problem()?;
    let grid = grid_of(config)?;
    let xs = SampleSet::from_grid(&grid, config.hypotheses.samples_per_axis);
    let reports = check_all(&instance, &grid, &xs)?;
    let mut table = Table::create(out, "hypotheses.csv", &["name", "verdict", "constants", "witness", "note"])?;
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    for r in &reports {
        let constants = r.constants.iter().map(|(k, v)| format!("{k}={}", real(*v))).collect::<Vec<_>>().join(";");
        let witness = r
            .witness
            .as_ref()
            .map(|w| {
                let x = w.x.iter().map(|&c| real(c)).collect::<Vec<_>>().join(" ");
                let t = w.t.map(|t| format!(";t={}", real(t))).unwrap_or_default();
                format!("x={x}{t};value={}", real(w.value))
            })
            .unwrap_or_default();
        table.row([r.hypothesis.name(), r.verdict.label(), &constants, &witness, &r.note])?;
        let mut detail =
            if r.verdict.is_certified() { constants } else { format!("{}; {}", r.verdict.label(), r.note) };
        if detail.is_empty() {
            detail = r.verdict.label().into();
        }
        if !witness.is_empty() {
            detail = format!("{detail}; witness {witness}");
        }
        // The Ambrosetti-Rabinowitz condition is reported but not required.
        if r.hypothesis == Hypothesis::Ar {
            notes.push(format!("AR {detail}"));
        } else {
            checks.push(Check::new(r.hypothesis.name(), r.verdict.is_certified(), detail));
        }
    }
    Ok(Experimented { checks, notes, files: vec![table.finish()?] })
}

fn verify_geometry(config: &RunConfig, out: &Path) -> Result<Experimented, RunError> {
    let assembly = assembly_of(config)?.truncated(Truncation::Plus);
    let grid = assembly.grid().clone();
    let instance = assembly.instance().clone();
    let geo = &config.geometry;
    let mut checks = Vec::new();
    let mut files = Vec::new();

    let mut cone_table =
        Table::create(out, "cone_lemma.csv", &["eps", "applicable", "positive_flux", "max_on_cap", "nodes_checked"])?;
    match verify_cone_lemma(&instance, &config.x0(), &geo.eps, geo.delta, geo.theta, geo.cone_nodes) {
        Ok(report) => {
            for row in &report.rows {
                cone_table.row([
                    real(row.eps),
                    flag(row.applicable).into(),
                    flag(row.positive_flux).into(),
                    flag(row.max_on_cap).into(),
                    row.nodes_checked.to_string(),
                ])?;
            }
            checks.push(Check::new(
                "cone lemma",
                report.certified_eps.is_some(),
                match report.certified_eps {
                    Some(eps) => format!("certified at eps = {}", real(eps)),
                    None => "no eps in the grid certifies both properties".into(),
                },
            ));
        }
        // Constant exponents have no cone set; the solver does not need one.
        Err(GeometryError::LemmaInapplicable { x0 }) => {
            checks.push(Check::new("cone lemma", true, format!("inapplicable: grad p vanishes at {x0:?}")));
        }
        Err(e) => return Err(e.into()),
    }
    files.push(cone_table.finish()?);

    let xs = SampleSet::from_grid(&grid, config.hypotheses.samples_per_axis);
    let h1 = check_h1(&instance, &xs)?;
    let center = vec![grid.center(); grid.dim()];
    let cone = ConeTestFunction::new(&grid, &center, config.solver.cone_radius)?;
    let blowdown = verify_blowdown(&assembly, &cone.values, geo.blowdown_k_max)?;
    let mut table = Table::create(out, "blowdown.csv", &["t", "phi"])?;
    for (t, phi) in &blowdown.samples {
        table.row([real(*t), real(*phi)])?;
    }
    files.push(table.finish()?);
    let premise = if h1.verdict.is_certified() { "" } else { " (H1 premise not certified)" };
    checks.push(Check::new(
        "blow-down",
        blowdown.is_blowdown(),
        match blowdown.outcome {
            BlowdownOutcome::Blowdown { crossing, below } => {
                format!("crossing t = {}, below -1e3 from t = {}{premise}", real(crossing), real(below))
            }
            BlowdownOutcome::NoBlowdown => format!("energy keeps growing{premise}"),
            BlowdownOutcome::Inconclusive { largest_t } => {
                format!("inconclusive up to t = {}{premise}", real(largest_t))
            }
        },
    ));

    let endpoint =
        if blowdown.is_blowdown() { Some(default_endpoint(&assembly, config.solver.cone_radius, 1.0)?) } else { None };
    let mut rng = seeded(config.seed);
    let mp = verify_mp_geometry(&assembly, &geo.sphere_radii, geo.sphere_samples, endpoint.as_ref(), &mut rng)?;
    let mut table = Table::create(out, "geometry.csv", &["r", "min_phi"])?;
    for row in &mp.rows {
        table.row([real(row.r), real(row.min_energy)])?;
    }
    files.push(table.finish()?);
    checks.push(Check::new(
        "mountain-pass geometry",
        mp.certified,
        match (mp.r, mp.delta, mp.endpoint_energy, mp.endpoint_norm) {
            (Some(r), Some(d), Some(pe), Some(ne)) => format!(
                "sampled min phi = {} on |u| = {}; endpoint phi = {}, |e| = {} (sampled, heuristic)",
                real(d),
                real(r),
                real(pe),
                real(ne)
            ),
            _ => "no sphere radius with positive sampled minimum below a negative endpoint".into(),
        },
    ));
    Ok(Experimented::new(checks, files))
}

fn decay_study(config: &RunConfig, out: &Path) -> Result<Experimented, RunError> {
    let instance = config.problem()?;
    let d = &config.decay;
    let solver = config.solver.solver_config();
    let variant = d.variant.truncation();
    let cone_radius = config.solver.cone_radius;
    let rows: Vec<DecayRow> = d
        .radii
        .par_iter()
        .map(|&r| match decay_row(&instance, r, d.spacing, variant, cone_radius, &solver) {
            Ok((row, _)) => row,
            Err(_) => DecayRow {
                radius: r,
                tail: TailMeasure { max_u: f64::NAN, max_grad: f64::NAN },
                converged: false,
                iterations: 0,
                energy: f64::NAN,
            },
        })
        .collect();
    let mut table =
        Table::create(out, "decay.csv", &["R", "tail_max_u", "tail_max_gradu", "converged", "iterations", "energy"])?;
    for row in &rows {
        table.row([
            real(row.radius),
            real(row.tail.max_u),
            real(row.tail.max_grad),
            flag(row.converged).into(),
            row.iterations.to_string(),
            real(row.energy),
        ])?;
    }
    let verdict = decay_verdict(&rows, d.threshold);
    let last = rows.last().expect("radii validated non-empty");
    let checks = vec![
        Check::new("decay: all radii converged", verdict.all_converged, format!("{} radii", rows.len())),
        Check::new("decay: tails strictly decrease", verdict.decreasing, "max |u| and max |grad u| over |x| >= R/2"),
        Check::new(
            "decay: final tails below threshold",
            verdict.final_below,
            format!(
                "max |u| = {}, max |grad u| = {} at R = {}",
                real(last.tail.max_u),
                real(last.tail.max_grad),
                real(last.radius)
            ),
        ),
    ];
    Ok(Experimented::new(checks, vec![table.finish()?]))
}

fn multiplicity(config: &RunConfig, out: &Path) -> Result<Experimented, RunError> {
    let m = &config.multiplicity;
    let grid = Grid::centered(config.grid.dim, m.radius, m.nodes)?;
    let instance = config.problem()?;
    let assembly = EnergyAssembly::new(instance, grid.clone())?;
    let basis = DiscreteBasis::new(&grid);
    let beta_config = BetaConfig { restarts: m.restarts, max_iter: m.max_iter, seed: config.seed };
    let betas = beta_profile(&basis, assembly.field(), assembly.potential(), &beta_config)?;
    let mut table = Table::create(out, "beta.csv", &["k", "beta_k", "lambda_k"])?;
    for (k, (b, l)) in betas.iter().zip(basis.eigenvalues()).enumerate() {
        table.row([(k + 1).to_string(), real(*b), real(*l)])?;
    }
    let mut files = vec![table.finish()?];
    let mut checks = vec![Check::new(
        "beta_k non-increasing",
        betas.windows(2).all(|w| w[1] <= w[0]),
        format!("beta_1 = {}, beta_n = {}", real(betas[0]), real(*betas.last().unwrap())),
    )];

    let mut rng = seeded(config.seed);
    let family = build_cone_family(&grid, m.cones)?;
    let a2 = verify_a2(&assembly, &family, &m.rho, m.samples, &mut rng)?;
    let mut table = Table::create(out, "a2.csv", &["rho", "max_phi"])?;
    for (rho, phi) in &a2.rows {
        table.row([real(*rho), real(*phi)])?;
    }
    files.push(table.finish()?);
    checks.push(Check::new(
        "A2: energy negative on a sphere of the cone span",
        a2.certified_rho.is_some(),
        match a2.certified_rho {
            Some(rho) => format!("rho = {} with {} cones", real(rho), family.len()),
            None => "no rho in the grid".into(),
        },
    ));

    let a1 = verify_a1_proxy(&basis, &assembly, &m.k, m.samples, &beta_config, &mut rng)?;
    let mut table = Table::create(out, "a1.csv", &["k", "beta_k", "gamma_k", "min_phi", "codim_plus", "dim_minus"])?;
    for row in &a1.rows {
        table.row([
            row.k.to_string(),
            real(row.beta),
            real(row.gamma),
            real(row.min_energy),
            row.codim_plus.to_string(),
            row.dim_minus.to_string(),
        ])?;
    }
    files.push(table.finish()?);
    checks.push(if a1.applicable {
        Check::new(
            "A1: sphere minima grow with k",
            a1.increasing && a1.rows.iter().all(|r| r.index_consistent),
            format!("sigma = {}, C(sigma) = {}", real(a1.sigma), real(a1.c_sigma)),
        )
    } else {
        Check::new("A1: sphere minima grow with k", true, "inapplicable: alpha+ does not exceed p-")
    });
    Ok(Experimented::new(checks, files))
}
