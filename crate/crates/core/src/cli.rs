//! Command-line front end: reproducible runs producing JSON/CSV with the
//! fully resolved configuration echoed into every output.
//!
//! Exit-code contract: 0 success / all-holds, 1 usage or configuration
//! error, 2 solver non-convergence, 3 at least one theorem check violated.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{
    bochner_refinement, verify_heat_lemma, AnalysisError, BochnerScenario, BochnerStudy, HeatCheck,
};
use crate::bounds::{
    check_buser1, check_buser_k, check_cheeger_inequality, check_higher_buser,
    check_lichnerowicz, check_quadratic_inequality, check_shigekawa, cheeger_25b_report,
    default_t_grid, BoundReport, Verdict, DEFAULT_TOL_ABS, DEFAULT_TOL_REL,
};
use crate::cheeger::{estimate_hk, CheegerError, CheegerOptions, CheegerReport};
use crate::eigensolve::{
    degenerate_groups, smallest_k, EigenError, SolverOptions, Spectrum, DEFAULT_GAP_TOL,
    DEFAULT_SEED,
};
use crate::geometry::{circle_grid, icosphere, torus_grid, DiscretizedManifold, GeometryError};
use crate::magnetic::{
    circle_constant, d_alpha_sup_norm, holonomy, is_gauge_trivial, sphere_axial, torus_constant,
    torus_uniform_flux, zero_potential, MagneticError, MagneticPotential, TRIVIALITY_TOL,
};
use crate::operator::{assemble, MagneticOperator, OperatorError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_VIOLATED: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Magnetic(#[from] MagneticError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("solver: {0}")]
    Solver(#[from] EigenError),
    #[error(transparent)]
    Cheeger(#[from] CheegerError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            // Non-convergence is a solver failure; malformed requests
            // (k > N, bad tolerance) are usage errors.
            CliError::Solver(EigenError::NonConvergence { .. }) => EXIT_SOLVER,
            _ => EXIT_USAGE,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "magspec", version, about = "Magnetic-Laplacian spectral laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Assemble the magnetic Laplacian and compute the smallest eigenpairs.
    Spectrum(RunArgs),
    /// Frustration index and magnetic Cheeger-constant estimates.
    Cheeger(RunArgs),
    /// Run one theorem checker; nonzero exit when a verdict is "violated".
    Verify(VerifyArgs),
    /// Sweep a potential parameter, emitting per-point results as CSV.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// key = value configuration file; command-line flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// circle | torus | sphere
    #[arg(long)]
    pub model: Option<String>,
    /// Circle length.
    #[arg(long = "L")]
    pub l: Option<f64>,
    /// Circle vertex count.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "L1")]
    pub l1: Option<f64>,
    #[arg(long = "L2")]
    pub l2: Option<f64>,
    #[arg(long)]
    pub n1: Option<usize>,
    #[arg(long)]
    pub n2: Option<usize>,
    /// Icosphere subdivision level.
    #[arg(long)]
    pub sub: Option<usize>,
    /// Constant potential strength along x (circle and torus).
    #[arg(long = "A", allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Constant potential strength along y (torus).
    #[arg(long = "B", allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// Uniform flux quanta (torus); overrides --A/--B when set.
    #[arg(long)]
    pub flux_m: Option<i64>,
    /// Axial potential strength (sphere).
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<f64>,
    /// Number of eigenpairs.
    #[arg(long)]
    pub k: Option<usize>,
    /// Residual tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dense_threshold: Option<usize>,
    /// Output file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// json | csv
    #[arg(long)]
    pub format: Option<String>,
    /// Omit the timestamp so outputs are byte-reproducible.
    #[arg(long)]
    pub no_timestamp: bool,
    /// Write the mesh in OFF format.
    #[arg(long)]
    pub export_off: Option<PathBuf>,
    /// Write the stiffness matrix in MatrixMarket format.
    #[arg(long)]
    pub export_mm: Option<PathBuf>,
    /// Write eigenvectors as a binary column file.
    #[arg(long)]
    pub export_evec: Option<PathBuf>,
    /// Write the winning Cheeger partition as vertex,part CSV.
    #[arg(long)]
    pub export_partition: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    /// 1.1 | 1.2 | 1.3 | 2.5 | 5.q | 6.2 | shigekawa | bochner | heat
    #[arg(long)]
    pub theorem: String,
    /// Explicit time grid for the heat-kernel checks.
    #[arg(long, value_delimiter = ',')]
    pub t_grid: Option<Vec<f64>>,
    /// Sample count for the heat-lemma check.
    #[arg(long)]
    pub samples: Option<usize>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    /// Parameter to sweep: A | B | s
    #[arg(long)]
    pub param: String,
    #[arg(long, allow_hyphen_values = true)]
    pub from: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub to: f64,
    #[arg(long)]
    pub steps: usize,
    /// Worker threads for sweep points.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Write a gnuplot script next to the CSV data.
    #[arg(long)]
    pub gnuplot: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

/// Fully resolved run configuration, echoed into every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub model: String,
    pub l: f64,
    pub n: usize,
    pub l1: f64,
    pub l2: f64,
    pub n1: usize,
    pub n2: usize,
    pub sub: usize,
    pub a: f64,
    pub b: f64,
    pub flux_m: Option<i64>,
    pub s: f64,
    pub k: usize,
    pub tol: f64,
    pub seed: u64,
    pub dense_threshold: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp_unix: Option<u64>,
}

fn parse_config_file(path: &Path) -> Result<HashMap<String, String>, CliError> {
    let text = fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "{}:{}: expected key = value",
                path.display(),
                lineno + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn from_file<T: std::str::FromStr>(
    map: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>, CliError> {
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|_| CliError::Config(format!("bad value for {key}: {raw}"))),
    }
}

impl RunArgs {
    /// Resolve flags over the config file over the built-in defaults.
    pub fn resolve(&self, default_model: &str) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => parse_config_file(path)?,
            None => HashMap::new(),
        };
        let known = [
            "model", "L", "n", "L1", "L2", "n1", "n2", "sub", "A", "B", "flux_m", "s", "k",
            "tol", "seed", "dense_threshold",
        ];
        for key in file.keys() {
            if !known.contains(&key.as_str()) {
                return Err(CliError::Config(format!("unknown config key: {key}")));
            }
        }
        let two_pi = 2.0 * std::f64::consts::PI;
        let model = self
            .model
            .clone()
            .or(file.get("model").cloned())
            .unwrap_or_else(|| default_model.to_string());
        if !["circle", "torus", "sphere"].contains(&model.as_str()) {
            return Err(CliError::Config(format!("unknown model: {model}")));
        }
        let config = RunConfig {
            model,
            l: self.l.or(from_file(&file, "L")?).unwrap_or(two_pi),
            n: self.n.or(from_file(&file, "n")?).unwrap_or(512),
            l1: self.l1.or(from_file(&file, "L1")?).unwrap_or(two_pi),
            l2: self.l2.or(from_file(&file, "L2")?).unwrap_or(two_pi),
            n1: self.n1.or(from_file(&file, "n1")?).unwrap_or(32),
            n2: self.n2.or(from_file(&file, "n2")?).unwrap_or(32),
            sub: self.sub.or(from_file(&file, "sub")?).unwrap_or(4),
            a: self.a.or(from_file(&file, "A")?).unwrap_or(0.0),
            b: self.b.or(from_file(&file, "B")?).unwrap_or(0.0),
            flux_m: self.flux_m.or(from_file(&file, "flux_m")?),
            s: self.s.or(from_file(&file, "s")?).unwrap_or(0.0),
            k: self.k.or(from_file(&file, "k")?).unwrap_or(6),
            tol: self.tol.or(from_file(&file, "tol")?).unwrap_or(1e-9),
            seed: self.seed.or(from_file(&file, "seed")?).unwrap_or(DEFAULT_SEED),
            dense_threshold: self
                .dense_threshold
                .or(from_file(&file, "dense_threshold")?)
                .unwrap_or(1500),
            timestamp_unix: if self.no_timestamp {
                None
            } else {
                Some(
                    std::time::SystemTime::now()
                        .duration_since(std::time::UNIX_EPOCH)
                        .map(|d| d.as_secs())
                        .unwrap_or(0),
                )
            },
        };
        Ok(config)
    }
}

impl RunConfig {
    pub fn build_model(&self) -> Result<DiscretizedManifold, CliError> {
        Ok(match self.model.as_str() {
            "circle" => circle_grid(self.l, self.n)?,
            "torus" => torus_grid(self.l1, self.l2, self.n1, self.n2)?,
            "sphere" => icosphere(self.sub)?,
            other => return Err(CliError::Config(format!("unknown model: {other}"))),
        })
    }

    pub fn build_potential(
        &self,
        m: &DiscretizedManifold,
    ) -> Result<MagneticPotential, CliError> {
        Ok(match self.model.as_str() {
            "circle" => circle_constant(m, self.a)?,
            "torus" => match self.flux_m {
                Some(q) => torus_uniform_flux(m, q)?,
                None => torus_constant(m, self.a, self.b)?,
            },
            "sphere" => sphere_axial(m, self.s)?,
            _ => zero_potential(m),
        })
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            seed: self.seed,
            dense_threshold: self.dense_threshold,
            ..Default::default()
        }
    }

    /// K >= 0 with ric >= -K, for the Buser-type hypotheses.
    pub fn buser_curvature(&self, m: &DiscretizedManifold) -> f64 {
        (-m.ricci_lower_bound).max(0.0)
    }
}

fn write_output(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run_exports(
    args: &RunArgs,
    m: &DiscretizedManifold,
    op: &MagneticOperator,
    spectrum: Option<&Spectrum>,
) -> Result<(), CliError> {
    if let Some(path) = &args.export_off {
        let mut buf = Vec::new();
        m.export_off(&mut buf)?;
        fs::write(path, buf)?;
    }
    if let Some(path) = &args.export_mm {
        let mut buf = Vec::new();
        op.export_matrix_market(&mut buf)?;
        fs::write(path, buf)?;
    }
    if let (Some(path), Some(s)) = (&args.export_evec, spectrum) {
        let mut buf = Vec::new();
        s.write_eigenvectors_binary(&mut buf)?;
        fs::write(path, buf)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SpectrumOutput<'a> {
    config: &'a RunConfig,
    model: String,
    potential: String,
    spectrum: serde_json::Value,
    degenerate_groups: Vec<(usize, usize)>,
}

pub fn run_spectrum(args: &RunArgs) -> Result<i32, CliError> {
    let config = args.resolve("circle")?;
    let m = config.build_model()?;
    let p = config.build_potential(&m)?;
    let op = assemble(&m, &p)?;
    let spectrum = smallest_k(&op, config.k, &config.solver_options())?;
    run_exports(args, &m, &op, Some(&spectrum))?;
    let format = args.format.as_deref().unwrap_or("json");
    let text = match format {
        "csv" => {
            let mut text = config_csv_header(&config);
            text.push_str("index,eigenvalue,residual\n");
            for (i, (l, r)) in spectrum.eigenvalues.iter().zip(&spectrum.residuals).enumerate() {
                text.push_str(&format!("{i},{l:.17e},{r:.17e}\n"));
            }
            text
        }
        "json" => {
            let out = SpectrumOutput {
                config: &config,
                model: m.descriptor(),
                potential: p.descriptor.clone(),
                spectrum: spectrum.to_json(),
                degenerate_groups: degenerate_groups(&spectrum, DEFAULT_GAP_TOL),
            };
            serde_json::to_string_pretty(&out).expect("serializable") + "\n"
        }
        other => return Err(CliError::Config(format!("unknown format: {other}"))),
    };
    write_output(&args.out, &text)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CheegerOutput<'a> {
    config: &'a RunConfig,
    model: String,
    potential: String,
    gauge_trivial: bool,
    reports: Vec<CheegerReport>,
}

pub fn run_cheeger(args: &RunArgs) -> Result<i32, CliError> {
    let config = args.resolve("circle")?;
    let m = config.build_model()?;
    let p = config.build_potential(&m)?;
    let op = assemble(&m, &p)?;
    let k = config.k.clamp(1, 4);
    let spectrum = smallest_k(&op, k, &config.solver_options())?;
    let copts = CheegerOptions { seed: config.seed, ..Default::default() };
    let mut reports = Vec::new();
    for kk in 1..=k {
        reports.push(estimate_hk(&m, &p, &spectrum, kk, &copts)?);
    }
    run_exports(args, &m, &op, Some(&spectrum))?;
    if let Some(path) = &args.export_partition {
        let winner = reports.last().expect("at least one report");
        let mut buf = Vec::new();
        crate::cheeger::write_partition_csv(&mut buf, m.vertex_count(), &winner.partition)?;
        fs::write(path, buf)?;
    }
    let out = CheegerOutput {
        config: &config,
        model: m.descriptor(),
        potential: p.descriptor.clone(),
        gauge_trivial: is_gauge_trivial(&m, &p, TRIVIALITY_TOL)?,
        reports,
    };
    let text = serde_json::to_string_pretty(&out).expect("serializable") + "\n";
    write_output(&args.out, &text)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
#[serde(untagged)]
enum VerifyPayload {
    Bounds(Vec<BoundReport>),
    Bochner(BochnerStudy),
    Heat(HeatCheck),
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    config: &'a RunConfig,
    theorem: String,
    model: String,
    potential: String,
    holds: bool,
    payload: VerifyPayload,
}

fn any_violated(reports: &[BoundReport]) -> bool {
    reports.iter().any(|r| r.verdict == Verdict::Violated)
}

pub fn run_verify(args: &VerifyArgs) -> Result<i32, CliError> {
    let theorem = args.theorem.as_str();
    let default_model = match theorem {
        "1.1" => "sphere",
        "heat" | "bochner" => "circle",
        _ => "circle",
    };
    let mut config = args.run.resolve(default_model)?;
    // Theorem-specific resolution defaults for fields the user left alone.
    if args.run.config.is_none() {
        let (def_n, def_n1, def_n2) = match theorem {
            "heat" => (200, 14, 14),
            "bochner" => (128, 16, 16),
            _ => (config.n, config.n1, config.n2),
        };
        if args.run.n.is_none() {
            config.n = def_n;
        }
        if args.run.n1.is_none() {
            config.n1 = def_n1;
        }
        if args.run.n2.is_none() {
            config.n2 = def_n2;
        }
        if theorem == "1.1" && args.run.s.is_none() {
            config.s = 0.1;
        }
    }

    let m = config.build_model()?;
    let p = config.build_potential(&m)?;
    let desc = format!("{} / {}", m.descriptor(), p.descriptor);
    let n_dim = m.dimension;
    let k_low = m.ricci_lower_bound;
    let buser_k_bound = config.buser_curvature(&m);

    let payload: VerifyPayload = match theorem {
        "bochner" => {
            let scenario = match config.model.as_str() {
                "circle" => BochnerScenario::CircleConstant {
                    l: config.l,
                    a: if config.a == 0.0 { 0.5 } else { config.a },
                    n: config.n,
                },
                "torus" => match config.flux_m {
                    Some(q) => BochnerScenario::TorusFlux {
                        l1: config.l1,
                        l2: config.l2,
                        quanta: q,
                        n1: config.n1,
                        n2: config.n2,
                    },
                    None => BochnerScenario::TorusConstant {
                        l1: config.l1,
                        l2: config.l2,
                        a: config.a,
                        b: config.b,
                        n1: config.n1,
                        n2: config.n2,
                    },
                },
                _ => return Err(CliError::Config("bochner needs a circle or torus".into())),
            };
            VerifyPayload::Bochner(bochner_refinement(&scenario, config.seed)?)
        }
        "heat" => {
            let t_grid = args.t_grid.clone().unwrap_or_else(|| vec![0.1, 1.0, 10.0]);
            let samples = args.samples.unwrap_or(32);
            VerifyPayload::Heat(verify_heat_lemma(
                &m,
                &p,
                buser_k_bound,
                &t_grid,
                samples,
                config.seed,
            )?)
        }
        _ => {
            let op = assemble(&m, &p)?;
            let k = config.k.clamp(1, op.size());
            let spectrum = smallest_k(&op, k.max(2), &config.solver_options())?;
            let dsup = d_alpha_sup_norm(&m, &p)?;
            let copts = CheegerOptions { seed: config.seed, ..Default::default() };
            let reports = match theorem {
                "1.1" => vec![check_lichnerowicz(
                    &spectrum.eigenvalues,
                    k_low,
                    dsup,
                    n_dim,
                    DEFAULT_TOL_REL,
                    &desc,
                )],
                "5.q" => vec![check_quadratic_inequality(
                    spectrum.eigenvalues[0],
                    k_low.max(0.0),
                    dsup,
                    n_dim,
                    1e-9,
                    &desc,
                )],
                "1.2" => {
                    let t_grid =
                        args.t_grid.clone().unwrap_or_else(|| default_t_grid(buser_k_bound, 25));
                    let mut reports = Vec::new();
                    for kk in 1..=k {
                        let ch = estimate_hk(&m, &p, &spectrum, kk, &copts)?;
                        reports.push(check_buser_k(
                            spectrum.eigenvalues[kk - 1],
                            ch.h_estimate,
                            buser_k_bound,
                            kk,
                            dsup,
                            &t_grid,
                            DEFAULT_TOL_ABS,
                            &desc,
                        ));
                    }
                    reports
                }
                "1.3" => {
                    let ch = estimate_hk(&m, &p, &spectrum, 1, &copts)?;
                    vec![check_buser1(
                        spectrum.eigenvalues[0],
                        ch.h_estimate,
                        buser_k_bound,
                        dsup,
                        DEFAULT_TOL_REL,
                        &desc,
                    )]
                }
                "6.2" => {
                    let mut reports = Vec::new();
                    for kk in 1..=k {
                        let ch = estimate_hk(&m, &p, &spectrum, kk, &copts)?;
                        reports.push(check_higher_buser(
                            spectrum.eigenvalues[kk - 1],
                            ch.h_estimate,
                            buser_k_bound,
                            kk,
                            dsup,
                            DEFAULT_TOL_REL,
                            &desc,
                        ));
                    }
                    reports
                }
                "2.5" => {
                    let ch = estimate_hk(&m, &p, &spectrum, 1, &copts)?;
                    let near_exact = config.model == "circle";
                    let mut reports = vec![check_cheeger_inequality(
                        spectrum.eigenvalues[0],
                        ch.h_estimate,
                        near_exact,
                        0.05,
                        &desc,
                    )];
                    let chk = estimate_hk(&m, &p, &spectrum, k, &copts)?;
                    reports.push(cheeger_25b_report(
                        spectrum.eigenvalues[k - 1],
                        chk.h_estimate,
                        k,
                        &desc,
                    ));
                    reports
                }
                "shigekawa" => {
                    let trivial = is_gauge_trivial(&m, &p, TRIVIALITY_TOL)?;
                    vec![check_shigekawa(trivial, spectrum.eigenvalues[0], 1e-6, &desc)]
                }
                other => {
                    return Err(CliError::Config(format!("unknown theorem: {other}")))
                }
            };
            VerifyPayload::Bounds(reports)
        }
    };

    let holds = match &payload {
        VerifyPayload::Bounds(reports) => !any_violated(reports),
        VerifyPayload::Bochner(study) => (1.5..=2.5).contains(&study.order),
        VerifyPayload::Heat(check) => check.holds,
    };
    let text = match (args.run.format.as_deref(), &payload) {
        (Some("csv"), VerifyPayload::Bochner(study)) => {
            // refinement-study rows: resolution, residual, empirical order
            let mut text = config_csv_header(&config);
            text.push_str("h,residual,order\n");
            text.push_str(&format!(
                "{:.17e},{:.17e},\n",
                study.coarse.resolution, study.coarse.residual
            ));
            text.push_str(&format!(
                "{:.17e},{:.17e},{:.6}\n",
                study.fine.resolution, study.fine.residual, study.order
            ));
            text
        }
        (Some("csv"), _) => {
            return Err(CliError::Config(
                "csv output is only available for --theorem bochner".into(),
            ))
        }
        _ => {
            let out = VerifyOutput {
                config: &config,
                theorem: theorem.to_string(),
                model: m.descriptor(),
                potential: p.descriptor.clone(),
                holds,
                payload,
            };
            serde_json::to_string_pretty(&out).expect("serializable") + "\n"
        }
    };
    write_output(&args.run.out, &text)?;
    Ok(if holds { EXIT_OK } else { EXIT_VIOLATED })
}

fn config_csv_header(config: &RunConfig) -> String {
    let value = serde_json::to_value(config).expect("serializable");
    let mut text = String::new();
    if let serde_json::Value::Object(map) = value {
        for (k, v) in map {
            text.push_str(&format!("# {k} = {v}\n"));
        }
    }
    text
}

#[derive(Debug)]
struct SweepPoint {
    index: usize,
    value: f64,
    lambda: Vec<f64>,
    h: Vec<f64>,
    verdicts: Vec<(String, Verdict)>,
}

fn sweep_point(
    config: &RunConfig,
    args: &SweepArgs,
    index: usize,
    value: f64,
) -> Result<SweepPoint, CliError> {
    let mut point_config = config.clone();
    match args.param.as_str() {
        "A" => point_config.a = value,
        "B" => point_config.b = value,
        "s" => point_config.s = value,
        other => return Err(CliError::Config(format!("unknown sweep parameter: {other}"))),
    }
    let m = point_config.build_model()?;
    let p = point_config.build_potential(&m)?;
    let op = assemble(&m, &p)?;
    let k = point_config.k.clamp(1, 4);
    let spectrum = smallest_k(&op, k.max(2), &point_config.solver_options())?;
    let dsup = d_alpha_sup_norm(&m, &p)?;
    let k_neg = point_config.buser_curvature(&m);
    let desc = format!("{} / {}", m.descriptor(), p.descriptor);
    let copts = CheegerOptions { seed: point_config.seed, ..Default::default() };
    let t_grid = default_t_grid(k_neg, 25);

    let mut h = Vec::with_capacity(k);
    let mut verdicts = Vec::new();
    for kk in 1..=k {
        let ch = estimate_hk(&m, &p, &spectrum, kk, &copts)?;
        h.push(ch.h_estimate);
        let bk = check_buser_k(
            spectrum.eigenvalues[kk - 1],
            ch.h_estimate,
            k_neg,
            kk,
            dsup,
            &t_grid,
            DEFAULT_TOL_ABS,
            &desc,
        );
        verdicts.push((format!("buser_k{kk}"), bk.verdict));
        let hb = check_higher_buser(
            spectrum.eigenvalues[kk - 1],
            ch.h_estimate,
            k_neg,
            kk,
            dsup,
            DEFAULT_TOL_REL,
            &desc,
        );
        verdicts.push((format!("higher_buser_k{kk}"), hb.verdict));
        if kk == 1 {
            let b1 = check_buser1(
                spectrum.eigenvalues[0],
                ch.h_estimate,
                k_neg,
                dsup,
                DEFAULT_TOL_REL,
                &desc,
            );
            verdicts.push(("buser1".into(), b1.verdict));
            let c25 = check_cheeger_inequality(
                spectrum.eigenvalues[0],
                ch.h_estimate,
                point_config.model == "circle",
                0.05,
                &desc,
            );
            verdicts.push(("cheeger25a".into(), c25.verdict));
        }
    }
    Ok(SweepPoint {
        index,
        value,
        lambda: spectrum.eigenvalues[..k].to_vec(),
        h,
        verdicts,
    })
}

pub fn run_sweep(args: &SweepArgs) -> Result<i32, CliError> {
    if args.steps < 2 {
        return Err(CliError::Config("sweep needs at least 2 steps".into()));
    }
    let config = args.run.resolve("circle")?;
    let values: Vec<f64> = (0..args.steps)
        .map(|i| args.from + (args.to - args.from) * i as f64 / (args.steps - 1) as f64)
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<SweepPoint, CliError>> = pool.install(|| {
        values
            .par_iter()
            .enumerate()
            .map(|(i, &v)| sweep_point(&config, args, i, v))
            .collect()
    });
    let mut points = Vec::with_capacity(results.len());
    for r in results {
        points.push(r?);
    }

    let k = points[0].lambda.len();
    let mut text = config_csv_header(&config);
    text.push_str(&format!("# sweep param = {}\n", args.param));
    let mut header = vec!["index".to_string(), args.param.clone()];
    header.extend((1..=k).map(|i| format!("lambda_{i}")));
    header.extend((1..=k).map(|i| format!("h_{i}")));
    header.extend(points[0].verdicts.iter().map(|(name, _)| name.clone()));
    text.push_str(&header.join(","));
    text.push('\n');
    let mut any_violation = false;
    for pt in &points {
        let mut row = vec![pt.index.to_string(), format!("{:.17e}", pt.value)];
        row.extend(pt.lambda.iter().map(|l| format!("{l:.17e}")));
        row.extend(pt.h.iter().map(|h| format!("{h:.17e}")));
        for (_, v) in &pt.verdicts {
            any_violation |= *v == Verdict::Violated;
            row.push(
                match v {
                    Verdict::Holds => "holds",
                    Verdict::Violated => "violated",
                    Verdict::NotApplicable => "not-applicable",
                }
                .to_string(),
            );
        }
        text.push_str(&row.join(","));
        text.push('\n');
    }
    write_output(&args.run.out, &text)?;

    if let Some(path) = &args.gnuplot {
        let data = args
            .run
            .out
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "sweep.csv".to_string());
        let script = format!(
            "set datafile separator ','\n\
             set key autotitle columnhead\n\
             set xlabel '{param}'\n\
             plot '{data}' using 2:3 with lines, '' using 2:{hcol} with lines\n",
            param = args.param,
            hcol = 2 + k + 1,
        );
        fs::write(path, script)?;
    }
    Ok(if any_violation { EXIT_VIOLATED } else { EXIT_OK })
}

pub fn run(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Spectrum(args) => run_spectrum(args),
        Command::Cheeger(args) => run_cheeger(args),
        Command::Verify(args) => run_verify(args),
        Command::Sweep(args) => run_sweep(args),
    }
}

/// Circle holonomy sanity hook used by tests; the sweep relies on the same
/// builder path.
pub fn circle_holonomy(l: f64, n: usize, a: f64) -> Result<f64, CliError> {
    let m = circle_grid(l, n)?;
    let p = circle_constant(&m, a)?;
    Ok(holonomy(&m, &p, &m.homology_generators[0])?)
}
