//! Command layer of the `lie-ensemble` binary. Every command reads its inputs
//! from files, writes JSON/CSV artifacts into `--out`, and prints its main
//! report to stdout.

pub mod files;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use lie_ensemble::covering::{cover_so_n, CoverMode, SpinCertificate};
use lie_ensemble::function_closure::{fn_lie_closure, saturation_report, FN_CLOSURE_TOL};
use lie_ensemble::larc::{check_classical, check_ensemble, monomial_certificates, ControllabilityReport};
use lie_ensemble::lie_core::{standard_basis, Algebra};
use lie_ensemble::par::Execution;
use lie_ensemble::simulator::{evaluate, integrate_ensemble_with, Recording};
use lie_ensemble::spec::{SpecFile, SystemSpec};
use lie_ensemble::synthesis::{
    compile_program, plan_so3_ensemble, three_step_steer_sen, CompileOptions, CompileStrategy, ControlSchedule,
};
use lie_ensemble::lie_core::EnsembleState;
use nalgebra::DMatrix;
use serde::Serialize;

use files::{parse_json, parse_rows, read_schedule, schedule_csv, trajectory_csv, write_json, write_text, TargetFile};

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or unreadable input: exit code 2.
    Usage(String),
    /// Module error: exit code 1.
    Module(lie_ensemble::Error),
    /// Output could not be written: exit code 1.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Module(e) => write!(f, "error: {e}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl From<lie_ensemble::Error> for CliError {
    fn from(e: lie_ensemble::Error) -> Self {
        CliError::Module(e)
    }
}

#[derive(Parser, Debug)]
#[command(name = "lie-ensemble", version, about = "Controllability, covers, synthesis and simulation for bilinear ensembles")]
pub struct Cli {
    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Tolerance: rank tolerance for probe, error budget for plan, endpoint bound for steer-sen.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GroupArg {
    So,
    Su2,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Full,
    Minimal,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum StrategyArg {
    Conjugation,
    Commutator,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Classical (or ensemble) controllability verdict; exit 0 controllable, 1 not.
    Check {
        spec: PathBuf,
        #[arg(long)]
        ensemble: bool,
    },
    /// Subalgebra cover by so(3)/su(2) triples.
    Cover {
        #[arg(long, value_enum, default_value = "so")]
        group: GroupArg,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, value_enum, default_value = "minimal")]
        mode: ModeArg,
    },
    /// Function Lie closure dimensions on a parameter grid.
    Probe {
        spec: PathBuf,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        /// JSON array of grid points (default: the spec's sample grid).
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Plans and compiles a broadcast schedule for an SO(3) ensemble target.
    Plan {
        spec: PathBuf,
        target: PathBuf,
        #[arg(long, default_value_t = 11)]
        degree: usize,
        #[arg(long, value_enum, default_value = "conjugation")]
        strategy: StrategyArg,
        #[arg(long, default_value_t = 256)]
        max_refinement: usize,
    },
    /// Integrates a schedule over the spec's grid, optionally evaluating against a target.
    Simulate {
        spec: PathBuf,
        schedule: PathBuf,
        #[arg(long)]
        target: Option<PathBuf>,
        /// Extra recorded samples per interval.
        #[arg(long, default_value_t = 0)]
        dense: usize,
    },
    /// Three-phase steering of an SE(n) system at the box midpoint.
    SteerSen {
        spec: PathBuf,
        /// Target translation, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        xf: Vec<f64>,
        /// Target rotation, rows separated by ';' (default: identity).
        #[arg(long = "Xf", allow_hyphen_values = true)]
        x_rot: Option<String>,
    },
}

/// Result of a command: the process exit code and the stdout report.
pub struct Outcome {
    pub code: i32,
    pub report: serde_json::Value,
}

#[derive(Serialize)]
struct Meta<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    inputs: Vec<String>,
    outputs: Vec<String>,
    threads: Option<usize>,
    tol: Option<f64>,
    unix_time: u64,
}

pub fn load_spec(path: &Path) -> Result<SystemSpec, CliError> {
    let text = files::read_text(path)?;
    let file = SpecFile::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    file.into_spec().map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("report serializes")
}

fn write_meta(cli: &Cli, name: &str, inputs: &[&Path], outputs: &[&str]) -> Result<(), CliError> {
    let meta = Meta {
        tool: "lie-ensemble",
        version: env!("CARGO_PKG_VERSION"),
        command: name,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
        threads: cli.threads,
        tol: cli.tol,
        unix_time: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    write_json(&cli.out.join(format!("{name}.meta.json")), &meta)
}

fn group_name(a: Algebra) -> String {
    match a {
        Algebra::So(n) => format!("SO({n})"),
        Algebra::Se(n) => format!("SE({n})"),
        Algebra::Su2 => "SU(2)".into(),
        Algebra::Generic(d) => format!("generic({d})"),
    }
}

#[derive(Serialize)]
struct CertificateOut {
    basis: String,
    exponents: Vec<u32>,
    depth: usize,
}

#[derive(Serialize)]
struct CheckOut {
    group: String,
    mode: &'static str,
    verdict: lie_ensemble::larc::Verdict,
    closure_dimension: usize,
    algebra_dimension: usize,
    obstruction: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    monomial_certificates: Option<Vec<CertificateOut>>,
}

fn check_out(spec: &SystemSpec, mode: &'static str, r: &ControllabilityReport) -> CheckOut {
    CheckOut {
        group: group_name(spec.algebra),
        mode,
        verdict: r.verdict,
        closure_dimension: r.closure_dimension,
        algebra_dimension: r.algebra_dimension,
        obstruction: r.obstruction.map(|o| o.tag()),
        monomial_certificates: None,
    }
}

#[derive(Serialize)]
struct TripleOut {
    labels: [String; 3],
    /// 1-based standard-basis positions.
    indices: [usize; 3],
    certificate: SpinCertificate,
}

#[derive(Serialize)]
struct CoverOut {
    group: String,
    mode: CoverMode,
    algebra_dimension: usize,
    triples: Vec<TripleOut>,
}

#[derive(Serialize)]
struct ProbeOut {
    group: String,
    grid: Vec<Vec<f64>>,
    tol: f64,
    #[serde(flatten)]
    closure: lie_ensemble::function_closure::FnClosureResult,
    saturation: lie_ensemble::function_closure::SaturationReport,
}

#[derive(Serialize)]
struct PlanOut {
    tol: f64,
    degree_bound: usize,
    predicted_error: f64,
    compile_error: f64,
    /// predicted + compile: the guaranteed bound on the ensemble error.
    error_bound: f64,
    refinement: usize,
    converged: bool,
    history: Vec<(usize, f64)>,
    intervals: usize,
    duration: f64,
    fits: Vec<lie_ensemble::synthesis::AxisFit>,
    gimbal_lock: Vec<usize>,
}

fn check_schedule_channels(spec: &SystemSpec, s: &ControlSchedule) -> Result<(), CliError> {
    if s.channels != spec.channel_count() {
        return Err(CliError::Usage(format!(
            "schedule has {} channels but the spec has {}",
            s.channels,
            spec.channel_count()
        )));
    }
    Ok(())
}

fn configure_threads(threads: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    configure_threads(cli.threads);
    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::Io(format!("cannot create {}: {e}", cli.out.display())))?;
    let out = |name: &str| cli.out.join(name);
    match &cli.command {
        Command::Check { spec: path, ensemble } => {
            let spec = load_spec(path)?;
            let (mode, report) = if *ensemble {
                ("ensemble", check_ensemble(&spec)?)
            } else {
                ("classical", check_classical(&spec)?)
            };
            let mut o = check_out(&spec, mode, &report);
            if *ensemble && matches!(spec.algebra, Algebra::So(_) | Algebra::Se(_)) {
                o.monomial_certificates = Some(
                    monomial_certificates(&spec)?
                        .into_iter()
                        .map(|c| CertificateOut { basis: c.label, exponents: c.exponents, depth: c.depth })
                        .collect(),
                );
            }
            write_json(&out("check.json"), &o)?;
            write_meta(cli, "check", &[path], &["check.json"])?;
            Ok(Outcome { code: if report.is_controllable() { 0 } else { 1 }, report: to_value(&o) })
        }
        Command::Cover { group, n, mode } => {
            let mode = match mode {
                ModeArg::Full => CoverMode::Full,
                ModeArg::Minimal => CoverMode::Minimal,
            };
            let o = match group {
                GroupArg::So => {
                    let c = cover_so_n(*n, mode)?;
                    CoverOut {
                        group: format!("so({n})"),
                        mode,
                        algebra_dimension: c.basis.len(),
                        triples: c
                            .triples
                            .iter()
                            .map(|t| TripleOut {
                                labels: c.labels(t),
                                indices: t.indices.map(|i| i + 1),
                                certificate: t.certificate.clone(),
                            })
                            .collect(),
                    }
                }
                GroupArg::Su2 => {
                    let basis = standard_basis(Algebra::Su2)?;
                    let e: Vec<_> = basis.iter().map(|b| b.element()).collect();
                    let cert = lie_ensemble::covering::spin_triple_check(&e[0], &e[1], &e[2], 1e-12)?;
                    CoverOut {
                        group: "su(2)".into(),
                        mode,
                        algebra_dimension: 3,
                        triples: vec![TripleOut {
                            labels: [basis[0].label.clone(), basis[1].label.clone(), basis[2].label.clone()],
                            indices: [1, 2, 3],
                            certificate: cert,
                        }],
                    }
                }
            };
            write_json(&out("cover.json"), &o)?;
            write_meta(cli, "cover", &[], &["cover.json"])?;
            Ok(Outcome { code: 0, report: to_value(&o) })
        }
        Command::Probe { spec: path, depth, grid } => {
            let spec = load_spec(path)?;
            let grid = match grid {
                Some(g) => parse_json::<Vec<Vec<f64>>>(g)?,
                None => spec.grid(),
            };
            let tol = cli.tol.unwrap_or(FN_CLOSURE_TOL);
            let r = fn_lie_closure(&spec, &grid, *depth, tol)?;
            let o = ProbeOut { group: group_name(spec.algebra), grid, tol, saturation: saturation_report(&r), closure: r };
            write_json(&out("probe.json"), &o)?;
            let mut inputs: Vec<&Path> = vec![path];
            if let Some(g) = grid_path(&cli.command) {
                inputs.push(g);
            }
            write_meta(cli, "probe", &inputs, &["probe.json"])?;
            Ok(Outcome { code: 0, report: to_value(&o) })
        }
        Command::Plan { spec: spec_path, target, degree, strategy, max_refinement } => {
            let spec = load_spec(spec_path)?;
            let grid = spec.grid();
            let tfile: TargetFile = parse_json(target)?;
            let targets = tfile.states(&spec, &grid)?;
            let tol = cli.tol.unwrap_or(0.05);
            let plan = plan_so3_ensemble(&spec, &grid, &targets, *degree, tol)?;
            let opts = CompileOptions {
                strategy: match strategy {
                    StrategyArg::Conjugation => CompileStrategy::Conjugation,
                    StrategyArg::Commutator => CompileStrategy::Commutator,
                },
                target_error: tol - plan.predicted_error,
                m_max: (*max_refinement).max(1),
                ..CompileOptions::default()
            };
            let compiled = compile_program(&spec, &grid, &plan.program, &opts, Execution::default())?;
            let o = PlanOut {
                tol,
                degree_bound: *degree,
                predicted_error: plan.predicted_error,
                compile_error: compiled.compile_error,
                error_bound: plan.predicted_error + compiled.compile_error,
                refinement: compiled.refinement,
                converged: compiled.converged,
                history: compiled.history.clone(),
                intervals: compiled.schedule.len(),
                duration: compiled.schedule.duration(),
                fits: plan.fits.clone(),
                gimbal_lock: plan.euler.gimbal_lock.clone(),
            };
            write_json(&out("program.json"), &plan.program)?;
            write_json(&out("schedule.json"), &compiled.schedule)?;
            write_text(&out("schedule.csv"), &schedule_csv(&compiled.schedule)?)?;
            write_json(&out("plan.json"), &o)?;
            write_meta(cli, "plan", &[spec_path, target], &["program.json", "schedule.json", "schedule.csv", "plan.json"])?;
            Ok(Outcome { code: if compiled.converged { 0 } else { 1 }, report: to_value(&o) })
        }
        Command::Simulate { spec: spec_path, schedule, target, dense } => {
            let spec = load_spec(spec_path)?;
            let sched = read_schedule(schedule)?;
            check_schedule_channels(&spec, &sched)?;
            let grid = spec.grid();
            let recording = if *dense > 0 { Recording::Dense(*dense) } else { Recording::Breakpoints };
            let traj = integrate_ensemble_with(&spec, &grid, &sched, recording, Execution::default())?;
            write_text(&out("trajectory.csv"), &trajectory_csv(&traj)?)?;
            let mut outputs = vec!["trajectory.csv"];
            let mut inputs: Vec<&Path> = vec![spec_path, schedule];
            let report = match target {
                Some(t) => {
                    let tfile: TargetFile = parse_json(t)?;
                    let states = tfile.states(&spec, &grid)?;
                    let rep = evaluate(&traj, &EnsembleState { grid: grid.clone(), states })?;
                    write_json(&out("evaluation.json"), &rep)?;
                    outputs.push("evaluation.json");
                    inputs.push(t);
                    to_value(&rep)
                }
                None => serde_json::json!({ "grid_points": grid.len(), "intervals": sched.len() }),
            };
            write_meta(cli, "simulate", &inputs, &outputs)?;
            Ok(Outcome { code: 0, report })
        }
        Command::SteerSen { spec: spec_path, xf, x_rot } => {
            let spec = load_spec(spec_path)?;
            let n = spec.n();
            let rot = match x_rot {
                Some(text) => {
                    let rows = parse_rows(text)?;
                    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                        return Err(CliError::Usage(format!("--Xf must be {n}x{n}")));
                    }
                    DMatrix::from_fn(n, n, |i, j| rows[i][j])
                }
                None => DMatrix::identity(n, n),
            };
            if xf.len() != n {
                return Err(CliError::Usage(format!("--xf needs {n} entries")));
            }
            let plan = three_step_steer_sen(&spec, xf, &rot)?;
            let tol = cli.tol.unwrap_or(1e-9);
            write_json(&out("steer.json"), &plan)?;
            write_json(&out("schedule.json"), &plan.schedule)?;
            write_text(&out("schedule.csv"), &schedule_csv(&plan.schedule)?)?;
            write_meta(cli, "steer-sen", &[spec_path], &["steer.json", "schedule.json", "schedule.csv"])?;
            let ok = plan.rotation_error <= tol && plan.translation_error <= tol;
            Ok(Outcome { code: if ok { 0 } else { 1 }, report: to_value(&plan) })
        }
    }
}

fn grid_path(c: &Command) -> Option<&Path> {
    match c {
        Command::Probe { grid: Some(g), .. } => Some(g),
        _ => None,
    }
}
