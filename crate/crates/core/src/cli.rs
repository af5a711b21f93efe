//! The `dirac` command line.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 when the
//! kernel condition fails (no valid `D` exists), 3 on malformed input.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dirac::DiracSystem;
use crate::dynamics;
use crate::error::DiracError;
use crate::problem::{InputError, Problem};
use crate::verify::{self, VerificationReport, VerifyConfig, CHECK_KERNEL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_OBSTRUCTED: i32 = 2;
pub const EXIT_BAD_INPUT: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "dirac",
    version,
    about = "Build and verify Dirac brackets for constrained Hamiltonian systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a problem file and report its constraint matrix.
    Validate { file: PathBuf },
    /// Run every verification check and print the report as JSON.
    Check {
        file: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write the problem with resolved settings and the assembled matrices.
    Build {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Integrate the Hamiltonian flow with RK4 and write a CSV trajectory.
    Simulate {
        file: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
        /// Initial state as comma-separated values; defaults to `initial`
        /// in the problem file.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        z0: Option<Vec<f64>>,
    },
}

/// Command-line values take precedence over the problem file.
#[derive(Debug, Args)]
struct Overrides {
    /// Number of sample points [default: 100]
    #[arg(long)]
    points: Option<usize>,
    /// Sampling seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Jacobi residual tolerance [default: 1e-6]
    #[arg(long)]
    tol_jacobi: Option<f64>,
    /// Casimir residual tolerance [default: 1e-10]
    #[arg(long)]
    tol_casimir: Option<f64>,
    /// Finite-difference step [default: 1e-5]
    #[arg(long)]
    step: Option<f64>,
}

impl Overrides {
    fn apply(&self, mut cfg: VerifyConfig) -> Result<VerifyConfig, InputError> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x.is_finite() && x > 0.0) => Err(InputError {
                location: format!("--{name}"),
                message: format!("must be positive and finite, got {x}"),
            }),
            _ => Ok(v),
        };
        if self.points == Some(0) {
            return Err(InputError {
                location: "--points".into(),
                message: "must be positive".into(),
            });
        }
        let t = &mut cfg.tolerances;
        if let Some(v) = positive("tol-jacobi", self.tol_jacobi)? {
            t.jacobi = v;
        }
        if let Some(v) = positive("tol-casimir", self.tol_casimir)? {
            t.casimir = v;
        }
        if let Some(v) = positive("step", self.step)? {
            t.step = v;
        }
        if let Some(p) = self.points {
            cfg.points = p;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

/// Exit code implied by a report.
pub fn exit_code(report: &VerificationReport) -> i32 {
    if report.obstructed() {
        EXIT_OBSTRUCTED
    } else if report.all_passed() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_BAD_INPUT } else { EXIT_OK };
        }
    };
    match execute(cli.command, out, err) {
        Ok(code) => code,
        Err(Failure::Input(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_BAD_INPUT
        }
        Err(Failure::Obstruction { point, witness }) => {
            let _ = print_obstruction(err, &point, &witness);
            EXIT_OBSTRUCTED
        }
        Err(Failure::Other(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_CHECK_FAILED
        }
    }
}

enum Failure {
    Input(InputError),
    Obstruction { point: Vec<f64>, witness: Vec<f64> },
    Other(String),
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::Input(e)
    }
}

impl From<DiracError> for Failure {
    fn from(e: DiracError) -> Self {
        match e {
            DiracError::Obstruction { point, witness, .. } => Failure::Obstruction { point, witness },
            other => Failure::Other(other.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Other(format!("{}: {e}", path.display()))
}

fn print_obstruction(err: &mut dyn Write, point: &[f64], witness: &[f64]) -> std::io::Result<()> {
    writeln!(err, "kernel condition violated at z = {point:?}")?;
    writeln!(err, "witness v in Ker C with J Q^T v != 0: {witness:?}")
}

fn load_system(path: &Path) -> Result<(Problem, DiracSystem), Failure> {
    let problem = Problem::load(path)?;
    let sys = problem.dirac_system().map_err(|e| InputError {
        location: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok((problem, sys))
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Other(e.to_string()))?;
    writeln!(out, "{text}").map_err(|e| Failure::Other(e.to_string()))
}

#[derive(Serialize)]
struct Validation<'a> {
    variables: usize,
    constraints: usize,
    #[serde(rename = "C")]
    c: Vec<Vec<String>>,
    d_provenance: &'a str,
    relaxed: bool,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct SimulationSummary {
    steps: usize,
    final_time: f64,
    final_state: Vec<f64>,
    max_constraint_drift: f64,
    max_energy_drift: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostic: Option<String>,
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    match command {
        Command::Validate { file } => {
            let (problem, sys) = load_system(&file)?;
            let summary = Validation {
                variables: problem.space().dim(),
                constraints: problem.system.num_constraints(),
                c: problem.system.c().entries().to_strings(problem.space().names()),
                d_provenance: sys.d().provenance().as_str(),
                relaxed: sys.is_relaxed(),
                warnings: problem.system.constraints().dimension_warning().into_iter().collect(),
            };
            write_json(out, &summary)?;
            Ok(EXIT_OK)
        }
        Command::Check { file, overrides } => {
            let (problem, sys) = load_system(&file)?;
            let cfg = overrides.apply(problem.verify_config())?;
            let report = verify::verify(&sys, &cfg)?;
            write_json(out, &report)?;
            let code = exit_code(&report);
            if code == EXIT_OBSTRUCTED {
                let w = report
                    .check(CHECK_KERNEL)
                    .and_then(|c| c.witness.clone())
                    .unwrap_or_default();
                let _ = print_obstruction(err, &w.point.unwrap_or_default(), &w.vector.unwrap_or_default());
            }
            Ok(code)
        }
        Command::Build {
            file,
            out: path,
            overrides,
        } => {
            let (problem, sys) = load_system(&file)?;
            let cfg = overrides.apply(problem.verify_config())?;
            let normalized = problem.normalized(&sys, &cfg);
            let mut w = BufWriter::new(File::create(&path).map_err(|e| io_failure(&path, e))?);
            write_json(&mut w, &normalized)?;
            w.flush().map_err(|e| io_failure(&path, e))?;
            Ok(EXIT_OK)
        }
        Command::Simulate {
            file,
            dt,
            steps,
            out: path,
            z0,
        } => {
            let (problem, sys) = load_system(&file)?;
            let h = problem.hamiltonian.clone().ok_or_else(|| InputError {
                location: "hamiltonian".into(),
                message: "simulate needs a Hamiltonian".into(),
            })?;
            let z0 = z0.or_else(|| problem.file.initial.clone()).ok_or_else(|| InputError {
                location: "initial".into(),
                message: "give an initial state with --z0 or in the problem file".into(),
            })?;
            let bad = |location: &str, message: String| {
                Failure::Input(InputError {
                    location: location.into(),
                    message,
                })
            };
            if z0.len() != problem.space().dim() || z0.iter().any(|v| !v.is_finite()) {
                return Err(bad("--z0", format!("need {} finite values", problem.space().dim())));
            }
            if !(dt.is_finite() && dt > 0.0) {
                return Err(bad("--dt", format!("must be positive and finite, got {dt}")));
            }
            let traj = dynamics::integrate(&sys, &h, &z0, dt, steps)?;
            let mut w = BufWriter::new(File::create(&path).map_err(|e| io_failure(&path, e))?);
            traj.write_csv(problem.space().names(), &mut w)
                .and_then(|_| w.flush())
                .map_err(|e| io_failure(&path, e))?;
            let summary = SimulationSummary {
                steps: traj.len() - 1,
                final_time: *traj.times.last().unwrap_or(&0.0),
                final_state: traj.final_state().to_vec(),
                max_constraint_drift: traj.max_constraint_drift(),
                max_energy_drift: traj.max_energy_drift(),
                diagnostic: traj.diagnostic.clone(),
            };
            write_json(out, &summary)?;
            if let Some(d) = &traj.diagnostic {
                let _ = writeln!(err, "integration stopped early: {d}");
                return Ok(EXIT_CHECK_FAILED);
            }
            Ok(EXIT_OK)
        }
    }
}
