//! Command line driver: computes domain constants, adjudicates the
//! inequalities between them, and runs mesh-refinement studies.
//!
//! Exit codes: 0 when every check holds (or nothing was checked), 2 when
//! any check is violated, 3 on solver failures and usage errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use stvenant::functionals::constants_report;
use stvenant::report::{emit_report, render_report, ReportFormat, ReportPayload};
use stvenant::verify::{convergence_study, verify_inequalities, Verdict, VerificationResult};
use stvenant::{DomainSpec, SolverConfig};

#[derive(Parser)]
#[command(
    name = "stvenant",
    about = "Torsion functionals, rigidity and boundary-minimization constants on planar domains",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for the weak-residual sampling recorded in reports.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Gradient regularization forwarded to the nonlinear solvers.
    #[arg(long, global = true)]
    epsilon: Option<f64>,

    /// Relative objective-decrease stopping threshold.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Iteration cap for the nonlinear solvers.
    #[arg(long, global = true)]
    max_iter: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute every constant for one exponent and emit the report.
    Compute {
        /// Domain description file, JSON {"kind", "params", "dimension"}.
        #[arg(long)]
        domain: PathBuf,
        /// Exponent p >= 1 of the minimization norm.
        #[arg(long)]
        p: f64,
        /// Target mesh edge length.
        #[arg(long)]
        h: f64,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Check the inequalities between the constants for each exponent.
    Verify {
        #[arg(long)]
        domain: PathBuf,
        /// Exponents, comma separated or repeated.
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<f64>,
        #[arg(long)]
        h: f64,
        /// Per-check tolerance; defaults to 3x the refinement error estimate.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Optional machine-readable copy of the results.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Mesh-refinement study over a decreasing list of resolutions.
    Converge {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        p: f64,
        /// Resolutions, strictly decreasing, comma separated or repeated.
        #[arg(long, value_delimiter = ',', required = true)]
        h: Vec<f64>,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> ReportFormat {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

const EXIT_VIOLATED: u8 = 2;
const EXIT_FAILURE: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            eprintln!("{e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    };

    let mut cfg = SolverConfig::default();
    if let Some(eps) = cli.epsilon {
        cfg.epsilon = eps;
    }
    if let Some(tol) = cli.tol {
        cfg.tol = tol;
    }
    if let Some(max_iter) = cli.max_iter {
        cfg.max_iter = max_iter;
    }

    match run(cli.command, &cfg, cli.seed) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn run(command: Command, cfg: &SolverConfig, seed: u64) -> Result<ExitCode, String> {
    match command {
        Command::Compute {
            domain,
            p,
            h,
            out,
            format,
        } => {
            let spec = load_domain(&domain)?;
            let rep = constants_report(&spec, p, h, cfg, seed).map_err(|e| e.to_string())?;
            deliver(&ReportPayload::Constants(&rep), format.into(), out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            domain,
            p,
            h,
            tolerance,
            out,
            format,
        } => {
            let spec = load_domain(&domain)?;
            let results = verify_inequalities(&spec, &p, h, cfg, seed, tolerance);
            for r in &results {
                println!("{}", summary_line(r));
            }
            if let Some(path) = &out {
                emit_report(&ReportPayload::Results(&results), format.into(), path)
                    .map_err(|e| e.to_string())?;
            }
            if results.iter().any(|r| r.verdict == Verdict::Violated) {
                Ok(ExitCode::from(EXIT_VIOLATED))
            } else if results.iter().any(|r| r.note.is_some()) {
                Ok(ExitCode::from(EXIT_FAILURE))
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
        Command::Converge {
            domain,
            p,
            h,
            out,
            format,
        } => {
            let spec = load_domain(&domain)?;
            let study = convergence_study(&spec, p, &h, cfg).map_err(|e| e.to_string())?;
            deliver(&ReportPayload::Study(&study), format.into(), out.as_deref())?;
            if study.rows.iter().any(|row| row.flag != "ok") {
                Ok(ExitCode::from(EXIT_FAILURE))
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
    }
}

fn load_domain(path: &Path) -> Result<DomainSpec, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    DomainSpec::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn deliver(
    payload: &ReportPayload<'_, f64>,
    format: ReportFormat,
    out: Option<&Path>,
) -> Result<(), String> {
    match out {
        Some(path) => emit_report(payload, format, path).map_err(|e| e.to_string()),
        None => {
            print!("{}", render_report(payload, format));
            Ok(())
        }
    }
}

fn summary_line(r: &VerificationResult<f64>) -> String {
    let mut line = format!(
        "{:<13} p={:<5} lhs={:.6e} rhs={:.6e} margin={:+.3e} tol={:.3e}  {}",
        r.id.as_str(),
        r.p,
        r.lhs,
        r.rhs,
        r.margin,
        r.tolerance,
        r.verdict.as_str()
    );
    if let Some(note) = &r.note {
        line.push_str("  (");
        line.push_str(note);
        line.push(')');
    }
    line
}
