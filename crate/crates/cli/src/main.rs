use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use elab_core::barriers::CauchyProblem;
use elab_core::reachability::ReachCloud;
use elab_core::report::{Status, VerificationReport};

mod commands;
mod config;
mod plot;

use config::RunConfig;
use plot::Plane;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}: {1}")]
    Io(String, #[source] io::Error),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] elab_core::Error),
}

#[derive(Parser)]
#[command(name = "elab", version, about = "Numerical lab for Engel sub-Lorentzian structures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Growth vector, normal-form constraints and the Hamiltonian-type probe.
    CheckStructure {
        #[arg(long)]
        config: PathBuf,
        /// Report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Every identity of the flat frame.
    VerifyFlat {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Samples (or re-reads) a reachable cloud and audits it.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_cloud: Option<PathBuf>,
        #[arg(long)]
        out_report: Option<PathBuf>,
        /// Audit an existing cloud CSV instead of sampling.
        #[arg(long)]
        in_cloud: Option<PathBuf>,
    },
    /// Characteristic solution of one Cauchy problem on a grid.
    SolveCauchy {
        #[arg(long)]
        config: PathBuf,
        /// ca1 .. ca6
        #[arg(long)]
        problem: CauchyProblem,
        /// Points per axis.
        #[arg(long, default_value_t = 5)]
        grid: usize,
        /// Grid values as CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        out_report: Option<PathBuf>,
    },
    /// SVG scatter of a cloud CSV with reference curves.
    Plot {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long, value_enum)]
        plane: Plane,
        #[arg(long)]
        out: PathBuf,
        /// Slab half-width for the sliced planes.
        #[arg(long)]
        slice: Option<f64>,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Io(path.display().to_string(), e))
}

fn emit_report(report: &VerificationReport, out: Option<&Path>) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(report)?;
    match out {
        Some(path) => {
            let mut f = create(path)?;
            writeln!(f, "{json}").map_err(|e| CliError::Io(path.display().to_string(), e))?;
        }
        None => println!("{json}"),
    }
    for c in &report.checks {
        let status = match c.status {
            Status::Pass => "PASS",
            Status::Warn => "WARN",
            Status::Fail => "FAIL",
        };
        eprintln!("{status} {} (worst {:.3e})", c.name, c.worst_residual);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let report = match cli.command {
        Command::CheckStructure { config, out } => {
            let report = commands::check_structure(&RunConfig::load(&config)?)?;
            emit_report(&report, out.as_deref())?;
            report
        }
        Command::VerifyFlat { config, out } => {
            let report = commands::verify_flat(&RunConfig::load(&config)?)?;
            emit_report(&report, out.as_deref())?;
            report
        }
        Command::Sample { config, out_cloud, out_report, in_cloud } => {
            let cfg = RunConfig::load(&config)?;
            let run = commands::sample(&cfg, in_cloud.as_deref())?;
            if let Some(path) = &out_cloud {
                run.cloud.write_csv(create(path)?)?;
            }
            emit_report(&run.report, out_report.as_deref())?;
            run.report
        }
        Command::SolveCauchy { config, problem, grid, out, out_report } => {
            let cfg = RunConfig::load(&config)?;
            if grid == 0 {
                return Err(CliError::Config("grid needs at least 1 point per axis".into()));
            }
            let report = match &out {
                Some(path) => commands::solve_cauchy(&cfg, problem, grid, create(path)?)?,
                None => commands::solve_cauchy(&cfg, problem, grid, io::stdout().lock())?,
            };
            match &out_report {
                Some(path) => emit_report(&report, Some(path))?,
                None => {
                    let json = serde_json::to_string_pretty(&report)?;
                    eprintln!("{json}");
                }
            }
            report
        }
        Command::Plot { cloud, plane, out, slice } => {
            if let Some(s) = slice {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(CliError::Config("slice must be positive".into()));
                }
            }
            let file = File::open(&cloud).map_err(|e| CliError::Io(cloud.display().to_string(), e))?;
            let c = ReachCloud::read_csv(file, 0, "imported")?;
            let svg = plot::render(&c, plane, slice);
            let mut f = create(&out)?;
            f.write_all(svg.as_bytes()).map_err(|e| CliError::Io(out.display().to_string(), e))?;
            return Ok(true);
        }
    };
    Ok(!report.has_failures())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
