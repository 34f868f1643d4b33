//! `extrad`: constants, certificates and solutions for radial elliptic
//! systems on exterior domains.
//!
//! Exit codes: 0 success, 1 schema or admissibility error, 2 solver
//! non-convergence, 3 certification failure under `--strict`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use extrad_core::commands::{self, DEFAULT_GRID};
use extrad_core::{CommandOutput, RunConfig, Status};

#[derive(Parser)]
#[command(name = "extrad", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Flags {
    /// Uniform solver nodes before breakpoints are inserted.
    #[arg(long, global = true, default_value_t = DEFAULT_GRID)]
    grid: usize,
    /// Sub-panels per breakpoint-delimited quadrature segment.
    #[arg(long, global = true)]
    panels: Option<usize>,
    /// Gauss-Legendre order per panel.
    #[arg(long, global = true)]
    order: Option<usize>,
    /// Points per axis of box scans.
    #[arg(long, global = true)]
    scan: Option<usize>,
    /// Solver residual tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Exit with code 3 when a certificate fails.
    #[arg(long, global = true)]
    strict: bool,
    /// Certify with overridden constants only, without the oracle shadow pass.
    #[arg(long, global = true, conflicts_with = "no_overrides")]
    overrides_only: bool,
    /// Ignore the overrides block and certify with oracle constants.
    #[arg(long, global = true)]
    no_overrides: bool,
    /// Directory for reports and profiles; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Kernel, cone and quadrature constants.
    Constants { file: PathBuf },
    /// Index conditions, multiplicity ladder and non-existence tests.
    Certify { file: PathBuf },
    /// Fixed-point solutions with cone and localization checks.
    Solve { file: PathBuf },
    /// Change of variables between the radial and unit-interval problems.
    Transform { file: PathBuf },
    /// Plain-text summary of JSON reports.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

enum Failure {
    Input(anyhow::Error),
}

fn run_config(f: &Flags) -> RunConfig {
    RunConfig {
        grid: f.grid,
        panels: f.panels,
        order: f.order,
        scan: f.scan,
        tol: f.tol,
        overrides_only: f.overrides_only,
        no_overrides: f.no_overrides,
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "problem".into())
}

fn emit(name: &str, input: &Path, out: &CommandOutput, dir: Option<&Path>) -> Result<()> {
    let json = out.json();
    match dir {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let base = stem(input);
            let path = dir.join(format!("{base}.{name}.json"));
            fs::write(&path, &json).with_context(|| format!("writing {}", path.display()))?;
            for (file, contents) in &out.files {
                let path = dir.join(format!("{base}.{file}"));
                fs::write(&path, contents)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
        None => print!("{json}"),
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<Status, Failure> {
    let run = run_config(&cli.flags);
    let dir = cli.flags.out.as_deref();
    let (name, file, f): (&str, &PathBuf, fn(&str, &RunConfig) -> _) = match &cli.command {
        Command::Constants { file } => ("constants", file, commands::cmd_constants),
        Command::Certify { file } => ("certify", file, commands::cmd_certify),
        Command::Solve { file } => ("solve", file, commands::cmd_solve),
        Command::Transform { file } => ("transform", file, commands::cmd_transform),
        Command::Report { reports } => {
            let mut loaded = Vec::new();
            for path in reports {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))
                    .map_err(Failure::Input)?;
                loaded.push((path.display().to_string(), text));
            }
            let text = commands::cmd_report(&loaded).map_err(|e| Failure::Input(e.into()))?;
            match dir {
                Some(dir) => {
                    fs::create_dir_all(dir)
                        .and_then(|_| fs::write(dir.join("report.txt"), &text))
                        .context("writing report.txt")
                        .map_err(Failure::Input)?;
                }
                None => print!("{text}"),
            }
            return Ok(Status::Ok);
        }
    };
    let text = fs::read_to_string(file)
        .with_context(|| format!("reading {}", file.display()))
        .map_err(Failure::Input)?;
    let out = f(&text, &run).map_err(|e| Failure::Input(e.into()))?;
    emit(name, file, &out, dir).map_err(Failure::Input)?;
    Ok(out.status)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => {
            eprintln!("extrad: no converged solution");
            ExitCode::from(2)
        }
        Ok(Status::CertificationFailed) if cli.flags.strict => {
            eprintln!("extrad: certification failed");
            ExitCode::from(3)
        }
        Ok(Status::CertificationFailed) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("extrad: {e:#}");
            ExitCode::from(1)
        }
    }
}
