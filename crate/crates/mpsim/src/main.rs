use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mpsim::analysis::{self, FitKind, ScanAxis, DEFAULT_SCAN_THRESHOLD};
use mpsim::table::Table;
use mpsim::{resolve_output_dir, CliError, RunConfig};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "mpsim", version, about = "Open XXZ chain simulations: MPDO, iTEBD, trajectories, dense reference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config (or a manifest written by an earlier run).
    Run {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Cap on worker threads; results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Max-abs deviation of every shared column of two trace CSVs.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a chi or dt ladder and report deviations between successive rungs.
    ConvergenceScan {
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: ScanAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_SCAN_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Fit a power law or logarithmic growth to one column of a trace.
    Fit {
        trace: PathBuf,
        #[arg(long, value_enum)]
        kind: FitKind,
        #[arg(long)]
        column: Option<String>,
        #[arg(long, num_args = 2, value_names = ["T_MIN", "T_MAX"])]
        window: Option<Vec<f64>>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Large-rate estimate of the trajectory-entanglement plateau.
    Plateau {
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        j: f64,
    },
}

fn emit<S: Serialize>(value: &S, output: Option<&PathBuf>) -> mpsim::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match output {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| CliError::io(p, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> mpsim::Result<()> {
    match cli.command {
        Command::Run {
            config,
            output_dir,
            threads,
        } => {
            let cfg = RunConfig::load(&config)?;
            let dir = resolve_output_dir(&cfg, output_dir.as_deref());
            let out = mpsim::run_with_threads(&cfg, &dir, threads)?;
            emit(&serde_json::json!({ "output_dir": out.dir, "files": out.files }), None)
        }
        Command::Compare { a, b, output } => emit(&analysis::compare_files(&a, &b)?, output.as_ref()),
        Command::ConvergenceScan {
            config,
            axis,
            values,
            threshold,
            output_dir,
            threads,
        } => {
            let cfg = RunConfig::load(&config)?;
            let dir = resolve_output_dir(&cfg, output_dir.as_deref());
            let report = analysis::convergence_scan(&cfg, axis, &values, threshold, &dir, threads)?;
            emit(&report, Some(&dir.join("scan.json")))?;
            emit(&report, None)
        }
        Command::Fit {
            trace,
            kind,
            column,
            window,
            output,
        } => {
            let table = Table::read_csv(&trace)?;
            let window = window.map(|w| (w[0], w[1]));
            emit(&analysis::fit_table(&table, column.as_deref(), kind, window)?, output.as_ref())
        }
        Command::Plateau { gamma, j } => emit(&analysis::plateau(gamma, j)?, None),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
