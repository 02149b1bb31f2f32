use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use sigmafloor_cli::config::ExperimentConfig;
use sigmafloor_cli::io::read_input;
use sigmafloor_cli::run::run_config;
use sigmafloor_cli::{oneshot, selftest, CliError};
use sigmafloor_core::par;
use sigmafloor_core::sphere::{DEFAULT_DELTA, DEFAULT_RHO};

#[derive(Parser)]
#[command(name = "sigmafloor", version, about = "Smallest-singular-value experiments and solvers")]
struct Cli {
    /// Worker threads for trial loops (0 = all cores).
    #[arg(long, global = true, env = "SIGMAFLOOR_WORKERS", default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config output prefix.
        #[arg(long)]
        out: Option<String>,
    },
    /// Fast oracle and exact-value checks.
    Selftest {
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
    /// B_kappa of a CSV matrix or a JSON vector y ("-" reads stdin).
    Bkappa {
        #[arg(long)]
        input: String,
        #[arg(long)]
        kappa: f64,
    },
    /// Compressible / incompressible classification of a unit vector (one CSV line).
    Classify {
        #[arg(long)]
        input: String,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        #[arg(long, default_value_t = DEFAULT_RHO)]
        rho: f64,
    },
    /// Empirical Levy concentration of a scalar distribution.
    Concentration {
        /// Family name or a distribution JSON object.
        #[arg(long)]
        dist: String,
        /// Tail index for symmetric_pareto.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        seed: u64,
    },
}

/// Writes a line to stdout; a closed pipe is not an error.
fn emit(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn print_json(v: &serde_json::Value) {
    emit(&serde_json::to_string_pretty(v).expect("json"));
}

fn execute(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Run { config, seed, out } => {
            let start = Instant::now();
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if out.is_some() {
                cfg.out = out;
            }
            let base = config.parent().map(PathBuf::from).unwrap_or_default();
            let report = run_config(&cfg, &base)?;
            emit(&format!(
                "operation={} rows={} elapsed={:.3}s files={}{}",
                report.operation,
                report.rows,
                start.elapsed().as_secs_f64(),
                report.files.join(","),
                if report.note.is_empty() { String::new() } else { format!(" {}", report.note) }
            ));
            Ok(0)
        }
        Command::Selftest { inject_fault } => {
            Ok(selftest::run_selftest(inject_fault.as_deref(), &mut std::io::stdout()))
        }
        Command::Bkappa { input, kappa } => {
            print_json(&oneshot::bkappa_from_text(&read_input(&input)?, kappa)?);
            Ok(0)
        }
        Command::Classify { input, delta, rho } => {
            print_json(&oneshot::classify_from_text(&read_input(&input)?, delta, rho)?);
            Ok(0)
        }
        Command::Concentration { dist, alpha, radius, samples, seed } => {
            let d = oneshot::parse_distribution(&dist, alpha)?;
            print_json(&oneshot::concentration(&d, radius, samples, seed)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = par::with_workers(cli.workers, || match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("sigmafloor: {e}");
            e.exit_code()
        }
    });
    ExitCode::from(code as u8)
}
