//! `cavity-teleport`: closed-form figures, trajectory ensembles and
//! parameter sweeps for the two-cavity teleportation protocol.

mod commands;
mod config;
mod report;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use config::RunConfig;
use report::{Format, Report, UNITS};

#[derive(Parser)]
#[command(name = "cavity-teleport", version, about)]
struct Cli {
    /// JSON configuration file (a flat object; see configs/cs.config).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Overrides any configuration key, e.g. `--set dt1_frac=0.05`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output file; standard output if absent.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Defaults to csv for `sweep` and json otherwise.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derived rates, schedule and Raman figures.
    Params,
    /// Success probability, fidelities, timing budget and Raman leakage.
    Analytic,
    /// Quantum-jump ensemble next to the closed-form predictions.
    Trajectories,
    /// Stage-by-stage comparison of stepped evolution with the analytic states.
    Checkpoints,
    /// Closed-form figures over a list of values of one config key.
    Sweep {
        /// A config key, or `cg` for a real input with c_f = √(1 − cg²).
        #[arg(long)]
        key: String,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
    },
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Regime(String),
    Io(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Regime(_) => 3,
            Failure::Io(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Regime(m) => write!(f, "physical regime error: {m}"),
            Failure::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<cavity_teleport::Error> for Failure {
    fn from(e: cavity_teleport::Error) -> Self {
        match e {
            cavity_teleport::Error::Overdamped { .. } => Failure::Regime(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

fn emit<T: Serialize>(cli: &Cli, report: &Report<'_, T>) -> Result<(), Failure> {
    let bytes = match cli.format.unwrap_or(Format::Json) {
        Format::Json => report::to_json(report),
        Format::Csv => {
            let value = serde_json::to_value(&report.results).expect("report serializes");
            report::to_csv(report.config, &["quantity", "value"], &report::flatten(&value))?
        }
    };
    report::write_output(cli.out.as_deref(), &bytes)
}

fn envelope<'a, T: Serialize>(
    command: &'static str,
    config: &'a RunConfig,
    warnings: &[String],
    results: T,
) -> Report<'a, T> {
    Report { command, units: UNITS, config, warnings: warnings.to_vec(), results }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for assignment in &cli.overrides {
        cfg = cfg.set_str(assignment)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let resolved = cfg.resolve()?;
    let effective = cfg.effective(&resolved.schedule);
    let warnings = commands::warnings(&resolved.params, &resolved.schedule)?;

    match &cli.command {
        Command::Params => emit(cli, &envelope("params", &effective, &warnings, commands::params(&resolved)?)),
        Command::Analytic => emit(cli, &envelope("analytic", &effective, &warnings, commands::analytic(&resolved)?)),
        Command::Trajectories => {
            let results = commands::trajectories(&resolved, &cfg)?;
            emit(cli, &envelope("trajectories", &effective, &warnings, results))
        }
        Command::Checkpoints => {
            emit(cli, &envelope("checkpoints", &effective, &warnings, commands::checkpoints(&resolved)?))
        }
        Command::Sweep { key, values } => {
            let rows = commands::sweep(&cfg, key, values)?;
            match cli.format.unwrap_or(Format::Csv) {
                Format::Json => emit(cli, &envelope("sweep", &effective, &warnings, rows)),
                Format::Csv => {
                    let table: Vec<Vec<String>> = rows
                        .iter()
                        .map(|r| {
                            let nums = [r.value, r.beta, r.t1, r.p, r.p_prime, r.f_plus, r.f_minus, r.f_avg];
                            std::iter::once(r.sweep_key.clone()).chain(nums.map(report::sig12)).collect()
                        })
                        .collect();
                    let bytes = report::to_csv(&effective, &commands::SWEEP_HEADER, &table)?;
                    report::write_output(cli.out.as_deref(), &bytes)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
