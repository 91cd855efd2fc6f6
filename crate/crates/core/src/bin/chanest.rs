//! CLI front end: parses flags, merges them over an optional config file,
//! and dispatches to the library commands.
//!
//! Exit codes: 0 success, 2 validation error, 3 numeric/runtime error,
//! 4 divergent Fisher term. Errors print one machine-parsable line:
//! `error[<code>]: <message>`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chanest::cli::{run, Command as RunCommand, RunConfig};
use chanest::config::parse_kv;
use chanest::error::Error;

#[derive(Parser)]
#[command(
    name = "chanest",
    about = "Optimal-estimation reports for one-parameter quantum channels",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// Flat key=value config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Master seed for anything stochastic.
    #[arg(long)]
    seed: Option<u64>,
    /// Builtin channel name (see `chanest channels`).
    #[arg(long)]
    channel: Option<String>,
    /// Tensor extension: none, identity, or square.
    #[arg(long)]
    extend: Option<String>,
    /// Fock cutoff for the damping channel.
    #[arg(long)]
    n_max: Option<usize>,
    /// Hilbert-space dimension for the random-shift channel.
    #[arg(long)]
    dim: Option<usize>,
    /// Largest parameter the random-shift truncation must cover.
    #[arg(long)]
    theta_max: Option<f64>,
    /// Input state descriptor (basis:N, plus, minus, bell:X, amps:...).
    #[arg(long)]
    input: Option<String>,
    /// POVM descriptor (z-basis, x-basis, bell-basis, photon-number,
    /// position, eigenframe, file:PATH).
    #[arg(long)]
    povm: Option<String>,
    /// Grid start.
    #[arg(long)]
    grid_start: Option<f64>,
    /// Grid stop.
    #[arg(long)]
    grid_stop: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    grid_points: Option<usize>,
    /// Single parameter value (simulate).
    #[arg(long)]
    theta: Option<f64>,
    /// Shots per trial (simulate).
    #[arg(long)]
    shots: Option<u64>,
    /// Number of independent trials (simulate).
    #[arg(long)]
    trials: Option<u64>,
    /// Optional CSV dump of raw per-trial estimates (simulate).
    #[arg(long)]
    estimates_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Kraus-derivative bound and SLD oracle over a parameter grid.
    Bound(Common),
    /// Canonical-frame statistical distance over a parameter grid.
    DistanceCurve(Common),
    /// Optimality residuals and lambda values for a POVM over a grid.
    OptimalityCheck(Common),
    /// Monte Carlo maximum-likelihood run against the Cramér-Rao bound.
    Simulate(Common),
    /// List builtin channels.
    Channels(Common),
}

fn merge(common: &Common) -> Result<BTreeMap<String, String>, Error> {
    let mut kv = match &common.config {
        Some(path) => parse_kv(&std::fs::read_to_string(path)?)?,
        None => BTreeMap::new(),
    };
    let mut set = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            kv.insert(key.to_string(), v);
        }
    };
    set("out", common.out.as_ref().map(|p| p.display().to_string()));
    set("format", common.format.clone());
    set("seed", common.seed.map(|v| v.to_string()));
    set("channel", common.channel.clone());
    set("extend", common.extend.clone());
    set("n_max", common.n_max.map(|v| v.to_string()));
    set("dim", common.dim.map(|v| v.to_string()));
    set("theta_max", common.theta_max.map(|v| v.to_string()));
    set("input", common.input.clone());
    set("povm", common.povm.clone());
    set("grid_start", common.grid_start.map(|v| v.to_string()));
    set("grid_stop", common.grid_stop.map(|v| v.to_string()));
    set("grid_points", common.grid_points.map(|v| v.to_string()));
    set("theta", common.theta.map(|v| v.to_string()));
    set("shots", common.shots.map(|v| v.to_string()));
    set("trials", common.trials.map(|v| v.to_string()));
    set(
        "estimates_out",
        common.estimates_out.as_ref().map(|p| p.display().to_string()),
    );
    Ok(kv)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match &cli.command {
        Command::Bound(c) => (RunCommand::Bound, c),
        Command::DistanceCurve(c) => (RunCommand::DistanceCurve, c),
        Command::OptimalityCheck(c) => (RunCommand::OptimalityCheck, c),
        Command::Simulate(c) => (RunCommand::Simulate, c),
        Command::Channels(c) => (RunCommand::Channels, c),
    };
    let result = merge(common)
        .and_then(|kv| RunConfig::from_kv(command, &kv))
        .and_then(|config| run(&config));
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error[{}]: {}", err.code(), err);
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
