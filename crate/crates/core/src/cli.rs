//! Command execution: wiring channels, inputs, POVMs, and grids into
//! CSV/JSON reports.
//!
//! Commands are deterministic given their configuration (including seeds).
//! Output files are written atomically: a temporary sibling is renamed into
//! place on success and removed on failure. CSV numbers use 17 significant
//! digits so values round-trip exactly.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::canonical::{canonical_decompose, quasiclassical_optimal_povm, smooth_frame_curve};
use crate::channel::{linspace, ParamKrausFamily, QuantumState, BUILTIN_NAMES};
use crate::config::{ChannelSpec, Extension, InputSpec, PovmSpec};
use crate::error::{Error, Result};
use crate::estimate::crlb_experiment;
use crate::fisher::{kraus_bound, optimality_check, sld_fisher, statistical_distance_eigencoords, Povm};

/// Grids are pulled inside the open parameter domain by this inset.
pub const GRID_INSET: f64 = 1e-6;

/// Which report to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Bound,
    DistanceCurve,
    OptimalityCheck,
    Simulate,
    Channels,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidConfig(format!(
                "unknown format '{other}' (expected csv or json)"
            ))),
        }
    }
}

/// Fully resolved run request.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub channel: Option<ChannelSpec>,
    pub input: Option<InputSpec>,
    pub povm: Option<PovmSpec>,
    pub grid_start: Option<f64>,
    pub grid_stop: Option<f64>,
    pub grid_points: Option<usize>,
    pub theta: Option<f64>,
    pub shots: u64,
    pub trials: u64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
    /// Optional single-column CSV of per-trial estimates (simulate only).
    pub estimates_out: Option<PathBuf>,
}

impl RunConfig {
    /// Merges a key=value map (usually from `--config`) with override keys.
    /// Overrides win.
    pub fn from_kv(command: Command, kv: &BTreeMap<String, String>) -> Result<Self> {
        let get_f64 = |key: &str| -> Result<Option<f64>> {
            kv.get(key)
                .map(|v| {
                    v.parse::<f64>().map_err(|_| {
                        Error::InvalidConfig(format!("{key}: expected a number, got '{v}'"))
                    })
                })
                .transpose()
        };
        let get_u64 = |key: &str| -> Result<Option<u64>> {
            kv.get(key)
                .map(|v| {
                    v.parse::<u64>().map_err(|_| {
                        Error::InvalidConfig(format!("{key}: expected an integer, got '{v}'"))
                    })
                })
                .transpose()
        };
        let channel = if kv.contains_key("channel") {
            Some(ChannelSpec::from_kv(kv)?)
        } else {
            None
        };
        let input = kv.get("input").map(|s| InputSpec::parse(s)).transpose()?;
        let povm = kv.get("povm").map(|s| PovmSpec::parse(s)).transpose()?;
        let format = match kv.get("format") {
            Some(f) => Format::parse(f)?,
            None => match command {
                Command::Bound | Command::DistanceCurve => Format::Csv,
                _ => Format::Json,
            },
        };
        Ok(RunConfig {
            command,
            channel,
            input,
            povm,
            grid_start: get_f64("grid_start")?,
            grid_stop: get_f64("grid_stop")?,
            grid_points: get_u64("grid_points")?.map(|v| v as usize),
            theta: get_f64("theta")?,
            shots: get_u64("shots")?.unwrap_or(10_000),
            trials: get_u64("trials")?.unwrap_or(100),
            seed: get_u64("seed")?.unwrap_or(0),
            out: kv.get("out").map(PathBuf::from),
            format,
            estimates_out: kv.get("estimates_out").map(PathBuf::from),
        })
    }

    fn channel(&self) -> Result<&ChannelSpec> {
        self.channel
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("missing 'channel'".into()))
    }

    fn input(&self) -> Result<&InputSpec> {
        self.input
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("missing 'input'".into()))
    }

    fn povm(&self) -> Result<&PovmSpec> {
        self.povm
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("missing 'povm'".into()))
    }

    fn out(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("missing 'out' path".into()))
    }

    /// Grid clamped 1e-6 inside the family's open domain.
    fn grid(&self, family: &ParamKrausFamily, min_points: usize) -> Result<Vec<f64>> {
        let start = self
            .grid_start
            .ok_or_else(|| Error::InvalidConfig("missing 'grid_start'".into()))?;
        let stop = self
            .grid_stop
            .ok_or_else(|| Error::InvalidConfig("missing 'grid_stop'".into()))?;
        let points = self
            .grid_points
            .ok_or_else(|| Error::InvalidConfig("missing 'grid_points'".into()))?;
        if points < min_points {
            return Err(Error::GridTooCoarse {
                points,
                needed: min_points,
            });
        }
        let dom = family.domain();
        let lo = dom.lo + GRID_INSET;
        let hi = if dom.hi.is_finite() {
            dom.hi - GRID_INSET
        } else {
            f64::INFINITY
        };
        let start = start.max(lo);
        let stop = stop.min(hi);
        if !(start < stop) {
            return Err(Error::InvalidConfig(format!(
                "empty grid after clamping to ({lo}, {hi})"
            )));
        }
        Ok(linspace(start, stop, points))
    }
}

/// 17 significant digits, round-trip exact for f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp~");
    let write = || -> Result<()> {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(contents)?;
        file.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    };
    let result = write();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Option<f64>>]) -> Result<()> {
    let mut text = String::new();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .map(|v| v.map(fmt_f64).unwrap_or_default())
            .collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    atomic_write(path, text.as_bytes())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// Closed-form reference F*(θ) for the channel/input pairs where one is
/// known; used to fill the `closed_form` column of distance curves.
pub fn known_closed_form(spec: &ChannelSpec, input: &InputSpec) -> Option<fn(f64) -> f64> {
    match (spec.name.as_str(), spec.extend, input) {
        ("depolarizing" | "depolarizing-canonical", Extension::None, InputSpec::Basis(_)) => {
            Some(|p| 6.0 / (p * (9.0 - 6.0 * p)))
        }
        ("depolarizing", Extension::Identity, InputSpec::Bell(_)) => {
            Some(|p| 1.0 / (p * (1.0 - p)))
        }
        ("dephasing", Extension::None, InputSpec::Plus | InputSpec::Minus) => {
            Some(|t| 4.0 / (4.0 * t).exp_m1())
        }
        ("random-shift", Extension::None, InputSpec::Basis(0)) => Some(|t| 1.0 / t),
        // Damping depends on the photon number; see `damping_closed_form`.
        _ => None,
    }
}

/// Closed form for damping with Fock input |n⟩ (needs the photon number).
pub fn damping_closed_form(n: usize) -> impl Fn(f64) -> f64 {
    move |t: f64| n as f64 / t.exp_m1()
}

#[derive(Serialize)]
struct BoundReport {
    label: String,
    thetas: Vec<f64>,
    kraus_bound: Vec<f64>,
    sld_fisher: Vec<f64>,
}

#[derive(Serialize)]
struct DistanceReport {
    label: String,
    thetas: Vec<f64>,
    bound: Vec<f64>,
    eigencoord: Vec<f64>,
    closed_form: Vec<Option<f64>>,
}

#[derive(Serialize)]
struct OptimalityPoint {
    theta: f64,
    lambdas: Vec<f64>,
    residuals: Vec<f64>,
    max_residual: f64,
    satisfied: bool,
}

#[derive(Serialize)]
struct OptimalityRun {
    label: String,
    outcomes: Vec<String>,
    points: Vec<OptimalityPoint>,
}

/// Executes a command. Returns the text that should go to stdout (used by
/// `channels`; file-writing commands return a short confirmation).
pub fn run(config: &RunConfig) -> Result<String> {
    match config.command {
        Command::Channels => run_channels(config),
        Command::Bound => run_bound(config),
        Command::DistanceCurve => run_distance_curve(config),
        Command::OptimalityCheck => run_optimality(config),
        Command::Simulate => run_simulate(config),
    }
}

fn run_channels(config: &RunConfig) -> Result<String> {
    let mut lines = Vec::new();
    lines.push("builtin channels:".to_string());
    for name in BUILTIN_NAMES {
        let (domain, params, reference) = match name {
            "depolarizing" => ("p in (0, 1)", "none", "input basis:0, POVM z-basis"),
            "depolarizing-canonical" => ("p in (0, 1)", "none", "input basis:0, POVM z-basis"),
            "dephasing" => ("theta in (0, inf)", "none", "input plus, POVM x-basis"),
            "random-shift" => (
                "theta in (0, theta_max)",
                "theta_max (required), dim (optional, >= k_max+2)",
                "input basis:0, POVM position",
            ),
            "damping" => (
                "theta in (0, inf)",
                "n_max (required)",
                "input basis:N, POVM photon-number",
            ),
            _ => unreachable!(),
        };
        lines.push(format!("  {name:24} domain: {domain:22} params: {params}"));
        lines.push(format!("  {:24} reference: {reference}", ""));
    }
    lines.push("extensions: extend=identity (I⊗E, Bell input), extend=square (E⊗E)".to_string());
    let text = lines.join("\n") + "\n";
    if let Some(out) = &config.out {
        atomic_write(out, text.as_bytes())?;
    }
    Ok(text)
}

fn run_bound(config: &RunConfig) -> Result<String> {
    let family = config.channel()?.build()?;
    let rho0 = config.input()?.build(family.dim())?;
    let grid = config.grid(&family, 1)?;
    let mut bounds = Vec::with_capacity(grid.len());
    let mut oracle = Vec::with_capacity(grid.len());
    for &t in &grid {
        bounds.push(kraus_bound(&family, t, &rho0)?);
        oracle.push(sld_fisher(&family, t, &rho0)?);
    }
    let out = config.out()?;
    match config.format {
        Format::Csv => {
            let rows: Vec<Vec<Option<f64>>> = grid
                .iter()
                .zip(bounds.iter().zip(oracle.iter()))
                .map(|(&t, (&b, &s))| vec![Some(t), Some(b), Some(s)])
                .collect();
            write_csv(out, &["theta", "kraus_bound", "sld_fisher"], &rows)?;
        }
        Format::Json => {
            write_json(
                out,
                &BoundReport {
                    label: family.label().to_string(),
                    thetas: grid,
                    kraus_bound: bounds,
                    sld_fisher: oracle,
                },
            )?;
        }
    }
    Ok(format!("wrote {}\n", out.display()))
}

fn run_distance_curve(config: &RunConfig) -> Result<String> {
    let spec = config.channel()?;
    let family = spec.build()?;
    let input_spec = config.input()?;
    let rho0 = input_spec.build(family.dim())?;
    let grid = config.grid(&family, 3)?;
    let frames = smooth_frame_curve(&family, &grid, &rho0)?;
    let curve = statistical_distance_eigencoords(&frames, family.label())?;

    let closed: Vec<Option<f64>> = match (known_closed_form(spec, input_spec), spec.name.as_str()) {
        (Some(f), _) => grid.iter().map(|&t| Some(f(t))).collect(),
        (None, "damping") => {
            if let (InputSpec::Basis(n), Extension::None) = (input_spec, spec.extend) {
                let f = damping_closed_form(*n);
                grid.iter().map(|&t| Some(f(t))).collect()
            } else {
                vec![None; grid.len()]
            }
        }
        _ => vec![None; grid.len()],
    };

    let out = config.out()?;
    match config.format {
        Format::Csv => {
            let rows: Vec<Vec<Option<f64>>> = (0..grid.len())
                .map(|i| {
                    vec![
                        Some(grid[i]),
                        Some(curve.bound_values[i]),
                        Some(curve.eigencoord_values[i]),
                        closed[i],
                    ]
                })
                .collect();
            write_csv(
                out,
                &["theta", "bound", "eigencoord", "closed_form"],
                &rows,
            )?;
        }
        Format::Json => {
            write_json(
                out,
                &DistanceReport {
                    label: curve.label.clone(),
                    thetas: grid,
                    bound: curve.bound_values.clone(),
                    eigencoord: curve.eigencoord_values.clone(),
                    closed_form: closed,
                },
            )?;
        }
    }
    Ok(format!("wrote {}\n", out.display()))
}

fn run_optimality(config: &RunConfig) -> Result<String> {
    if config.format == Format::Csv {
        return Err(Error::InvalidConfig(
            "optimality-check reports are JSON only".into(),
        ));
    }
    let family = config.channel()?.build()?;
    let rho0 = config.input()?.build(family.dim())?;
    let povm_spec = config.povm()?;
    let grid = config.grid(&family, 1)?;
    let mut points = Vec::with_capacity(grid.len());
    let mut outcomes: Vec<String> = Vec::new();
    for &t in &grid {
        let frame = canonical_decompose(&family, t, &rho0)?;
        let povm = match povm_spec {
            PovmSpec::Eigenframe => quasiclassical_optimal_povm(&frame)?.povm,
            other => other.build(family.dim())?,
        };
        if outcomes.is_empty() {
            outcomes = povm.labels().to_vec();
        }
        let report = optimality_check(&povm, &frame, &rho0)?;
        points.push(OptimalityPoint {
            theta: t,
            lambdas: report.lambdas,
            residuals: report.residuals,
            max_residual: report.max_residual,
            satisfied: report.satisfied,
        });
    }
    let out = config.out()?;
    write_json(
        out,
        &OptimalityRun {
            label: family.label().to_string(),
            outcomes,
            points,
        },
    )?;
    Ok(format!("wrote {}\n", out.display()))
}

fn run_simulate(config: &RunConfig) -> Result<String> {
    if config.format == Format::Csv {
        return Err(Error::InvalidConfig(
            "simulate reports are JSON only (estimates_out gives a CSV of raw estimates)".into(),
        ));
    }
    let family = config.channel()?.build()?;
    let rho0 = config.input()?.build(family.dim())?;
    let theta = config
        .theta
        .ok_or_else(|| Error::InvalidConfig("missing 'theta'".into()))?;
    family.domain().check(theta)?;
    let povm = match config.povm()? {
        PovmSpec::Eigenframe => {
            let frame = canonical_decompose(&family, theta, &rho0)?;
            quasiclassical_optimal_povm(&frame)?.povm
        }
        other => other.build(family.dim())?,
    };
    let report = crlb_experiment(
        &povm,
        &family,
        theta,
        &rho0,
        config.shots,
        config.trials,
        config.seed,
    )?;
    let out = config.out()?;
    write_json(out, &report)?;
    if let Some(est_path) = &config.estimates_out {
        let mut text = String::from("estimate\n");
        for e in &report.estimates {
            text.push_str(&fmt_f64(*e));
            text.push('\n');
        }
        atomic_write(est_path, text.as_bytes())?;
    }
    Ok(format!("wrote {}\n", out.display()))
}

/// Builds a POVM for library callers that mirrors what `simulate` does,
/// resolving `eigenframe` at the given θ.
pub fn resolve_povm(
    spec: &PovmSpec,
    family: &ParamKrausFamily,
    theta: f64,
    rho0: &QuantumState,
) -> Result<Povm> {
    match spec {
        PovmSpec::Eigenframe => {
            let frame = canonical_decompose(family, theta, rho0)?;
            Ok(quasiclassical_optimal_povm(&frame)?.povm)
        }
        other => other.build(family.dim()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_kv;

    #[test]
    fn fmt_round_trips() {
        for &x in &[
            1.0,
            -0.333333333333333314,
            6.0 / (0.35 * (9.0 - 6.0 * 0.35)),
            1e-300,
        ] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(x, back, "{s}");
        }
    }

    #[test]
    fn config_defaults_and_overrides() {
        let kv = parse_kv("channel=dephasing\ninput=plus\ngrid_start=0.2\ngrid_stop=1.0\ngrid_points=5").unwrap();
        let config = RunConfig::from_kv(Command::Bound, &kv).unwrap();
        assert_eq!(config.format, Format::Csv);
        let config = RunConfig::from_kv(Command::Simulate, &kv).unwrap();
        assert_eq!(config.format, Format::Json);
    }

    #[test]
    fn grid_clamps_into_domain() {
        let kv = parse_kv("channel=depolarizing\ngrid_start=0\ngrid_stop=1\ngrid_points=3").unwrap();
        let config = RunConfig::from_kv(Command::Bound, &kv).unwrap();
        let family = crate::channel::depolarizing();
        let grid = config.grid(&family, 1).unwrap();
        assert!(grid[0] >= GRID_INSET);
        assert!(*grid.last().unwrap() <= 1.0 - GRID_INSET);
    }

    #[test]
    fn channels_listing_names_all_builtins() {
        let kv = BTreeMap::new();
        let config = RunConfig::from_kv(Command::Channels, &kv).unwrap();
        let text = run(&config).unwrap();
        for name in BUILTIN_NAMES {
            assert!(text.contains(name), "missing {name}");
        }
    }

    #[test]
    fn exit_codes_partition_the_error_space() {
        use crate::error::Error;
        assert_eq!(Error::InvalidConfig("x".into()).exit_code(), 2);
        assert_eq!(
            Error::OutOfDomain {
                theta: 2.0,
                lo: 0.0,
                hi: 1.0
            }
            .exit_code(),
            2
        );
        assert_eq!(Error::Numeric("x".into()).exit_code(), 3);
        assert_eq!(Error::NotPsd(-1.0).exit_code(), 3);
        assert_eq!(
            Error::DivergentFisherTerm {
                outcome: "x".into()
            }
            .exit_code(),
            4
        );
    }
}
