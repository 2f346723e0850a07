//! `smallcell`: run rate sweeps and rate-gap curves, validate scenario files.
//!
//! Exit status: 0 on success, 2 for usage or configuration errors, 3 when a
//! numerical routine fails.

mod manifest;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use smallcell_core::experiments::{rate_gap_curve, run_sweep, SweepParam};
use smallcell_core::{Error as CoreError, ScenarioConfig};

use manifest::{now_unix, RunManifest, SweepSpec};

#[derive(Parser)]
#[command(
    name = "smallcell",
    version,
    about = "Distributed small-cell hybrid mmWave sum-rate sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Average sum-rates over one swept parameter.
    Sweep(SweepArgs),
    /// Check a scenario file and print it with every default filled in.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Exact and high-SNR rate gain of distributed over collocated antennas.
    RateGap(RateGapArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario file (TOML). Omitted fields take their defaults.
    #[arg(long, conflicts_with = "manifest")]
    config: Option<PathBuf>,
    /// One of n_sbs, p_t_dbm, power_ratio, n_cl, p_user.
    #[arg(long, required_unless_present = "manifest")]
    sweep: Option<String>,
    /// Comma-separated values, or an inclusive range `start:end[:step]`.
    #[arg(long, required_unless_present = "manifest")]
    values: Option<String>,
    #[arg(long, conflicts_with = "manifest")]
    seed: Option<u64>,
    #[arg(long, conflicts_with = "manifest")]
    trials: Option<usize>,
    /// Output file; the manifest goes to `<out>.manifest.json`.
    #[arg(long, required_unless_present = "manifest")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, conflicts_with = "manifest")]
    format: Option<Format>,
    /// Re-run the sweep recorded in a manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct RateGapArgs {
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long)]
    snr_db: f64,
    #[arg(long)]
    n_max: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(args) => cmd_sweep(args),
        Command::Validate { config } => cmd_validate(&config),
        Command::RateGap(args) => cmd_rate_gap(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

fn load_config(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    let cfg: ScenarioConfig =
        toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    cfg.validate()
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Ok(cfg)
}

fn parse_values(text: &str) -> Result<Vec<f64>, Failure> {
    let bad = |what: &str| Failure::Usage(format!("--values: cannot parse `{what}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(s));
    let values = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let (start, end, step) = match parts.as_slice() {
            [a, b] => (num(a)?, num(b)?, 1.0),
            [a, b, c] => (num(a)?, num(b)?, num(c)?),
            _ => return Err(bad(text)),
        };
        if step.is_nan() || step <= 0.0 || end < start {
            return Err(Failure::Usage(format!("--values: empty range `{text}`")));
        }
        let count = ((end - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| start + i as f64 * step).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(bad(text));
    }
    Ok(values)
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Failure> {
    let started = now_unix();
    let (config, spec, out, format) = match &args.manifest {
        Some(path) => {
            let m = RunManifest::read(path).map_err(Failure::Usage)?;
            let out = args.out.clone().unwrap_or_else(|| m.output.clone());
            match (m.config, m.sweep) {
                (Some(config), Some(spec)) => (config, spec, out, m.format),
                _ => {
                    return Err(Failure::Usage(format!(
                        "{} does not record a sweep",
                        path.display()
                    )))
                }
            }
        }
        None => {
            let mut config = match &args.config {
                Some(p) => load_config(p)?,
                None => ScenarioConfig::default(),
            };
            if let Some(seed) = args.seed {
                config.master_seed = seed;
            }
            if let Some(trials) = args.trials {
                config.trials = trials;
            }
            config.validate()?;
            let name = args.sweep.clone().expect("required by clap");
            if SweepParam::parse(&name).is_none() {
                let known: Vec<&str> = SweepParam::ALL.iter().map(|p| p.name()).collect();
                return Err(Failure::Usage(format!(
                    "unknown sweep `{name}`; expected one of {}",
                    known.join(", ")
                )));
            }
            let values = parse_values(args.values.as_deref().expect("required by clap"))?;
            let spec = SweepSpec { name, values };
            (
                config,
                spec,
                args.out.clone().expect("required by clap"),
                args.format.unwrap_or(Format::Csv),
            )
        }
    };
    let param = SweepParam::parse(&spec.name)
        .ok_or_else(|| Failure::Usage(format!("unknown sweep `{}`", spec.name)))?;
    let curves = run_sweep(&config, param, &spec.values)?;
    for r in &curves.rejected {
        eprintln!(
            "warning: {} = {} rejected: {}",
            curves.sweep_name, r.sweep_value, r.reason
        );
    }
    output::write_curves(&curves, &out, format).map_err(Failure::Usage)?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: "sweep".into(),
        master_seed: Some(config.master_seed),
        config: Some(config),
        sweep: Some(spec),
        rate_gap: None,
        format,
        output: out.clone(),
        started_unix: started,
        finished_unix: now_unix(),
    };
    manifest
        .write(&manifest_path(&out))
        .map_err(Failure::Usage)?;
    Ok(())
}

fn cmd_validate(path: &Path) -> Result<(), Failure> {
    let cfg = load_config(path)?;
    let text = toml::to_string(&cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    print!("{text}");
    Ok(())
}

fn cmd_rate_gap(args: RateGapArgs) -> Result<(), Failure> {
    if args.n_max == 0 {
        return Err(Failure::Usage("--n-max must be at least 1".into()));
    }
    if !args.snr_db.is_finite() {
        return Err(Failure::Usage("--snr-db must be finite".into()));
    }
    let started = now_unix();
    let ns: Vec<usize> = (1..=args.n_max).collect();
    let curves = rate_gap_curve(args.k, args.snr_db, &ns)?;
    output::write_curves(&curves, &args.out, args.format).map_err(Failure::Usage)?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: "rate-gap".into(),
        master_seed: None,
        config: None,
        sweep: None,
        rate_gap: Some(manifest::RateGapSpec {
            k_users: args.k,
            snr_db: args.snr_db,
            n_max: args.n_max,
        }),
        format: args.format,
        output: args.out.clone(),
        started_unix: started,
        finished_unix: now_unix(),
    };
    manifest
        .write(&manifest_path(&args.out))
        .map_err(Failure::Usage)?;
    Ok(())
}
