//! `qnnent`: experiments for the two-qubit entanglement indicator.
//!
//! Every command writes its outputs plus `manifest.json` into the `--out`
//! directory. `qnnent replay` re-runs a manifest and reproduces the CSVs.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use qnnent_core::{
    concurrence_of_matrix, eof_from_concurrence, CMatrix4, Error as CoreError, FitOrders, FitSet,
    NoiseDistribution, NoiseKind, NoiseSpec, TimeGrid, TrainingConfig,
};
use serde::de::DeserializeOwned;
use serde::Serialize;

use qnnent_cli::commands::{
    self, usage, Family, FitRequest, FourierNoiseRequest, Outcome, RandomizeRequest, SweepRequest,
    TrainRequest, UsageError, Which,
};
use qnnent_cli::output::{write_outputs, Manifest};

const DEFAULT_SEED: u64 = 1;

#[derive(Parser, Debug)]
#[command(
    name = "qnnent",
    version,
    about = "Two-qubit quantum neural network entanglement indicator experiments"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Master seed; for `train` it replaces the config's seed and noise seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Time step in ns.
    #[arg(long, global = true)]
    grid_dt: Option<f64>,
    /// Number of time steps.
    #[arg(long, global = true)]
    grid_steps: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct NoiseArgs {
    /// Noise channel applied after every step.
    #[arg(long, value_parser = parse_kind)]
    noise_kind: Option<NoiseKind>,
    /// Rms of each per-element draw.
    #[arg(long, default_value_t = 0.0)]
    noise_amplitude: f64,
    /// Draw distribution.
    #[arg(long, value_enum, default_value_t = DistArg::Gaussian)]
    noise_distribution: DistArg,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum DistArg {
    Gaussian,
    Uniform,
}

impl From<DistArg> for NoiseDistribution {
    fn from(d: DistArg) -> Self {
        match d {
            DistArg::Gaussian => NoiseDistribution::Gaussian,
            DistArg::Uniform => NoiseDistribution::Uniform,
        }
    }
}

fn parse_kind(s: &str) -> Result<NoiseKind, String> {
    s.parse().map_err(|e: CoreError| e.to_string())
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the schedule on the four-state set and fit Fourier forms.
    Train {
        /// TOML training config; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        max_epochs: Option<usize>,
        #[command(flatten)]
        noise: NoiseArgs,
    },
    /// Fit Fourier forms to a schedule CSV.
    Fit {
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long, default_value_t = 2)]
        order_k: usize,
        #[arg(long, default_value_t = 1)]
        order_eps: usize,
        #[arg(long, default_value_t = 1)]
        order_zeta: usize,
    },
    /// Indicator and entanglement of formation along the P(γ) or M(δ) family.
    SweepState {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        fits: PathBuf,
        #[arg(long)]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
        #[arg(long, default_value_t = 31)]
        points: usize,
        /// Noise replicates per point.
        #[arg(long, default_value_t = 32)]
        seeds: usize,
        #[command(flatten)]
        noise: NoiseArgs,
    },
    /// Train across a ladder of noise amplitudes and tabulate the fitted coefficients.
    FourierVsNoise {
        #[arg(long, value_parser = parse_kind)]
        kind: NoiseKind,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0,0.0069,0.0089,0.013,0.014"
        )]
        amplitudes: Vec<f64>,
        /// Training replicates per amplitude.
        #[arg(long, default_value_t = 1)]
        seeds: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        max_epochs: Option<usize>,
        #[arg(long, value_enum, default_value_t = DistArg::Gaussian)]
        noise_distribution: DistArg,
    },
    /// Randomize one function's Fourier coefficients and measure the indicator change.
    RandomizeCoeff {
        #[arg(long)]
        fits: PathBuf,
        #[arg(long, value_enum)]
        which: Which,
        #[arg(long, default_value_t = 50)]
        trials: usize,
    },
    /// Concurrence and entanglement of formation of a JSON density matrix ("-" reads stdin).
    Eof {
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Re-run the command recorded in a manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
    },
}

fn read_input(path: &Path) -> Result<String> {
    let mut text = String::new();
    if path == Path::new("-") {
        std::io::stdin()
            .read_to_string(&mut text)
            .context("reading stdin")?;
    } else {
        text = fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    }
    Ok(text)
}

fn read_fits(path: &Path) -> Result<FitSet<f64>> {
    serde_json::from_str(&read_input(path)?)
        .map_err(|e| usage(format!("fits file {}: {e}", path.display())))
}

fn resolve_grid(common: &Common) -> Result<TimeGrid<f64>> {
    let d = TimeGrid::<f64>::default();
    TimeGrid::new(
        common.grid_dt.unwrap_or(d.dt),
        common.grid_steps.unwrap_or(d.n_steps),
    )
    .map_err(|e| usage(e.to_string()))
}

fn noise_spec(args: &NoiseArgs, seed: u64) -> Result<Option<NoiseSpec>> {
    match args.noise_kind {
        None if args.noise_amplitude != 0.0 => Err(usage("--noise-amplitude needs --noise-kind")),
        None => Ok(None),
        Some(kind) => {
            let mut spec = NoiseSpec::new(kind, args.noise_amplitude, seed)
                .map_err(|e| usage(e.to_string()))?;
            spec.distribution = args.noise_distribution.into();
            Ok(Some(spec))
        }
    }
}

fn load_config(
    path: Option<&Path>,
    common: &Common,
    max_epochs: Option<usize>,
) -> Result<TrainingConfig> {
    let mut cfg = match path {
        Some(p) => TrainingConfig::from_toml(&read_input(p)?)
            .map_err(|e| usage(format!("config {}: {e}", p.display())))?,
        None => TrainingConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
        if let Some(n) = &mut cfg.noise {
            n.seed = s;
        }
    }
    if common.grid_dt.is_some() || common.grid_steps.is_some() {
        cfg.grid = TimeGrid {
            dt: common.grid_dt.unwrap_or(cfg.grid.dt),
            n_steps: common.grid_steps.unwrap_or(cfg.grid.n_steps),
        };
    }
    if let Some(m) = max_epochs {
        cfg.max_epochs = m;
    }
    cfg.validate()
        .map_err(|e| usage(format!("invalid config: {e}")))?;
    Ok(cfg)
}

/// A command with every input resolved, ready to run or replay.
struct Resolved {
    command: &'static str,
    seed: u64,
    grid: TimeGrid<f64>,
    request: serde_json::Value,
}

fn resolved(
    command: &'static str,
    seed: u64,
    grid: TimeGrid<f64>,
    request: &impl Serialize,
) -> Result<Resolved> {
    Ok(Resolved {
        command,
        seed,
        grid,
        request: serde_json::to_value(request)?,
    })
}

fn decode<T: DeserializeOwned>(r: &Resolved) -> Result<T> {
    serde_json::from_value(r.request.clone())
        .map_err(|e| usage(format!("manifest request for {}: {e}", r.command)))
}

fn execute(r: &Resolved) -> Result<Outcome> {
    match r.command {
        "train" => commands::run_train(&decode::<TrainRequest>(r)?),
        "fit" => commands::run_fit(&decode::<FitRequest>(r)?, &r.grid),
        "sweep-state" => commands::run_sweep(&decode::<SweepRequest>(r)?, &r.grid),
        "fourier-vs-noise" => commands::run_fourier_vs_noise(&decode::<FourierNoiseRequest>(r)?),
        "randomize-coeff" => {
            commands::run_randomize(&decode::<RandomizeRequest>(r)?, &r.grid, r.seed)
        }
        other => Err(usage(format!("unknown command `{other}` in manifest"))),
    }
}

fn run_and_write(r: Resolved, out: &Path) -> Result<()> {
    let start = Instant::now();
    let outcome = execute(&r)?;
    let manifest = Manifest {
        tool: "qnnent".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: r.command.into(),
        seed: r.seed,
        grid: r.grid,
        request: r.request,
        files: Vec::new(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    write_outputs(out, &outcome.files, manifest)?;
    match outcome.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn eof_command(path: &Path) -> Result<()> {
    let value: serde_json::Value =
        serde_json::from_str(&read_input(path)?).map_err(|e| usage(format!("matrix JSON: {e}")))?;
    let m = parse_matrix(&value).map_err(usage)?;
    let c = concurrence_of_matrix(&m).map_err(|e| usage(e.to_string()))?;
    println!(
        "{}",
        serde_json::json!({ "concurrence": c, "eof": eof_from_concurrence(c) })
    );
    Ok(())
}

/// Accepts 16 `[re, im]` pairs in row-major order, or a 4×4 nesting whose
/// entries are `[re, im]` pairs or real numbers.
fn parse_matrix(v: &serde_json::Value) -> Result<CMatrix4<f64>, String> {
    fn entry(e: &serde_json::Value) -> Result<(f64, f64), String> {
        if let Some(x) = e.as_f64() {
            return Ok((x, 0.0));
        }
        match e.as_array().map(|a| a.as_slice()) {
            Some([re, im]) => Ok((
                re.as_f64().ok_or("non-numeric entry")?,
                im.as_f64().ok_or("non-numeric entry")?,
            )),
            _ => Err("entries must be numbers or [re, im] pairs".into()),
        }
    }
    let outer = v.as_array().ok_or("matrix must be a JSON array")?;
    let flat: Vec<&serde_json::Value> = match outer.len() {
        16 => outer.iter().collect(),
        4 => outer
            .iter()
            .map(|row| {
                row.as_array()
                    .filter(|r| r.len() == 4)
                    .ok_or("rows must have 4 entries")
            })
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .flatten()
            .collect(),
        n => return Err(format!("expected 16 entries or 4 rows, got {n}")),
    };
    let mut m = CMatrix4::zeros();
    for (i, e) in flat.into_iter().enumerate() {
        let (re, im) = entry(e)?;
        m[(i / 4, i % 4)] = qnnent_core::C::new(re, im);
    }
    Ok(m)
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    let out = || common.out.clone().ok_or_else(|| usage("--out is required"));
    let resolved = match &cli.command {
        Command::Eof { matrix } => return eof_command(matrix),
        Command::Replay { manifest } => {
            if common.seed.is_some() || common.grid_dt.is_some() || common.grid_steps.is_some() {
                return Err(usage("replay takes its seed and grid from the manifest"));
            }
            let m = Manifest::read(manifest).map_err(|e| usage(format!("{e:#}")))?;
            let command = [
                "train",
                "fit",
                "sweep-state",
                "fourier-vs-noise",
                "randomize-coeff",
            ]
            .into_iter()
            .find(|c| *c == m.command)
            .ok_or_else(|| usage(format!("unknown command `{}` in manifest", m.command)))?;
            Resolved {
                command,
                seed: m.seed,
                grid: m.grid,
                request: m.request,
            }
        }
        Command::Train {
            config,
            max_epochs,
            noise,
        } => {
            let mut cfg = load_config(config.as_deref(), common, *max_epochs)?;
            if let Some(spec) = noise_spec(noise, cfg.seed)? {
                cfg.noise = Some(spec);
            }
            cfg.validate()
                .map_err(|e| usage(format!("invalid config: {e}")))?;
            resolved(
                "train",
                cfg.seed,
                cfg.grid,
                &TrainRequest {
                    config: cfg.clone(),
                },
            )?
        }
        Command::Fit {
            schedule,
            order_k,
            order_eps,
            order_zeta,
        } => {
            for o in [order_k, order_eps, order_zeta] {
                if !(1..=2).contains(o) {
                    return Err(usage("Fourier orders must be 1 or 2"));
                }
            }
            let req = FitRequest {
                schedule_csv: read_input(schedule)?,
                orders: FitOrders {
                    k: *order_k,
                    eps: *order_eps,
                    zeta: *order_zeta,
                },
            };
            resolved(
                "fit",
                common.seed.unwrap_or(DEFAULT_SEED),
                resolve_grid(common)?,
                &req,
            )?
        }
        Command::SweepState {
            family,
            fits,
            from,
            to,
            points,
            seeds,
            noise,
        } => {
            let seed = common.seed.unwrap_or(DEFAULT_SEED);
            let (lo, hi) = family.default_range();
            let req = SweepRequest {
                family: *family,
                fits: read_fits(fits)?,
                noise: noise_spec(noise, seed)?,
                from: from.unwrap_or(lo),
                to: to.unwrap_or(hi),
                points: *points,
                seeds: *seeds,
            };
            resolved("sweep-state", seed, resolve_grid(common)?, &req)?
        }
        Command::FourierVsNoise {
            kind,
            amplitudes,
            seeds,
            config,
            max_epochs,
            noise_distribution,
        } => {
            let cfg = load_config(config.as_deref(), common, *max_epochs)?;
            let req = FourierNoiseRequest {
                config: cfg.clone(),
                kind: *kind,
                distribution: (*noise_distribution).into(),
                amplitudes: amplitudes.clone(),
                seeds: *seeds,
            };
            resolved("fourier-vs-noise", cfg.seed, cfg.grid, &req)?
        }
        Command::RandomizeCoeff {
            fits,
            which,
            trials,
        } => {
            let req = RandomizeRequest {
                fits: read_fits(fits)?,
                which: *which,
                trials: *trials,
            };
            resolved(
                "randomize-coeff",
                common.seed.unwrap_or(DEFAULT_SEED),
                resolve_grid(common)?,
                &req,
            )?
        }
    };
    run_and_write(resolved, &out()?)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return match core {
                CoreError::TrainingDiverged { .. } => 3,
                CoreError::DegenerateState { .. } => 1,
                _ => 2,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
