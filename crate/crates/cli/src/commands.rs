//! Experiment commands. Each one takes a fully resolved request and returns
//! the files it produces; `main` handles argument parsing and writing.

use std::fmt;

use anyhow::{Context, Result};
use qnnent_core::fourier::FitSet;
use qnnent_core::trainer::{history_to_csv, TrainOutcome};
use qnnent_core::{
    default_training_set, entanglement_of_formation, make_m_state, make_p_state,
    output_correlation, train, DensityMatrix, Error as CoreError, FitOrders, FitTarget, FourierFit,
    Indicator, NoiseDistribution, NoiseKind, NoiseSpec, ParameterSchedule, PureState, RandomSource,
    TimeGrid, TrainingConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::output::Table;

pub type Files = Vec<(String, String)>;

/// Bad input from the user: maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Files a command produced, plus the error that stopped it early, if any.
pub struct Outcome {
    pub files: Files,
    pub failure: Option<anyhow::Error>,
}

impl From<Files> for Outcome {
    fn from(files: Files) -> Self {
        Outcome {
            files,
            failure: None,
        }
    }
}

fn json_file(name: &str, value: &impl Serialize) -> Result<(String, String)> {
    Ok((
        name.to_string(),
        serde_json::to_string_pretty(value)? + "\n",
    ))
}

/// Mean of the last tenth (at least one) of the recorded rms values.
pub fn asymptotic_rms(outcome: &TrainOutcome<f64>) -> f64 {
    let h = &outcome.history;
    let tail = (h.len() / 10).max(1);
    h[h.len() - tail..].iter().map(|r| r.rms_error).sum::<f64>() / tail as f64
}

fn fit_quality(
    fits: &FitSet<f64>,
    schedule: &ParameterSchedule<f64>,
    orders: FitOrders,
) -> Result<String> {
    let mut t = Table::new(&[
        "function",
        "order",
        "a0",
        "a1",
        "b1",
        "a2",
        "b2",
        "omega",
        "rms_residual",
        "peak_to_peak",
    ]);
    for target in FitTarget::ALL {
        let f = fits.get(target);
        let col = schedule.column(target.column());
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let order = match target {
            FitTarget::K => orders.k,
            FitTarget::Eps => orders.eps,
            FitTarget::Zeta => orders.zeta,
        };
        t.push(vec![
            target.name().into(),
            order.into(),
            f.a0.into(),
            f.a1.into(),
            f.b1.into(),
            f.a2.into(),
            f.b2.into(),
            f.omega.into(),
            f.rms_residual.into(),
            (hi - lo).into(),
        ]);
    }
    t.render()
}

fn fit_orders_fits(
    schedule: &ParameterSchedule<f64>,
    grid: &TimeGrid<f64>,
    orders: FitOrders,
) -> Result<FitSet<f64>> {
    Ok(FitSet::fit_schedule(schedule, grid, orders)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRequest {
    pub config: TrainingConfig,
}

pub fn run_train(req: &TrainRequest) -> Result<Outcome> {
    let cfg = &req.config;
    cfg.validate()
        .map_err(|e| usage(format!("invalid config: {e}")))?;
    let mut files: Files = vec![("config.toml".into(), cfg.to_toml()?)];
    let set = default_training_set::<f64>();
    let outcome = match train(&set, cfg, &mut RandomSource::from_seed(cfg.seed)) {
        Ok(o) => o,
        Err(CoreError::TrainingDiverged { epoch, history }) => {
            files.push(("history.csv".into(), history_to_csv(&history)));
            return Ok(Outcome {
                files,
                failure: Some(
                    CoreError::TrainingDiverged {
                        epoch,
                        history: Vec::new(),
                    }
                    .into(),
                ),
            });
        }
        Err(e) => return Err(e.into()),
    };
    let fits = fit_orders_fits(&outcome.schedule, &cfg.grid, cfg.fit_orders)?;
    files.push(("history.csv".into(), history_to_csv(&outcome.history)));
    files.push(("schedule.csv".into(), outcome.schedule.to_csv(&cfg.grid)));
    files.push(json_file("fits.json", &fits)?);
    files.push((
        "fit_quality.csv".into(),
        fit_quality(&fits, &outcome.schedule, cfg.fit_orders)?,
    ));
    Ok(files.into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRequest {
    pub schedule_csv: String,
    pub orders: FitOrders,
}

pub fn run_fit(req: &FitRequest, grid: &TimeGrid<f64>) -> Result<Outcome> {
    let schedule = ParameterSchedule::<f64>::from_csv(&req.schedule_csv)
        .map_err(|e| usage(format!("schedule: {e}")))?;
    if schedule.len() != grid.n_steps {
        return Err(usage(format!(
            "schedule has {} steps but the grid has {}; pass --grid-steps",
            schedule.len(),
            grid.n_steps
        )));
    }
    let fits = fit_orders_fits(&schedule, grid, req.orders)?;
    Ok(vec![
        json_file("fits.json", &fits)?,
        (
            "fit_quality.csv".into(),
            fit_quality(&fits, &schedule, req.orders)?,
        ),
    ]
    .into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum Family {
    #[value(name = "P", alias = "p")]
    P,
    #[value(name = "M", alias = "m")]
    M,
}

impl Family {
    pub fn default_range(self) -> (f64, f64) {
        match self {
            Family::P => (0.0, 4.0),
            Family::M => (0.0, 10.0),
        }
    }

    pub fn state(self, x: f64) -> Result<DensityMatrix<f64>> {
        Ok(match self {
            Family::P => make_p_state(x)?.density_matrix(),
            Family::M => make_m_state(x)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRequest {
    pub family: Family,
    pub fits: FitSet<f64>,
    pub noise: Option<NoiseSpec>,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    pub seeds: usize,
}

pub const SWEEP_HEADER: [&str; 6] = [
    "param",
    "qnn_output",
    "eof_clean",
    "eof_noisy_mean",
    "eof_noisy_stderr",
    "n_seeds",
];

/// One sweep point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub param: f64,
    pub qnn_output: f64,
    pub eof_clean: f64,
    pub eof_noisy_mean: f64,
    pub eof_noisy_stderr: f64,
    pub n_seeds: usize,
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn sweep_values(from: f64, to: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![from];
    }
    (0..points)
        .map(|i| {
            if i + 1 == points {
                to
            } else {
                from + (to - from) * i as f64 / (points - 1) as f64
            }
        })
        .collect()
}

/// Indicator and entanglement along a state family. Noise replicate `r`
/// uses stream `r` of the noise seed at every sweep point.
pub fn sweep_rows(req: &SweepRequest, grid: &TimeGrid<f64>) -> Result<Vec<SweepRow>> {
    if !(req.from.is_finite() && req.to.is_finite())
        || req.from > req.to
        || (req.from == req.to && req.points > 1)
    {
        return Err(usage(
            "sweep range must satisfy from < to (or from = to with one point)",
        ));
    }
    if req.points == 0 || req.seeds == 0 {
        return Err(usage("points and seeds must be at least 1"));
    }
    if let Some(n) = &req.noise {
        n.validate().map_err(|e| usage(e.to_string()))?;
    }
    let noise = req.noise.filter(|n| !n.is_identity());
    let ind = Indicator::from_fits(&req.fits, grid)?;
    sweep_values(req.from, req.to, req.points)
        .into_par_iter()
        .map(|x| {
            let rho = req.family.state(x).map_err(|e| usage(e.to_string()))?;
            let eof_clean = entanglement_of_formation(&rho);
            let Some(spec) = noise else {
                let q = ind.evaluate(&rho, None, &mut RandomSource::from_seed(0))?;
                return Ok(SweepRow {
                    param: x,
                    qnn_output: q,
                    eof_clean,
                    eof_noisy_mean: eof_clean,
                    eof_noisy_stderr: 0.0,
                    n_seeds: 1,
                });
            };
            let mut qnn = Vec::with_capacity(req.seeds);
            let mut eof = Vec::with_capacity(req.seeds);
            for r in 0..req.seeds {
                let mut rng = RandomSource::stream(spec.seed, r as u64);
                let fin = ind.final_state(&rho, Some(&spec), &mut rng)?;
                qnn.push(output_correlation(&fin));
                eof.push(entanglement_of_formation(&ind.input_image(&fin)));
            }
            let (q, _) = mean_stderr(&qnn);
            let (e, se) = mean_stderr(&eof);
            Ok(SweepRow {
                param: x,
                qnn_output: q,
                eof_clean,
                eof_noisy_mean: e,
                eof_noisy_stderr: se,
                n_seeds: req.seeds,
            })
        })
        .collect()
}

pub fn run_sweep(req: &SweepRequest, grid: &TimeGrid<f64>) -> Result<Outcome> {
    let mut t = Table::new(&SWEEP_HEADER);
    for r in sweep_rows(req, grid)? {
        t.push(vec![
            r.param.into(),
            r.qnn_output.into(),
            r.eof_clean.into(),
            r.eof_noisy_mean.into(),
            r.eof_noisy_stderr.into(),
            r.n_seeds.into(),
        ]);
    }
    Ok(vec![("sweep.csv".into(), t.render()?)].into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierNoiseRequest {
    pub config: TrainingConfig,
    pub kind: NoiseKind,
    pub distribution: NoiseDistribution,
    pub amplitudes: Vec<f64>,
    pub seeds: usize,
}

/// One training run of the noise ladder.
#[derive(Clone, Debug)]
pub struct LadderRun {
    pub amplitude: f64,
    pub seed: u64,
    pub outcome: TrainOutcome<f64>,
    pub fits: FitSet<f64>,
}

/// Config for replicate `j` at `amplitude`: seed `base + j` drives both the
/// initial jitter and the noise.
pub fn ladder_config(
    base: &TrainingConfig,
    kind: NoiseKind,
    distribution: NoiseDistribution,
    amplitude: f64,
    j: usize,
) -> TrainingConfig {
    let seed = base.seed.wrapping_add(j as u64);
    let mut cfg = base.clone();
    cfg.seed = seed;
    cfg.noise = (amplitude > 0.0).then_some(NoiseSpec {
        kind,
        amplitude,
        seed,
        distribution,
    });
    cfg
}

pub fn ladder_runs(req: &FourierNoiseRequest) -> Result<Vec<LadderRun>> {
    if req.seeds == 0 {
        return Err(usage("seeds must be at least 1"));
    }
    if req.amplitudes.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
        return Err(usage("noise amplitudes must be finite and non-negative"));
    }
    req.config
        .validate()
        .map_err(|e| usage(format!("invalid config: {e}")))?;
    let mut amps = req.amplitudes.clone();
    amps.sort_by(f64::total_cmp);
    amps.dedup();
    let jobs: Vec<(f64, usize)> = amps
        .iter()
        .flat_map(|&a| (0..req.seeds).map(move |j| (a, j)))
        .collect();
    let set = default_training_set::<f64>();
    jobs.into_par_iter()
        .map(|(amplitude, j)| {
            let cfg = ladder_config(&req.config, req.kind, req.distribution, amplitude, j);
            let outcome = train(&set, &cfg, &mut RandomSource::from_seed(cfg.seed))
                .with_context(|| format!("training at amplitude {amplitude}, seed {}", cfg.seed))?;
            let fits = fit_orders_fits(&outcome.schedule, &cfg.grid, cfg.fit_orders)?;
            Ok(LadderRun {
                amplitude,
                seed: cfg.seed,
                outcome,
                fits,
            })
        })
        .collect()
}

pub fn run_fourier_vs_noise(req: &FourierNoiseRequest) -> Result<Outcome> {
    let runs = ladder_runs(req)?;
    let mut coeffs = Table::new(&["amplitude", "seed", "function", "coefficient", "value"]);
    let mut training = Table::new(&["amplitude", "seed", "epochs", "final_rms", "asymptotic_rms"]);
    for run in &runs {
        for target in FitTarget::ALL {
            let f = run.fits.get(target);
            for (name, v) in [
                ("a0", f.a0),
                ("a1", f.a1),
                ("b1", f.b1),
                ("a2", f.a2),
                ("b2", f.b2),
                ("omega", f.omega),
                ("rms_residual", f.rms_residual),
            ] {
                coeffs.push(vec![
                    run.amplitude.into(),
                    run.seed.into(),
                    target.name().into(),
                    name.into(),
                    v.into(),
                ]);
            }
        }
        training.push(vec![
            run.amplitude.into(),
            run.seed.into(),
            run.outcome.history.len().into(),
            run.outcome.final_rms().into(),
            asymptotic_rms(&run.outcome).into(),
        ]);
    }
    Ok(vec![
        ("coefficients.csv".into(), coeffs.render()?),
        ("training.csv".into(), training.render()?),
    ]
    .into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum Which {
    #[value(name = "K")]
    #[serde(rename = "K")]
    K,
    #[value(name = "eps")]
    #[serde(rename = "eps")]
    Eps,
    #[value(name = "zeta")]
    #[serde(rename = "zeta")]
    Zeta,
    #[value(name = "omega-K")]
    #[serde(rename = "omega-K")]
    OmegaK,
    #[value(name = "omega-eps")]
    #[serde(rename = "omega-eps")]
    OmegaEps,
    #[value(name = "omega-zeta")]
    #[serde(rename = "omega-zeta")]
    OmegaZeta,
}

impl Which {
    pub fn target(self) -> FitTarget {
        match self {
            Which::K | Which::OmegaK => FitTarget::K,
            Which::Eps | Which::OmegaEps => FitTarget::Eps,
            Which::Zeta | Which::OmegaZeta => FitTarget::Zeta,
        }
    }

    pub fn omega_only(self) -> bool {
        matches!(self, Which::OmegaK | Which::OmegaEps | Which::OmegaZeta)
    }

    pub fn name(self) -> &'static str {
        match self {
            Which::K => "K",
            Which::Eps => "eps",
            Which::Zeta => "zeta",
            Which::OmegaK => "omega-K",
            Which::OmegaEps => "omega-eps",
            Which::OmegaZeta => "omega-zeta",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomizeRequest {
    pub fits: FitSet<f64>,
    pub which: Which,
    pub trials: usize,
}

/// Fixed test battery: P(γ), M(δ), and the product training states.
pub fn state_battery() -> Result<Vec<(String, DensityMatrix<f64>)>> {
    let mut out = Vec::new();
    for g in [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0] {
        out.push((format!("P({g})"), make_p_state(g)?.density_matrix()));
    }
    for d in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0] {
        out.push((format!("M({d})"), make_m_state(d)?));
    }
    out.push(("Flat".into(), PureState::flat().density_matrix()));
    out.push(("C".into(), PureState::c_state().density_matrix()));
    Ok(out)
}

fn log_uniform(rng: &mut RandomSource) -> f64 {
    2f64.powf(rng.uniform(-1.0, 1.0))
}

/// Random replacement of the coefficients of one function: each magnitude is
/// rescaled by a log-uniform factor in [1/2, 2]. The constant keeps its sign,
/// harmonic coefficients get a random sign. The `omega-*` variants rescale ω
/// only.
pub fn randomize_fit(
    fit: &FourierFit<f64>,
    omega_only: bool,
    rng: &mut RandomSource,
) -> FourierFit<f64> {
    let mut f = *fit;
    if omega_only {
        f.omega *= log_uniform(rng);
        return f;
    }
    f.a0 *= log_uniform(rng);
    for c in [&mut f.a1, &mut f.b1, &mut f.a2, &mut f.b2] {
        let sign = if rng.uniform(0.0, 1.0) < 0.5 {
            -1.0
        } else {
            1.0
        };
        *c *= sign * log_uniform(rng);
    }
    f
}

pub fn run_randomize(req: &RandomizeRequest, grid: &TimeGrid<f64>, seed: u64) -> Result<Outcome> {
    let battery = state_battery()?;
    let base = Indicator::from_fits(&req.fits, grid)?;
    let baseline: Vec<f64> = battery
        .iter()
        .map(|(_, rho)| base.evaluate(rho, None, &mut RandomSource::from_seed(0)))
        .collect::<qnnent_core::Result<_>>()?;
    let trials: Vec<Vec<f64>> = (0..req.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = RandomSource::stream(seed, i as u64);
            let mut fits = req.fits;
            let target = req.which.target();
            *fits.get_mut(target) =
                randomize_fit(fits.get(target), req.which.omega_only(), &mut rng);
            let ind = Indicator::from_fits(&fits, grid)?;
            battery
                .iter()
                .map(|(_, rho)| Ok(ind.evaluate(rho, None, &mut RandomSource::from_seed(0))?))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut rows = Table::new(&["trial", "state", "baseline", "randomized", "abs_error"]);
    let mut errors = Vec::new();
    for (i, values) in trials.iter().enumerate() {
        for ((name, _), (b, v)) in battery.iter().zip(baseline.iter().zip(values)) {
            rows.push(vec![
                i.into(),
                name.clone().into(),
                (*b).into(),
                (*v).into(),
                (v - b).abs().into(),
            ]);
            errors.push((v - b).abs());
        }
    }
    let mut summary = Table::new(&[
        "which",
        "trials",
        "mean_abs_error",
        "max_abs_error",
        "rms_error",
    ]);
    if !errors.is_empty() {
        let n = errors.len() as f64;
        summary.push(vec![
            req.which.name().into(),
            req.trials.into(),
            (errors.iter().sum::<f64>() / n).into(),
            errors.iter().copied().fold(0.0, f64::max).into(),
            (errors.iter().map(|e| e * e).sum::<f64>() / n)
                .sqrt()
                .into(),
        ]);
    }
    Ok(vec![
        ("trials.csv".into(), rows.render()?),
        ("summary.csv".into(), summary.render()?),
    ]
    .into())
}
