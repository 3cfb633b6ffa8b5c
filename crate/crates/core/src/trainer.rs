//! Supervised training of the parameter schedule.
//!
//! The loss for one sample is `L = (o − target)²` with
//! `o = (Tr[ρ(t_f) σz⊗σz])²`. Gradients with respect to every per-step
//! parameter come from an adjoint sweep over the discrete unitary steps: one
//! forward trajectory, then a costate `G_N = ∂L/∂ρ(t_f)` carried backwards as
//! `G_k = U_k† G_{k+1} U_k`. Each step contributes
//! `∂L/∂p_k = 2 Re Tr[G_{k+1} (∂U_k/∂p) ρ_k U_k†]`, where `∂U_k/∂p` is the
//! exact Fréchet derivative of the matrix exponential in the eigenbasis of `H_k`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{
    final_state, output_correlation, propagate_with, step_propagators, zz_expectation,
    StepPropagator, TimeGrid,
};
use crate::fourier::{sample_to_schedule, FitOrders, FitSet};
use crate::hamiltonian::{hamiltonian_unchecked, ParamKind};
use crate::linalg::{c, zz, CMatrix4, DIM};
use crate::noise::{NoiseSpec, RandomSource};
use crate::scalar::Scalar;
use crate::schedule::ParameterSchedule;
use crate::state::{DensityMatrix, PureState};

pub const HISTORY_CSV_HEADER: &str = "epoch,rms,out_bell,out_flat,out_c,out_p";

/// Gradient layout matches the schedule: one `[K_A, K_B, ε_A, ε_B, ζ]` row per step.
pub type Gradient<T> = Vec<[T; 5]>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrainingSample<T: Scalar> {
    pub initial: PureState<T>,
    pub target: T,
}

impl<T: Scalar> TrainingSample<T> {
    pub fn new(initial: PureState<T>, target: T) -> Result<Self> {
        if !(target >= T::zero() && target <= T::one()) {
            return Err(Error::invalid("target must lie in [0, 1]"));
        }
        Ok(TrainingSample { initial, target })
    }

    pub fn cast<U: Scalar>(&self) -> TrainingSample<U> {
        TrainingSample {
            initial: self.initial.cast(),
            target: U::lit(self.target.to_f64_lossy()),
        }
    }
}

/// Bell → 1, Flat → 0, C → 0, P → 0.44.
pub fn default_training_set<T: Scalar>() -> Vec<TrainingSample<T>> {
    vec![
        TrainingSample {
            initial: PureState::bell(),
            target: T::one(),
        },
        TrainingSample {
            initial: PureState::flat(),
            target: T::zero(),
        },
        TrainingSample {
            initial: PureState::c_state(),
            target: T::zero(),
        },
        TrainingSample {
            initial: PureState::p_state(),
            target: T::lit(0.44),
        },
    ]
}

/// Constant starting schedule, each function scaled by `1 + jitter·u` with a
/// single `u ~ U(-1, 1)` per column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub k: f64,
    pub eps: f64,
    pub zeta: f64,
    pub jitter: f64,
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec {
            k: 2.5e-3,
            eps: 1e-4,
            zeta: 1e-4,
            jitter: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub stop_rms: f64,
    /// Seed for the initial-schedule jitter.
    pub seed: u64,
    #[serde(default = "default_true")]
    pub tie_k: bool,
    #[serde(default = "default_true")]
    pub tie_eps: bool,
    pub grid: TimeGrid<f64>,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub fit_orders: FitOrders,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
}

fn default_true() -> bool {
    true
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 2e-4,
            max_epochs: 500,
            stop_rms: 1e-3,
            seed: 1,
            tie_k: true,
            tie_eps: true,
            grid: TimeGrid::default(),
            init: InitSpec::default(),
            fit_orders: FitOrders::default(),
            noise: None,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("max_epochs must be at least 1"));
        }
        if !(self.stop_rms >= 0.0) {
            return Err(Error::invalid("stop_rms must be non-negative"));
        }
        self.grid.validate()?;
        let i = &self.init;
        if ![i.k, i.eps, i.zeta, i.jitter].iter().all(|v| v.is_finite()) || i.jitter < 0.0 {
            return Err(Error::invalid(
                "init values must be finite with non-negative jitter",
            ));
        }
        for o in [self.fit_orders.k, self.fit_orders.eps, self.fit_orders.zeta] {
            if !(1..=2).contains(&o) {
                return Err(Error::invalid("fit orders must be 1 or 2"));
            }
        }
        if let Some(n) = &self.noise {
            n.validate()?;
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainingConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn grid_as<T: Scalar>(&self) -> Result<TimeGrid<T>> {
        TimeGrid::new(T::lit(self.grid.dt), self.grid.n_steps)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub rms_error: f64,
    pub per_sample_outputs: Vec<f64>,
}

/// History as CSV with header `epoch,rms,out_bell,out_flat,out_c,out_p`.
pub fn history_to_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from(HISTORY_CSV_HEADER);
    out.push('\n');
    for r in history {
        out.push_str(&format!(
            "{},{}",
            r.epoch,
            crate::schedule::fmt_float(r.rms_error)
        ));
        for o in &r.per_sample_outputs {
            out.push(',');
            out.push_str(&crate::schedule::fmt_float(*o));
        }
        out.push('\n');
    }
    out
}

/// Exact derivatives `∂U/∂p` of one step's propagator for all five
/// parameters, stored in the eigenbasis of that step's Hamiltonian.
struct StepDerivative<T: Scalar> {
    dexp: [CMatrix4<T>; 5],
}

impl<T: Scalar> StepDerivative<T> {
    fn new(p: &StepPropagator<T>) -> Self {
        let e = &p.eigen.values;
        let dt = p.dt;
        // φ_ab = (e^{λa} − e^{λb}) / (λa − λb) with λ = −i e dt, written as
        // e^{λb} · (e^{iθ} − 1)/(iθ), θ = −dt (e_a − e_b), to avoid cancellation.
        let mut phi = CMatrix4::<T>::zeros();
        for a in 0..DIM {
            for b in 0..DIM {
                let theta = -dt * (e[a] - e[b]);
                let base = c((-e[b] * dt).cos(), (-e[b] * dt).sin());
                let ratio = if theta == T::zero() {
                    c(T::one(), T::zero())
                } else {
                    let half = (theta * T::lit(0.5)).sin();
                    c(theta.sin() / theta, T::lit(2.0) * half * half / theta)
                };
                phi[(a, b)] = base * ratio;
            }
        }
        let minus_i_dt = c(T::zero(), -dt);
        let dexp = ParamKind::ALL.map(|kind| {
            let g = p.eigen.to_eigenbasis(&kind.generator());
            let mut d = CMatrix4::zeros();
            for a in 0..DIM {
                for b in 0..DIM {
                    d[(a, b)] = minus_i_dt * g[(a, b)] * phi[(a, b)];
                }
            }
            d
        });
        StepDerivative { dexp }
    }
}

/// Propagators and their derivatives for one schedule.
struct Model<T: Scalar> {
    props: Vec<StepPropagator<T>>,
    derivs: Vec<StepDerivative<T>>,
}

impl<T: Scalar> Model<T> {
    fn new(schedule: &ParameterSchedule<T>, grid: &TimeGrid<T>) -> Result<Self> {
        let props = step_propagators(schedule, grid)?;
        let derivs = props.iter().map(StepDerivative::new).collect();
        Ok(Model { props, derivs })
    }

    /// Forward pass plus adjoint sweep for one sample. Noise, if given, is
    /// applied on the forward pass only and treated as a constant by the sweep.
    fn loss_and_gradient(
        &self,
        sample: &TrainingSample<T>,
        noise: Option<&NoiseSpec>,
        rng: &mut RandomSource,
    ) -> Result<(T, Gradient<T>)> {
        let traj = propagate_with(&sample.initial.density_matrix(), &self.props, noise, rng)?;
        let last = traj.last().expect("trajectory is never empty");
        let corr = zz_expectation(last);
        let output = corr * corr;
        let err = output - sample.target;

        let mut grad = vec![[T::zero(); 5]; self.props.len()];
        if err == T::zero() {
            return Ok((output, grad));
        }
        let mut costate = zz::<T>().scale(T::lit(4.0) * err * corr);
        for k in (0..self.props.len()).rev() {
            let p = &self.props[k];
            let m = p
                .eigen
                .to_eigenbasis(&(*traj[k].matrix() * p.unitary.adjoint() * costate));
            for (j, d) in self.derivs[k].dexp.iter().enumerate() {
                grad[k][j] = T::lit(2.0) * d.trace_product(&m).re;
            }
            costate = p.unitary.adjoint() * costate * p.unitary;
        }
        Ok((output, grad))
    }
}

/// Folds the gradient of tied columns together: each member of a tied
/// pair receives the sum of the pair.
pub fn tie_gradient<T: Scalar>(grad: &mut Gradient<T>, tie_k: bool, tie_eps: bool) {
    for row in grad.iter_mut() {
        if tie_k {
            let s = row[0] + row[1];
            row[0] = s;
            row[1] = s;
        }
        if tie_eps {
            let s = row[2] + row[3];
            row[2] = s;
            row[3] = s;
        }
    }
}

/// Network output and full trajectory for one sample.
pub fn forward<T: Scalar>(
    sample: &TrainingSample<T>,
    schedule: &ParameterSchedule<T>,
    grid: &TimeGrid<T>,
    noise: Option<&NoiseSpec>,
    rng: &mut RandomSource,
) -> Result<(T, Vec<DensityMatrix<T>>)> {
    let props = step_propagators(schedule, grid)?;
    let traj = propagate_with(&sample.initial.density_matrix(), &props, noise, rng)?;
    Ok((output_correlation(traj.last().unwrap()), traj))
}

/// `∂L/∂p` for every schedule entry by the adjoint method (noise-free).
pub fn adjoint_gradient<T: Scalar>(
    sample: &TrainingSample<T>,
    schedule: &ParameterSchedule<T>,
    grid: &TimeGrid<T>,
) -> Result<Gradient<T>> {
    let model = Model::new(schedule, grid)?;
    let (_, mut g) = model.loss_and_gradient(sample, None, &mut RandomSource::from_seed(0))?;
    tie_gradient(&mut g, schedule.tie_k(), schedule.tie_eps());
    Ok(g)
}

/// Central difference `(f(x + h e_i) − f(x − h e_i)) / 2h` for every coordinate.
pub fn central_difference<T: Scalar, F: FnMut(&[T]) -> T>(mut f: F, x: &[T], h: T) -> Vec<T> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (h + h)
        })
        .collect()
}

/// Central finite-difference gradient of the sample loss, using forward
/// propagation only.
///
/// Each perturbed parameter (moved together with anything tied to it) gets a
/// `±h` pair of forward passes. The difference `ρ₊ − ρ₋` is carried through the
/// remaining steps as its own linear trajectory, so `L(p + h) − L(p − h)` is
/// formed without subtracting two nearly equal losses.
pub fn fd_gradient<T: Scalar>(
    sample: &TrainingSample<T>,
    schedule: &ParameterSchedule<T>,
    grid: &TimeGrid<T>,
    h: T,
) -> Result<Gradient<T>> {
    fd_gradient_local::<T, T>(sample, schedule, grid, h)
}

/// [`fd_gradient`] with the perturbed step evaluated in the scalar `W`.
///
/// The only cancellation-prone quantity is `U₊ ρ U₊† − U₋ ρ U₋†` at the
/// perturbed step, where independent rounding in the two propagators is
/// divided by `2h`. Forming it in a wider `W` removes that rounding floor; the
/// linear propagation of the difference afterwards stays in `T`.
pub fn fd_gradient_local<T: Scalar, W: Scalar>(
    sample: &TrainingSample<T>,
    schedule: &ParameterSchedule<T>,
    grid: &TimeGrid<T>,
    h: T,
) -> Result<Gradient<T>> {
    if !(h > T::zero()) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let props = step_propagators(schedule, grid)?;
    let rho0 = sample.initial.density_matrix();
    let traj = propagate_with(&rho0, &props, None, &mut RandomSource::from_seed(0))?;
    let observable = zz::<T>();
    let n = props.len();
    let wide = |v: T| W::lit(v.to_f64_lossy());
    let (h_w, dt_w) = (wide(h), wide(grid.dt));

    let jobs: Vec<(usize, ParamKind)> = (0..n)
        .flat_map(|k| schedule.free_params().into_iter().map(move |p| (k, p)))
        .collect();
    let values: Vec<T> = jobs
        .par_iter()
        .map(|&(k, kind)| {
            let mut up = schedule.values()[k].map(wide);
            let mut down = up;
            for member in schedule.tied_group(kind) {
                up[member.index()] += h_w;
                down[member.index()] -= h_w;
            }
            let u_up = StepPropagator::new(&hamiltonian_unchecked(&up), dt_w).unitary;
            let u_down = StepPropagator::new(&hamiltonian_unchecked(&down), dt_w).unitary;
            let rho_k = traj[k].matrix().cast::<W>();
            let plus_w = u_up.sandwich(&rho_k);
            let mut plus = plus_w.hermitian_part().cast::<T>();
            let mut diff = (plus_w - u_down.sandwich(&rho_k)).cast::<T>();
            for p in &props[k + 1..] {
                plus = p.evolve(&plus);
                diff = p.unitary.sandwich(&diff);
            }
            let c_plus = plus.trace_product(&observable).re;
            let d_c = diff.trace_product(&observable).re;
            let c_minus = c_plus - d_c;
            let (o_plus, o_minus) = (c_plus * c_plus, c_minus * c_minus);
            let d_o = d_c * (c_plus + c_minus);
            let d_loss = d_o * (o_plus + o_minus - sample.target - sample.target);
            d_loss / (h + h)
        })
        .collect();

    let mut grad = vec![[T::zero(); 5]; n];
    for (&(k, kind), v) in jobs.iter().zip(values) {
        for member in schedule.tied_group(kind) {
            grad[k][member.index()] = v;
        }
    }
    Ok(grad)
}

/// Flags a run whose rms is non-finite, or has stayed above ten times its
/// first value for ten consecutive epochs.
#[derive(Clone, Debug, Default)]
pub struct DivergenceMonitor {
    first: Option<f64>,
    over_limit: usize,
}

impl DivergenceMonitor {
    pub const FACTOR: f64 = 10.0;
    pub const PATIENCE: usize = 10;

    /// Records one epoch; returns `true` once the run counts as diverged.
    pub fn observe(&mut self, rms: f64) -> bool {
        if !rms.is_finite() {
            return true;
        }
        let first = *self.first.get_or_insert(rms);
        if rms > Self::FACTOR * first {
            self.over_limit += 1;
        } else {
            self.over_limit = 0;
        }
        self.over_limit >= Self::PATIENCE
    }
}

/// Result of [`train`].
#[derive(Clone, Debug)]
pub struct TrainOutcome<T: Scalar> {
    pub schedule: ParameterSchedule<T>,
    pub history: Vec<EpochRecord>,
}

impl<T: Scalar> TrainOutcome<T> {
    pub fn final_rms(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.rms_error)
    }
}

pub fn initial_schedule<T: Scalar>(
    config: &TrainingConfig,
    rng: &mut RandomSource,
) -> Result<ParameterSchedule<T>> {
    let i = &config.init;
    let mut jitter = |base: f64| base * (1.0 + i.jitter * rng.uniform(-1.0, 1.0));
    let mut row = [
        jitter(i.k),
        jitter(i.k),
        jitter(i.eps),
        jitter(i.eps),
        jitter(i.zeta),
    ];
    if config.tie_k {
        row[1] = row[0];
    }
    if config.tie_eps {
        row[3] = row[2];
    }
    ParameterSchedule::new(
        vec![row.map(T::lit); config.grid.n_steps],
        config.tie_k,
        config.tie_eps,
    )
}

/// Batch gradient descent over `set` starting from [`initial_schedule`].
pub fn train<T: Scalar>(
    set: &[TrainingSample<T>],
    config: &TrainingConfig,
    rng: &mut RandomSource,
) -> Result<TrainOutcome<T>> {
    let start = initial_schedule(config, rng)?;
    train_from(set, config, start)
}

/// Batch gradient descent from a given starting schedule.
///
/// Each epoch sums the per-sample gradients, records the outputs, and steps
/// by `−learning_rate · gradient`. Noise, when configured, uses stream
/// `1 + epoch · len(set) + sample` of the noise seed.
pub fn train_from<T: Scalar>(
    set: &[TrainingSample<T>],
    config: &TrainingConfig,
    start: ParameterSchedule<T>,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let grid = config.grid_as::<T>()?;
    let noise = config.noise.filter(|n| !n.is_identity());
    let lr = T::lit(config.learning_rate);
    let mut schedule = start;
    let mut history: Vec<EpochRecord> = Vec::new();
    let mut monitor = DivergenceMonitor::default();

    for epoch in 0..config.max_epochs {
        let model = match Model::new(&schedule, &grid) {
            Ok(m) => m,
            Err(Error::InvalidState(_)) if epoch > 0 => {
                return Err(Error::TrainingDiverged { epoch, history })
            }
            Err(e) => return Err(e),
        };
        let per_sample: Vec<(T, Gradient<T>)> = set
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let mut rng = match &noise {
                    Some(n) => RandomSource::stream(n.seed, 1 + (epoch * set.len() + i) as u64),
                    None => RandomSource::from_seed(0),
                };
                model.loss_and_gradient(s, noise.as_ref(), &mut rng)
            })
            .collect::<Result<_>>()?;

        let outputs: Vec<f64> = per_sample.iter().map(|(o, _)| o.to_f64_lossy()).collect();
        let mse = set
            .iter()
            .zip(&outputs)
            .map(|(s, o)| (o - s.target.to_f64_lossy()).powi(2))
            .sum::<f64>()
            / set.len() as f64;
        let rms = mse.sqrt();
        history.push(EpochRecord {
            epoch,
            rms_error: rms,
            per_sample_outputs: outputs,
        });

        if monitor.observe(rms) {
            return Err(Error::TrainingDiverged { epoch, history });
        }
        if rms <= config.stop_rms || epoch + 1 == config.max_epochs {
            break;
        }

        let mut total = vec![[T::zero(); 5]; schedule.len()];
        for (_, g) in &per_sample {
            for (acc, row) in total.iter_mut().zip(g) {
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += *v;
                }
            }
        }
        tie_gradient(&mut total, schedule.tie_k(), schedule.tie_eps());
        schedule.axpy(-lr, &total)?;
        if schedule.values().iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::TrainingDiverged { epoch, history });
        }
    }
    Ok(TrainOutcome { schedule, history })
}

/// Trained network ready to be applied to arbitrary input states.
pub struct Indicator<T: Scalar> {
    props: Vec<StepPropagator<T>>,
    inverse: CMatrix4<T>,
}

impl<T: Scalar> Indicator<T> {
    pub fn from_schedule(schedule: &ParameterSchedule<T>, grid: &TimeGrid<T>) -> Result<Self> {
        let props = step_propagators(schedule, grid)?;
        let total = props
            .iter()
            .fold(CMatrix4::identity(), |acc, p| p.unitary * acc);
        Ok(Indicator {
            props,
            inverse: total.adjoint(),
        })
    }

    pub fn from_fits(fits: &FitSet<T>, grid: &TimeGrid<T>) -> Result<Self> {
        Self::from_schedule(&sample_to_schedule(fits, grid)?, grid)
    }

    pub fn final_state(
        &self,
        rho: &DensityMatrix<T>,
        noise: Option<&NoiseSpec>,
        rng: &mut RandomSource,
    ) -> Result<DensityMatrix<T>> {
        final_state(rho, &self.props, noise.filter(|n| !n.is_identity()), rng)
    }

    /// `(Tr[ρ(t_f) σz⊗σz])²`.
    pub fn evaluate(
        &self,
        rho: &DensityMatrix<T>,
        noise: Option<&NoiseSpec>,
        rng: &mut RandomSource,
    ) -> Result<T> {
        Ok(output_correlation(&self.final_state(rho, noise, rng)?))
    }

    /// Noisy final state mapped back through the inverse of the noise-free
    /// propagator, so that zero noise returns the input state.
    pub fn noisy_input_image(
        &self,
        rho: &DensityMatrix<T>,
        noise: Option<&NoiseSpec>,
        rng: &mut RandomSource,
    ) -> Result<DensityMatrix<T>> {
        Ok(self.input_image(&self.final_state(rho, noise, rng)?))
    }

    /// Maps a final state back through the inverse of the noise-free propagator.
    pub fn input_image(&self, final_state: &DensityMatrix<T>) -> DensityMatrix<T> {
        DensityMatrix::from_raw(self.inverse.sandwich(final_state.matrix()).hermitian_part())
    }
}

/// The entanglement indicator of `state` using the fitted functions only.
pub fn evaluate_indicator<T: Scalar>(
    state: &DensityMatrix<T>,
    fits: &FitSet<T>,
    grid: &TimeGrid<T>,
    noise: Option<&NoiseSpec>,
    rng: &mut RandomSource,
) -> Result<T> {
    Indicator::from_fits(fits, grid)?.evaluate(state, noise, rng)
}

/// Outputs of the network on each training sample, noise-free.
pub fn sample_outputs<T: Scalar>(
    set: &[TrainingSample<T>],
    schedule: &ParameterSchedule<T>,
    grid: &TimeGrid<T>,
) -> Result<Vec<T>> {
    let ind = Indicator::from_schedule(schedule, grid)?;
    set.iter()
        .map(|s| {
            ind.evaluate(
                &s.initial.density_matrix(),
                None,
                &mut RandomSource::from_seed(0),
            )
        })
        .collect()
}
