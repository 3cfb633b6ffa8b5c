//! Time evolution of the density matrix under a piecewise-constant Hamiltonian.
//!
//! Each timestep applies the exact propagator `U = exp(-i H dt)` (ħ = 1, time
//! in ns, energies in rad/ns), obtained from the eigendecomposition of `H`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::hamiltonian_unchecked;
use crate::linalg::{c, zz, CMatrix4, HermitianEigen};
use crate::noise::{NoiseSpec, RandomSource};
use crate::scalar::Scalar;
use crate::schedule::ParameterSchedule;
use crate::state::DensityMatrix;

/// Uniform time discretization: `n_steps` intervals of length `dt` ns.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TimeGrid<T: Scalar> {
    pub dt: T,
    pub n_steps: usize,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(dt: T, n_steps: usize) -> Result<Self> {
        let g = TimeGrid { dt, n_steps };
        g.validate()?;
        Ok(g)
    }

    pub fn cast<U: Scalar>(&self) -> TimeGrid<U> {
        TimeGrid {
            dt: U::lit(self.dt.to_f64_lossy()),
            n_steps: self.n_steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::invalid("time step must be positive and finite"));
        }
        if self.n_steps == 0 {
            return Err(Error::invalid("time grid needs at least one step"));
        }
        Ok(())
    }

    pub fn t_final(&self) -> T {
        self.dt * T::from_usize_lossy(self.n_steps)
    }

    /// Midpoint of step `k`.
    pub fn t_mid(&self, k: usize) -> T {
        self.dt * (T::from_usize_lossy(k) + T::lit(0.5))
    }
}

impl Default for TimeGrid<f64> {
    /// 317 steps of 0.8 ns.
    fn default() -> Self {
        TimeGrid {
            dt: 0.8,
            n_steps: 317,
        }
    }
}

/// Exact propagator for one piecewise-constant interval.
#[derive(Clone, Copy, Debug)]
pub struct StepPropagator<T: Scalar> {
    pub eigen: HermitianEigen<T>,
    pub unitary: CMatrix4<T>,
    pub dt: T,
}

impl<T: Scalar> StepPropagator<T> {
    pub fn new(h: &CMatrix4<T>, dt: T) -> Self {
        let eigen = HermitianEigen::new(h);
        let unitary = eigen.reconstruct(|e| {
            let phase = -e * dt;
            c(phase.cos(), phase.sin())
        });
        StepPropagator { eigen, unitary, dt }
    }

    /// `U ρ U†`, Hermitized to absorb rounding drift.
    pub fn evolve(&self, rho: &CMatrix4<T>) -> CMatrix4<T> {
        self.unitary.sandwich(rho).hermitian_part()
    }
}

/// One [`StepPropagator`] per schedule step.
pub fn step_propagators<T: Scalar>(
    schedule: &ParameterSchedule<T>,
    grid: &TimeGrid<T>,
) -> Result<Vec<StepPropagator<T>>> {
    grid.validate()?;
    if schedule.len() != grid.n_steps {
        return Err(Error::LengthMismatch {
            expected: grid.n_steps,
            got: schedule.len(),
        });
    }
    schedule
        .values()
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let p = StepPropagator::new(&hamiltonian_unchecked(row), grid.dt);
            let drift = (p.unitary * p.unitary.adjoint()).max_abs_diff(&CMatrix4::identity());
            if !(drift <= T::tol(1e-9)) {
                return Err(Error::InvalidState(format!(
                    "step {k} propagator is not unitary (error {drift:e})"
                )));
            }
            Ok(p)
        })
        .collect()
}

/// Evolves `rho` for `dt` under the constant Hamiltonian `h`.
pub fn step_evolve<T: Scalar>(
    rho: &DensityMatrix<T>,
    h: &CMatrix4<T>,
    dt: T,
) -> Result<DensityMatrix<T>> {
    if !(dt > T::zero()) {
        return Err(Error::invalid("dt must be positive"));
    }
    if !h.is_finite() || h.hermiticity_error() > T::tol(1e-12) {
        return Err(Error::invalid("Hamiltonian must be finite and Hermitian"));
    }
    Ok(DensityMatrix::from_raw(
        StepPropagator::new(h, dt).evolve(rho.matrix()),
    ))
}

/// Full trajectory `ρ(0), ρ(dt), …, ρ(t_f)`.
///
/// Within each step the unitary is applied first; if `noise` is given its
/// perturbation (including the physicality projection) follows.
pub fn propagate<T: Scalar>(
    rho0: &DensityMatrix<T>,
    schedule: &ParameterSchedule<T>,
    grid: &TimeGrid<T>,
    noise: Option<&NoiseSpec>,
    rng: &mut RandomSource,
) -> Result<Vec<DensityMatrix<T>>> {
    let props = step_propagators(schedule, grid)?;
    propagate_with(rho0, &props, noise, rng)
}

/// [`propagate`] over precomputed step propagators.
pub fn propagate_with<T: Scalar>(
    rho0: &DensityMatrix<T>,
    props: &[StepPropagator<T>],
    noise: Option<&NoiseSpec>,
    rng: &mut RandomSource,
) -> Result<Vec<DensityMatrix<T>>> {
    let mut traj = Vec::with_capacity(props.len() + 1);
    traj.push(*rho0);
    let mut rho = *rho0;
    for p in props {
        rho = DensityMatrix::from_raw(p.evolve(rho.matrix()));
        if let Some(spec) = noise {
            rho = spec.apply(&rho, rng)?;
        }
        traj.push(rho);
    }
    Ok(traj)
}

/// Final state only, without keeping the trajectory.
pub fn final_state<T: Scalar>(
    rho0: &DensityMatrix<T>,
    props: &[StepPropagator<T>],
    noise: Option<&NoiseSpec>,
    rng: &mut RandomSource,
) -> Result<DensityMatrix<T>> {
    let mut rho = *rho0;
    for p in props {
        rho = DensityMatrix::from_raw(p.evolve(rho.matrix()));
        if let Some(spec) = noise {
            rho = spec.apply(&rho, rng)?;
        }
    }
    Ok(rho)
}

/// `Tr[ρ σz⊗σz]`.
pub fn zz_expectation<T: Scalar>(rho: &DensityMatrix<T>) -> T {
    let t = rho.matrix().trace_product(&zz());
    t.re
}

/// `(Tr[ρ σz⊗σz])²`, the network output.
pub fn output_correlation<T: Scalar>(rho: &DensityMatrix<T>) -> T {
    let z = zz_expectation(rho);
    z * z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_hamiltonian, HamiltonianParams};
    use crate::linalg::test_util::*;
    use crate::state::PureState;

    fn bell() -> DensityMatrix<f64> {
        PureState::bell().density_matrix()
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let mut r = rng(1);
        let rho = DensityMatrix::from_pure(&PureState::normalized(random_ket(&mut r)).unwrap());
        let out = step_evolve(&rho, &CMatrix4::zeros(), 0.8).unwrap();
        assert!(out.matrix().max_abs_diff(rho.matrix()) < 1e-15);
    }

    #[test]
    fn diagonal_state_commutes_with_coupling() {
        let rho = DensityMatrix::<f64>::basis_projector(0);
        let h = build_hamiltonian(&HamiltonianParams::new(0.0, 0.0, 0.0, 0.0, 0.3)).unwrap();
        let out = step_evolve(&rho, &h, 5.0).unwrap();
        assert!(out.matrix().max_abs_diff(rho.matrix()) < 1e-15);
    }

    #[test]
    fn rabi_flop_on_both_qubits() {
        // exp(-i K t σx) with K t = π/2 maps |0⟩ → -i|1⟩ on each factor.
        let k = 0.00248;
        let t = std::f64::consts::FRAC_PI_2 / k;
        let h = build_hamiltonian(&HamiltonianParams::new(k, k, 0.0, 0.0, 0.0)).unwrap();
        let out = step_evolve(&DensityMatrix::basis_projector(0), &h, t).unwrap();
        assert!((out.get(3, 3).re - 1.0).abs() < 1e-12);

        // Brute-force cross-check: same flop split into many steps of a
        // Taylor-series exponential.
        let n = 2000;
        let a = h.scale_c(c(0.0, -t / n as f64));
        let mut u = CMatrix4::identity();
        let mut term = CMatrix4::identity();
        for j in 1..30 {
            term = (term * a).scale(1.0 / j as f64);
            u += term;
        }
        let mut rho = *DensityMatrix::<f64>::basis_projector(0).matrix();
        for _ in 0..n {
            rho = u.sandwich(&rho);
        }
        assert!(rho.max_abs_diff(out.matrix()) < 1e-10);
    }

    #[test]
    fn forward_then_backward_restores_state() {
        let mut r = rng(2);
        for _ in 0..20 {
            let h = random_hermitian(&mut r);
            let rho = DensityMatrix::from_pure(&PureState::normalized(random_ket(&mut r)).unwrap());
            let there = step_evolve(&rho, &(-h), 0.8).unwrap();
            let back = step_evolve(&there, &h, 0.8).unwrap();
            assert!(back.matrix().max_abs_diff(rho.matrix()) < 1e-10);
        }
    }

    #[test]
    fn propagate_checks_lengths_and_keeps_zero_schedule_fixed() {
        let grid = TimeGrid::new(0.8, 10).unwrap();
        let mut rs = RandomSource::from_seed(0);
        let bad = ParameterSchedule::<f64>::zeros(9);
        assert!(matches!(
            propagate(&bell(), &bad, &grid, None, &mut rs),
            Err(Error::LengthMismatch {
                expected: 10,
                got: 9
            })
        ));
        let flat = PureState::<f64>::flat().density_matrix();
        let traj = propagate(&flat, &ParameterSchedule::zeros(10), &grid, None, &mut rs).unwrap();
        assert_eq!(traj.len(), 11);
        assert!(traj[10].matrix().max_abs_diff(flat.matrix()) < 1e-15);
    }

    #[test]
    fn output_correlation_of_named_states() {
        assert!((output_correlation(&bell()) - 1.0).abs() < 1e-15);
        assert!(output_correlation(&PureState::<f64>::flat().density_matrix()).abs() < 1e-15);
        // |10⟩ carries zz = -1 and |11⟩ zz = +1: ((−0.25 + 1)/1.25)² = 0.36.
        let c0 = output_correlation(&PureState::<f64>::c_state().density_matrix());
        assert!((c0 - 0.36).abs() < 1e-14);
    }

    #[test]
    fn single_precision_propagation_runs() {
        let grid = TimeGrid::<f32>::new(0.8, 50).unwrap();
        let p = HamiltonianParams::new(0.01f32, 0.01, 0.002, 0.002, 0.001);
        let s = ParameterSchedule::constant(p, 50, true, true).unwrap();
        let rho = PureState::<f32>::bell().density_matrix();
        let traj = propagate(&rho, &s, &grid, None, &mut RandomSource::from_seed(0)).unwrap();
        let last = traj.last().unwrap();
        assert!((last.trace() - 1.0).abs() < 1e-4, "{}", last.trace());
        let f64_traj = propagate(
            &rho.cast::<f64>(),
            &ParameterSchedule::constant(
                HamiltonianParams::new(0.01, 0.01, 0.002, 0.002, 0.001),
                50,
                true,
                true,
            )
            .unwrap(),
            &TimeGrid::new(0.8, 50).unwrap(),
            None,
            &mut RandomSource::from_seed(0),
        )
        .unwrap();
        assert!(
            (output_correlation(last) as f64 - output_correlation(f64_traj.last().unwrap())).abs()
                < 1e-4
        );
    }
}
