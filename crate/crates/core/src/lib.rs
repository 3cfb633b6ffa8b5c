//! Two-qubit quantum neural network that estimates entanglement.
//!
//! A pair of coupled qubits evolves under a time-dependent Hamiltonian
//! `H(t) = K_A σx⊗I + K_B I⊗σx + ε_A σz⊗I + ε_B I⊗σz + 2ζ σz⊗σz`
//! (ħ = 1, time in ns, parameters in rad/ns). The squared `σz⊗σz`
//! correlation at the final time is trained to track the entanglement of the
//! input state. The crate covers propagation, schedule training by adjoint
//! gradients, Fourier compression of the trained schedule, density-matrix
//! noise channels, and the Wootters concurrence used as ground truth.
//!
//! Numerical types are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root name the common `f64` and `f32` instantiations.

pub mod entanglement;
pub mod error;
pub mod evolution;
pub mod fourier;
pub mod hamiltonian;
pub mod linalg;
pub mod lstsq;
pub mod noise;
pub mod scalar;
pub mod schedule;
pub mod state;
pub mod trainer;
#[cfg(feature = "wide")]
pub mod wide;

pub use entanglement::{
    binary_entropy, concurrence, concurrence_of_matrix, entanglement_of_formation,
    eof_from_concurrence, make_m_state, make_p_state, pure_state_concurrence, EntanglementReport,
};
pub use error::{Error, Result};
pub use evolution::{
    final_state, output_correlation, propagate, propagate_with, step_evolve, step_propagators,
    zz_expectation, StepPropagator, TimeGrid,
};
pub use fourier::{
    fit_fourier, omega_search_range, sample_to_schedule, FitOrders, FitSet, FitTarget, FourierFit,
};
pub use hamiltonian::{build_hamiltonian, HamiltonianParams, ParamKind};
pub use linalg::{CMatrix4, CVector4, HermitianEigen, C};
pub use noise::{
    perturb_complex, perturb_magnitude, perturb_phase, project_physical, NoiseDistribution,
    NoiseKind, NoiseSpec, RandomSource,
};
pub use scalar::Scalar;
pub use schedule::ParameterSchedule;
pub use state::{DensityMatrix, PureState};
pub use trainer::{
    adjoint_gradient, central_difference, default_training_set, evaluate_indicator, fd_gradient,
    fd_gradient_local, forward, train, train_from, EpochRecord, Indicator, InitSpec, TrainOutcome,
    TrainingConfig, TrainingSample,
};

pub type DensityMatrix64 = DensityMatrix<f64>;
pub type DensityMatrix32 = DensityMatrix<f32>;
pub type PureState64 = PureState<f64>;
pub type PureState32 = PureState<f32>;
pub type Schedule64 = ParameterSchedule<f64>;
pub type Schedule32 = ParameterSchedule<f32>;
pub type TimeGrid64 = TimeGrid<f64>;
pub type TimeGrid32 = TimeGrid<f32>;
pub type FitSet64 = FitSet<f64>;
pub type FitSet32 = FitSet<f32>;
pub type FourierFit64 = FourierFit<f64>;
pub type Indicator64 = Indicator<f64>;
pub type TrainingSample64 = TrainingSample<f64>;
pub type TrainingSample32 = TrainingSample<f32>;

