//! Per-timestep perturbation channels and the projection back onto physical states.
//!
//! Three channels are supported. Magnitude noise adds zero-mean random numbers
//! to the density-matrix elements. Phase noise rotates the off-diagonal
//! elements by random phases and leaves magnitudes alone. Complex noise applies
//! both. Every channel finishes with [`project_physical`].

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, re, CMatrix4, HermitianEigen, DIM};
use crate::scalar::Scalar;
use crate::state::DensityMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Magnitude,
    Phase,
    Complex,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::Magnitude, NoiseKind::Phase, NoiseKind::Complex];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Magnitude => "magnitude",
            NoiseKind::Phase => "phase",
            NoiseKind::Complex => "complex",
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "magnitude" | "mag" => Ok(NoiseKind::Magnitude),
            "phase" => Ok(NoiseKind::Phase),
            "complex" => Ok(NoiseKind::Complex),
            other => Err(Error::invalid(format!("unknown noise kind `{other}`"))),
        }
    }
}

/// Shape of the individual random draws. Both have zero mean and rms equal to
/// the channel amplitude.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseDistribution {
    #[default]
    Gaussian,
    /// Uniform on `[-√3 a, √3 a]`.
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Rms size of each draw. Dimensionless for magnitude noise, radians for phase.
    pub amplitude: f64,
    pub seed: u64,
    #[serde(default)]
    pub distribution: NoiseDistribution,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, amplitude: f64, seed: u64) -> Result<Self> {
        let s = NoiseSpec {
            kind,
            amplitude,
            seed,
            distribution: NoiseDistribution::Gaussian,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(Error::invalid(
                "noise amplitude must be finite and non-negative",
            ));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.amplitude == 0.0
    }

    /// One timestep of this channel.
    pub fn apply<T: Scalar>(
        &self,
        rho: &DensityMatrix<T>,
        rng: &mut RandomSource,
    ) -> Result<DensityMatrix<T>> {
        let a = T::lit(self.amplitude);
        let d = self.distribution;
        match self.kind {
            NoiseKind::Magnitude => perturb_magnitude_with(rho, a, d, rng),
            NoiseKind::Phase => perturb_phase_with(rho, a, d, rng),
            NoiseKind::Complex => perturb_complex_split(rho, a, a, d, rng),
        }
    }
}

/// Seeded deterministic generator. One per trajectory; not shared across threads.
#[derive(Clone, Debug)]
pub struct RandomSource {
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn from_seed(seed: u64) -> Self {
        RandomSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream `stream` derived from a master `seed`.
    pub fn stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RandomSource { rng }
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random()
    }

    /// Zero-mean draw with rms `amplitude`.
    pub fn draw<T: Scalar>(&mut self, amplitude: T, dist: NoiseDistribution) -> T {
        let unit = match dist {
            NoiseDistribution::Gaussian => self.standard_normal(),
            NoiseDistribution::Uniform => {
                let w = 3f64.sqrt();
                self.uniform(-w, w)
            }
        };
        amplitude * T::lit(unit)
    }
}

/// Additive kick before projection: real draws on the upper triangle
/// including the diagonal, imaginary draws strictly above it, mirrored to
/// keep the result Hermitian.
pub fn magnitude_kick<T: Scalar>(
    m: &CMatrix4<T>,
    amplitude: T,
    dist: NoiseDistribution,
    rng: &mut RandomSource,
) -> CMatrix4<T> {
    let mut out = *m;
    for i in 0..DIM {
        for j in i..DIM {
            let d = if i == j {
                re(rng.draw(amplitude, dist))
            } else {
                let r = rng.draw(amplitude, dist);
                c(r, rng.draw(amplitude, dist))
            };
            out[(i, j)] += d;
            if i != j {
                out[(j, i)] = out[(i, j)].conj();
            }
        }
    }
    out
}

/// Phase rotation of the strict upper triangle, mirrored below the diagonal.
pub fn phase_kick<T: Scalar>(
    m: &CMatrix4<T>,
    amplitude: T,
    dist: NoiseDistribution,
    rng: &mut RandomSource,
) -> CMatrix4<T> {
    let mut out = *m;
    for i in 0..DIM {
        for j in (i + 1)..DIM {
            let theta = rng.draw(amplitude, dist);
            out[(i, j)] = out[(i, j)] * Complex::from_polar(T::one(), theta);
            out[(j, i)] = out[(i, j)].conj();
        }
    }
    out
}

pub fn perturb_magnitude<T: Scalar>(
    rho: &DensityMatrix<T>,
    amplitude: T,
    rng: &mut RandomSource,
) -> Result<DensityMatrix<T>> {
    perturb_magnitude_with(rho, amplitude, NoiseDistribution::Gaussian, rng)
}

pub fn perturb_magnitude_with<T: Scalar>(
    rho: &DensityMatrix<T>,
    amplitude: T,
    dist: NoiseDistribution,
    rng: &mut RandomSource,
) -> Result<DensityMatrix<T>> {
    check_amplitude(amplitude)?;
    if amplitude == T::zero() {
        return Ok(*rho);
    }
    project_physical(&magnitude_kick(rho.matrix(), amplitude, dist, rng))
}

pub fn perturb_phase<T: Scalar>(
    rho: &DensityMatrix<T>,
    amplitude: T,
    rng: &mut RandomSource,
) -> Result<DensityMatrix<T>> {
    perturb_phase_with(rho, amplitude, NoiseDistribution::Gaussian, rng)
}

pub fn perturb_phase_with<T: Scalar>(
    rho: &DensityMatrix<T>,
    amplitude: T,
    dist: NoiseDistribution,
    rng: &mut RandomSource,
) -> Result<DensityMatrix<T>> {
    check_amplitude(amplitude)?;
    if amplitude == T::zero() {
        return Ok(*rho);
    }
    project_physical(&phase_kick(rho.matrix(), amplitude, dist, rng))
}

pub fn perturb_complex<T: Scalar>(
    rho: &DensityMatrix<T>,
    amplitude: T,
    rng: &mut RandomSource,
) -> Result<DensityMatrix<T>> {
    perturb_complex_split(rho, amplitude, amplitude, NoiseDistribution::Gaussian, rng)
}

/// Phase channel, then magnitude channel, then a final projection.
pub fn perturb_complex_split<T: Scalar>(
    rho: &DensityMatrix<T>,
    phase_amplitude: T,
    magnitude_amplitude: T,
    dist: NoiseDistribution,
    rng: &mut RandomSource,
) -> Result<DensityMatrix<T>> {
    if phase_amplitude == T::zero() && magnitude_amplitude == T::zero() {
        return Ok(*rho);
    }
    let after_phase = perturb_phase_with(rho, phase_amplitude, dist, rng)?;
    let after_mag = perturb_magnitude_with(&after_phase, magnitude_amplitude, dist, rng)?;
    project_physical(after_mag.matrix())
}

fn check_amplitude<T: Scalar>(a: T) -> Result<()> {
    if !(a >= T::zero()) || !a.is_finite() {
        return Err(Error::invalid(
            "noise amplitude must be finite and non-negative",
        ));
    }
    Ok(())
}

/// Nearest physical state by spectral clamping.
///
/// Takes the Hermitian part, zeroes negative eigenvalues and rescales the
/// spectrum to unit trace.
pub fn project_physical<T: Scalar>(m: &CMatrix4<T>) -> Result<DensityMatrix<T>> {
    if !m.is_finite() {
        return Err(Error::invalid("matrix has non-finite elements"));
    }
    let eig = HermitianEigen::new(&m.hermitian_part());
    let clamped = eig.values.map(|v| v.max(T::zero()));
    let trace: T = clamped.iter().copied().sum();
    if trace <= T::lit(1e-9) {
        return Err(Error::DegenerateState {
            trace: trace.to_f64_lossy(),
        });
    }
    let proj = HermitianEigen {
        values: clamped.map(|v| v / trace),
        vectors: eig.vectors,
    };
    Ok(DensityMatrix::from_raw(
        proj.reconstruct(re).hermitian_part(),
    ))
}
