//! Two-qubit pure states and density matrices.
//!
//! Basis order is (00, 01, 10, 11) with qubit A as the left tensor factor.
//! Both types serialize to JSON as flat arrays of `[re, im]` pairs in
//! row-major basis order and re-validate their invariants on load.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, re, CMatrix4, CVector4, HermitianEigen, C, DIM};
use crate::scalar::Scalar;

/// Normalized ket `|ψ⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[T; 2]>", into = "Vec<[T; 2]>", bound = "T: Scalar")]
pub struct PureState<T: Scalar> {
    amplitudes: CVector4<T>,
}

impl<T: Scalar> PureState<T> {
    pub fn cast<U: Scalar>(&self) -> PureState<U> {
        PureState {
            amplitudes: self
                .amplitudes
                .map(|z| c(U::lit(z.re.to_f64_lossy()), U::lit(z.im.to_f64_lossy()))),
        }
    }

    /// Validates `Σ|c_i|² = 1` to `1e-12`.
    pub fn new(amplitudes: CVector4<T>) -> Result<Self> {
        let norm2: T = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if !norm2.is_finite() || (norm2 - T::one()).abs() > T::tol(1e-12) {
            return Err(Error::InvalidState(format!(
                "ket norm² = {:e}, expected 1",
                norm2.to_f64_lossy()
            )));
        }
        Ok(PureState { amplitudes })
    }

    /// Scales an arbitrary nonzero vector to unit norm.
    pub fn normalized(amplitudes: CVector4<T>) -> Result<Self> {
        let n = amplitudes.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(Error::invalid(
                "cannot normalize a zero or non-finite vector",
            ));
        }
        Ok(PureState {
            amplitudes: amplitudes.map(|z| z / n),
        })
    }

    /// Normalizes a real amplitude vector.
    pub fn from_real(amplitudes: [f64; DIM]) -> Result<Self> {
        Self::normalized(amplitudes.map(|a| re(T::lit(a))))
    }

    pub fn amplitudes(&self) -> &CVector4<T> {
        &self.amplitudes
    }

    pub fn density_matrix(&self) -> DensityMatrix<T> {
        DensityMatrix::from_pure(self)
    }

    /// `|Φ+⟩ = (|00⟩ + |11⟩)/√2`.
    pub fn bell() -> Self {
        Self::from_real([1.0, 0.0, 0.0, 1.0]).unwrap()
    }

    /// `(|00⟩ + |01⟩ + |10⟩ + |11⟩)/2`.
    pub fn flat() -> Self {
        Self::from_real([1.0, 1.0, 1.0, 1.0]).unwrap()
    }

    /// Product state `(0.5|10⟩ + |11⟩)/√1.25`.
    pub fn c_state() -> Self {
        Self::from_real([0.0, 0.0, 0.5, 1.0]).unwrap()
    }

    /// Partially entangled `(|00⟩ + |01⟩ + |10⟩)/√3`.
    pub fn p_state() -> Self {
        Self::from_real([1.0, 1.0, 1.0, 0.0]).unwrap()
    }
}

impl<T: Scalar> TryFrom<Vec<[T; 2]>> for PureState<T> {
    type Error = Error;
    fn try_from(v: Vec<[T; 2]>) -> Result<Self> {
        if v.len() != DIM {
            return Err(Error::LengthMismatch {
                expected: DIM,
                got: v.len(),
            });
        }
        Self::new(std::array::from_fn(|i| c(v[i][0], v[i][1])))
    }
}

impl<T: Scalar> From<PureState<T>> for Vec<[T; 2]> {
    fn from(s: PureState<T>) -> Self {
        s.amplitudes.iter().map(|z| [z.re, z.im]).collect()
    }
}

/// Physical two-qubit state: Hermitian, unit trace, positive semidefinite.
///
/// Construction through [`DensityMatrix::new`] checks all three invariants.
/// Operations inside the crate that preserve them by construction (unitary
/// evolution, projection) build values directly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[T; 2]>", into = "Vec<[T; 2]>", bound = "T: Scalar")]
pub struct DensityMatrix<T: Scalar> {
    m: CMatrix4<T>,
}

impl<T: Scalar> DensityMatrix<T> {
    pub fn new(m: CMatrix4<T>) -> Result<Self> {
        check_physical(&m, T::tol(1e-12))?;
        Ok(DensityMatrix { m })
    }

    pub(crate) fn from_raw(m: CMatrix4<T>) -> Self {
        DensityMatrix { m }
    }

    pub fn from_pure(psi: &PureState<T>) -> Self {
        DensityMatrix {
            m: CMatrix4::outer(psi.amplitudes()),
        }
    }

    /// `|i⟩⟨i|` for basis index `i` in (00, 01, 10, 11).
    pub fn basis_projector(i: usize) -> Self {
        let mut d = [T::zero(); DIM];
        d[i] = T::one();
        DensityMatrix {
            m: CMatrix4::from_real_diag(d),
        }
    }

    /// Maximally mixed state `I/4`.
    pub fn maximally_mixed() -> Self {
        DensityMatrix {
            m: CMatrix4::identity().scale(T::lit(0.25)),
        }
    }

    pub fn matrix(&self) -> &CMatrix4<T> {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix4<T> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> C<T> {
        self.m[(i, j)]
    }

    pub fn trace(&self) -> T {
        self.m.trace().re
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> T {
        self.m.trace_product(&self.m).re
    }

    pub fn eigenvalues(&self) -> [T; DIM] {
        HermitianEigen::new(&self.m).values
    }

    /// Convex combination `w·self + (1 − w)·other`, `w ∈ [0, 1]`.
    pub fn mix(&self, w: T, other: &Self) -> Result<Self> {
        if !(w >= T::zero() && w <= T::one()) {
            return Err(Error::invalid("mixing weight outside [0, 1]"));
        }
        Ok(DensityMatrix {
            m: self.m.scale(w) + other.m.scale(T::one() - w),
        })
    }

    /// Re-checks the invariants at a caller-chosen tolerance.
    pub fn check(&self, tol: T) -> Result<()> {
        check_physical(&self.m, tol)
    }

    pub fn cast<U: Scalar>(&self) -> DensityMatrix<U> {
        DensityMatrix { m: self.m.cast() }
    }
}

fn check_physical<T: Scalar>(m: &CMatrix4<T>, tol: T) -> Result<()> {
    if !m.is_finite() {
        return Err(Error::InvalidState("non-finite element".into()));
    }
    let herm = m.hermiticity_error();
    if herm > tol {
        return Err(Error::InvalidState(format!(
            "not Hermitian (max |ρ - ρ†| = {:e})",
            herm.to_f64_lossy()
        )));
    }
    let tr = m.trace();
    if (tr.re - T::one()).abs() > tol || tr.im.abs() > tol {
        return Err(Error::InvalidState(format!(
            "trace {:e}{:+e}i, expected 1",
            tr.re.to_f64_lossy(),
            tr.im.to_f64_lossy()
        )));
    }
    let min = HermitianEigen::new(m).values[0];
    if min < -tol {
        return Err(Error::InvalidState(format!(
            "not positive semidefinite (min eigenvalue {:e})",
            min.to_f64_lossy()
        )));
    }
    Ok(())
}

impl<T: Scalar> TryFrom<Vec<[T; 2]>> for DensityMatrix<T> {
    type Error = Error;
    fn try_from(v: Vec<[T; 2]>) -> Result<Self> {
        if v.len() != DIM * DIM {
            return Err(Error::LengthMismatch {
                expected: DIM * DIM,
                got: v.len(),
            });
        }
        let mut m = CMatrix4::zeros();
        for (k, [a, b]) in v.into_iter().enumerate() {
            m.0[k / DIM][k % DIM] = c(a, b);
        }
        Self::new(m)
    }
}

impl<T: Scalar> From<DensityMatrix<T>> for Vec<[T; 2]> {
    fn from(d: DensityMatrix<T>) -> Self {
        d.m.0.iter().flatten().map(|z| [z.re, z.im]).collect()
    }
}
