//! Concurrence and entanglement of formation for two-qubit states.
//!
//! The concurrence follows Wootters: with the spin-flipped state
//! `ρ̃ = (σy⊗σy) ρ* (σy⊗σy)`, take the square roots `λ1 ≥ … ≥ λ4` of the
//! eigenvalues of `ρ ρ̃` and return `max(0, λ1 − λ2 − λ3 − λ4)`. The spectrum
//! is computed from the Hermitian matrix `√ρ ρ̃ √ρ`, which has the same
//! eigenvalues and keeps them real.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{re, yy, CMatrix4, HermitianEigen};
use crate::noise::project_physical;
use crate::scalar::Scalar;
use crate::state::{DensityMatrix, PureState};

/// Eigenvalue dust below this is treated as zero before square roots.
const DUST: f64 = 1e-12;

/// Tolerance for accepting a marginally unphysical matrix and projecting it.
const ACCEPT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EntanglementReport<T: Scalar> {
    pub concurrence: T,
    pub eof: T,
}

impl<T: Scalar> EntanglementReport<T> {
    pub fn of(rho: &DensityMatrix<T>) -> Self {
        let c = concurrence(rho);
        EntanglementReport {
            concurrence: c,
            eof: eof_from_concurrence(c),
        }
    }
}

pub fn concurrence<T: Scalar>(rho: &DensityMatrix<T>) -> T {
    let m = rho.matrix();
    let flip = yy::<T>();
    let tilde = flip * m.conj() * flip;

    let dust = T::tol(DUST);
    let sqrt_rho = HermitianEigen::new(m).reconstruct(|v| re(clamp(v, dust).sqrt()));
    let r = sqrt_rho * tilde * sqrt_rho;
    let mut lambdas = HermitianEigen::new(&r)
        .values
        .map(|v| clamp(v, dust).sqrt());
    lambdas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let c = lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3];
    c.max(T::zero()).min(T::one())
}

fn clamp<T: Scalar>(v: T, dust: T) -> T {
    if v < dust {
        T::zero()
    } else {
        v
    }
}

/// Concurrence of an arbitrary matrix that should be a density matrix.
///
/// Matrices within `1e-9` of physical are projected first; anything further
/// off is rejected.
pub fn concurrence_of_matrix<T: Scalar>(m: &CMatrix4<T>) -> Result<T> {
    let rho = match DensityMatrix::new(*m) {
        Ok(r) => r,
        Err(_) => {
            let tol = T::tol(ACCEPT_TOL);
            DensityMatrix::<T>::from_raw(*m)
                .check(tol)
                .map_err(|e| Error::InvalidState(format!("too far from physical: {e}")))?;
            project_physical(m)?
        }
    };
    Ok(concurrence(&rho))
}

pub fn entanglement_of_formation<T: Scalar>(rho: &DensityMatrix<T>) -> T {
    eof_from_concurrence(concurrence(rho))
}

/// `E_F = h((1 + √(1 − C²)) / 2)`.
pub fn eof_from_concurrence<T: Scalar>(c: T) -> T {
    let c = c.max(T::zero()).min(T::one());
    if c == T::zero() {
        return T::zero();
    }
    let x = (T::one() + (T::one() - c * c).max(T::zero()).sqrt()) * T::lit(0.5);
    binary_entropy(x)
}

/// `h(x) = −x log₂ x − (1 − x) log₂(1 − x)` with `h(0) = h(1) = 0`.
pub fn binary_entropy<T: Scalar>(x: T) -> T {
    let term = |p: T| {
        if p <= T::zero() {
            T::zero()
        } else {
            -p * p.log2()
        }
    };
    term(x) + term(T::one() - x)
}

/// `2 |c00 c11 − c01 c10|`, valid for pure states only.
pub fn pure_state_concurrence<T: Scalar>(psi: &PureState<T>) -> T {
    let a = psi.amplitudes();
    ((a[0] * a[3] - a[1] * a[2]).norm() * T::lit(2.0)).min(T::one())
}

/// `P(γ) = (|00⟩ + γ|01⟩ + |11⟩) / √(2 + γ²)`.
pub fn make_p_state<T: Scalar>(gamma: T) -> Result<PureState<T>> {
    if !gamma.is_finite() {
        return Err(Error::invalid("gamma must be finite"));
    }
    let (o, z) = (T::one(), T::zero());
    PureState::normalized([re(o), re(gamma), re(z), re(o)])
}

/// `M(δ) = (δ |11⟩⟨11| + |Φ+⟩⟨Φ+|) / (δ + 1)`.
pub fn make_m_state<T: Scalar>(delta: T) -> Result<DensityMatrix<T>> {
    if !(delta >= T::zero()) || !delta.is_finite() {
        return Err(Error::invalid("delta must be finite and non-negative"));
    }
    let w = T::one() / (delta + T::one());
    PureState::bell()
        .density_matrix()
        .mix(w, &DensityMatrix::basis_projector(3))
}
