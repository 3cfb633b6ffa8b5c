//! Two-qubit Hamiltonian with tunneling, bias and zz coupling terms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pauli, zz, CMatrix4};
use crate::scalar::Scalar;

/// One column of a parameter schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamKind {
    KA,
    KB,
    EpsA,
    EpsB,
    Zeta,
}

impl ParamKind {
    pub const ALL: [ParamKind; 5] = [
        ParamKind::KA,
        ParamKind::KB,
        ParamKind::EpsA,
        ParamKind::EpsB,
        ParamKind::Zeta,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamKind::KA => "K_A",
            ParamKind::KB => "K_B",
            ParamKind::EpsA => "eps_A",
            ParamKind::EpsB => "eps_B",
            ParamKind::Zeta => "zeta",
        }
    }

    /// `∂H/∂p` for this parameter.
    ///
    /// The coupling enters twice because the pair sum runs over ordered pairs
    /// `α ≠ β` with `ζ_AB = ζ_BA`.
    pub fn generator<T: Scalar>(self) -> CMatrix4<T> {
        match self {
            ParamKind::KA => CMatrix4::kron(&pauli::x(), &pauli::identity()),
            ParamKind::KB => CMatrix4::kron(&pauli::identity(), &pauli::x()),
            ParamKind::EpsA => CMatrix4::kron(&pauli::z(), &pauli::identity()),
            ParamKind::EpsB => CMatrix4::kron(&pauli::identity(), &pauli::z()),
            ParamKind::Zeta => zz().scale(T::lit(2.0)),
        }
    }
}

/// Coefficients of the Hamiltonian at one instant, in rad/ns (ħ = 1).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct HamiltonianParams<T: Scalar> {
    pub k_a: T,
    pub k_b: T,
    pub eps_a: T,
    pub eps_b: T,
    pub zeta: T,
}

impl<T: Scalar> HamiltonianParams<T> {
    pub fn new(k_a: T, k_b: T, eps_a: T, eps_b: T, zeta: T) -> Self {
        HamiltonianParams {
            k_a,
            k_b,
            eps_a,
            eps_b,
            zeta,
        }
    }

    pub fn from_array(v: [T; 5]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4])
    }

    pub fn to_array(self) -> [T; 5] {
        [self.k_a, self.k_b, self.eps_a, self.eps_b, self.zeta]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// `H = K_A σx⊗I + K_B I⊗σx + ε_A σz⊗I + ε_B I⊗σz + 2ζ σz⊗σz`.
pub fn build_hamiltonian<T: Scalar>(p: &HamiltonianParams<T>) -> Result<CMatrix4<T>> {
    if !p.is_finite() {
        return Err(Error::invalid("non-finite Hamiltonian parameter"));
    }
    Ok(hamiltonian_unchecked(&p.to_array()))
}

pub(crate) fn hamiltonian_unchecked<T: Scalar>(values: &[T; 5]) -> CMatrix4<T> {
    ParamKind::ALL
        .iter()
        .zip(values)
        .fold(CMatrix4::zeros(), |h, (kind, &v)| {
            h + kind.generator::<T>().scale(v)
        })
}
