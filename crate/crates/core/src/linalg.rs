//! Dense 4×4 complex matrices and a Hermitian eigensolver.
//!
//! Everything in the simulator lives in the four-dimensional two-qubit Hilbert
//! space, so matrices are fixed-size arrays rather than heap-allocated buffers.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex;

use crate::scalar::Scalar;

pub const DIM: usize = 4;

pub type C<T> = Complex<T>;

/// Ket in the (00, 01, 10, 11) product basis.
pub type CVector4<T> = [C<T>; DIM];

#[inline]
pub fn c<T: Scalar>(re: T, im: T) -> C<T> {
    Complex::new(re, im)
}

#[inline]
pub fn re<T: Scalar>(re: T) -> C<T> {
    Complex::new(re, T::zero())
}

/// Row-major 4×4 complex matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CMatrix4<T>(pub [[C<T>; DIM]; DIM]);

impl<T: Scalar> Default for CMatrix4<T> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<T: Scalar> CMatrix4<T> {
    pub fn zeros() -> Self {
        CMatrix4([[C::new(T::zero(), T::zero()); DIM]; DIM])
    }

    pub fn identity() -> Self {
        Self::from_real_diag([T::one(); DIM])
    }

    pub fn from_real_diag(d: [T; DIM]) -> Self {
        let mut m = Self::zeros();
        for (i, v) in d.into_iter().enumerate() {
            m.0[i][i] = re(v);
        }
        m
    }

    /// `|v⟩⟨v|`.
    pub fn outer(v: &CVector4<T>) -> Self {
        let mut m = Self::zeros();
        for i in 0..DIM {
            for j in 0..DIM {
                m.0[i][j] = v[i] * v[j].conj();
            }
        }
        m
    }

    /// Kronecker product `a ⊗ b` of two 2×2 matrices; `a` acts on the left factor.
    pub fn kron(a: &[[C<T>; 2]; 2], b: &[[C<T>; 2]; 2]) -> Self {
        let mut m = Self::zeros();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        m.0[2 * i + k][2 * j + l] = a[i][j] * b[k][l];
                    }
                }
            }
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros();
        for i in 0..DIM {
            for j in 0..DIM {
                m.0[i][j] = self.0[j][i].conj();
            }
        }
        m
    }

    pub fn conj(&self) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|z| *z = z.conj());
        m
    }

    pub fn trace(&self) -> C<T> {
        (0..DIM).fold(C::new(T::zero(), T::zero()), |acc, i| acc + self.0[i][i])
    }

    pub fn scale(&self, s: T) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|z| *z = *z * s);
        m
    }

    pub fn scale_c(&self, s: C<T>) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|z| *z = *z * s);
        m
    }

    /// `(m + m†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let half = T::lit(0.5);
        let mut m = Self::zeros();
        for i in 0..DIM {
            for j in 0..DIM {
                m.0[i][j] = (self.0[i][j] + self.0[j][i].conj()) * half;
            }
        }
        m
    }

    /// `A · B · A†`.
    pub fn sandwich(&self, inner: &Self) -> Self {
        *self * *inner * self.adjoint()
    }

    /// `Tr[self · other]` without forming the product.
    pub fn trace_product(&self, other: &Self) -> C<T> {
        let mut acc = C::new(T::zero(), T::zero());
        for i in 0..DIM {
            for k in 0..DIM {
                acc += self.0[i][k] * other.0[k][i];
            }
        }
        acc
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| (*a - *b).norm())
            .fold(T::zero(), T::max)
    }

    pub fn frobenius_norm(&self) -> T {
        self.0
            .iter()
            .flatten()
            .map(|z| z.norm_sqr())
            .sum::<T>()
            .sqrt()
    }

    /// Largest elementwise deviation from Hermiticity, `max |m_ij − conj(m_ji)|`.
    pub fn hermiticity_error(&self) -> T {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_finite(&self) -> bool {
        self.0
            .iter()
            .flatten()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn apply(&self, v: &CVector4<T>) -> CVector4<T> {
        let mut out = [C::new(T::zero(), T::zero()); DIM];
        for (i, o) in out.iter_mut().enumerate() {
            for j in 0..DIM {
                *o += self.0[i][j] * v[j];
            }
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> CMatrix4<U> {
        let mut m = CMatrix4::<U>::zeros();
        for i in 0..DIM {
            for j in 0..DIM {
                let z = self.0[i][j];
                m.0[i][j] = c(U::lit(z.re.to_f64_lossy()), U::lit(z.im.to_f64_lossy()));
            }
        }
        m
    }
}

impl<T: Scalar> Index<(usize, usize)> for CMatrix4<T> {
    type Output = C<T>;
    fn index(&self, (i, j): (usize, usize)) -> &C<T> {
        &self.0[i][j]
    }
}

impl<T: Scalar> IndexMut<(usize, usize)> for CMatrix4<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<T> {
        &mut self.0[i][j]
    }
}

impl<T: Scalar> Mul for CMatrix4<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut m = Self::zeros();
        for i in 0..DIM {
            for k in 0..DIM {
                let a = self.0[i][k];
                for j in 0..DIM {
                    m.0[i][j] += a * rhs.0[k][j];
                }
            }
        }
        m
    }
}

impl<T: Scalar> Add for CMatrix4<T> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<T: Scalar> AddAssign for CMatrix4<T> {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.0.iter_mut().flatten().zip(rhs.0.iter().flatten()) {
            *a += *b;
        }
    }
}

impl<T: Scalar> Sub for CMatrix4<T> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for (a, b) in self.0.iter_mut().flatten().zip(rhs.0.iter().flatten()) {
            *a -= *b;
        }
        self
    }
}

impl<T: Scalar> Neg for CMatrix4<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

/// Single-qubit Pauli matrices.
pub mod pauli {
    use super::*;

    pub fn identity<T: Scalar>() -> [[C<T>; 2]; 2] {
        let (o, z) = (T::one(), T::zero());
        [[re(o), re(z)], [re(z), re(o)]]
    }

    pub fn x<T: Scalar>() -> [[C<T>; 2]; 2] {
        let (o, z) = (T::one(), T::zero());
        [[re(z), re(o)], [re(o), re(z)]]
    }

    pub fn y<T: Scalar>() -> [[C<T>; 2]; 2] {
        let (o, z) = (T::one(), T::zero());
        [[re(z), c(z, -o)], [c(z, o), re(z)]]
    }

    pub fn z<T: Scalar>() -> [[C<T>; 2]; 2] {
        let (o, z) = (T::one(), T::zero());
        [[re(o), re(z)], [re(z), re(-o)]]
    }
}

/// `σ_z ⊗ σ_z`, the measured correlation observable.
pub fn zz<T: Scalar>() -> CMatrix4<T> {
    CMatrix4::from_real_diag([T::one(), -T::one(), -T::one(), T::one()])
}

/// `σ_y ⊗ σ_y`, the two-qubit spin flip.
pub fn yy<T: Scalar>() -> CMatrix4<T> {
    CMatrix4::kron(&pauli::y(), &pauli::y())
}

/// Spectral decomposition `A = V · diag(values) · V†` of a Hermitian matrix.
///
/// Eigenvalues are sorted ascending; column `k` of `vectors` belongs to
/// `values[k]`.
#[derive(Clone, Copy, Debug)]
pub struct HermitianEigen<T> {
    pub values: [T; DIM],
    pub vectors: CMatrix4<T>,
}

impl<T: Scalar> HermitianEigen<T> {
    /// Cyclic complex Jacobi. Only the Hermitian part of `a` is used.
    pub fn new(a: &CMatrix4<T>) -> Self {
        let mut a = a.hermitian_part();
        let mut v = CMatrix4::identity();
        let eps = T::epsilon();
        let scale2 = a.frobenius_norm().powi(2);

        for _sweep in 0..64 {
            let off: T = (0..DIM)
                .flat_map(|p| ((p + 1)..DIM).map(move |q| (p, q)))
                .map(|(p, q)| a.0[p][q].norm_sqr())
                .sum();
            if off <= eps * eps * scale2 * T::lit(1e-4) || off == T::zero() {
                break;
            }
            for p in 0..DIM {
                for q in (p + 1)..DIM {
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }

        let mut order = [0usize, 1, 2, 3];
        order.sort_by(|&i, &j| a.0[i][i].re.partial_cmp(&a.0[j][j].re).unwrap());
        let mut values = [T::zero(); DIM];
        let mut vectors = CMatrix4::zeros();
        for (k, &src) in order.iter().enumerate() {
            values[k] = a.0[src][src].re;
            for row in 0..DIM {
                vectors.0[row][k] = v.0[row][src];
            }
        }
        HermitianEigen { values, vectors }
    }

    /// `V · diag(f(λ)) · V†`.
    pub fn reconstruct(&self, f: impl Fn(T) -> C<T>) -> CMatrix4<T> {
        let mut m = CMatrix4::zeros();
        let fv: [C<T>; DIM] = std::array::from_fn(|k| f(self.values[k]));
        for i in 0..DIM {
            for j in 0..DIM {
                let mut acc = C::new(T::zero(), T::zero());
                for (k, fk) in fv.iter().enumerate() {
                    acc += self.vectors.0[i][k] * *fk * self.vectors.0[j][k].conj();
                }
                m.0[i][j] = acc;
            }
        }
        m
    }

    /// `V† · m · V`: `m` expressed in the eigenbasis.
    pub fn to_eigenbasis(&self, m: &CMatrix4<T>) -> CMatrix4<T> {
        self.vectors.adjoint() * *m * self.vectors
    }
}

fn rotate<T: Scalar>(a: &mut CMatrix4<T>, v: &mut CMatrix4<T>, p: usize, q: usize) {
    let apq = a.0[p][q];
    let r = apq.norm();
    if r == T::zero() {
        return;
    }
    let phase = apq / r;
    let app = a.0[p][p].re;
    let aqq = a.0[q][q].re;
    let theta = (aqq - app) / (r + r);
    let t = if theta == T::zero() {
        T::one()
    } else {
        theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt())
    };
    let cs = T::one() / (t * t + T::one()).sqrt();
    let sn = t * cs;

    // G = D·P with D = diag(1, e^{-iφ}) on (p, q) and P the real Jacobi rotation.
    let g_pp = re(cs);
    let g_pq = re(sn);
    let g_qp = phase.conj() * (-sn);
    let g_qq = phase.conj() * cs;

    for k in 0..DIM {
        let (akp, akq) = (a.0[k][p], a.0[k][q]);
        a.0[k][p] = akp * g_pp + akq * g_qp;
        a.0[k][q] = akp * g_pq + akq * g_qq;
        let (vkp, vkq) = (v.0[k][p], v.0[k][q]);
        v.0[k][p] = vkp * g_pp + vkq * g_qp;
        v.0[k][q] = vkp * g_pq + vkq * g_qq;
    }
    for k in 0..DIM {
        let (apk, aqk) = (a.0[p][k], a.0[q][k]);
        a.0[p][k] = g_pp.conj() * apk + g_qp.conj() * aqk;
        a.0[q][k] = g_pq.conj() * apk + g_qq.conj() * aqk;
    }
    let zero = C::new(T::zero(), T::zero());
    a.0[p][q] = zero;
    a.0[q][p] = zero;
    a.0[p][p].im = T::zero();
    a.0[q][q].im = T::zero();
}


#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;

    #[test]
    fn pauli_algebra() {
        let x = CMatrix4::<f64>::kron(&pauli::x(), &pauli::identity());
        assert!((x * x).max_abs_diff(&CMatrix4::identity()) < 1e-15);
        let yy = yy::<f64>();
        // σ_y⊗σ_y is real with antidiagonal (-1, 1, 1, -1).
        assert_eq!(yy[(0, 3)], re(-1.0));
        assert_eq!(yy[(1, 2)], re(1.0));
        assert_eq!(yy[(2, 1)], re(1.0));
        assert_eq!(yy[(3, 0)], re(-1.0));
    }

    #[test]
    fn eigen_reconstructs_random_hermitian() {
        let mut r = rng(7);
        for _ in 0..200 {
            let h = random_hermitian(&mut r);
            let e = HermitianEigen::new(&h);
            let back = e.reconstruct(re);
            assert!(back.max_abs_diff(&h) < 1e-13);
            let vv = e.vectors.adjoint() * e.vectors;
            assert!(vv.max_abs_diff(&CMatrix4::identity()) < 1e-13);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eigen_handles_degenerate_and_diagonal() {
        let z = CMatrix4::<f64>::zeros();
        let e = HermitianEigen::new(&z);
        assert_eq!(e.values, [0.0; 4]);
        let d = CMatrix4::from_real_diag([2.0, -2.0, -2.0, 2.0]);
        let e = HermitianEigen::new(&d);
        assert_eq!(e.values, [-2.0, -2.0, 2.0, 2.0]);
        assert!(e.reconstruct(re).max_abs_diff(&d) < 1e-15);
    }

    #[test]
    fn eigen_works_in_single_precision() {
        let mut r = rng(3);
        let h: CMatrix4<f32> = random_hermitian(&mut r).cast();
        let e = HermitianEigen::new(&h);
        assert!(e.reconstruct(re).max_abs_diff(&h) < 1e-5);
    }
}
