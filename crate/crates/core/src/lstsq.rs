//! Small dense least squares by Householder QR.

use crate::scalar::Scalar;

/// Minimizes `‖Σ_j x_j·cols[j] − y‖₂`.
///
/// Columns whose pivot collapses below rounding level get a zero coefficient,
/// so rank-deficient designs still return finite values.
pub fn least_squares<T: Scalar>(cols: &[Vec<T>], y: &[T]) -> Vec<T> {
    let n = y.len();
    let p = cols.len();
    let mut a: Vec<Vec<T>> = cols.to_vec();
    let mut b = y.to_vec();
    let mut diag = vec![T::zero(); p];

    for j in 0..p.min(n) {
        let norm = a[j][j..].iter().map(|v| *v * *v).sum::<T>().sqrt();
        if norm == T::zero() {
            continue;
        }
        let alpha = if a[j][j] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = a[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: T = v.iter().map(|x| *x * *x).sum();
        if vnorm2 == T::zero() {
            diag[j] = a[j][j];
            continue;
        }
        let reflect = |col: &mut [T]| {
            let dot: T = v.iter().zip(col.iter()).map(|(x, y)| *x * *y).sum();
            let f = (dot + dot) / vnorm2;
            for (c, x) in col.iter_mut().zip(&v) {
                *c -= f * *x;
            }
        };
        for col in a.iter_mut().skip(j) {
            reflect(&mut col[j..]);
        }
        reflect(&mut b[j..]);
        diag[j] = a[j][j];
    }

    let rmax = diag.iter().map(|d| d.abs()).fold(T::zero(), T::max);
    let cutoff = rmax * T::epsilon() * T::from_usize_lossy(10 * n.max(1));
    let mut x = vec![T::zero(); p];
    for j in (0..p.min(n)).rev() {
        if diag[j].abs() <= cutoff {
            continue;
        }
        let mut s = b[j];
        for k in (j + 1)..p {
            s -= a[k][j] * x[k];
        }
        x[j] = s / diag[j];
    }
    x
}
