//! Truncated Fourier series for trained parameter functions.
//!
//! `f(t) = a0 + a1 cos ωt + b1 sin ωt + a2 cos 2ωt + b2 sin 2ωt`.
//! For a fixed `ω` the amplitudes follow from linear least squares; `ω`
//! itself is chosen by a coarse scan, a golden-section refinement around the
//! best scan point, and a few Gauss–Newton steps on all parameters jointly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::TimeGrid;
use crate::hamiltonian::ParamKind;
use crate::lstsq::least_squares;
use crate::scalar::Scalar;
use crate::schedule::ParameterSchedule;

pub const MIN_FIT_POINTS: usize = 6;
const SCAN_POINTS: usize = 2000;
const GOLDEN_ITERS: usize = 80;
const BISECTION_ITERS: usize = 200;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FourierFit<T: Scalar> {
    pub a0: T,
    pub a1: T,
    pub b1: T,
    pub a2: T,
    pub b2: T,
    pub omega: T,
    pub rms_residual: T,
}

impl<T: Scalar> FourierFit<T> {
    pub fn constant(a0: T) -> Self {
        FourierFit {
            a0,
            omega: T::one(),
            ..Default::default()
        }
    }

    /// 2 if a second harmonic is present, else 1.
    pub fn order(&self) -> usize {
        if self.a2 != T::zero() || self.b2 != T::zero() {
            2
        } else {
            1
        }
    }

    pub fn evaluate(&self, t: T) -> T {
        let w = self.omega * t;
        let w2 = w + w;
        self.a0 + self.a1 * w.cos() + self.b1 * w.sin() + self.a2 * w2.cos() + self.b2 * w2.sin()
    }

    fn amplitudes(&self) -> [T; 5] {
        [self.a0, self.a1, self.b1, self.a2, self.b2]
    }

    fn from_amplitudes(x: &[T], omega: T, rms: T) -> Self {
        let g = |i: usize| x.get(i).copied().unwrap_or(T::zero());
        FourierFit {
            a0: g(0),
            a1: g(1),
            b1: g(2),
            a2: g(3),
            b2: g(4),
            omega,
            rms_residual: rms,
        }
    }
}

/// Midpoint times of a grid, where schedules are sampled.
fn sample_times<T: Scalar>(grid: &TimeGrid<T>) -> Vec<T> {
    (0..grid.n_steps).map(|k| grid.t_mid(k)).collect()
}

/// Inclusive `ω` search interval `[2π/t_f · 0.25, 2π/(4 dt)]`.
pub fn omega_search_range<T: Scalar>(grid: &TimeGrid<T>) -> (T, T) {
    let two_pi = T::TAU();
    (
        two_pi / grid.t_final() * T::lit(0.25),
        two_pi / (grid.dt * T::lit(4.0)),
    )
}

struct Problem<'a, T: Scalar> {
    t: &'a [T],
    y: &'a [T],
    order: usize,
}

impl<T: Scalar> Problem<'_, T> {
    fn design(&self, omega: T) -> Vec<Vec<T>> {
        let mut cols = vec![vec![T::one(); self.t.len()]];
        for h in 1..=self.order {
            let hw = omega * T::from_usize_lossy(h);
            cols.push(self.t.iter().map(|t| (hw * *t).cos()).collect());
            cols.push(self.t.iter().map(|t| (hw * *t).sin()).collect());
        }
        cols
    }

    fn rms(&self, fit: &FourierFit<T>) -> T {
        let ss: T = self
            .t
            .iter()
            .zip(self.y)
            .map(|(t, y)| {
                let r = fit.evaluate(*t) - *y;
                r * r
            })
            .sum();
        (ss / T::from_usize_lossy(self.t.len())).sqrt()
    }

    fn linear_fit(&self, omega: T) -> FourierFit<T> {
        let x = least_squares(&self.design(omega), self.y);
        let mut fit = FourierFit::from_amplitudes(&x, omega, T::zero());
        fit.rms_residual = self.rms(&fit);
        fit
    }

    /// Derivative of the mean squared residual with respect to ω at the
    /// amplitudes that are optimal for that ω.
    fn slope(&self, fit: &FourierFit<T>) -> T {
        let amps = fit.amplitudes();
        let mut acc = T::zero();
        for (t, y) in self.t.iter().zip(self.y) {
            let mut d = T::zero();
            for h in 1..=self.order {
                let hf = T::from_usize_lossy(h);
                let arg = hf * fit.omega * *t;
                let (a, b) = (amps[2 * h - 1], amps[2 * h]);
                d += hf * *t * (b * arg.cos() - a * arg.sin());
            }
            acc += (fit.evaluate(*t) - *y) * d;
        }
        acc
    }
}

/// Least-squares Fourier fit of one schedule column.
///
/// `order` is 1 (a0, a1, b1) or 2 (adds a2, b2).
pub fn fit_fourier<T: Scalar>(
    column: &[T],
    grid: &TimeGrid<T>,
    order: usize,
) -> Result<FourierFit<T>> {
    grid.validate()?;
    if column.len() != grid.n_steps {
        return Err(Error::LengthMismatch {
            expected: grid.n_steps,
            got: column.len(),
        });
    }
    if column.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_POINTS,
            got: column.len(),
        });
    }
    if !(1..=2).contains(&order) {
        return Err(Error::invalid("Fourier order must be 1 or 2"));
    }
    if column.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("column contains non-finite values"));
    }

    let t = sample_times(grid);
    let prob = Problem {
        t: &t,
        y: column,
        order,
    };
    let (lo, hi) = omega_search_range(grid);
    let step = (hi - lo) / T::from_usize_lossy(SCAN_POINTS - 1);
    let omega_at = |i: usize| lo + step * T::from_usize_lossy(i);

    let mut best_i = 0;
    let mut best = prob.linear_fit(lo);
    for i in 1..SCAN_POINTS {
        let f = prob.linear_fit(omega_at(i));
        if f.rms_residual < best.rms_residual {
            best = f;
            best_i = i;
        }
    }

    // Golden section on the bracket around the best scan point.
    let (mut a, mut b) = (
        omega_at(best_i.saturating_sub(1)),
        omega_at((best_i + 1).min(SCAN_POINTS - 1)),
    );
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = prob.linear_fit(x1);
    let mut f2 = prob.linear_fit(x2);
    for _ in 0..GOLDEN_ITERS {
        if f1.rms_residual <= f2.rms_residual {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = prob.linear_fit(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = prob.linear_fit(x2);
        }
    }
    for f in [f1, f2] {
        if f.rms_residual < best.rms_residual {
            best = f;
        }
    }

    // Bisection on the slope pins the stationary point where the residual
    // curve is too flat for comparisons of rms values to resolve.
    let (mut a, mut b) = (
        omega_at(best_i.saturating_sub(1)),
        omega_at((best_i + 1).min(SCAN_POINTS - 1)),
    );
    if prob.slope(&prob.linear_fit(a)) < T::zero() && prob.slope(&prob.linear_fit(b)) > T::zero() {
        for _ in 0..BISECTION_ITERS {
            let mid = (a + b) * T::lit(0.5);
            if mid <= a || mid >= b {
                break;
            }
            if prob.slope(&prob.linear_fit(mid)) < T::zero() {
                a = mid;
            } else {
                b = mid;
            }
        }
        let root = prob.linear_fit((a + b) * T::lit(0.5));
        if root.rms_residual <= best.rms_residual * (T::one() + T::epsilon() * T::lit(16.0)) {
            best = root;
        }
    }
    Ok(best)
}

/// Fits for the three tied parameter functions K, ε and ζ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FitSet<T: Scalar> {
    #[serde(rename = "K")]
    pub k: FourierFit<T>,
    pub eps: FourierFit<T>,
    pub zeta: FourierFit<T>,
}

/// Fourier order used for each parameter function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitOrders {
    pub k: usize,
    pub eps: usize,
    pub zeta: usize,
}

impl Default for FitOrders {
    fn default() -> Self {
        FitOrders {
            k: 2,
            eps: 1,
            zeta: 1,
        }
    }
}

/// Identifies one of the three fitted functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FitTarget {
    #[serde(rename = "K")]
    K,
    #[serde(rename = "eps")]
    Eps,
    #[serde(rename = "zeta")]
    Zeta,
}

impl FitTarget {
    pub const ALL: [FitTarget; 3] = [FitTarget::K, FitTarget::Eps, FitTarget::Zeta];

    pub fn name(self) -> &'static str {
        match self {
            FitTarget::K => "K",
            FitTarget::Eps => "eps",
            FitTarget::Zeta => "zeta",
        }
    }

    /// Schedule column the fit is taken from (the A column for tied pairs).
    pub fn column(self) -> ParamKind {
        match self {
            FitTarget::K => ParamKind::KA,
            FitTarget::Eps => ParamKind::EpsA,
            FitTarget::Zeta => ParamKind::Zeta,
        }
    }
}

impl std::str::FromStr for FitTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "K" | "k" => Ok(FitTarget::K),
            "eps" | "epsilon" => Ok(FitTarget::Eps),
            "zeta" => Ok(FitTarget::Zeta),
            other => Err(Error::invalid(format!(
                "unknown parameter function `{other}`"
            ))),
        }
    }
}

impl<T: Scalar> FitSet<T> {
    pub fn get(&self, target: FitTarget) -> &FourierFit<T> {
        match target {
            FitTarget::K => &self.k,
            FitTarget::Eps => &self.eps,
            FitTarget::Zeta => &self.zeta,
        }
    }

    pub fn get_mut(&mut self, target: FitTarget) -> &mut FourierFit<T> {
        match target {
            FitTarget::K => &mut self.k,
            FitTarget::Eps => &mut self.eps,
            FitTarget::Zeta => &mut self.zeta,
        }
    }

    /// Fits the K_A, ε_A and ζ columns of a schedule.
    pub fn fit_schedule(
        schedule: &ParameterSchedule<T>,
        grid: &TimeGrid<T>,
        orders: FitOrders,
    ) -> Result<Self> {
        Ok(FitSet {
            k: fit_fourier(&schedule.column(ParamKind::KA), grid, orders.k)?,
            eps: fit_fourier(&schedule.column(ParamKind::EpsA), grid, orders.eps)?,
            zeta: fit_fourier(&schedule.column(ParamKind::Zeta), grid, orders.zeta)?,
        })
    }
}

/// Samples each fit at step midpoints; K and ε are applied to both qubits.
pub fn sample_to_schedule<T: Scalar>(
    fits: &FitSet<T>,
    grid: &TimeGrid<T>,
) -> Result<ParameterSchedule<T>> {
    grid.validate()?;
    let values = (0..grid.n_steps)
        .map(|k| {
            let t = grid.t_mid(k);
            let (kk, e, z) = (
                fits.k.evaluate(t),
                fits.eps.evaluate(t),
                fits.zeta.evaluate(t),
            );
            [kk, kk, e, e, z]
        })
        .collect();
    ParameterSchedule::new(values, true, true)
}
