//! Piecewise-constant parameter schedules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::TimeGrid;
use crate::hamiltonian::{HamiltonianParams, ParamKind};
use crate::scalar::Scalar;

pub const SCHEDULE_CSV_HEADER: &str = "step,t_mid,K_A,K_B,eps_A,eps_B,zeta";

/// Per-timestep Hamiltonian coefficients `(K_A, K_B, ε_A, ε_B, ζ)`.
///
/// With `tie_k` the two tunneling columns are kept identical, with `tie_eps`
/// the two bias columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ParameterSchedule<T: Scalar> {
    values: Vec<[T; 5]>,
    tie_k: bool,
    tie_eps: bool,
}

impl<T: Scalar> ParameterSchedule<T> {
    pub fn new(values: Vec<[T; 5]>, tie_k: bool, tie_eps: bool) -> Result<Self> {
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("schedule contains non-finite values"));
        }
        let s = ParameterSchedule {
            values,
            tie_k,
            tie_eps,
        };
        if !s.ties_hold() {
            return Err(Error::invalid("tied schedule columns differ"));
        }
        Ok(s)
    }

    /// Same parameters at every step.
    pub fn constant(
        p: HamiltonianParams<T>,
        n_steps: usize,
        tie_k: bool,
        tie_eps: bool,
    ) -> Result<Self> {
        Self::new(vec![p.to_array(); n_steps], tie_k, tie_eps)
    }

    pub fn zeros(n_steps: usize) -> Self {
        ParameterSchedule {
            values: vec![[T::zero(); 5]; n_steps],
            tie_k: true,
            tie_eps: true,
        }
    }

    pub fn cast<U: Scalar>(&self) -> ParameterSchedule<U> {
        ParameterSchedule {
            values: self
                .values
                .iter()
                .map(|r| r.map(|v| U::lit(v.to_f64_lossy())))
                .collect(),
            tie_k: self.tie_k,
            tie_eps: self.tie_eps,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tie_k(&self) -> bool {
        self.tie_k
    }

    pub fn tie_eps(&self) -> bool {
        self.tie_eps
    }

    pub fn values(&self) -> &[[T; 5]] {
        &self.values
    }

    pub fn step(&self, k: usize) -> HamiltonianParams<T> {
        HamiltonianParams::from_array(self.values[k])
    }

    pub fn column(&self, kind: ParamKind) -> Vec<T> {
        self.values.iter().map(|row| row[kind.index()]).collect()
    }

    /// Parameters that share a value with `kind` under the current ties.
    pub fn tied_group(&self, kind: ParamKind) -> &'static [ParamKind] {
        use ParamKind::*;
        match kind {
            KA | KB if self.tie_k => &[KA, KB],
            EpsA | EpsB if self.tie_eps => &[EpsA, EpsB],
            KA => &[KA],
            KB => &[KB],
            EpsA => &[EpsA],
            EpsB => &[EpsB],
            Zeta => &[Zeta],
        }
    }

    /// Columns that carry independent degrees of freedom.
    pub fn free_params(&self) -> Vec<ParamKind> {
        ParamKind::ALL
            .into_iter()
            .filter(|&k| {
                !(self.tie_k && k == ParamKind::KB) && !(self.tie_eps && k == ParamKind::EpsB)
            })
            .collect()
    }

    /// Adds `delta` to a parameter and everything tied to it.
    pub fn nudge(&mut self, step: usize, kind: ParamKind, delta: T) {
        for k in self.tied_group(kind) {
            self.values[step][k.index()] += delta;
        }
    }

    /// `self ← self + scale · direction`, then re-imposes the ties.
    pub fn axpy(&mut self, scale: T, direction: &[[T; 5]]) -> Result<()> {
        if direction.len() != self.values.len() {
            return Err(Error::LengthMismatch {
                expected: self.values.len(),
                got: direction.len(),
            });
        }
        for (row, d) in self.values.iter_mut().zip(direction) {
            for (v, dv) in row.iter_mut().zip(d) {
                *v += scale * *dv;
            }
        }
        self.apply_ties();
        Ok(())
    }

    /// Copies the A column over the B column for each tied pair.
    pub fn apply_ties(&mut self) {
        for row in &mut self.values {
            if self.tie_k {
                row[ParamKind::KB.index()] = row[ParamKind::KA.index()];
            }
            if self.tie_eps {
                row[ParamKind::EpsB.index()] = row[ParamKind::EpsA.index()];
            }
        }
    }

    pub fn ties_hold(&self) -> bool {
        self.values
            .iter()
            .all(|r| (!self.tie_k || r[0] == r[1]) && (!self.tie_eps || r[2] == r[3]))
    }

    /// CSV with header `step,t_mid,K_A,K_B,eps_A,eps_B,zeta`, 17 significant digits.
    pub fn to_csv(&self, grid: &TimeGrid<T>) -> String {
        let mut out = String::from(SCHEDULE_CSV_HEADER);
        out.push('\n');
        for (k, row) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}", k, fmt_float(grid.t_mid(k))));
            for v in row {
                out.push(',');
                out.push_str(&fmt_float(*v));
            }
            out.push('\n');
        }
        out
    }

    /// Parses the CSV layout of [`to_csv`](Self::to_csv). Ties are inferred
    /// from columns that are bitwise equal.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == SCHEDULE_CSV_HEADER => {}
            other => {
                return Err(Error::Parse(format!(
                    "expected schedule header `{SCHEDULE_CSV_HEADER}`, found {other:?}"
                )))
            }
        }
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 7 {
                return Err(Error::Parse(format!("row {i}: expected 7 fields")));
            }
            let step: usize = fields[0]
                .parse()
                .map_err(|_| Error::Parse(format!("row {i}: bad step index")))?;
            if step != i {
                return Err(Error::Parse(format!(
                    "row {i}: step index {step} out of order"
                )));
            }
            let mut row = [T::zero(); 5];
            for (slot, f) in row.iter_mut().zip(&fields[2..]) {
                let v: f64 = f
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {i}: bad number `{f}`")))?;
                *slot = T::lit(v);
            }
            values.push(row);
        }
        let tie_k = values.iter().all(|r| r[0] == r[1]);
        let tie_eps = values.iter().all(|r| r[2] == r[3]);
        Self::new(values, tie_k, tie_eps)
    }
}

/// Fixed 17-significant-digit scientific notation used by every CSV writer.
pub fn fmt_float<T: Scalar>(v: T) -> String {
    format!("{:.16e}", v.to_f64_lossy())
}
