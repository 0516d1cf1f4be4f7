use super::KernelShape;
use crate::error::{Error, Result};

/// Kernel given by samples on a uniform grid, linearly interpolated.
///
/// The grid end is the truncation horizon, so the table itself must decay:
/// a final sample with `|φ(t_end)|·Δ` above the tail tolerance is rejected
/// as non-integrable input.
#[derive(Debug, Clone)]
pub struct Tabulated {
    step: f64,
    values: Vec<f64>,
    /// suffix maxima of `|values|`; the exact non-increasing step envelope
    suffix_max: Vec<f64>,
    l1: f64,
    first_moment: f64,
}

impl Tabulated {
    pub fn new(step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::validation("tabulated kernel needs step > 0"));
        }
        if values.len() < 2 {
            return Err(Error::validation("tabulated kernel needs at least 2 samples"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("tabulated kernel has non-finite samples"));
        }
        let mut suffix_max = values.iter().map(|v| v.abs()).collect::<Vec<_>>();
        for i in (0..suffix_max.len() - 1).rev() {
            suffix_max[i] = suffix_max[i].max(suffix_max[i + 1]);
        }
        let trapz = |f: &dyn Fn(usize, f64) -> f64| {
            let mut acc = 0.0;
            for i in 0..values.len() - 1 {
                let a = f(i, i as f64 * step);
                let b = f(i + 1, (i + 1) as f64 * step);
                acc += 0.5 * (a + b) * step;
            }
            acc
        };
        let l1 = trapz(&|i, _| values[i].abs());
        let first_moment = trapz(&|i, t| t * values[i].abs());
        Ok(Tabulated {
            step,
            values,
            suffix_max,
            l1,
            first_moment,
        })
    }

    fn t_end(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step
    }
}

impl KernelShape for Tabulated {
    fn family(&self) -> &'static str {
        "tabulated"
    }

    fn eval_raw(&self, t: f64) -> f64 {
        if t >= self.t_end() {
            return if t == self.t_end() {
                *self.values.last().unwrap()
            } else {
                0.0
            };
        }
        let pos = t / self.step;
        let i = pos as usize;
        let frac = pos - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    fn l1_norm(&self) -> f64 {
        self.l1
    }

    fn first_moment(&self) -> f64 {
        self.first_moment
    }

    fn envelope(&self, t: f64) -> f64 {
        if t < 0.0 {
            return self.suffix_max[0];
        }
        let i = (t / self.step) as usize;
        self.suffix_max.get(i).copied().unwrap_or(0.0)
    }

    fn tail_mass(&self, t: f64) -> f64 {
        if t >= self.t_end() {
            return 0.0;
        }
        let mut acc = 0.0;
        let mut lo = t;
        let mut i = (t / self.step) as usize;
        while lo < self.t_end() {
            let hi = ((i + 1) as f64 * self.step).min(self.t_end());
            acc += 0.5 * (self.eval_raw(lo).abs() + self.eval_raw(hi).abs()) * (hi - lo);
            lo = hi;
            i += 1;
        }
        acc
    }

    fn cutoff_for(&self, tail_tol: f64) -> Result<f64> {
        let last = self.values.last().unwrap().abs();
        if last * self.step > tail_tol {
            return Err(Error::validation(format!(
                "tabulated kernel does not decay: |phi| at the grid end is {last}, implied \
                 tail mass exceeds {tail_tol}"
            )));
        }
        Ok(self.t_end())
    }

    fn nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }
}
