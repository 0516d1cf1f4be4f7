use super::{ExpDecay, KernelShape};
use crate::error::{Error, Result};

/// `φ(t) = a · t · e^{−βt}` with `β > 0`.
///
/// `|φ|` is unimodal with peak `|a|/(βe)` at `t = 1/β`, so the exact
/// non-increasing envelope is flat up to the peak and follows `|φ|` after.
#[derive(Debug, Clone, Copy)]
pub struct Erlang {
    a: f64,
    beta: f64,
}

impl Erlang {
    pub fn new(a: f64, beta: f64) -> Result<Self> {
        if !a.is_finite() || !beta.is_finite() || beta <= 0.0 {
            return Err(Error::validation(format!(
                "erlang kernel needs finite a and beta > 0 (got a = {a}, beta = {beta})"
            )));
        }
        Ok(Erlang { a, beta })
    }
}

impl KernelShape for Erlang {
    fn family(&self) -> &'static str {
        "erlang"
    }

    fn eval_raw(&self, t: f64) -> f64 {
        self.a * t * (-self.beta * t).exp()
    }

    fn l1_norm(&self) -> f64 {
        self.a.abs() / (self.beta * self.beta)
    }

    fn first_moment(&self) -> f64 {
        2.0 * self.a.abs() / (self.beta * self.beta * self.beta)
    }

    fn envelope(&self, t: f64) -> f64 {
        let peak_t = 1.0 / self.beta;
        if t <= peak_t {
            self.a.abs() / (self.beta * std::f64::consts::E)
        } else {
            self.a.abs() * t * (-self.beta * t).exp()
        }
    }

    fn tail_mass(&self, t: f64) -> f64 {
        // ∫_t^∞ |a| s e^{−βs} ds = |a| e^{−βt} (t/β + 1/β²)
        self.a.abs() * (-self.beta * t).exp() * (t / self.beta + 1.0 / (self.beta * self.beta))
    }

    fn cutoff_for(&self, tail_tol: f64) -> Result<f64> {
        if self.a == 0.0 {
            return Ok(1.0);
        }
        // bisection on the monotone tail mass
        let mut hi = 1.0 / self.beta;
        while self.tail_mass(hi) > tail_tol {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::validation("erlang cutoff search diverged"));
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.tail_mass(mid) > tail_tol {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi.max(1.0 / self.beta))
    }

    fn nonnegative(&self) -> bool {
        self.a >= 0.0
    }

    fn erlang_decay(&self) -> Option<ExpDecay> {
        Some(ExpDecay {
            amplitude: self.a,
            rate: self.beta,
        })
    }
}
