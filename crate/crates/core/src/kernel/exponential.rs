use super::{ExpDecay, KernelShape};
use crate::error::{Error, Result};

/// `φ(t) = a · e^{−βt}` with `β > 0`; `a < 0` models inhibition.
#[derive(Debug, Clone, Copy)]
pub struct Exponential {
    a: f64,
    beta: f64,
}

impl Exponential {
    pub fn new(a: f64, beta: f64) -> Result<Self> {
        if !a.is_finite() || !beta.is_finite() || beta <= 0.0 {
            return Err(Error::validation(format!(
                "exponential kernel needs finite a and beta > 0 (got a = {a}, beta = {beta})"
            )));
        }
        Ok(Exponential { a, beta })
    }
}

impl KernelShape for Exponential {
    fn family(&self) -> &'static str {
        "exponential"
    }

    fn eval_raw(&self, t: f64) -> f64 {
        self.a * (-self.beta * t).exp()
    }

    fn l1_norm(&self) -> f64 {
        self.a.abs() / self.beta
    }

    fn first_moment(&self) -> f64 {
        self.a.abs() / (self.beta * self.beta)
    }

    fn envelope(&self, t: f64) -> f64 {
        self.a.abs() * (-self.beta * t).exp()
    }

    fn tail_mass(&self, t: f64) -> f64 {
        self.a.abs() / self.beta * (-self.beta * t).exp()
    }

    fn cutoff_for(&self, tail_tol: f64) -> Result<f64> {
        if self.a == 0.0 {
            return Ok(1.0);
        }
        // (|a|/β)·e^{−β t} = tol
        Ok(((self.a.abs() / self.beta / tail_tol).ln() / self.beta).max(1.0))
    }

    fn nonnegative(&self) -> bool {
        self.a >= 0.0
    }

    fn exp_decay(&self) -> Option<ExpDecay> {
        Some(ExpDecay {
            amplitude: self.a,
            rate: self.beta,
        })
    }
}
