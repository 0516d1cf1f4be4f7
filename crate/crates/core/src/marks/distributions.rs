use std::fmt;

use crate::error::{Error, Result};
use crate::rng::Substream;

/// A mark law `ϑ`. All menu members have closed-form absolute moments of
/// every order, so the model's moment table is exact unless an affine-clamp
/// map forces a Monte-Carlo fallback.
pub trait MarkDistribution: Send + Sync + fmt::Debug {
    fn family(&self) -> &'static str;

    fn sample(&self, rng: &mut Substream) -> f64;

    /// `E|X|^k`, closed form.
    fn abs_moment(&self, k: u32) -> f64;

    /// Finite support atoms, when the law is purely atomic.
    fn atoms(&self) -> Option<(&[f64], &[f64])> {
        None
    }

    /// Whether the support lies in `[0, ∞)`.
    fn support_nonneg(&self) -> bool;
}

/// Point mass at `c`.
#[derive(Debug, Clone)]
pub struct Constant {
    value: [f64; 1],
    prob: [f64; 1],
}

impl Constant {
    pub fn new(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::validation("constant mark must be finite"));
        }
        Ok(Constant {
            value: [c],
            prob: [1.0],
        })
    }
}

impl MarkDistribution for Constant {
    fn family(&self) -> &'static str {
        "constant"
    }

    fn sample(&self, _rng: &mut Substream) -> f64 {
        self.value[0]
    }

    fn abs_moment(&self, k: u32) -> f64 {
        self.value[0].abs().powi(k as i32)
    }

    fn atoms(&self) -> Option<(&[f64], &[f64])> {
        Some((&self.value, &self.prob))
    }

    fn support_nonneg(&self) -> bool {
        self.value[0] >= 0.0
    }
}

/// Uniform on `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct Uniform {
    lo: f64,
    hi: f64,
}

impl Uniform {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::validation(format!(
                "uniform marks need lo < hi (got [{lo}, {hi}])"
            )));
        }
        Ok(Uniform { lo, hi })
    }
}

impl MarkDistribution for Uniform {
    fn family(&self) -> &'static str {
        "uniform"
    }

    fn sample(&self, rng: &mut Substream) -> f64 {
        self.lo + (self.hi - self.lo) * rng.uniform()
    }

    fn abs_moment(&self, k: u32) -> f64 {
        let p = k as i32 + 1;
        let width = self.hi - self.lo;
        let primitive = if self.lo >= 0.0 {
            self.hi.powi(p) - self.lo.powi(p)
        } else if self.hi <= 0.0 {
            (-self.lo).powi(p) - (-self.hi).powi(p)
        } else {
            (-self.lo).powi(p) + self.hi.powi(p)
        };
        primitive / (p as f64 * width)
    }

    fn support_nonneg(&self) -> bool {
        self.lo >= 0.0
    }
}

/// Exponential with the given rate.
#[derive(Debug, Clone)]
pub struct Exponential {
    rate: f64,
}

impl Exponential {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::validation("exponential marks need rate > 0"));
        }
        Ok(Exponential { rate })
    }
}

impl MarkDistribution for Exponential {
    fn family(&self) -> &'static str {
        "exponential"
    }

    fn sample(&self, rng: &mut Substream) -> f64 {
        rng.exponential(self.rate)
    }

    fn abs_moment(&self, k: u32) -> f64 {
        // E X^k = k! / rate^k
        let mut fact = 1.0;
        for i in 2..=k {
            fact *= i as f64;
        }
        fact / self.rate.powi(k as i32)
    }

    fn support_nonneg(&self) -> bool {
        true
    }
}

/// Finite atomic law; probabilities must sum to 1 within 1e-12.
#[derive(Debug, Clone)]
pub struct Discrete {
    values: Vec<f64>,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl Discrete {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(Error::validation(
                "discrete marks need matching, non-empty values and probs",
            ));
        }
        if values.iter().any(|v| !v.is_finite()) || probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::validation("discrete marks need finite values, probs >= 0"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::validation(format!(
                "discrete mark probabilities sum to {total}, not 1"
            )));
        }
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cdf.push(acc);
        }
        *cdf.last_mut().unwrap() = 1.0;
        Ok(Discrete { values, probs, cdf })
    }
}

impl MarkDistribution for Discrete {
    fn family(&self) -> &'static str {
        "discrete"
    }

    fn sample(&self, rng: &mut Substream) -> f64 {
        let u = rng.uniform();
        let idx = self.cdf.partition_point(|&c| c < u);
        self.values[idx.min(self.values.len() - 1)]
    }

    fn abs_moment(&self, k: u32) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| p * v.abs().powi(k as i32))
            .sum()
    }

    fn atoms(&self) -> Option<(&[f64], &[f64])> {
        Some((&self.values, &self.probs))
    }

    fn support_nonneg(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }
}
