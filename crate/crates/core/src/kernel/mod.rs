//! Memory kernels and derived quantities.
//!
//! A kernel is the function `φ: ℝ₊ → ℝ` weighting past events in the
//! intensity. Each family implements [`KernelShape`]; [`Kernel`] wraps a
//! shape together with its integral data, a truncation horizon `t_max`
//! (chosen so the neglected tail mass stays below a tolerance), and a
//! non-increasing step majorant of `|φ|` used by thinning.
//!
//! Families are registered by name ([`families`], [`build`]) so a config
//! file can select them at runtime.

mod erlang;
mod exponential;
mod resolvent;
mod tabulated;

pub use erlang::Erlang;
pub use exponential::Exponential;
pub use resolvent::{iterated_convolution, resolvent_l1_closed_form, Resolvent};
pub use tabulated::Tabulated;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Default bound on the truncated tail mass `∫_{t_max}^∞ |φ|`.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;

/// Grid resolution of the step majorant (number of steps on `[0, t_max]`).
const MAJORANT_STEPS: usize = 4096;

/// Exponential decay data `c · e^{−β t}` shared by the closed-form families.
#[derive(Debug, Clone, Copy)]
pub struct ExpDecay {
    pub amplitude: f64,
    pub rate: f64,
}

/// One kernel family: pointwise evaluation plus the closed-form (or
/// quadrature) integral data the rest of the engine needs.
pub trait KernelShape: Send + Sync + fmt::Debug {
    fn family(&self) -> &'static str;

    /// `φ(t)` for `t ≥ 0`, before truncation.
    fn eval_raw(&self, t: f64) -> f64;

    /// `‖φ‖₁ = ∫₀^∞ |φ|`.
    fn l1_norm(&self) -> f64;

    /// `m = ∫₀^∞ t |φ(t)| dt`.
    fn first_moment(&self) -> f64;

    /// Exact non-increasing envelope of `|φ|` (running maximum from the
    /// right), before truncation.
    fn envelope(&self, t: f64) -> f64;

    /// Tail mass `∫_t^∞ |φ|`.
    fn tail_mass(&self, t: f64) -> f64;

    /// Truncation horizon with tail mass at most `tail_tol`.
    fn cutoff_for(&self, tail_tol: f64) -> Result<f64>;

    /// Whether `φ(t) ≥ 0` everywhere (required for the linear nonlinearity).
    fn nonnegative(&self) -> bool;

    /// Present when `φ(t) = a·e^{−βt}`.
    fn exp_decay(&self) -> Option<ExpDecay> {
        None
    }

    /// Present when `φ(t) = a·t·e^{−βt}`.
    fn erlang_decay(&self) -> Option<ExpDecay> {
        None
    }
}

/// Non-increasing step function on `[0, t_max]`, zero beyond.
#[derive(Debug, Clone)]
pub struct StepMajorant {
    step: f64,
    values: Vec<f64>,
}

impl StepMajorant {
    fn from_envelope(shape: &dyn KernelShape, t_max: f64, steps: usize) -> Self {
        let step = t_max / steps as f64;
        // Left-edge sampling of a non-increasing envelope dominates the
        // whole step interval.
        let values = (0..steps).map(|k| shape.envelope(k as f64 * step)).collect();
        StepMajorant { step, values }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Majorant value at `t`; zero for `t` beyond the support.
    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return self.values.first().copied().unwrap_or(0.0);
        }
        let idx = (t / self.step) as usize;
        self.values.get(idx).copied().unwrap_or(0.0)
    }
}

/// A memory kernel with cached integral data and truncation.
///
/// Evaluation treats `|φ|` as zero beyond `support_cutoff()`; the neglected
/// mass is recorded in `tail_bound()`.
#[derive(Debug, Clone)]
pub struct Kernel {
    shape: Arc<dyn KernelShape>,
    l1: f64,
    first_moment: f64,
    t_max: f64,
    tail_bound: f64,
    majorant: StepMajorant,
}

impl Kernel {
    pub fn from_shape(shape: Arc<dyn KernelShape>, tail_tol: f64) -> Result<Self> {
        if !(tail_tol > 0.0) {
            return Err(Error::validation("tail tolerance must be positive"));
        }
        let l1 = shape.l1_norm();
        let first_moment = shape.first_moment();
        if !l1.is_finite() || !first_moment.is_finite() {
            return Err(Error::validation(
                "kernel must have finite L1 norm and first absolute moment",
            ));
        }
        let t_max = shape.cutoff_for(tail_tol)?;
        let tail_bound = shape.tail_mass(t_max);
        let majorant = StepMajorant::from_envelope(shape.as_ref(), t_max, MAJORANT_STEPS);
        Ok(Kernel {
            shape,
            l1,
            first_moment,
            t_max,
            tail_bound,
            majorant,
        })
    }

    pub fn exponential(a: f64, beta: f64) -> Result<Self> {
        Self::from_shape(Arc::new(Exponential::new(a, beta)?), DEFAULT_TAIL_TOL)
    }

    pub fn erlang(a: f64, beta: f64) -> Result<Self> {
        Self::from_shape(Arc::new(Erlang::new(a, beta)?), DEFAULT_TAIL_TOL)
    }

    pub fn tabulated(step: f64, values: Vec<f64>) -> Result<Self> {
        Self::from_shape(Arc::new(Tabulated::new(step, values)?), DEFAULT_TAIL_TOL)
    }

    /// `φ(t)`; zero beyond the truncation horizon, linear interpolation for
    /// tabulated kernels. Negative `t` is a domain error.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::domain(format!("kernel evaluated at t = {t}")));
        }
        Ok(self.eval_unchecked(t))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, t: f64) -> f64 {
        if t > self.t_max {
            0.0
        } else {
            self.shape.eval_raw(t)
        }
    }

    /// Exact envelope of `|φ|` with the same truncation as `eval`.
    #[inline]
    pub fn envelope_at(&self, t: f64) -> f64 {
        if t > self.t_max {
            0.0
        } else {
            self.shape.envelope(t)
        }
    }

    /// `(‖φ‖₁, ∫ t|φ|)`, closed form for the parametric families and
    /// quadrature with the recorded tail bound for tabulated data.
    pub fn l1_and_moment(&self) -> (f64, f64) {
        (self.l1, self.first_moment)
    }

    pub fn l1_norm(&self) -> f64 {
        self.l1
    }

    pub fn first_moment(&self) -> f64 {
        self.first_moment
    }

    pub fn support_cutoff(&self) -> f64 {
        self.t_max
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn majorant(&self) -> &StepMajorant {
        &self.majorant
    }

    pub fn nonnegative(&self) -> bool {
        self.shape.nonnegative()
    }

    pub fn family(&self) -> &'static str {
        self.shape.family()
    }

    pub fn is_zero(&self) -> bool {
        self.l1 == 0.0
    }

    pub(crate) fn exp_decay(&self) -> Option<ExpDecay> {
        self.shape.exp_decay()
    }

    pub(crate) fn erlang_decay(&self) -> Option<ExpDecay> {
        self.shape.erlang_decay()
    }
}

/// Inputs for building a kernel by family name.
#[derive(Debug, Clone, Default)]
pub struct KernelParams {
    pub scalars: BTreeMap<String, f64>,
    /// `(step, values)` for tabulated kernels.
    pub table: Option<(f64, Vec<f64>)>,
    pub tail_tol: Option<f64>,
}

impl KernelParams {
    fn scalar(&self, key: &str) -> Result<f64> {
        self.scalars
            .get(key)
            .copied()
            .ok_or_else(|| Error::validation(format!("kernel parameter `{key}` is required")))
    }
}

/// Names of the registered kernel families.
pub fn families() -> &'static [&'static str] {
    &["exponential", "erlang", "tabulated"]
}

/// Build a kernel from a family name and its parameters.
pub fn build(family: &str, params: &KernelParams) -> Result<Kernel> {
    let tail_tol = params.tail_tol.unwrap_or(DEFAULT_TAIL_TOL);
    let shape: Arc<dyn KernelShape> = match family {
        "exponential" => Arc::new(Exponential::new(params.scalar("a")?, params.scalar("beta")?)?),
        "erlang" => Arc::new(Erlang::new(params.scalar("a")?, params.scalar("beta")?)?),
        "tabulated" => {
            let (step, values) = params.table.clone().ok_or_else(|| {
                Error::validation("tabulated kernel requires a (step, values) table")
            })?;
            Arc::new(Tabulated::new(step, values)?)
        }
        other => {
            return Err(Error::validation(format!(
                "unknown kernel family `{other}` (known: {})",
                families().join(", ")
            )))
        }
    };
    Kernel::from_shape(shape, tail_tol)
}
