//! The assembled model `(φ, ϑ, b, g, h, μ)` and its derived scalars.

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::marks::{MarkModel, Nonlinearity};
use crate::sim::Event;

/// `ρ = α · m_{b,1} · ‖φ‖₁`, the subcriticality margin. Callers must reject
/// configurations with `ρ ≥ 1`.
pub fn stability_margin(kernel: &Kernel, marks: &MarkModel, h: &Nonlinearity) -> f64 {
    h.lipschitz() * marks.m_b1() * kernel.l1_norm()
}

/// `h(μ)·(1 + ρ/(1−ρ)) = h(μ)/(1−ρ)`, the mean-intensity bound.
///
/// Written as `1 + ‖ψ‖₁` with the resolvent mass `‖ψ‖₁ = ρ/(1−ρ)`: the
/// leading 1 accounts for the baseline term, so the bound evaluates to
/// `h(μ)/(1−ρ)` — tight (an equality) in the linear case, where the
/// stationary mean is exactly `μ/(1−ρ)`.
pub fn mean_intensity_bound(h_mu: f64, rho: f64) -> Result<f64> {
    if rho >= 1.0 {
        return Err(Error::StabilityViolated { rho });
    }
    Ok(h_mu / (1.0 - rho))
}

/// Full model description shared read-only by every worker.
#[derive(Debug, Clone)]
pub struct Model {
    kernel: Kernel,
    marks: MarkModel,
    h: Nonlinearity,
    mu: f64,
    h_mu: f64,
    rho: f64,
}

impl Model {
    pub fn new(kernel: Kernel, marks: MarkModel, h: Nonlinearity, mu: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::validation("baseline mu must be finite"));
        }
        if h.is_identity() {
            if !kernel.nonnegative() {
                return Err(Error::validation(
                    "linear h requires a nonnegative kernel",
                ));
            }
            if mu <= 0.0 {
                return Err(Error::validation("linear h requires mu > 0"));
            }
            if !marks.b_nonneg() {
                return Err(Error::validation(
                    "linear h requires a nonnegative excitation weight b",
                ));
            }
        }
        let h_mu = h.apply(mu);
        if !(h_mu > 0.0) {
            return Err(Error::validation(format!(
                "baseline intensity h(mu) = {h_mu} must be positive"
            )));
        }
        let rho = stability_margin(&kernel, &marks, &h);
        Ok(Model {
            kernel,
            marks,
            h,
            mu,
            h_mu,
            rho,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn marks(&self) -> &MarkModel {
        &self.marks
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.h
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn h_mu(&self) -> f64 {
        self.h_mu
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn require_subcritical(&self) -> Result<()> {
        if self.rho >= 1.0 {
            return Err(Error::StabilityViolated { rho: self.rho });
        }
        Ok(())
    }

    pub fn mean_intensity_bound(&self) -> Result<f64> {
        mean_intensity_bound(self.h_mu, self.rho)
    }

    /// Stationary mean intensity in closed form: for `h = Id` the first
    /// moment solves `Eλ = μ + E[b]·‖φ‖₁·Eλ`, so `σ² = μ/(1 − m_{b,1}‖φ‖₁)`
    /// (linear validity already forces `b ≥ 0`, hence `E b = m_{b,1}`).
    pub fn sigma2_closed_form(&self) -> Option<f64> {
        if !self.h.is_identity() {
            return None;
        }
        let denom = 1.0 - self.marks.m_b1() * self.kernel.l1_norm();
        if denom <= 0.0 {
            return None;
        }
        Some(self.mu / denom)
    }

    /// `σ̃² = σ² · m_{g,2}`, the variance of the Brownian limit.
    pub fn sigma_tilde2(&self, sigma2: f64) -> f64 {
        sigma2 * self.marks.m_g2()
    }

    #[inline]
    pub fn h_at(&self, z: f64) -> f64 {
        self.h.apply(z)
    }

    /// `λ(t⁻) = h(μ + Σ_{τ_i < t} φ(t − τ_i) b(x_i))`.
    ///
    /// Only events strictly before `t` and within the kernel support window
    /// contribute; the sum runs left to right over that window so that any
    /// two call sites produce bit-identical values.
    pub fn lambda_at(&self, events: &[Event], t: f64) -> f64 {
        self.h_at(self.mu + self.excitation_at(events, t))
    }

    /// Thinning majorant `λ̄(t⁻) = h(μ) + α Σ φ̄(t − τ_i) |b(x_i)|`, valid
    /// because `h` is `α`-Lipschitz.
    pub fn lambda_bar_at(&self, events: &[Event], t: f64) -> f64 {
        self.h_mu + self.h.lipschitz() * self.majorant_excitation_at(events, t)
    }

    /// `(λ(t⁻), λ̄(t⁻))` in one window pass. The signed accumulation is
    /// ordered exactly as in [`Model::lambda_at`], so the first component is
    /// bit-identical to it.
    pub fn lambda_pair_at(&self, events: &[Event], t: f64) -> (f64, f64) {
        let window = self.window(events, t);
        let mut signed = 0.0;
        let mut dominating = 0.0;
        for ev in window {
            let b = self.marks.b(ev.mark);
            signed += self.kernel.eval_unchecked(t - ev.t) * b;
            dominating += self.kernel.envelope_at(t - ev.t) * b.abs();
        }
        (
            self.h_at(self.mu + signed),
            self.h_mu + self.h.lipschitz() * dominating,
        )
    }

    /// `Σ_{τ_i < t} φ(t − τ_i) b(x_i)` over the support window.
    pub fn excitation_at(&self, events: &[Event], t: f64) -> f64 {
        let window = self.window(events, t);
        let mut sum = 0.0;
        for ev in window {
            sum += self.kernel.eval_unchecked(t - ev.t) * self.marks.b(ev.mark);
        }
        sum
    }

    /// `Σ_{τ_i < t} φ̄(t − τ_i) |b(x_i)|` with the exact envelope `φ̄`.
    pub fn majorant_excitation_at(&self, events: &[Event], t: f64) -> f64 {
        let window = self.window(events, t);
        let mut sum = 0.0;
        for ev in window {
            sum += self.kernel.envelope_at(t - ev.t) * self.marks.b(ev.mark).abs();
        }
        sum
    }

    /// Events with `t − t_max ≤ τ < t`.
    fn window<'a>(&self, events: &'a [Event], t: f64) -> &'a [Event] {
        let cutoff = t - self.kernel.support_cutoff();
        let start = events.partition_point(|ev| ev.t < cutoff);
        let end = events.partition_point(|ev| ev.t < t);
        &events[start..end]
    }
}
