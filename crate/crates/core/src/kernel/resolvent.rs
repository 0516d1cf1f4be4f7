//! The Volterra resolvent `ψ(t) = Σ_{k≥1} c^k |φ|^{*k}(t)` with
//! `c = α·m_{b,1}`, truncated at order `K` so the neglected geometric mass
//! `ρ^{K+1}/(1−ρ)` (with `ρ = c·‖φ‖₁`) stays below a tolerance.
//!
//! `ψ` controls the mean intensity (`E λ_t ≤ h(μ)·(1 + ‖ψ‖₁) = h(μ)/(1−ρ)`)
//! and bounds the conditional effect of an inserted point on the intensity,
//! which is what `malliavin::derivative_bound_check` verifies against.
//!
//! Convolution powers of the parametric families are evaluated in closed
//! form (`(a e^{−βt})^{*k} = a^k t^{k−1} e^{−βt}/(k−1)!` and the Erlang
//! analogue); only tabulated kernels fall back to trapezoid grid
//! convolution.

use super::Kernel;
use crate::error::{Error, Result};

/// `‖ψ‖₁ = ρ/(1−ρ)` for `ρ = α·m_{b,1}·‖φ‖₁ < 1`.
pub fn resolvent_l1_closed_form(alpha: f64, m_b1: f64, l1: f64) -> Result<f64> {
    let rho = alpha * m_b1 * l1;
    if rho >= 1.0 {
        return Err(Error::StabilityViolated { rho });
    }
    if rho < 0.0 || !rho.is_finite() {
        return Err(Error::domain(format!("invalid rho = {rho}")));
    }
    Ok(rho / (1.0 - rho))
}

/// Grid values of `|φ|^{*k}` on `[0, k·t_max]` by repeated trapezoid
/// convolution with step `dt`.
pub fn iterated_convolution(kernel: &Kernel, k: u32, dt: f64) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::domain("convolution power k must be >= 1"));
    }
    if !(dt > 0.0) {
        return Err(Error::domain("convolution step must be positive"));
    }
    let n1 = (kernel.support_cutoff() / dt).ceil() as usize;
    let base: Vec<f64> = (0..=n1)
        .map(|i| kernel.eval_unchecked(i as f64 * dt).abs())
        .collect();
    let mut acc = base.clone();
    for _ in 1..k {
        acc = conv_trapezoid(&base, &acc, dt, base.len() + acc.len() - 2);
    }
    Ok(acc)
}

/// Trapezoid discrete convolution `(f * g)(jΔ)` for `j = 0..=out_len`.
///
/// The integration range for node `j` is the overlap of the two supports;
/// its endpoints carry the half weights.
fn conv_trapezoid(f: &[f64], g: &[f64], dt: f64, out_len: usize) -> Vec<f64> {
    let mut out = vec![0.0; out_len + 1];
    for (j, slot) in out.iter_mut().enumerate().skip(1) {
        let mut sum = 0.0;
        let lo = j.saturating_sub(g.len() - 1);
        let hi = j.min(f.len() - 1);
        if lo >= hi {
            continue;
        }
        for i in lo..=hi {
            let w = if i == lo || i == hi { 0.5 } else { 1.0 };
            sum += w * f[i] * g[j - i];
        }
        *slot = sum * dt;
    }
    out
}

/// The truncated resolvent series on a uniform grid.
#[derive(Debug, Clone)]
pub struct Resolvent {
    step: f64,
    values: Vec<f64>,
    l1_norm: f64,
    truncation_order: u32,
    tail_bound: f64,
    rho: f64,
}

impl Resolvent {
    /// Build on `[0, kernel.support_cutoff()]`; see [`Resolvent::build_with_range`].
    pub fn build(kernel: &Kernel, alpha: f64, m_b1: f64, step: f64, tail_tol: f64) -> Result<Self> {
        Self::build_with_range(kernel, alpha, m_b1, step, tail_tol, kernel.support_cutoff())
    }

    /// Sum the series to the order `K` at which the geometric tail
    /// `ρ^{K+1}/(1−ρ)` drops below `tail_tol`.
    pub fn build_with_range(
        kernel: &Kernel,
        alpha: f64,
        m_b1: f64,
        step: f64,
        tail_tol: f64,
        range: f64,
    ) -> Result<Self> {
        if !(step > 0.0) || !(range > 0.0) {
            return Err(Error::domain("resolvent grid needs step > 0 and range > 0"));
        }
        if !(tail_tol > 0.0) {
            return Err(Error::domain("tail tolerance must be positive"));
        }
        let rho = alpha * m_b1 * kernel.l1_norm();
        if rho >= 1.0 {
            return Err(Error::StabilityViolated { rho });
        }
        let n = (range / step).ceil() as usize;
        if rho == 0.0 {
            return Ok(Resolvent {
                step,
                values: vec![0.0; n + 1],
                l1_norm: 0.0,
                truncation_order: 0,
                tail_bound: 0.0,
                rho,
            });
        }
        let order = truncation_order(rho, tail_tol);
        let c = alpha * m_b1;
        let values = if let Some(decay) = kernel.exp_decay() {
            series_exp(c, decay.amplitude.abs(), decay.rate, step, n, order)
        } else if let Some(decay) = kernel.erlang_decay() {
            series_erlang(c, decay.amplitude.abs(), decay.rate, step, n, order)
        } else {
            series_grid(kernel, c, step, n, order)
        };
        // Per-term masses are exactly ρ^k (Young's equality for nonnegative
        // functions), so the summed mass has a closed form.
        let l1_norm = rho * (1.0 - rho.powi(order as i32)) / (1.0 - rho);
        let tail_bound = rho.powi(order as i32 + 1) / (1.0 - rho);
        Ok(Resolvent {
            step,
            values,
            l1_norm,
            truncation_order: order,
            tail_bound,
            rho,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn l1_norm(&self) -> f64 {
        self.l1_norm
    }

    pub fn truncation_order(&self) -> u32 {
        self.truncation_order
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `ψ(t)` by linear interpolation; zero beyond the grid range.
    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let pos = t / self.step;
        let i = pos as usize;
        if i + 1 >= self.values.len() {
            return if i < self.values.len() { self.values[i] } else { 0.0 };
        }
        let frac = pos - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }
}

fn truncation_order(rho: f64, tail_tol: f64) -> u32 {
    // smallest K >= 1 with rho^{K+1}/(1-rho) <= tail_tol
    let mut k = 1u32;
    let mut tail = rho * rho / (1.0 - rho);
    while tail > tail_tol && k < 10_000 {
        k += 1;
        tail *= rho;
    }
    k
}

fn series_exp(c: f64, a: f64, beta: f64, step: f64, n: usize, order: u32) -> Vec<f64> {
    // term_1(t) = c·a·e^{−βt}; term_{k+1}(t) = term_k(t) · c·a·t/k
    let mut term: Vec<f64> = (0..=n)
        .map(|i| c * a * (-beta * i as f64 * step).exp())
        .collect();
    let mut acc = term.clone();
    for k in 1..order {
        for (i, v) in term.iter_mut().enumerate() {
            *v *= c * a * (i as f64 * step) / k as f64;
        }
        for (i, v) in term.iter().enumerate() {
            acc[i] += v;
        }
    }
    acc
}

fn series_erlang(c: f64, a: f64, beta: f64, step: f64, n: usize, order: u32) -> Vec<f64> {
    // |φ|^{*k}(t) = a^k t^{2k−1} e^{−βt} / (2k−1)!
    let mut term: Vec<f64> = (0..=n)
        .map(|i| {
            let t = i as f64 * step;
            c * a * t * (-beta * t).exp()
        })
        .collect();
    let mut acc = term.clone();
    for k in 1..order {
        let denom = (2 * k) as f64 * (2 * k + 1) as f64;
        for (i, v) in term.iter_mut().enumerate() {
            let t = i as f64 * step;
            *v *= c * a * t * t / denom;
        }
        for (i, v) in term.iter().enumerate() {
            acc[i] += v;
        }
    }
    acc
}

fn series_grid(kernel: &Kernel, c: f64, step: f64, n: usize, order: u32) -> Vec<f64> {
    let base: Vec<f64> = (0..=n)
        .map(|i| c * kernel.eval_unchecked(i as f64 * step).abs())
        .collect();
    let mut term = base.clone();
    let mut acc = base.clone();
    for _ in 1..order {
        term = conv_trapezoid(&base, &term, step, n);
        for (i, v) in term.iter().enumerate() {
            acc[i] += v;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trapz(values: &[f64], dt: f64) -> f64 {
        let inner: f64 = values[1..values.len() - 1].iter().sum();
        (inner + 0.5 * (values[0] + values[values.len() - 1])) * dt
    }

    #[test]
    fn l1_closed_form_cases() {
        assert_eq!(resolvent_l1_closed_form(1.0, 1.0, 0.5).unwrap(), 1.0);
        assert_eq!(resolvent_l1_closed_form(1.0, 1.0, 0.0).unwrap(), 0.0);
        assert!((resolvent_l1_closed_form(2.0, 1.0, 0.4).unwrap() - 4.0).abs() < 1e-12);
        assert!(matches!(
            resolvent_l1_closed_form(2.0, 1.0, 0.5).unwrap_err(),
            Error::StabilityViolated { .. }
        ));
    }

    #[test]
    fn convolution_base_case_is_abs_kernel() {
        let k = Kernel::exponential(-0.5, 1.0).unwrap();
        let grid = iterated_convolution(&k, 1, 0.01).unwrap();
        assert!((grid[0] - 0.5).abs() < 1e-15);
        assert!((grid[100] - 0.5 * (-1.0f64).exp()).abs() < 1e-12);
        assert!(iterated_convolution(&k, 0, 0.01).is_err());
    }

    #[test]
    fn exponential_self_convolution_matches_closed_form() {
        // (a e^{−βt}) * (a e^{−βt}) = a² t e^{−βt}
        let k = Kernel::exponential(0.5, 1.0).unwrap();
        let dt = 0.01;
        let grid = iterated_convolution(&k, 2, dt).unwrap();
        for i in (0..grid.len()).step_by(97) {
            let t = i as f64 * dt;
            let exact = 0.25 * t * (-t).exp();
            assert!(
                (grid[i] - exact).abs() < 2e-5,
                "t = {t}: {} vs {exact}",
                grid[i]
            );
        }
    }

    #[test]
    fn convolution_mass_obeys_young_equality() {
        let k = Kernel::exponential(0.5, 1.0).unwrap();
        let dt = 0.005;
        for power in 1..=3u32 {
            let grid = iterated_convolution(&k, power, dt).unwrap();
            let mass = trapz(&grid, dt);
            let expected = k.l1_norm().powi(power as i32);
            let rel = (mass - expected).abs() / expected;
            assert!(
                rel < 10.0 * dt * power as f64,
                "k = {power}: mass {mass} vs {expected}"
            );
        }
    }

    #[test]
    fn exponential_resolvent_matches_closed_form() {
        // c = 1, φ = 0.5 e^{−t}  →  ψ(t) = 0.5 e^{−0.5 t}
        let k = Kernel::exponential(0.5, 1.0).unwrap();
        let r = Resolvent::build(&k, 1.0, 1.0, 1e-3, 1e-9).unwrap();
        let mut sup = 0.0f64;
        for (i, &v) in r.values().iter().enumerate() {
            let t = i as f64 * r.step();
            sup = sup.max((v - 0.5 * (-0.5 * t).exp()).abs());
        }
        assert!(sup < 1e-6, "sup grid error {sup}");
        assert!((r.l1_norm() - 1.0).abs() <= 1e-9 + 1e-12, "mass {}", r.l1_norm());
        assert!(r.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn zero_kernel_gives_zero_resolvent() {
        let k = Kernel::exponential(0.0, 1.0).unwrap();
        let r = Resolvent::build(&k, 1.0, 1.0, 0.01, 1e-9).unwrap();
        assert!(r.values().iter().all(|&v| v == 0.0));
        assert_eq!(r.l1_norm(), 0.0);
    }

    #[test]
    fn resolvent_rejects_supercritical() {
        let k = Kernel::exponential(0.5, 1.0).unwrap();
        assert!(matches!(
            Resolvent::build(&k, 2.0, 1.0, 0.01, 1e-9).unwrap_err(),
            Error::StabilityViolated { .. }
        ));
    }

    #[test]
    fn resolvent_satisfies_renewal_identity() {
        // ψ = c|φ| + c|φ| * ψ on the grid, within quadrature tolerance
        for kernel in [
            Kernel::exponential(0.5, 1.0).unwrap(),
            Kernel::erlang(1.0, 2.0).unwrap(),
        ] {
            let c = 0.9;
            let step = 2e-3;
            let r = Resolvent::build(&kernel, c, 1.0, step, 1e-12).unwrap();
            let n = r.values().len() - 1;
            let cphi: Vec<f64> = (0..=n)
                .map(|i| c * kernel.eval_unchecked(i as f64 * step).abs())
                .collect();
            let conv = conv_trapezoid(&cphi, r.values(), step, n);
            let mut worst = 0.0f64;
            for i in 0..=n {
                worst = worst.max((r.values()[i] - (cphi[i] + conv[i])).abs());
            }
            assert!(worst < 5e-5, "{}: renewal defect {worst}", kernel.family());
        }
    }

    #[test]
    fn resolvent_monotone_in_excitation() {
        let k = Kernel::exponential(0.5, 1.0).unwrap();
        let lo = Resolvent::build(&k, 0.8, 1.0, 0.01, 1e-10).unwrap();
        let hi = Resolvent::build(&k, 1.2, 1.0, 0.01, 1e-10).unwrap();
        for (a, b) in lo.values().iter().zip(hi.values()) {
            assert!(b >= a);
        }
    }

    #[test]
    fn tabulated_resolvent_close_to_parametric_twin() {
        // table sampled from 0.5 e^{−t} should give nearly the same resolvent
        let step = 0.01;
        let n = (18.0 / step) as usize;
        let table: Vec<f64> = (0..=n).map(|i| 0.5 * (-(i as f64) * step).exp()).collect();
        let k = Kernel::tabulated(step, table).unwrap();
        let r = Resolvent::build_with_range(&k, 1.0, 1.0, 0.02, 1e-9, 10.0).unwrap();
        let mut worst = 0.0f64;
        for (i, &v) in r.values().iter().enumerate() {
            let t = i as f64 * r.step();
            worst = worst.max((v - 0.5 * (-0.5 * t).exp()).abs());
        }
        assert!(worst < 2e-3, "sup error {worst}");
    }
}
