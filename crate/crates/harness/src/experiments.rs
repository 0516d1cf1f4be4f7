//! Experiment drivers.
//!
//! Replicas use common random numbers across experiment cells: replica `r`
//! always runs on the field substream keyed by `(master_seed, r)`, so a
//! longer horizon extends the same realization and cross-cell trends are
//! not washed out by Monte-Carlo noise. Every driver embeds a control cell
//! with a known law and refuses to report model cells when the control
//! fails.

use rayon::prelude::*;

use hawkes_core::kernel::Resolvent;
use hawkes_core::malliavin::{derivative_bound_check, theta_irrelevance_check, DerivativeBoundRow};
use hawkes_core::rescale::{discretization_error_with_step, rescale_with_step, GapStats};
use hawkes_core::rng::{derive_seed, Substream};
use hawkes_core::sim::{
    compensator_profile, default_burn_in, simulate_path, stationary_sigma2, PathRecord,
};
use hawkes_core::stats::{loglog_slope, mean_stderr};
use hawkes_core::wasserstein::{
    functional_w1_lower_bound, increment_vector_w1_lower_bound, standard_family,
    w1_vs_gaussian_1d, GaussianReference,
};

use crate::config::ExperimentConfig;
use crate::{HarnessError, Result};

const CONTROL_WORD: u64 = 0x4354_524c;
const REFERENCE_WORD: u64 = 0x5245_4631;
const THETA_WORD: u64 = 0x5448_4554;

/// How σ² was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma2Source {
    ClosedForm,
    Estimated,
}

#[derive(Debug, Clone, Copy)]
pub struct Sigma2Resolution {
    pub sigma2: f64,
    pub stderr: f64,
    pub source: Sigma2Source,
    pub sigma_tilde2: f64,
}

/// σ² from the linear closed form when available, otherwise by burn-in
/// time-averaging; aborts when the estimate is too noisy to anchor the
/// Gaussian reference.
pub fn resolve_sigma2(cfg: &ExperimentConfig) -> Result<Sigma2Resolution> {
    let model = &cfg.model;
    if let Some(sigma2) = model.sigma2_closed_form() {
        return Ok(Sigma2Resolution {
            sigma2,
            stderr: 0.0,
            source: Sigma2Source::ClosedForm,
            sigma_tilde2: model.sigma_tilde2(sigma2),
        });
    }
    let burn_in = cfg.burn_in.unwrap_or_else(|| default_burn_in(model));
    let horizon = cfg.sigma2_horizon.unwrap_or(burn_in + 200.0);
    let est = stationary_sigma2(
        model,
        burn_in,
        horizon,
        cfg.sigma2_replicas,
        &cfg.base_field(),
        &cfg.sim_options(),
    )?;
    if est.stderr > cfg.sigma2_rel_tol * est.value {
        return Err(HarnessError::Config(format!(
            "sigma2 estimate {:.6} +- {:.6} exceeds the relative tolerance {}: \
             raise experiment.sigma2_replicas or experiment.sigma2_horizon",
            est.value, est.stderr, cfg.sigma2_rel_tol
        )));
    }
    Ok(Sigma2Resolution {
        sigma2: est.value,
        stderr: est.stderr,
        source: Sigma2Source::Estimated,
        sigma_tilde2: model.sigma_tilde2(est.value),
    })
}

/// Simulate the replica set at one horizon.
fn replica_paths(cfg: &ExperimentConfig, horizon: f64, count: usize) -> Result<Vec<PathRecord>> {
    let base = cfg.base_field();
    let opts = cfg.sim_options();
    (0..count)
        .into_par_iter()
        .map(|r| Ok(simulate_path(&cfg.model, horizon, &base.replica(r as u64), &opts)?))
        .collect()
}

/// Terminal values `F^(T)_1` for the replica set.
fn terminal_samples(cfg: &ExperimentConfig, horizon: f64) -> Result<Vec<f64>> {
    let base = cfg.base_field();
    let opts = cfg.sim_options();
    let m_g1 = cfg.model.marks().m_g1();
    (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let path = simulate_path(&cfg.model, horizon, &base.replica(r as u64), &opts)?;
            let lambda = compensator_profile(&cfg.model, &path, &[horizon], cfg.quad_step)?;
            Ok((path.compound_total(&cfg.model) - m_g1 * lambda[0]) / horizon.sqrt())
        })
        .collect()
}

/// One control-cell outcome.
#[derive(Debug, Clone)]
pub struct ControlCell {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl ControlCell {
    fn ensure(self) -> Result<ControlCell> {
        if self.pass {
            Ok(self)
        } else {
            Err(HarnessError::ControlFailed(format!(
                "{}: {} > {}",
                self.name, self.value, self.threshold
            )))
        }
    }
}

/// One `(T, n)` row of a convergence report.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub t: f64,
    pub n: usize,
    pub marginal_w1: Option<f64>,
    pub marginal_stderr: Option<f64>,
    pub functional_lb: Option<f64>,
    pub functional_stderr: Option<f64>,
    pub increment_lb: Option<f64>,
    pub best_functional: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub sigma2: Sigma2Resolution,
    /// least-squares slope of `ln(distance)` against `ln T`
    pub slope: f64,
    /// max over rows of `distance / (ln T · T^{−1/10})`
    pub fitted_c: f64,
    pub control: ControlCell,
}

fn envelope(t: f64) -> f64 {
    t.ln().max(0.1) * t.powf(-0.1)
}

/// Convergence of the terminal marginal to `N(0, σ̃²)` in W₁.
pub fn run_marginal_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let sigma2 = resolve_sigma2(cfg)?;
    let sd = sigma2.sigma_tilde2.sqrt();

    // control: the distance of true Gaussian samples must sit at the
    // empirical-fluctuation scale
    let mut rng = Substream::derived(cfg.master_seed, &[CONTROL_WORD]);
    let ctrl_samples: Vec<f64> = (0..cfg.replicas).map(|_| sd * rng.standard_normal()).collect();
    let ctrl_value = w1_vs_gaussian_1d(&ctrl_samples, 0.0, sigma2.sigma_tilde2)?;
    let control = ControlCell {
        name: "gaussian_samples_vs_gaussian".into(),
        value: ctrl_value,
        threshold: sd * 6.0 / (cfg.replicas as f64).sqrt(),
        pass: ctrl_value <= sd * 6.0 / (cfg.replicas as f64).sqrt(),
    }
    .ensure()?;

    let mut rows = Vec::new();
    for &t in &cfg.t_grid {
        let samples = terminal_samples(cfg, t)?;
        let w1 = w1_vs_gaussian_1d(&samples, 0.0, sigma2.sigma_tilde2)?;
        // indicative spread from a 4-way batch split
        let quarter = samples.len() / 4;
        let batches: Vec<f64> = (0..4)
            .map(|b| {
                w1_vs_gaussian_1d(
                    &samples[b * quarter..(b + 1) * quarter],
                    0.0,
                    sigma2.sigma_tilde2,
                )
            })
            .collect::<hawkes_core::Result<_>>()?;
        let (_, batch_stderr) = mean_stderr(&batches);
        rows.push(ConvergenceRow {
            t,
            n: 1,
            marginal_w1: Some(w1),
            marginal_stderr: Some(batch_stderr),
            functional_lb: None,
            functional_stderr: None,
            increment_lb: None,
            best_functional: None,
        });
    }
    let w1s: Vec<f64> = rows.iter().map(|r| r.marginal_w1.unwrap()).collect();
    let slope = loglog_slope(&cfg.t_grid, &w1s);
    let fitted_c = rows
        .iter()
        .map(|r| r.marginal_w1.unwrap() / envelope(r.t))
        .fold(0.0, f64::max);
    Ok(ConvergenceReport {
        rows,
        sigma2,
        slope,
        fitted_c,
        control,
    })
}

/// Functional lower bounds along the horizon grid with the subdivision rule.
pub fn run_functional_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let sigma2 = resolve_sigma2(cfg)?;
    let family = standard_family();
    let mut rows = Vec::new();
    let mut control: Option<ControlCell> = None;

    // reference paths are two orders of magnitude cheaper than simulated
    // ones, so oversampling that side sharpens every mean-difference
    let ref_count = (4 * cfg.replicas).min(800_000);
    for &t in &cfg.t_grid {
        let n = cfg.n_rule.n_for(t);
        let reference = GaussianReference::new(sigma2.sigma_tilde2, n)?;
        let ref_seed = derive_seed(cfg.master_seed, &[REFERENCE_WORD, t.to_bits()]);

        // control: reference against an independent reference sample
        let ctrl_paths: Vec<Vec<f64>> = (0..cfg.replicas)
            .map(|r| {
                let mut rng =
                    Substream::derived(cfg.master_seed, &[CONTROL_WORD, t.to_bits(), r as u64]);
                reference.sample_path(&mut rng)
            })
            .collect();
        let ctrl =
            functional_w1_lower_bound(&ctrl_paths, &reference, ref_count, ref_seed, &family)?;
        let cell = ControlCell {
            name: format!("reference_vs_reference_t{t}"),
            value: ctrl.value,
            threshold: 5.0 * ctrl.stderr,
            pass: ctrl.value <= 5.0 * ctrl.stderr,
        }
        .ensure()?;
        control.get_or_insert(cell);

        let base = cfg.base_field();
        let opts = cfg.sim_options();
        let scaled: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.replicas)
            .into_par_iter()
            .map(|r| -> Result<(Vec<f64>, Vec<f64>)> {
                let path = simulate_path(&cfg.model, t, &base.replica(r as u64), &opts)?;
                let s = rescale_with_step(&cfg.model, &path, t, n, cfg.quad_step)?;
                let deltas = s.increments().deltas;
                Ok((s.values, deltas))
            })
            .collect::<Result<_>>()?;
        let mut values = Vec::with_capacity(scaled.len());
        let mut increments = Vec::with_capacity(scaled.len());
        for (v, d) in scaled {
            values.push(v);
            increments.push(d);
        }
        let lb = functional_w1_lower_bound(&values, &reference, ref_count, ref_seed, &family)?;
        let lb_inc =
            increment_vector_w1_lower_bound(&increments, &reference, ref_count, ref_seed, &family)?;
        if (lb.value - lb_inc.value).abs() > 1e-9 * (1.0 + lb.value) {
            return Err(HarnessError::CheckFailed(format!(
                "increment embedding disagrees with path projection at T = {t}: {} vs {}",
                lb.value, lb_inc.value
            )));
        }
        rows.push(ConvergenceRow {
            t,
            n,
            marginal_w1: None,
            marginal_stderr: None,
            functional_lb: Some(lb.value),
            functional_stderr: Some(lb.stderr),
            increment_lb: Some(lb_inc.value),
            best_functional: Some(lb.best),
        });
    }
    let lbs: Vec<f64> = rows.iter().map(|r| r.functional_lb.unwrap()).collect();
    let slope = loglog_slope(&cfg.t_grid, &lbs);
    let fitted_c = rows
        .iter()
        .map(|r| r.functional_lb.unwrap() / envelope(r.t))
        .fold(0.0, f64::max);
    Ok(ConvergenceReport {
        rows,
        sigma2,
        slope,
        fitted_c,
        control: control.unwrap(),
    })
}

/// One `(T, n)` cell of the moment-bound tables.
#[derive(Debug, Clone)]
pub struct LemmaRow {
    pub t: f64,
    pub n: usize,
    /// `(1/T²) Σ_i E[(∫ λ over cell i)²]`
    pub quad_lhs: f64,
    pub quad_stderr: f64,
    /// `quad_lhs / (1/T + 1/n)`
    pub quad_ratio: f64,
    /// `Σ_i E|σ²/n − (1/T)∫ λ over cell i|`
    pub var_lhs: f64,
    pub var_stderr: f64,
    /// `var_lhs / (1/T + √(n/T))`
    pub var_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct LemmaReport {
    pub rows: Vec<LemmaRow>,
    pub sigma2: Sigma2Resolution,
}

/// Monte-Carlo left-hand sides of the two moment bounds over the
/// `(T, n)` grid, with ratio tables against the bounds' shapes.
pub fn run_lemma_checks(cfg: &ExperimentConfig) -> Result<LemmaReport> {
    let sigma2 = resolve_sigma2(cfg)?;
    let base = cfg.base_field();
    let opts = cfg.sim_options();
    let mut rows = Vec::new();
    for &t in &cfg.t_grid {
        // one simulation sweep per horizon, reused across n (common random
        // numbers across cells)
        let paths: Vec<PathRecord> = (0..cfg.replicas)
            .into_par_iter()
            .map(|r| Ok(simulate_path(&cfg.model, t, &base.replica(r as u64), &opts)?))
            .collect::<Result<_>>()?;
        for &n in &cfg.n_grid {
            let grid: Vec<f64> = (0..=n).map(|i| t * i as f64 / n as f64).collect();
            let stats: Vec<(f64, f64)> = paths
                .par_iter()
                .map(|path| {
                    let lam = compensator_profile(&cfg.model, path, &grid, cfg.quad_step)?;
                    let mut quad = 0.0;
                    let mut var = 0.0;
                    for i in 0..n {
                        let inc = lam[i + 1] - lam[i];
                        quad += inc * inc;
                        var += (sigma2.sigma2 / n as f64 - inc / t).abs();
                    }
                    Ok((quad / (t * t), var))
                })
                .collect::<Result<_>>()?;
            let (quad_lhs, quad_stderr) =
                mean_stderr(&stats.iter().map(|s| s.0).collect::<Vec<_>>());
            let (var_lhs, var_stderr) = mean_stderr(&stats.iter().map(|s| s.1).collect::<Vec<_>>());
            rows.push(LemmaRow {
                t,
                n,
                quad_lhs,
                quad_stderr,
                quad_ratio: quad_lhs / (1.0 / t + 1.0 / n as f64),
                var_lhs,
                var_stderr,
                var_ratio: var_lhs / (1.0 / t + (n as f64 / t).sqrt()),
            });
        }
    }
    Ok(LemmaReport { rows, sigma2 })
}

#[derive(Debug, Clone)]
pub struct DiscretizationRow {
    pub n: usize,
    pub stats: GapStats,
}

#[derive(Debug, Clone)]
pub struct DiscretizationReport {
    pub t: f64,
    pub rows: Vec<DiscretizationRow>,
    /// log-log slope of the mean gap in n
    pub slope: f64,
}

/// `E sup |F − Π_n F|` across the `n` grid at the largest horizon, with
/// common random numbers (one path set reused for every `n`).
pub fn run_discretization(cfg: &ExperimentConfig) -> Result<DiscretizationReport> {
    let t = *cfg.t_grid.last().unwrap();
    let paths = replica_paths(cfg, t, cfg.replicas)?;
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        let audit = cfg.audit_points.unwrap_or((10 * n).max(1024));
        let stats =
            discretization_error_with_step(&cfg.model, &paths, t, n, audit, cfg.quad_step)?;
        rows.push(DiscretizationRow { n, stats });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let gaps: Vec<f64> = rows.iter().map(|r| r.stats.mean_sup_gap).collect();
    Ok(DiscretizationReport {
        t,
        rows,
        slope: loglog_slope(&ns, &gaps),
    })
}

#[derive(Debug, Clone)]
pub struct MalliavinReport {
    pub rows: Vec<DerivativeBoundRow>,
    pub theta_pairs: usize,
    pub theta_all_equal: bool,
}

impl MalliavinReport {
    pub fn all_satisfied(&self) -> bool {
        self.theta_all_equal && self.rows.iter().all(|r| r.satisfied)
    }
}

/// Derivative-bound table plus the threshold-irrelevance check.
pub fn run_malliavin(cfg: &ExperimentConfig) -> Result<MalliavinReport> {
    let mc = &cfg.malliavin;
    let replicas = mc.replicas.unwrap_or(cfg.replicas);
    let base = cfg.base_field();
    let opts = cfg.sim_options();
    let t_grid: Vec<f64> = (1..=mc.lags)
        .map(|k| mc.u + mc.max_lag * k as f64 / mc.lags as f64)
        .collect();
    let rows = derivative_bound_check(&cfg.model, mc.u, mc.mark, &t_grid, replicas, &base, &opts)?;

    // threshold irrelevance on random sub-intensity pairs
    let horizon = mc.u + mc.max_lag;
    let path = simulate_path(&cfg.model, horizon, &base, &opts)?;
    let lambda_u = cfg.model.lambda_at(&path.events, mc.u);
    let mut rng = Substream::derived(cfg.master_seed, &[THETA_WORD]);
    let mut all_equal = true;
    for _ in 0..mc.theta_pairs {
        let r1 = rng.uniform() * lambda_u;
        let r2 = rng.uniform() * lambda_u;
        let x = cfg.model.marks().sample(&mut rng);
        all_equal &=
            theta_irrelevance_check(&cfg.model, &path, mc.u, r1, r2, x, &base, &opts)?;
    }
    Ok(MalliavinReport {
        rows,
        theta_pairs: mc.theta_pairs,
        theta_all_equal: all_equal,
    })
}

/// Sigma² subcommand payload.
#[derive(Debug, Clone)]
pub struct Sigma2Report {
    pub value: f64,
    pub stderr: f64,
    pub closed_form: Option<f64>,
    pub mean_intensity_bound: f64,
    pub burn_in: f64,
    pub horizon: f64,
    pub replicas: usize,
}

pub fn run_sigma2(cfg: &ExperimentConfig) -> Result<Sigma2Report> {
    let burn_in = cfg.burn_in.unwrap_or_else(|| default_burn_in(&cfg.model));
    let horizon = cfg.sigma2_horizon.unwrap_or(burn_in + 200.0);
    let est = stationary_sigma2(
        &cfg.model,
        burn_in,
        horizon,
        cfg.sigma2_replicas,
        &cfg.base_field(),
        &cfg.sim_options(),
    )?;
    Ok(Sigma2Report {
        value: est.value,
        stderr: est.stderr,
        closed_form: est.closed_form,
        mean_intensity_bound: cfg.model.mean_intensity_bound()?,
        burn_in,
        horizon,
        replicas: cfg.sigma2_replicas,
    })
}

/// Scalar table for the `constants` subcommand.
#[derive(Debug, Clone)]
pub struct ConstantsReport {
    pub kernel_family: String,
    pub l1_norm: f64,
    pub first_moment: f64,
    pub support_cutoff: f64,
    pub tail_bound: f64,
    pub lipschitz: f64,
    pub m_b: [f64; 2],
    pub m_g: [f64; 4],
    pub rho: f64,
    pub resolvent_l1: f64,
    pub resolvent_order: u32,
    pub mean_intensity_bound: f64,
    pub sigma2_closed_form: Option<f64>,
    pub h_mu: f64,
}

pub fn run_constants(cfg: &ExperimentConfig) -> Result<ConstantsReport> {
    let model = &cfg.model;
    let kernel = model.kernel();
    let marks = model.marks();
    let resolvent = Resolvent::build(
        kernel,
        model.nonlinearity().lipschitz(),
        marks.m_b1(),
        1e-3,
        1e-9,
    )?;
    Ok(ConstantsReport {
        kernel_family: kernel.family().to_string(),
        l1_norm: kernel.l1_norm(),
        first_moment: kernel.first_moment(),
        support_cutoff: kernel.support_cutoff(),
        tail_bound: kernel.tail_bound(),
        lipschitz: model.nonlinearity().lipschitz(),
        m_b: marks.m_b(),
        m_g: marks.m_g(),
        rho: model.rho(),
        resolvent_l1: resolvent.l1_norm(),
        resolvent_order: resolvent.truncation_order(),
        mean_intensity_bound: model.mean_intensity_bound()?,
        sigma2_closed_form: model.sigma2_closed_form(),
        h_mu: model.h_mu(),
    })
}

/// One exported path for the `simulate` subcommand: the full candidate log
/// and a compensator checkpoint grid.
pub struct SimulateExport {
    pub path: PathRecord,
    pub checkpoints: Vec<(f64, f64)>,
}

pub fn run_simulate(cfg: &ExperimentConfig) -> Result<SimulateExport> {
    let horizon = *cfg.t_grid.last().unwrap();
    let field = cfg.base_field().replica(0);
    let path = simulate_path(&cfg.model, horizon, &field, &cfg.sim_options())?;
    let grid: Vec<f64> = (1..=64).map(|j| horizon * j as f64 / 64.0).collect();
    let lam = compensator_profile(&cfg.model, &path, &grid, cfg.quad_step)?;
    let checkpoints = grid.into_iter().zip(lam).collect();
    Ok(SimulateExport { path, checkpoints })
}

