//! Exact path simulation by thinning the Poisson field, and the compensator.
//!
//! A candidate point `(t, θ, x)` of the field becomes an event iff
//! `θ ≤ λ(t⁻)`. Candidates are proposed from every strip below the current
//! ceiling of the dominating intensity
//! `λ̄(t) = h(μ) + α Σ φ̄(t − τ_i)|b(x_i)|`, which is non-increasing between
//! events, so a ceiling taken at a block boundary (or right after an event)
//! stays valid until the next accepted event. When an accepted event pushes
//! `λ̄` above the ceiling, the extra strips are fetched lazily for the
//! remainder of the block — previously consumed randomness is never
//! redrawn.
//!
//! The acceptance test evaluates `λ(t⁻)` through [`Model::lambda_at`], the
//! same routine exposed as [`intensity_at`], so recorded events satisfy
//! `θ_i ≤ intensity_at(τ_i⁻)` bit-for-bit.
//!
//! The compensator `Λ(t) = ∫₀^t λ_s ds` is integrated segment by segment
//! between breakpoints (event times, kernel-window exits, query points).
//! Segments fall in three classes: constant intensity (zero kernel), closed
//! form (`h = Id` with an exponential or Erlang kernel), and composite
//! Simpson quadrature otherwise.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{FieldPoint, PoissonField};
use crate::model::Model;

/// An accepted event `(τ, θ, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub theta: f64,
    pub mark: f64,
}

/// A thinning proposal with its accept/reject outcome and the intensities
/// it was tested against.
#[derive(Debug, Clone, Copy)]
pub struct Candidate {
    pub t: f64,
    pub theta: f64,
    pub mark: f64,
    pub accepted: bool,
    pub lambda_left: f64,
    pub majorant_left: f64,
}

/// Simulation knobs.
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    /// Explosion guard: abort when the event count exceeds this.
    pub event_cap: u64,
    /// Quadrature step for compensator integration; `None` picks
    /// `min(T·10⁻⁵, 10⁻²)`.
    pub quad_step: Option<f64>,
    /// Number of compensator checkpoints recorded on the path.
    pub checkpoints: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            event_cap: 10_000_000,
            quad_step: None,
            checkpoints: 64,
        }
    }
}

/// Default compensator quadrature step for horizon `t`.
pub fn default_quad_step(horizon: f64) -> f64 {
    (horizon * 1e-5).min(1e-2)
}

/// One realization: events, the full candidate log, and compensator
/// checkpoints.
#[derive(Debug, Clone)]
pub struct PathRecord {
    pub horizon: f64,
    pub events: Vec<Event>,
    pub candidates: Vec<Candidate>,
    /// `(t_j, Λ(t_j))` on the configured grid.
    pub checkpoints: Vec<(f64, f64)>,
}

impl PathRecord {
    /// Path with injected events and no candidate log (tests, replays from
    /// CSV). Operations that must replay the driving field reject these.
    pub fn synthetic(horizon: f64, events: Vec<Event>) -> Self {
        PathRecord {
            horizon,
            events,
            candidates: Vec::new(),
            checkpoints: Vec::new(),
        }
    }

    /// `H_T`.
    pub fn count(&self) -> u64 {
        self.events.len() as u64
    }

    /// `H_t = #{τ_i ≤ t}`.
    pub fn count_at(&self, t: f64) -> u64 {
        self.events.partition_point(|ev| ev.t <= t) as u64
    }

    /// `L_t = Σ_{τ_i ≤ t} g(x_i)`.
    pub fn compound_at(&self, model: &Model, t: f64) -> f64 {
        let end = self.events.partition_point(|ev| ev.t <= t);
        self.events[..end].iter().map(|ev| model.marks().g(ev.mark)).sum()
    }

    /// `L_T`.
    pub fn compound_total(&self, model: &Model) -> f64 {
        self.compound_at(model, self.horizon)
    }

    pub fn has_candidate_log(&self) -> bool {
        !self.candidates.is_empty() || self.events.is_empty()
    }
}

/// `λ(t⁻)` given the events before `t`; the empty prefix gives `h(μ)`.
pub fn intensity_at(model: &Model, events: &[Event], t: f64) -> f64 {
    model.lambda_at(events, t)
}

/// Simulate one path on `[0, horizon]`.
pub fn simulate_path(
    model: &Model,
    horizon: f64,
    field: &PoissonField,
    opts: &SimOptions,
) -> Result<PathRecord> {
    simulate_with_insert(model, horizon, field, opts, None)
}

/// Simulate with one extra point added to the driving measure.
///
/// This realizes the path under the shifted field; together with the base
/// path it forms the exact coupled difference used by `malliavin`.
pub fn simulate_with_insert(
    model: &Model,
    horizon: f64,
    field: &PoissonField,
    opts: &SimOptions,
    insert: Option<FieldPoint>,
) -> Result<PathRecord> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
    }
    model.require_subcritical()?;

    let strip_h = field.strip_height();
    let block_len = field.block_len();
    let n_blocks = (horizon / block_len).ceil() as u64;
    let strips_for = |lam_bar: f64| -> u32 { ((lam_bar / strip_h).ceil() as u32).max(1) };

    let mut events: Vec<Event> = Vec::new();
    let mut candidates: Vec<Candidate> = Vec::new();

    'blocks: for block in 0..n_blocks {
        let block_start = block as f64 * block_len;
        let mut ceiling = strips_for(model.lambda_bar_at(&events, block_start));
        let mut pending: Vec<FieldPoint> = Vec::new();
        for strip in 0..ceiling {
            pending.extend(field.block_points(strip, block));
        }
        if let Some(atom) = insert {
            if atom.t >= block_start && atom.t < block_start + block_len {
                pending.push(atom);
            }
        }
        sort_by_time(&mut pending);

        let mut i = 0;
        while i < pending.len() {
            let p = pending[i];
            i += 1;
            if p.t > horizon {
                break 'blocks;
            }
            let (lambda_left, majorant_left) = model.lambda_pair_at(&events, p.t);
            let accepted = p.theta <= lambda_left;
            candidates.push(Candidate {
                t: p.t,
                theta: p.theta,
                mark: p.mark,
                accepted,
                lambda_left,
                majorant_left,
            });
            if !accepted {
                continue;
            }
            events.push(Event {
                t: p.t,
                theta: p.theta,
                mark: p.mark,
            });
            if events.len() as u64 > opts.event_cap {
                return Err(Error::Explosion {
                    events: events.len() as u64,
                    time: p.t,
                    cap: opts.event_cap,
                    lambda: lambda_left,
                });
            }
            // the jump may push the majorant above the consulted ceiling;
            // fetch the missing strips for the rest of the block
            let needed = strips_for(model.lambda_bar_at(&events, p.t));
            if needed > ceiling {
                let mut extra: Vec<FieldPoint> = Vec::new();
                for strip in ceiling..needed {
                    extra.extend(
                        field
                            .block_points(strip, block)
                            .into_iter()
                            .filter(|q| q.t > p.t),
                    );
                }
                if !extra.is_empty() {
                    pending.truncate_front_and_merge(i, extra);
                    i = 0;
                }
                ceiling = needed;
            }
        }
    }

    let mut record = PathRecord {
        horizon,
        events,
        candidates,
        checkpoints: Vec::new(),
    };
    if opts.checkpoints > 0 {
        let grid: Vec<f64> = (1..=opts.checkpoints)
            .map(|j| horizon * j as f64 / opts.checkpoints as f64)
            .collect();
        let lam = compensator_profile(model, &record, &grid, opts.quad_step)?;
        record.checkpoints = grid.into_iter().zip(lam).collect();
    }
    Ok(record)
}

trait MergePending {
    fn truncate_front_and_merge(&mut self, consumed: usize, extra: Vec<FieldPoint>);
}

impl MergePending for Vec<FieldPoint> {
    fn truncate_front_and_merge(&mut self, consumed: usize, extra: Vec<FieldPoint>) {
        self.drain(..consumed);
        self.extend(extra);
        sort_by_time(self);
    }
}

fn sort_by_time(pts: &mut [FieldPoint]) {
    pts.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.theta.total_cmp(&b.theta)));
}

/// `Λ(t) = ∫₀^t λ_s ds`.
pub fn compensator(model: &Model, path: &PathRecord, t: f64, quad_step: f64) -> Result<f64> {
    if !(quad_step > 0.0) {
        return Err(Error::domain("quadrature step must be positive"));
    }
    if t < 0.0 || t > path.horizon {
        return Err(Error::domain(format!(
            "compensator query t = {t} outside [0, {}]",
            path.horizon
        )));
    }
    Ok(compensator_profile(model, path, &[t], Some(quad_step))?[0])
}

/// `Λ` at each query point, one sweep over the path.
///
/// Queries must be sorted ascending and lie in `[0, horizon]`.
pub fn compensator_profile(
    model: &Model,
    path: &PathRecord,
    queries: &[f64],
    quad_step: Option<f64>,
) -> Result<Vec<f64>> {
    let step = match quad_step {
        Some(s) if s > 0.0 => s,
        Some(_) => return Err(Error::domain("quadrature step must be positive")),
        None => default_quad_step(path.horizon),
    };
    if queries.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::domain("compensator queries must be sorted ascending"));
    }
    if let (Some(&first), Some(&last)) = (queries.first(), queries.last()) {
        if first < 0.0 || last > path.horizon {
            return Err(Error::domain("compensator query outside the path horizon"));
        }
    } else {
        return Ok(Vec::new());
    }

    let events = &path.events;
    let t_max = model.kernel().support_cutoff();
    // breakpoints: event entries and window exits, within the needed span
    let span = *queries.last().unwrap();
    let mut breaks: Vec<f64> = Vec::with_capacity(2 * events.len() + queries.len() + 2);
    for ev in events.iter() {
        if ev.t < span {
            breaks.push(ev.t);
        }
        let exit = ev.t + t_max;
        if exit < span {
            breaks.push(exit);
        }
    }
    breaks.extend_from_slice(queries);
    breaks.push(0.0);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut out = Vec::with_capacity(queries.len());
    let mut acc = 0.0;
    let mut cursor = 0.0;
    let mut qi = 0;
    while qi < queries.len() && queries[qi] <= 0.0 {
        out.push(0.0);
        qi += 1;
    }
    for &b in breaks.iter().filter(|&&b| b > 0.0) {
        if b > cursor {
            acc += segment_integral(model, events, cursor, b, step);
            cursor = b;
        }
        while qi < queries.len() && queries[qi] <= cursor {
            out.push(acc);
            qi += 1;
        }
    }
    debug_assert_eq!(out.len(), queries.len());
    Ok(out)
}

/// `∫_a^b λ`, with no event time and no window exit inside `(a, b)`.
fn segment_integral(model: &Model, events: &[Event], a: f64, b: f64, quad_step: f64) -> f64 {
    let delta = b - a;
    let kernel = model.kernel();
    if kernel.is_zero() {
        return model.h_mu() * delta;
    }
    // events contributing on the open segment: τ ∈ (a − t_max, a]
    let t_max = kernel.support_cutoff();
    let lo = events.partition_point(|ev| ev.t <= a - t_max);
    let hi = events.partition_point(|ev| ev.t <= a);
    let window = &events[lo..hi];

    if let Some(decay) = kernel.exp_decay() {
        let mut s = 0.0;
        for ev in window {
            s += decay.amplitude * (-decay.rate * (a - ev.t)).exp() * model.marks().b(ev.mark);
        }
        let beta = decay.rate;
        if model.nonlinearity().is_identity() {
            return model.mu() * delta + s * (1.0 - (-beta * delta).exp()) / beta;
        }
        return simpson(delta, quad_step, |r| {
            model.h_at(model.mu() + s * (-beta * r).exp())
        });
    }
    if let Some(decay) = kernel.erlang_decay() {
        let mut p = 0.0;
        let mut q = 0.0;
        for ev in window {
            let age = a - ev.t;
            let w = decay.amplitude * (-decay.rate * age).exp() * model.marks().b(ev.mark);
            p += w;
            q += w * age;
        }
        let beta = decay.rate;
        if model.nonlinearity().is_identity() {
            let e = (-beta * delta).exp();
            return model.mu() * delta
                + q * (1.0 - e) / beta
                + p * (1.0 - (1.0 + beta * delta) * e) / (beta * beta);
        }
        return simpson(delta, quad_step, |r| {
            model.h_at(model.mu() + (q + p * r) * (-beta * r).exp())
        });
    }
    // tabulated kernel: windowed evaluation at each quadrature node
    simpson(delta, quad_step, |r| {
        let t = a + r;
        let mut s = 0.0;
        for ev in window {
            s += kernel.eval_unchecked(t - ev.t) * model.marks().b(ev.mark);
        }
        model.h_at(model.mu() + s)
    })
}

/// Composite Simpson over `[0, delta]` with node spacing at most `quad_step`.
fn simpson(delta: f64, quad_step: f64, f: impl Fn(f64) -> f64) -> f64 {
    if delta <= 0.0 {
        return 0.0;
    }
    let mut m = (delta / quad_step).ceil() as usize;
    if m % 2 == 1 {
        m += 1;
    }
    m = m.max(2);
    let h = delta / m as f64;
    let mut sum = f(0.0) + f(delta);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(i as f64 * h);
    }
    sum * h / 3.0
}

/// Estimate of `σ² = E[λ^∞₀]` by time-averaging after burn-in.
#[derive(Debug, Clone, Copy)]
pub struct Sigma2Estimate {
    pub value: f64,
    pub stderr: f64,
    /// Exact value when the linear closed form applies.
    pub closed_form: Option<f64>,
}

/// Default burn-in `50·(m/‖φ‖₁)`: fifty times the mean memory span of the
/// kernel. Zero for the memoryless kernel.
pub fn default_burn_in(model: &Model) -> f64 {
    let l1 = model.kernel().l1_norm();
    if l1 == 0.0 {
        0.0
    } else {
        50.0 * model.kernel().first_moment() / l1
    }
}

/// Time-average `λ` over `[burn_in, horizon]` across replicas.
///
/// The empty-history process forgets its start at integrable-kernel speed,
/// so after burn-in the window average estimates the stationary mean.
pub fn stationary_sigma2(
    model: &Model,
    burn_in: f64,
    horizon: f64,
    replicas: usize,
    field: &PoissonField,
    opts: &SimOptions,
) -> Result<Sigma2Estimate> {
    model.require_subcritical()?;
    if !(horizon > burn_in) || burn_in < 0.0 {
        return Err(Error::domain("need 0 <= burn_in < horizon"));
    }
    if replicas == 0 {
        return Err(Error::domain("need at least one replica"));
    }
    let window = horizon - burn_in;
    let averages: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let f = field.replica(r as u64);
            let mut o = *opts;
            o.checkpoints = 0;
            let path = simulate_path(model, horizon, &f, &o)?;
            let lam = compensator_profile(model, &path, &[burn_in, horizon], opts.quad_step)?;
            Ok((lam[1] - lam[0]) / window)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (value, stderr) = crate::stats::mean_stderr(&averages);
    Ok(Sigma2Estimate {
        value,
        stderr,
        closed_form: model.sigma2_closed_form(),
    })
}

/// Largest value of `λ(t) − λ̄(t)` over the audit grid and all candidate
/// times; thinning validity requires it to be `≤ 0` everywhere.
pub fn audit_domination(model: &Model, path: &PathRecord, grid_points: usize) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    let mut check = |t: f64| {
        let gap = model.lambda_at(&path.events, t) - model.lambda_bar_at(&path.events, t);
        if gap > worst {
            worst = gap;
        }
    };
    for j in 0..=grid_points {
        check(path.horizon * j as f64 / grid_points as f64);
    }
    for c in &path.candidates {
        check(c.t);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Kernel;
    use crate::marks::{Constant, MarkMap, MarkModel, Nonlinearity};
    use std::sync::Arc;

    fn unit_marks() -> MarkModel {
        MarkModel::new(
            Arc::new(Constant::new(1.0).unwrap()),
            MarkMap::One,
            MarkMap::One,
        )
        .unwrap()
    }

    fn poisson_model(mu: f64) -> Model {
        Model::new(
            Kernel::exponential(0.0, 1.0).unwrap(),
            unit_marks(),
            Nonlinearity::linear(),
            mu,
        )
        .unwrap()
    }

    fn linear_model(a: f64, beta: f64, mu: f64) -> Model {
        Model::new(
            Kernel::exponential(a, beta).unwrap(),
            unit_marks(),
            Nonlinearity::linear(),
            mu,
        )
        .unwrap()
    }

    fn field_for(model: &Model, seed: u64) -> PoissonField {
        let _ = model;
        PoissonField::new(seed, Arc::new(Constant::new(1.0).unwrap()))
    }

    #[test]
    fn homogeneous_poisson_rate() {
        let model = poisson_model(2.0);
        let field = field_for(&model, 41);
        let t = 1000.0;
        let path = simulate_path(&model, t, &field, &SimOptions::default()).unwrap();
        let rate = path.count() as f64 / t;
        assert!(
            (rate - 2.0).abs() < 3.0 * (2.0f64 / 1000.0).sqrt(),
            "rate {rate}"
        );
    }

    #[test]
    fn linear_hawkes_mean_rate_hits_fixed_point() {
        // h = Id, mu = 1, rho = 0.5: E H_T / T -> mu/(1-rho) = 2
        let model = linear_model(0.5, 1.0, 1.0);
        let field = field_for(&model, 4242);
        let t = 500.0;
        let rates: Vec<f64> = (0..32u64)
            .map(|r| {
                let path =
                    simulate_path(&model, t, &field.replica(r), &SimOptions::default()).unwrap();
                path.count() as f64 / t
            })
            .collect();
        let (mean, stderr) = crate::stats::mean_stderr(&rates);
        assert!(
            (mean - 2.0).abs() < 4.0 * stderr,
            "mean {mean}, stderr {stderr}"
        );
    }

    #[test]
    fn accepted_events_pass_the_exact_intensity_test() {
        let model = linear_model(0.5, 1.0, 1.0);
        let field = field_for(&model, 7);
        let path = simulate_path(&model, 200.0, &field, &SimOptions::default()).unwrap();
        assert!(path.count() > 100);
        let mut prefix: Vec<Event> = Vec::new();
        let mut ci = 0;
        for ev in &path.events {
            // replay candidates up to this event to keep the prefix aligned
            while ci < path.candidates.len() && path.candidates[ci].t < ev.t {
                ci += 1;
            }
            let lam = intensity_at(&model, &prefix, ev.t);
            assert!(ev.theta <= lam, "event above intensity");
            assert_eq!(
                lam.to_bits(),
                path.candidates[ci].lambda_left.to_bits(),
                "engine and free-function intensity disagree"
            );
            prefix.push(*ev);
            ci += 1;
        }
        // events are a subset of candidates, in strictly increasing time
        assert!(path.events.windows(2).all(|w| w[0].t < w[1].t));
        let n_acc = path.candidates.iter().filter(|c| c.accepted).count();
        assert_eq!(n_acc as u64, path.count());
    }

    #[test]
    fn majorant_dominates_everywhere_on_paths() {
        for (model, seed) in [
            (linear_model(0.5, 1.0, 1.0), 11u64),
            (
                Model::new(
                    Kernel::erlang(1.0, 2.0).unwrap(),
                    unit_marks(),
                    Nonlinearity::sigmoid(2.0).unwrap(),
                    0.0,
                )
                .unwrap(),
                12,
            ),
        ] {
            let field = field_for(&model, seed);
            let path = simulate_path(&model, 100.0, &field, &SimOptions::default()).unwrap();
            let worst = audit_domination(&model, &path, 4000);
            assert!(worst <= 0.0, "domination violated by {worst}");
        }
    }

    #[test]
    fn simulation_is_bit_identical_for_same_seed() {
        let model = linear_model(0.5, 1.0, 1.0);
        let field = field_for(&model, 99);
        let a = simulate_path(&model, 300.0, &field, &SimOptions::default()).unwrap();
        let b = simulate_path(&model, 300.0, &field, &SimOptions::default()).unwrap();
        assert_eq!(a.events.len(), b.events.len());
        assert_eq!(a.candidates.len(), b.candidates.len());
        for (x, y) in a.events.iter().zip(&b.events) {
            assert_eq!(x.t.to_bits(), y.t.to_bits());
            assert_eq!(x.theta.to_bits(), y.theta.to_bits());
            assert_eq!(x.mark.to_bits(), y.mark.to_bits());
        }
        for (x, y) in a.checkpoints.iter().zip(&b.checkpoints) {
            assert_eq!(x.1.to_bits(), y.1.to_bits());
        }
    }

    #[test]
    fn longer_horizon_extends_the_same_path() {
        let model = linear_model(0.5, 1.0, 1.0);
        let field = field_for(&model, 1234);
        let short = simulate_path(&model, 50.0, &field, &SimOptions::default()).unwrap();
        let long = simulate_path(&model, 150.0, &field, &SimOptions::default()).unwrap();
        assert!(long.count() > short.count());
        for (a, b) in short.events.iter().zip(&long.events) {
            assert_eq!(a.t.to_bits(), b.t.to_bits());
        }
    }

    #[test]
    fn constant_intensity_compensator_is_linear() {
        let model = poisson_model(2.0);
        let field = field_for(&model, 3);
        let path = simulate_path(&model, 10.0, &field, &SimOptions::default()).unwrap();
        let lam = compensator(&model, &path, 5.0, 1e-3).unwrap();
        assert!((lam - 10.0).abs() < 1e-12);
        assert_eq!(compensator(&model, &path, 0.0, 1e-3).unwrap(), 0.0);
        assert!(compensator(&model, &path, 5.0, -1.0).is_err());
    }

    #[test]
    fn quadrature_matches_closed_form_on_injected_events() {
        // deterministic events; closed-form linear/exponential segments vs
        // generic Simpson must agree to high accuracy
        let model = linear_model(0.8, 1.3, 1.0);
        let events = vec![
            Event { t: 0.5, theta: 0.0, mark: 1.0 },
            Event { t: 1.25, theta: 0.0, mark: 1.0 },
            Event { t: 3.0, theta: 0.0, mark: 1.0 },
        ];
        let path = PathRecord::synthetic(8.0, events.clone());
        let queries: Vec<f64> = (1..=16).map(|i| 0.5 * i as f64).collect();
        let exact = compensator_profile(&model, &path, &queries, Some(1e-3)).unwrap();
        // independent oracle: midpoint rule applied piecewise between event
        // times, so no slice straddles a jump of the intensity
        for (q, got) in queries.iter().zip(&exact) {
            let mut breaks: Vec<f64> = vec![0.0, *q];
            breaks.extend(events.iter().map(|e| e.t).filter(|t| t < q));
            breaks.sort_by(f64::total_cmp);
            let mut acc = 0.0;
            for w in breaks.windows(2) {
                let n = 40_000;
                let h = (w[1] - w[0]) / n as f64;
                for i in 0..n {
                    acc += model.lambda_at(&events, w[0] + (i as f64 + 0.5) * h) * h;
                }
            }
            assert!(
                (got - acc).abs() < 1e-6,
                "t = {q}: closed {got} vs midpoint {acc}"
            );
        }
        // compensator is nondecreasing with Lambda(0) = 0
        assert!(exact.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn sigmoid_compensator_close_to_fine_quadrature() {
        let model = Model::new(
            Kernel::exponential(0.5, 1.0).unwrap(),
            unit_marks(),
            Nonlinearity::sigmoid(2.0).unwrap(),
            0.0,
        )
        .unwrap();
        let field = field_for(&model, 55);
        let path = simulate_path(&model, 20.0, &field, &SimOptions::default()).unwrap();
        let coarse = compensator(&model, &path, 20.0, 1e-2).unwrap();
        let fine = compensator(&model, &path, 20.0, 1e-4).unwrap();
        assert!((coarse - fine).abs() < 1e-8, "{coarse} vs {fine}");
    }

    #[test]
    fn martingale_mean_is_zero_at_checkpoints() {
        let model = linear_model(0.5, 1.0, 1.0);
        let field = field_for(&model, 2024);
        let t = 200.0;
        let reps = 200;
        let grid: Vec<f64> = (1..=8).map(|j| t * j as f64 / 8.0).collect();
        let mut per_checkpoint: Vec<Vec<f64>> = vec![Vec::new(); grid.len()];
        for r in 0..reps {
            let path = simulate_path(&model, t, &field.replica(r), &SimOptions::default()).unwrap();
            let lam = compensator_profile(&model, &path, &grid, None).unwrap();
            for (j, (&q, &l)) in grid.iter().zip(&lam).enumerate() {
                per_checkpoint[j].push(path.count_at(q) as f64 - l);
            }
        }
        for (j, samples) in per_checkpoint.iter().enumerate() {
            let (mean, stderr) = crate::stats::mean_stderr(samples);
            assert!(
                mean.abs() <= 4.0 * stderr,
                "checkpoint {j}: mean {mean}, stderr {stderr}"
            );
        }
    }

    #[test]
    fn sigma2_estimate_matches_linear_fixed_point() {
        let model = linear_model(0.5, 1.0, 1.0);
        let field = field_for(&model, 77);
        let est = stationary_sigma2(
            &model,
            default_burn_in(&model),
            250.0,
            60,
            &field,
            &SimOptions::default(),
        )
        .unwrap();
        assert_eq!(est.closed_form, Some(2.0));
        assert!(
            (est.value - 2.0).abs() <= 4.0 * est.stderr,
            "sigma2 {} stderr {}",
            est.value,
            est.stderr
        );
        // dominated by the corrected mean-intensity bound
        let bound = model.mean_intensity_bound().unwrap();
        assert!(est.value <= bound + 4.0 * est.stderr);
    }

    #[test]
    fn zero_kernel_sigma2_is_exact() {
        let model = poisson_model(2.0);
        let field = field_for(&model, 5);
        let est =
            stationary_sigma2(&model, 0.0, 50.0, 8, &field, &SimOptions::default()).unwrap();
        assert_eq!(est.closed_form, Some(2.0));
        assert!((est.value - 2.0).abs() < 1e-9, "deterministic intensity");
    }

    #[test]
    fn explosion_guard_trips() {
        let model = linear_model(0.5, 1.0, 1.0);
        let field = field_for(&model, 8);
        let mut opts = SimOptions::default();
        opts.event_cap = 10;
        let err = simulate_path(&model, 1000.0, &field, &opts).unwrap_err();
        assert!(matches!(err, Error::Explosion { .. }));
    }

    #[test]
    fn supercritical_model_is_rejected() {
        let marks = unit_marks();
        let model = Model::new(
            Kernel::exponential(1.5, 1.0).unwrap(),
            marks,
            Nonlinearity::linear(),
            1.0,
        )
        .unwrap();
        let field = field_for(&model, 9);
        assert!(matches!(
            simulate_path(&model, 10.0, &field, &SimOptions::default()).unwrap_err(),
            Error::StabilityViolated { .. }
        ));
    }
}
