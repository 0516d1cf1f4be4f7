//! The rescaled martingale and its piecewise-constant discretization.
//!
//! `F^(T)_t = (L_{tT} − m_{g,1}·Λ(tT)) / √T` for `t ∈ [0, 1]`, sampled on
//! the subdivision `t_i = i/n`. Between events `F^(T)` decreases (pure
//! compensator drift) and jumps by `g(x)/√T` at events, so the supremum of
//! `|F − Π_n F|` over a cell is attained at a cell endpoint or at an event
//! time — the discretization-gap routine evaluates that candidate set
//! exactly and keeps a dense audit grid only as a cross-check.

use crate::error::{Error, Result};
use crate::model::Model;
use crate::sim::{compensator_profile, PathRecord};

/// `F^(T)` on the subdivision `t_i = i/n`.
#[derive(Debug, Clone)]
pub struct RescaledPath {
    pub horizon: f64,
    pub n: usize,
    /// `values[i] = F^(T)_{i/n}`, `values[0] = 0`.
    pub values: Vec<f64>,
    /// max of `|F^(T)_t|` over a dense audit grid and all event times
    pub sup_norm_estimate: f64,
}

/// Increment vector `ΔF^(T)`.
///
/// Deltas are chosen so plain running sums land on `values[1..]` bit-exactly
/// whenever IEEE addition can represent that partial sum. After a
/// catastrophic cancellation the target value can fall between consecutive
/// attainable sums (the delta lives in a coarser binade than the result);
/// those rare steps are reproduced to the nearest attainable sum, within
/// one ulp of the delta.
#[derive(Debug, Clone)]
pub struct IncrementVector {
    pub deltas: Vec<f64>,
}

/// `F^(T)` right and left values at one time.
#[derive(Debug, Clone, Copy)]
struct FValue {
    right: f64,
    left: f64,
}

/// Evaluate `F^(T)` at sorted query times (absolute, in `[0, horizon]`).
fn f_values(
    model: &Model,
    path: &PathRecord,
    horizon: f64,
    queries: &[f64],
    quad_step: Option<f64>,
) -> Result<Vec<FValue>> {
    let lambda = compensator_profile(model, path, queries, quad_step)?;
    let sqrt_t = horizon.sqrt();
    let m_g1 = model.marks().m_g1();
    let mut out = Vec::with_capacity(queries.len());
    let mut idx = 0usize; // events with t <= q
    let mut idx_strict = 0usize; // events with t < q
    let mut cum = 0.0; // Σ g over events[..idx]
    let mut cum_strict = 0.0;
    for (&q, &lam) in queries.iter().zip(&lambda) {
        while idx < path.events.len() && path.events[idx].t <= q {
            cum += model.marks().g(path.events[idx].mark);
            idx += 1;
        }
        while idx_strict < path.events.len() && path.events[idx_strict].t < q {
            cum_strict += model.marks().g(path.events[idx_strict].mark);
            idx_strict += 1;
        }
        out.push(FValue {
            right: (cum - m_g1 * lam) / sqrt_t,
            left: (cum_strict - m_g1 * lam) / sqrt_t,
        });
    }
    Ok(out)
}

/// `F^(T)` at the subdivision `t_i = i/n`.
pub fn rescale(model: &Model, path: &PathRecord, horizon: f64, n: usize) -> Result<RescaledPath> {
    rescale_with_step(model, path, horizon, n, None)
}

/// [`rescale`] with an explicit compensator quadrature step.
pub fn rescale_with_step(
    model: &Model,
    path: &PathRecord,
    horizon: f64,
    n: usize,
    quad_step: Option<f64>,
) -> Result<RescaledPath> {
    if n == 0 {
        return Err(Error::domain("subdivision size n must be >= 1"));
    }
    if path.horizon < horizon {
        return Err(Error::domain(format!(
            "path horizon {} shorter than requested T = {horizon}",
            path.horizon
        )));
    }
    // one sweep covers the subdivision, a dense audit grid and all event
    // times; the subdivision values are picked out of the combined list
    let audit = (10 * n).max(256);
    let mut queries: Vec<f64> = (0..=n).map(|i| horizon * i as f64 / n as f64).collect();
    queries.extend((0..=audit).map(|j| horizon * j as f64 / audit as f64));
    queries.extend(path.events.iter().map(|e| e.t).filter(|&t| t <= horizon));
    queries.sort_by(f64::total_cmp);
    queries.dedup();
    let evaluated = f_values(model, path, horizon, &queries, quad_step)?;

    let mut values = Vec::with_capacity(n + 1);
    let mut sup_norm_estimate = 0.0f64;
    let mut next_grid = 0usize;
    for (&q, v) in queries.iter().zip(&evaluated) {
        sup_norm_estimate = sup_norm_estimate.max(v.right.abs()).max(v.left.abs());
        if next_grid <= n && q == horizon * next_grid as f64 / n as f64 {
            values.push(v.right);
            next_grid += 1;
        }
    }
    debug_assert_eq!(values.len(), n + 1);
    values[0] = 0.0;

    Ok(RescaledPath {
        horizon,
        n,
        values,
        sup_norm_estimate,
    })
}

impl RescaledPath {
    /// Increments whose running sums reproduce `values[1..]`; see
    /// [`IncrementVector`] for the exactness contract.
    pub fn increments(&self) -> IncrementVector {
        let mut deltas = Vec::with_capacity(self.n);
        let mut running = 0.0f64;
        for i in 1..=self.n {
            let target = self.values[i];
            let mut d = target - running;
            // compensated refinement
            for _ in 0..4 {
                let miss = target - (running + d);
                if miss == 0.0 {
                    break;
                }
                d += miss;
            }
            if running + d != target {
                // walk a few ulps; keep the best attainable sum
                let mut best = d;
                let mut best_err = (running + d - target).abs();
                let mut cand = d;
                for _ in 0..8 {
                    cand = if running + cand > target {
                        cand.next_down()
                    } else {
                        cand.next_up()
                    };
                    let err = (running + cand - target).abs();
                    if err < best_err {
                        best = cand;
                        best_err = err;
                        if err == 0.0 {
                            break;
                        }
                    }
                }
                d = best;
            }
            running += d;
            deltas.push(d);
        }
        IncrementVector { deltas }
    }
}

/// Cumulative-sum embedding: increments to the step-path value vector
/// `[0, x_0, x_0 + x_1, ...]` (length `n + 1`).
pub fn chi(increments: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(increments.len() + 1);
    out.push(0.0);
    let mut running = 0.0;
    for &d in increments {
        running += d;
        out.push(running);
    }
    out
}

/// `max_i |Σ_{j≤i} x_j|`, the norm the increment geometry lives in.
pub fn norm_inf1(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::domain("norm of an empty increment vector"));
    }
    let mut best = 0.0f64;
    let mut running = 0.0;
    for &x in xs {
        running += x;
        best = best.max(running.abs());
    }
    Ok(best)
}

/// Piecewise-constant projection of a path on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPath {
    /// `values[i]` on `[t_i, t_{i+1})`, `values[n]` at `t = 1`.
    pub values: Vec<f64>,
}

impl StepPath {
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.n();
        if t >= 1.0 {
            return self.values[n];
        }
        let idx = ((t.max(0.0)) * n as f64) as usize;
        self.values[idx.min(n - 1)]
    }
}

/// `Π_n(h)`: sample the path at `t_i = i/n`.
pub fn pi_n(path: impl Fn(f64) -> f64, n: usize) -> Result<StepPath> {
    if n == 0 {
        return Err(Error::domain("projection needs n >= 1"));
    }
    Ok(StepPath {
        values: (0..=n).map(|i| path(i as f64 / n as f64)).collect(),
    })
}

/// Monte-Carlo estimate of the discretization gap.
#[derive(Debug, Clone, Copy)]
pub struct GapStats {
    /// `E sup_t |F^(T)_t − Π_n(F^(T))_t|`
    pub mean_sup_gap: f64,
    pub stderr: f64,
    /// fourth moment of the sup gap
    pub fourth_moment: f64,
}

/// Exact `sup_t |F^(T)_t − Π_n(F^(T))_t|` for one path.
///
/// Candidates: both one-sided values at every event inside each cell and
/// the left limit at the cell's right end; between those points the gap is
/// monotone, so the supremum is attained on the candidate set.
pub fn sup_gap_exact(model: &Model, path: &PathRecord, horizon: f64, n: usize) -> Result<f64> {
    sup_gap_exact_with_step(model, path, horizon, n, None)
}

/// [`sup_gap_exact`] with an explicit compensator quadrature step.
pub fn sup_gap_exact_with_step(
    model: &Model,
    path: &PathRecord,
    horizon: f64,
    n: usize,
    quad_step: Option<f64>,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("subdivision size n must be >= 1"));
    }
    let cell = horizon / n as f64;
    // query plan: cell starts (right value = step level), events (both
    // sides), cell ends (left limit)
    let mut queries: Vec<f64> = Vec::with_capacity(2 * n + path.events.len() + 2);
    for i in 0..=n {
        queries.push(horizon * i as f64 / n as f64);
    }
    queries.extend(path.events.iter().map(|e| e.t).filter(|&t| t <= horizon));
    queries.sort_by(f64::total_cmp);
    queries.dedup();
    let vals = f_values(model, path, horizon, &queries, quad_step)?;

    let mut sup = 0.0f64;
    let mut level = 0.0; // Π_n level for the current cell: F(t_i)
    let mut cell_idx = 0usize;
    for (&q, v) in queries.iter().zip(&vals) {
        // entering a new cell: the query at the boundary first closes the
        // previous cell with its left limit, then opens the new one
        while cell_idx < n && q >= cell * (cell_idx + 1) as f64 {
            sup = sup.max((v.left - level).abs());
            cell_idx += 1;
            if (q - cell * cell_idx as f64).abs() == 0.0 {
                level = v.right;
            }
        }
        if q >= cell * cell_idx as f64 {
            sup = sup.max((v.right - level).abs()).max((v.left - level).abs());
        }
    }
    Ok(sup)
}

/// Gap statistics over replicas, with an audit-grid cross-check that the
/// breakpoint candidate set really dominates a dense grid evaluation.
pub fn discretization_error(
    model: &Model,
    paths: &[PathRecord],
    horizon: f64,
    n: usize,
    audit_points: usize,
) -> Result<GapStats> {
    discretization_error_with_step(model, paths, horizon, n, audit_points, None)
}

/// [`discretization_error`] with an explicit compensator quadrature step.
pub fn discretization_error_with_step(
    model: &Model,
    paths: &[PathRecord],
    horizon: f64,
    n: usize,
    audit_points: usize,
    quad_step: Option<f64>,
) -> Result<GapStats> {
    if paths.len() < 100 {
        return Err(Error::domain(format!(
            "discretization error needs at least 100 replicas, got {}",
            paths.len()
        )));
    }
    if audit_points < 10 * n {
        return Err(Error::validation(format!(
            "audit grid with {audit_points} points is coarser than 1/(10n) for n = {n}"
        )));
    }
    let mut gaps = Vec::with_capacity(paths.len());
    for (k, path) in paths.iter().enumerate() {
        let exact = sup_gap_exact_with_step(model, path, horizon, n, quad_step)?;
        if k < 8 {
            // spot-check the candidate-set argument against the dense grid
            let scaled = rescale_with_step(model, path, horizon, n, quad_step)?;
            let step = StepPath {
                values: scaled.values.clone(),
            };
            let audit_ts: Vec<f64> = (0..=audit_points)
                .map(|j| horizon * j as f64 / audit_points as f64)
                .collect();
            let vals = f_values(model, path, horizon, &audit_ts, quad_step)?;
            let audit_gap = audit_ts
                .iter()
                .zip(&vals)
                .map(|(&t, v)| (v.right - step.eval(t / horizon)).abs())
                .fold(0.0, f64::max);
            if audit_gap > exact + 1e-9 {
                return Err(Error::validation(format!(
                    "audit grid gap {audit_gap} exceeds breakpoint-exact gap {exact}"
                )));
            }
        }
        gaps.push(exact);
    }
    let (mean_sup_gap, stderr) = crate::stats::mean_stderr(&gaps);
    let fourth_moment = gaps.iter().map(|g| g.powi(4)).sum::<f64>() / gaps.len() as f64;
    Ok(GapStats {
        mean_sup_gap,
        stderr,
        fourth_moment,
    })
}
