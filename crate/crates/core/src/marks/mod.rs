//! Mark laws, the impact/claim maps `b` and `g`, and their moment tables.
//!
//! The moment constants
//! `m_{b,i} = E|b(X)|^i` (i = 1, 2) and `m_{g,i} = E|g(X)|^i` (i = 1..4)
//! drive the stability margin, the variance of the Brownian limit and every
//! bound checked downstream. They are computed in closed form for each
//! (distribution, map) pair on the menu; the affine-clamp map against a
//! continuous law falls back to Monte Carlo with 10⁶ draws and a recorded
//! standard error.

mod distributions;
mod nonlinearity;

pub use distributions::{Constant, Discrete, Exponential, MarkDistribution, Uniform};
pub use nonlinearity::{Nonlinearity, NonlinearityShape};

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::Substream;

const MC_MOMENT_DRAWS: usize = 1_000_000;
const MC_MOMENT_SEED: u64 = 0x6d61_726b_6d6f_6d73;

/// Map from a mark to an excitation weight `b(x)` or claim size `g(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarkMap {
    /// Constant 1; reduces marks to the plain ground process.
    One,
    Identity,
    Square,
    /// `x ↦ max(slope·x + intercept, 0)`.
    AffineClamp { slope: f64, intercept: f64 },
}

impl MarkMap {
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            MarkMap::One => 1.0,
            MarkMap::Identity => x,
            MarkMap::Square => x * x,
            MarkMap::AffineClamp { slope, intercept } => (slope * x + intercept).max(0.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MarkMap::One => "one",
            MarkMap::Identity => "identity",
            MarkMap::Square => "square",
            MarkMap::AffineClamp { .. } => "affine_clamp",
        }
    }

    /// Whether `map(x) ≥ 0` over the given distribution's support.
    fn nonneg_over(&self, dist: &dyn MarkDistribution) -> bool {
        match self {
            MarkMap::One | MarkMap::Square | MarkMap::AffineClamp { .. } => true,
            MarkMap::Identity => dist.support_nonneg(),
        }
    }

    /// Closed-form `E|map(X)|^k` when available.
    fn closed_moment(&self, dist: &dyn MarkDistribution, k: u32) -> Option<f64> {
        match self {
            MarkMap::One => Some(1.0),
            MarkMap::Identity => Some(dist.abs_moment(k)),
            MarkMap::Square => Some(dist.abs_moment(2 * k)),
            MarkMap::AffineClamp { .. } => dist.atoms().map(|(values, probs)| {
                values
                    .iter()
                    .zip(probs)
                    .map(|(v, p)| p * self.apply(*v).powi(k as i32))
                    .sum()
            }),
        }
    }
}

/// One moment estimate: exact (stderr 0) or Monte Carlo.
#[derive(Debug, Clone, Copy)]
pub struct Moment {
    pub value: f64,
    pub stderr: f64,
}

/// Mark law with its maps and moment table.
#[derive(Debug, Clone)]
pub struct MarkModel {
    dist: Arc<dyn MarkDistribution>,
    b_map: MarkMap,
    g_map: MarkMap,
    m_b: [Moment; 2],
    m_g: [Moment; 4],
}

impl MarkModel {
    pub fn new(dist: Arc<dyn MarkDistribution>, b_map: MarkMap, g_map: MarkMap) -> Result<Self> {
        if matches!(b_map, MarkMap::Square) {
            return Err(Error::validation(
                "excitation weight b must be one, identity or affine_clamp",
            ));
        }
        if !g_map.nonneg_over(dist.as_ref()) {
            return Err(Error::validation(format!(
                "claim size g = {} takes negative values on the support of {} marks",
                g_map.name(),
                dist.family()
            )));
        }
        let m_b = [
            map_moment(dist.as_ref(), &b_map, 1),
            map_moment(dist.as_ref(), &b_map, 2),
        ];
        let m_g = [
            map_moment(dist.as_ref(), &g_map, 1),
            map_moment(dist.as_ref(), &g_map, 2),
            map_moment(dist.as_ref(), &g_map, 3),
            map_moment(dist.as_ref(), &g_map, 4),
        ];
        for m in m_b.iter().chain(m_g.iter()) {
            if !m.value.is_finite() {
                return Err(Error::validation("mark moment is not finite"));
            }
        }
        Ok(MarkModel {
            dist,
            b_map,
            g_map,
            m_b,
            m_g,
        })
    }

    pub fn sample(&self, rng: &mut Substream) -> f64 {
        self.dist.sample(rng)
    }

    #[inline]
    pub fn b(&self, x: f64) -> f64 {
        self.b_map.apply(x)
    }

    #[inline]
    pub fn g(&self, x: f64) -> f64 {
        self.g_map.apply(x)
    }

    /// `m_{b,1}, m_{b,2}` (values only).
    pub fn m_b(&self) -> [f64; 2] {
        [self.m_b[0].value, self.m_b[1].value]
    }

    /// `m_{g,1}..m_{g,4}` (values only).
    pub fn m_g(&self) -> [f64; 4] {
        [
            self.m_g[0].value,
            self.m_g[1].value,
            self.m_g[2].value,
            self.m_g[3].value,
        ]
    }

    pub fn m_b1(&self) -> f64 {
        self.m_b[0].value
    }

    pub fn m_g1(&self) -> f64 {
        self.m_g[0].value
    }

    pub fn m_g2(&self) -> f64 {
        self.m_g[1].value
    }

    pub fn moments_b(&self) -> &[Moment; 2] {
        &self.m_b
    }

    pub fn moments_g(&self) -> &[Moment; 4] {
        &self.m_g
    }

    /// `b(x) ≥ 0` over the support (needed by the linear nonlinearity and
    /// by the closed-form mean intensity).
    pub fn b_nonneg(&self) -> bool {
        self.b_map.nonneg_over(self.dist.as_ref())
    }

    pub fn b_is_one(&self) -> bool {
        matches!(self.b_map, MarkMap::One)
    }

    pub fn distribution(&self) -> &Arc<dyn MarkDistribution> {
        &self.dist
    }

    pub fn b_map(&self) -> MarkMap {
        self.b_map
    }

    pub fn g_map(&self) -> MarkMap {
        self.g_map
    }
}

/// `E|map(X)|^k`: closed form when the pair admits one, otherwise Monte
/// Carlo with a per-pair deterministic stream.
fn map_moment(dist: &dyn MarkDistribution, map: &MarkMap, k: u32) -> Moment {
    if let Some(value) = map.closed_moment(dist, k) {
        return Moment { value, stderr: 0.0 };
    }
    mc_moment(dist, map, k)
}

fn mc_moment(dist: &dyn MarkDistribution, map: &MarkMap, k: u32) -> Moment {
    let mut rng = Substream::derived(MC_MOMENT_SEED, &[k as u64]);
    let n = MC_MOMENT_DRAWS;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let v = map.apply(dist.sample(&mut rng)).abs().powi(k as i32);
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    Moment {
        value: mean,
        stderr: (var / n as f64).sqrt(),
    }
}

/// Registered mark distribution names.
pub fn distribution_families() -> &'static [&'static str] {
    &["constant", "uniform", "exponential", "discrete"]
}

/// Inputs for building a mark distribution by name.
#[derive(Debug, Clone, Default)]
pub struct MarkParams {
    pub scalars: BTreeMap<String, f64>,
    pub values: Option<Vec<f64>>,
    pub probs: Option<Vec<f64>>,
}

/// Build a mark distribution from a family name and parameters.
pub fn build_distribution(family: &str, params: &MarkParams) -> Result<Arc<dyn MarkDistribution>> {
    let scalar = |key: &str| -> Result<f64> {
        params
            .scalars
            .get(key)
            .copied()
            .ok_or_else(|| Error::validation(format!("mark parameter `{key}` is required")))
    };
    Ok(match family {
        "constant" => Arc::new(Constant::new(scalar("c")?)?),
        "uniform" => Arc::new(Uniform::new(scalar("lo")?, scalar("hi")?)?),
        "exponential" => Arc::new(Exponential::new(scalar("rate")?)?),
        "discrete" => {
            let values = params
                .values
                .clone()
                .ok_or_else(|| Error::validation("discrete marks need `values`"))?;
            let probs = params
                .probs
                .clone()
                .ok_or_else(|| Error::validation("discrete marks need `probs`"))?;
            Arc::new(Discrete::new(values, probs)?)
        }
        other => {
            return Err(Error::validation(format!(
                "unknown mark distribution `{other}` (known: {})",
                distribution_families().join(", ")
            )))
        }
    })
}

/// Build a mark map by name (`one`, `identity`, `square`, `affine_clamp`).
pub fn build_map(name: &str, slope: Option<f64>, intercept: Option<f64>) -> Result<MarkMap> {
    match name {
        "one" => Ok(MarkMap::One),
        "identity" => Ok(MarkMap::Identity),
        "square" => Ok(MarkMap::Square),
        "affine_clamp" => Ok(MarkMap::AffineClamp {
            slope: slope.ok_or_else(|| Error::validation("affine_clamp needs a slope"))?,
            intercept: intercept
                .ok_or_else(|| Error::validation("affine_clamp needs an intercept"))?,
        }),
        other => Err(Error::validation(format!("unknown mark map `{other}`"))),
    }
}
