//! The driving Poisson random measure, materialized lazily.
//!
//! The unit-rate measure on `time × threshold × mark` space is cut into
//! rectangles `[block·ℓ, (block+1)·ℓ) × [strip·h, (strip+1)·h)`. Each
//! rectangle's points are drawn from a substream keyed by
//! `(seed, strip, block)`, so:
//!
//! * re-querying a rectangle yields the bit-identical point set, which makes
//!   whole paths deterministic functions of `(seed, config)`;
//! * a simulation that needs a higher threshold ceiling halfway through a
//!   block can fetch further strips without disturbing randomness it has
//!   already consumed — the property the coupled shift in `malliavin`
//!   relies on;
//! * disjoint rectangles come from distinct substreams, giving independence
//!   across keys.
//!
//! [`PoissonField::resample_suffix`] swaps in independently-keyed points
//! from a given time on while keeping the prefix identical; gluing a Poisson
//! measure's restriction to `[0, u)` to an independent copy's restriction to
//! `[u, ∞)` again yields a Poisson measure, which is how conditioning on the
//! history up to `u` is realized.

use std::sync::Arc;

use crate::marks::MarkDistribution;
use crate::rng::{derive_seed, Substream};

const STRIP_WORD: u64 = 0x5354_5249_5000;
const REPLICA_WORD: u64 = 0x5245_504c_4900;
const SUFFIX_WORD: u64 = 0x5355_4646_4958;

/// One point of the driving measure.
#[derive(Debug, Clone, Copy)]
pub struct FieldPoint {
    pub t: f64,
    pub theta: f64,
    pub mark: f64,
}

/// Lazily materialized unit-rate Poisson field with marks.
#[derive(Clone)]
pub struct PoissonField {
    seed: u64,
    strip_height: f64,
    block_len: f64,
    marks: Arc<dyn MarkDistribution>,
    suffix: Option<SuffixResample>,
}

/// Replace randomness from `from` on by the independent stream keyed by
/// `salt`, keeping everything earlier untouched.
#[derive(Debug, Clone, Copy)]
struct SuffixResample {
    from: f64,
    salt: u64,
}

impl PoissonField {
    pub fn new(seed: u64, marks: Arc<dyn MarkDistribution>) -> Self {
        PoissonField {
            seed,
            strip_height: 1.0,
            block_len: 1.0,
            marks,
            suffix: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn strip_height(&self) -> f64 {
        self.strip_height
    }

    pub fn block_len(&self) -> f64 {
        self.block_len
    }

    /// Independent field for one Monte-Carlo replica.
    pub fn replica(&self, index: u64) -> PoissonField {
        PoissonField {
            seed: derive_seed(self.seed, &[REPLICA_WORD, index]),
            suffix: self.suffix,
            ..self.clone()
        }
    }

    /// Same field on `[0, from)`, fresh independent randomness afterwards.
    pub fn resample_suffix(&self, from: f64, salt: u64) -> PoissonField {
        PoissonField {
            suffix: Some(SuffixResample { from, salt }),
            ..self.clone()
        }
    }

    /// All points in strip × block, sorted by time.
    pub fn block_points(&self, strip: u32, block: u64) -> Vec<FieldPoint> {
        match self.suffix {
            None => self.raw_block_points(strip, block, 0),
            Some(sfx) => {
                let block_start = block as f64 * self.block_len;
                let block_end = block_start + self.block_len;
                if block_end <= sfx.from {
                    self.raw_block_points(strip, block, 0)
                } else if block_start >= sfx.from {
                    self.raw_block_points(strip, block, sfx.salt)
                } else {
                    let mut pts: Vec<FieldPoint> = self
                        .raw_block_points(strip, block, 0)
                        .into_iter()
                        .filter(|p| p.t < sfx.from)
                        .chain(
                            self.raw_block_points(strip, block, sfx.salt)
                                .into_iter()
                                .filter(|p| p.t >= sfx.from),
                        )
                        .collect();
                    sort_points(&mut pts);
                    pts
                }
            }
        }
    }

    fn raw_block_points(&self, strip: u32, block: u64, salt: u64) -> Vec<FieldPoint> {
        let key = derive_seed(self.seed, &[STRIP_WORD + strip as u64, block, SUFFIX_WORD ^ salt]);
        let mut rng = Substream::new(key);
        let count = rng.poisson(self.strip_height * self.block_len);
        let block_start = block as f64 * self.block_len;
        let strip_base = strip as f64 * self.strip_height;
        let mut pts = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let t = block_start + self.block_len * rng.uniform();
            let theta = strip_base + self.strip_height * rng.uniform();
            let mark = self.marks.sample(&mut rng);
            pts.push(FieldPoint { t, theta, mark });
        }
        sort_points(&mut pts);
        pts
    }
}

fn sort_points(pts: &mut [FieldPoint]) {
    pts.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.theta.total_cmp(&b.theta)));
}

impl std::fmt::Debug for PoissonField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PoissonField")
            .field("seed", &self.seed)
            .field("strip_height", &self.strip_height)
            .field("block_len", &self.block_len)
            .field("suffix", &self.suffix)
            .finish()
    }
}
