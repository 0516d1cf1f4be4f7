//! Flat key-value configuration with dotted section prefixes.
//!
//! ```text
//! # model
//! kernel.family = exponential
//! kernel.a = 0.5
//! kernel.beta = 1.0
//! marks.distribution = constant
//! marks.c = 1.0
//! marks.b = one
//! marks.g = one
//! h.family = linear
//! model.mu = 1.0
//!
//! # experiment
//! experiment.t_grid = 50,200,800
//! experiment.replicas = 2000
//! experiment.master_seed = 42
//! ```
//!
//! Unknown keys are errors (typo safety); the full schema is listed in the
//! README. Values are scalars, comma-separated lists, `paper`/`fixed:<n>`
//! for the subdivision rule, or a file path for tabulated kernels.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hawkes_core::kernel::{self, KernelParams};
use hawkes_core::marks::{self, MarkModel, MarkParams, Nonlinearity};
use hawkes_core::model::Model;
use hawkes_core::sim::SimOptions;

use crate::{HarnessError, Result};

/// Subdivision-size rule for a horizon `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NRule {
    /// `n = ⌊T^{2/5}⌋ + 1`
    PaperRule,
    Fixed(usize),
}

impl NRule {
    pub fn n_for(&self, t: f64) -> usize {
        match *self {
            NRule::PaperRule => t.powf(0.4).floor() as usize + 1,
            NRule::Fixed(n) => n,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MalliavinConfig {
    /// insertion time `u`
    pub u: f64,
    /// inserted mark `x`
    pub mark: f64,
    /// number of lag grid points
    pub lags: usize,
    /// largest `t − u`
    pub max_lag: f64,
    /// suffix replicas (defaults to `experiment.replicas`)
    pub replicas: Option<usize>,
    /// number of random threshold pairs for the irrelevance check
    pub theta_pairs: usize,
}

/// Fully parsed and validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: Model,
    pub t_grid: Vec<f64>,
    pub n_rule: NRule,
    pub n_grid: Vec<usize>,
    pub replicas: usize,
    pub master_seed: u64,
    pub quad_step: Option<f64>,
    pub event_cap: u64,
    pub audit_points: Option<usize>,
    pub burn_in: Option<f64>,
    pub sigma2_horizon: Option<f64>,
    pub sigma2_replicas: usize,
    /// abort when the relative stderr of the σ² estimate exceeds this
    pub sigma2_rel_tol: f64,
    pub output_dir: PathBuf,
    pub malliavin: MalliavinConfig,
    /// FNV-1a hash of the raw config text, for the run manifest
    pub config_hash: u64,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            HarnessError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_str_with_base(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn from_str_with_base(text: &str, base: &Path) -> Result<Self> {
        let mut kv = parse_kv(text)?;
        let config_hash = fnv1a(text.as_bytes());

        // kernel section
        let family = kv.take_str("kernel.family")?;
        let mut kparams = KernelParams::default();
        kparams.tail_tol = kv.take_f64_opt("kernel.tail_tol")?;
        match family.as_str() {
            "tabulated" => {
                let csv = kv.take_str("kernel.csv")?;
                let path = base.join(csv);
                kparams.table = Some(read_kernel_csv(&path)?);
            }
            _ => {
                for key in ["a", "beta"] {
                    if let Some(v) = kv.take_f64_opt(&format!("kernel.{key}"))? {
                        kparams.scalars.insert(key.to_string(), v);
                    }
                }
            }
        }
        let kernel = kernel::build(&family, &kparams)?;

        // marks section
        let dist_family = kv.take_str("marks.distribution")?;
        let mut mparams = MarkParams::default();
        for key in ["c", "lo", "hi", "rate"] {
            if let Some(v) = kv.take_f64_opt(&format!("marks.{key}"))? {
                mparams.scalars.insert(key.to_string(), v);
            }
        }
        mparams.values = kv.take_f64_list_opt("marks.values")?;
        mparams.probs = kv.take_f64_list_opt("marks.probs")?;
        let dist = marks::build_distribution(&dist_family, &mparams)?;
        let b_map = marks::build_map(
            &kv.take_str("marks.b")?,
            kv.take_f64_opt("marks.b_slope")?,
            kv.take_f64_opt("marks.b_intercept")?,
        )?;
        let g_map = marks::build_map(
            &kv.take_str("marks.g")?,
            kv.take_f64_opt("marks.g_slope")?,
            kv.take_f64_opt("marks.g_intercept")?,
        )?;
        let mark_model = MarkModel::new(dist, b_map, g_map)?;

        // nonlinearity section
        let h_family = kv.take_str("h.family")?;
        let mut hparams = BTreeMap::new();
        for key in ["floor", "level", "scale"] {
            if let Some(v) = kv.take_f64_opt(&format!("h.{key}"))? {
                hparams.insert(key.to_string(), v);
            }
        }
        let h = Nonlinearity::build(&h_family, &hparams)?;

        let mu = kv.take_f64("model.mu")?;
        let model = Model::new(kernel, mark_model, h, mu)?;

        // experiment section
        let t_grid = kv
            .take_f64_list_opt("experiment.t_grid")?
            .ok_or_else(|| HarnessError::Config("experiment.t_grid is required".into()))?;
        if t_grid.is_empty() || t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HarnessError::Config(
                "experiment.t_grid must be nonempty and strictly increasing".into(),
            ));
        }
        if t_grid.iter().any(|&t| !(t > 0.0)) {
            return Err(HarnessError::Config("horizons must be positive".into()));
        }
        let n_rule = match kv.take_str_opt("experiment.n_rule")?.as_deref() {
            None | Some("paper") => NRule::PaperRule,
            Some(s) if s.starts_with("fixed:") => {
                let n: usize = s["fixed:".len()..]
                    .parse()
                    .map_err(|_| HarnessError::Config(format!("bad n_rule `{s}`")))?;
                if n == 0 {
                    return Err(HarnessError::Config("fixed n must be >= 1".into()));
                }
                NRule::Fixed(n)
            }
            Some(other) => {
                return Err(HarnessError::Config(format!(
                    "unknown n_rule `{other}` (use `paper` or `fixed:<n>`)"
                )))
            }
        };
        let n_grid = kv
            .take_f64_list_opt("experiment.n_grid")?
            .map(|ns| ns.iter().map(|&x| x as usize).collect())
            .unwrap_or_else(|| vec![8, 16, 32, 64]);
        if n_grid.iter().any(|&n| n == 0) {
            return Err(HarnessError::Config("n_grid entries must be >= 1".into()));
        }
        let replicas = kv.take_f64("experiment.replicas")? as usize;
        if replicas < 100 {
            return Err(HarnessError::Config(format!(
                "experiment.replicas must be >= 100, got {replicas}"
            )));
        }
        let master_seed = kv.take_u64("experiment.master_seed")?;

        let cfg = ExperimentConfig {
            model,
            t_grid,
            n_rule,
            n_grid,
            replicas,
            master_seed,
            quad_step: kv.take_f64_opt("sim.quad_step")?,
            event_cap: kv.take_u64_opt("sim.event_cap")?.unwrap_or(10_000_000),
            audit_points: kv.take_f64_opt("experiment.audit_points")?.map(|x| x as usize),
            burn_in: kv.take_f64_opt("experiment.burn_in")?,
            sigma2_horizon: kv.take_f64_opt("experiment.sigma2_horizon")?,
            sigma2_replicas: kv
                .take_f64_opt("experiment.sigma2_replicas")?
                .map(|x| x as usize)
                .unwrap_or(200),
            sigma2_rel_tol: kv.take_f64_opt("experiment.sigma2_rel_tol")?.unwrap_or(0.05),
            output_dir: PathBuf::from(
                kv.take_str_opt("experiment.output_dir")?
                    .unwrap_or_else(|| "out".to_string()),
            ),
            malliavin: MalliavinConfig {
                u: kv.take_f64_opt("malliavin.u")?.unwrap_or(4.0),
                mark: kv.take_f64_opt("malliavin.mark")?.unwrap_or(1.0),
                lags: kv
                    .take_f64_opt("malliavin.lags")?
                    .map(|x| x as usize)
                    .unwrap_or(20),
                max_lag: kv.take_f64_opt("malliavin.max_lag")?.unwrap_or(10.0),
                replicas: kv.take_f64_opt("malliavin.replicas")?.map(|x| x as usize),
                theta_pairs: kv
                    .take_f64_opt("malliavin.theta_pairs")?
                    .map(|x| x as usize)
                    .unwrap_or(100),
            },
            config_hash,
        };

        kv.finish()?;

        // subcriticality is validated at load; every downstream experiment
        // assumes it
        if cfg.model.rho() >= 1.0 {
            return Err(HarnessError::Config(format!(
                "stability violated: rho = {} >= 1",
                cfg.model.rho()
            )));
        }
        Ok(cfg)
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            event_cap: self.event_cap,
            quad_step: self.quad_step,
            checkpoints: 0,
        }
    }

    /// The core field all replica substreams derive from.
    pub fn base_field(&self) -> hawkes_core::field::PoissonField {
        hawkes_core::field::PoissonField::new(
            self.master_seed,
            self.model.marks().distribution().clone(),
        )
    }
}

fn read_kernel_csv(path: &Path) -> Result<(f64, Vec<f64>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut ts = Vec::new();
    let mut values = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("t,") {
            continue;
        }
        let mut cols = line.split(',');
        let (Some(t), Some(v)) = (cols.next(), cols.next()) else {
            return Err(HarnessError::Config(format!(
                "{}:{}: expected `t,phi`",
                path.display(),
                ln + 1
            )));
        };
        ts.push(parse_f64(t.trim()).map_err(HarnessError::Config)?);
        values.push(parse_f64(v.trim()).map_err(HarnessError::Config)?);
    }
    if ts.len() < 2 {
        return Err(HarnessError::Config("kernel table needs at least 2 rows".into()));
    }
    let step = ts[1] - ts[0];
    for w in ts.windows(2) {
        if ((w[1] - w[0]) - step).abs() > 1e-9 * step.max(1.0) {
            return Err(HarnessError::Config("kernel table grid is not uniform".into()));
        }
    }
    if ts[0] != 0.0 {
        return Err(HarnessError::Config("kernel table must start at t = 0".into()));
    }
    Ok((step, values))
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("bad number `{s}`"))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x1000_0000_01b3);
    }
    hash
}

/// Key-value map that tracks consumption so leftovers become errors.
struct KvMap {
    entries: BTreeMap<String, String>,
}

fn parse_kv(text: &str) -> Result<KvMap> {
    let mut entries = BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(HarnessError::Config(format!(
                "line {}: expected `key = value`, got `{line}`",
                ln + 1
            )));
        };
        let key = key.trim().to_string();
        if entries
            .insert(key.clone(), value.trim().to_string())
            .is_some()
        {
            return Err(HarnessError::Config(format!("duplicate key `{key}`")));
        }
    }
    Ok(KvMap { entries })
}

impl KvMap {
    fn take_str_opt(&mut self, key: &str) -> Result<Option<String>> {
        Ok(self.entries.remove(key))
    }

    fn take_str(&mut self, key: &str) -> Result<String> {
        self.take_str_opt(key)?
            .ok_or_else(|| HarnessError::Config(format!("missing required key `{key}`")))
    }

    fn take_f64_opt(&mut self, key: &str) -> Result<Option<f64>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(v) => parse_f64(&v)
                .map(Some)
                .map_err(|e| HarnessError::Config(format!("{key}: {e}"))),
        }
    }

    fn take_f64(&mut self, key: &str) -> Result<f64> {
        self.take_f64_opt(key)?
            .ok_or_else(|| HarnessError::Config(format!("missing required key `{key}`")))
    }

    fn take_u64(&mut self, key: &str) -> Result<u64> {
        let v = self.take_str(key)?;
        v.parse::<u64>()
            .map_err(|_| HarnessError::Config(format!("{key}: bad integer `{v}`")))
    }

    fn take_u64_opt(&mut self, key: &str) -> Result<Option<u64>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<u64>()
                .map(Some)
                .map_err(|_| HarnessError::Config(format!("{key}: bad integer `{v}`"))),
        }
    }

    fn take_f64_list_opt(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| parse_f64(s.trim()))
                .collect::<std::result::Result<Vec<f64>, String>>()
                .map(Some)
                .map_err(|e| HarnessError::Config(format!("{key}: {e}"))),
        }
    }

    fn finish(self) -> Result<()> {
        if self.entries.is_empty() {
            Ok(())
        } else {
            let keys: Vec<&str> = self.entries.keys().map(|s| s.as_str()).collect();
            Err(HarnessError::Config(format!(
                "unknown keys: {}",
                keys.join(", ")
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "\
kernel.family = exponential
kernel.a = 0.5
kernel.beta = 1.0
marks.distribution = constant
marks.c = 1.0
marks.b = one
marks.g = one
h.family = linear
model.mu = 1.0
experiment.t_grid = 50,200,800
experiment.replicas = 200
experiment.master_seed = 42
";

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_str_with_base(text, Path::new("."))
    }

    #[test]
    fn parses_the_base_config() {
        let cfg = parse(BASE).unwrap();
        assert_eq!(cfg.t_grid, vec![50.0, 200.0, 800.0]);
        assert_eq!(cfg.replicas, 200);
        assert_eq!(cfg.master_seed, 42);
        assert!((cfg.model.rho() - 0.5).abs() < 1e-15);
        assert_eq!(cfg.n_rule, NRule::PaperRule);
    }

    #[test]
    fn paper_rule_values() {
        assert_eq!(NRule::PaperRule.n_for(1000.0), 16);
        assert_eq!(NRule::PaperRule.n_for(100.0), 7);
        assert_eq!(NRule::PaperRule.n_for(400.0), 11);
        assert_eq!(NRule::PaperRule.n_for(1600.0), 20);
        assert_eq!(NRule::Fixed(9).n_for(1e6), 9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{BASE}experiment.replicass = 5\n");
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("replicass"), "{err}");
    }

    #[test]
    fn supercritical_config_is_rejected() {
        let text = BASE.replace("kernel.a = 0.5", "kernel.a = 1.5");
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("stability"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn replica_floor_is_enforced() {
        let text = BASE.replace("experiment.replicas = 200", "experiment.replicas = 50");
        assert!(parse(&text).is_err());
    }

    #[test]
    fn non_monotone_grid_is_rejected() {
        let text = BASE.replace("50,200,800", "50,40,800");
        assert!(parse(&text).is_err());
    }

    #[test]
    fn fixed_n_rule_parses() {
        let text = format!("{BASE}experiment.n_rule = fixed:12\n");
        assert_eq!(parse(&text).unwrap().n_rule, NRule::Fixed(12));
        let bad = format!("{BASE}experiment.n_rule = fixed:zero\n");
        assert!(parse(&bad).is_err());
    }

    #[test]
    fn tabulated_kernel_from_csv() {
        let dir = std::env::temp_dir().join("hawkes_cfg_test");
        std::fs::create_dir_all(&dir).unwrap();
        let csv = dir.join("kern.csv");
        let mut rows = String::from("t,phi\n");
        for i in 0..=200 {
            let t = i as f64 * 0.1;
            rows.push_str(&format!("{t},{}\n", 0.5 * (-t).exp()));
        }
        std::fs::write(&csv, rows).unwrap();
        let text = BASE
            .replace(
                "kernel.family = exponential\nkernel.a = 0.5\nkernel.beta = 1.0",
                "kernel.family = tabulated\nkernel.csv = kern.csv\nkernel.tail_tol = 1e-2",
            )
            .replace("h.family = linear", "h.family = relu");
        let cfg = ExperimentConfig::from_str_with_base(&text, &dir).unwrap();
        assert_eq!(cfg.model.kernel().family(), "tabulated");
        assert!((cfg.model.kernel().l1_norm() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn config_hash_tracks_text() {
        let a = parse(BASE).unwrap().config_hash;
        let b = parse(&format!("{BASE}\n# comment\n")).unwrap().config_hash;
        assert_ne!(a, b);
        assert_eq!(a, parse(BASE).unwrap().config_hash);
    }
}
