use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// One member of the nonlinearity menu.
///
/// The menu is fixed (rather than accepting arbitrary closures) so that each
/// family carries its exact Lipschitz constant; thinning correctness depends
/// on that constant really dominating `|h(z₁) − h(z₂)| / |z₁ − z₂|`.
pub trait NonlinearityShape: Send + Sync + fmt::Debug {
    fn family(&self) -> &'static str;
    fn apply(&self, z: f64) -> f64;
    fn lipschitz(&self) -> f64;
    fn is_identity(&self) -> bool {
        false
    }
    /// `h(z) > 0` for every real `z`.
    fn strictly_positive(&self) -> bool;
}

#[derive(Debug)]
struct Linear;

impl NonlinearityShape for Linear {
    fn family(&self) -> &'static str {
        "linear"
    }

    fn apply(&self, z: f64) -> f64 {
        z
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }

    fn is_identity(&self) -> bool {
        true
    }

    fn strictly_positive(&self) -> bool {
        false
    }
}

/// `h(z) = max(z, floor)` with `floor ≥ 0`.
///
/// The default floor 0 keeps `h` nonnegative rather than strictly positive;
/// a positive floor restores strict positivity.
#[derive(Debug)]
struct Relu {
    floor: f64,
}

impl NonlinearityShape for Relu {
    fn family(&self) -> &'static str {
        "relu"
    }

    fn apply(&self, z: f64) -> f64 {
        z.max(self.floor)
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }

    fn strictly_positive(&self) -> bool {
        self.floor > 0.0
    }
}

/// `h(z) = level / (1 + e^{−z})`; Lipschitz constant `level/4`.
#[derive(Debug)]
struct Sigmoid {
    level: f64,
}

impl NonlinearityShape for Sigmoid {
    fn family(&self) -> &'static str {
        "sigmoid"
    }

    fn apply(&self, z: f64) -> f64 {
        self.level / (1.0 + (-z).exp())
    }

    fn lipschitz(&self) -> f64 {
        self.level / 4.0
    }

    fn strictly_positive(&self) -> bool {
        true
    }
}

/// `h(z) = ln(1 + e^{z/scale})`; Lipschitz constant `1/scale`.
#[derive(Debug)]
struct Softplus {
    scale: f64,
}

impl NonlinearityShape for Softplus {
    fn family(&self) -> &'static str {
        "softplus"
    }

    fn apply(&self, z: f64) -> f64 {
        let w = z / self.scale;
        if w > 30.0 {
            w
        } else {
            w.exp().ln_1p()
        }
    }

    fn lipschitz(&self) -> f64 {
        1.0 / self.scale
    }

    fn strictly_positive(&self) -> bool {
        true
    }
}

/// The intensity nonlinearity `h: ℝ → ℝ₊` with its exact Lipschitz constant.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    shape: Arc<dyn NonlinearityShape>,
}

impl Nonlinearity {
    /// `h = Id`. Valid only with a nonnegative kernel, nonnegative excitation
    /// weights and `μ > 0` (checked when the full model is assembled), since
    /// only then does the intensity stay positive.
    pub fn linear() -> Self {
        Nonlinearity {
            shape: Arc::new(Linear),
        }
    }

    pub fn relu(floor: f64) -> Result<Self> {
        if !(floor >= 0.0) || !floor.is_finite() {
            return Err(Error::validation("relu floor must be >= 0"));
        }
        Ok(Nonlinearity {
            shape: Arc::new(Relu { floor }),
        })
    }

    pub fn sigmoid(level: f64) -> Result<Self> {
        if !(level > 0.0) || !level.is_finite() {
            return Err(Error::validation("sigmoid level must be > 0"));
        }
        Ok(Nonlinearity {
            shape: Arc::new(Sigmoid { level }),
        })
    }

    pub fn softplus(scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::validation("softplus scale must be > 0"));
        }
        Ok(Nonlinearity {
            shape: Arc::new(Softplus { scale }),
        })
    }

    /// Registered family names.
    pub fn families() -> &'static [&'static str] {
        &["linear", "relu", "sigmoid", "softplus"]
    }

    /// Build by family name; scalar parameters by key
    /// (`floor`, `level`, `scale`).
    pub fn build(family: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        match family {
            "linear" => Ok(Self::linear()),
            "relu" => Self::relu(params.get("floor").copied().unwrap_or(0.0)),
            "sigmoid" => Self::sigmoid(
                params
                    .get("level")
                    .copied()
                    .ok_or_else(|| Error::validation("sigmoid needs `level`"))?,
            ),
            "softplus" => Self::softplus(
                params
                    .get("scale")
                    .copied()
                    .ok_or_else(|| Error::validation("softplus needs `scale`"))?,
            ),
            other => Err(Error::validation(format!(
                "unknown nonlinearity `{other}` (known: {})",
                Self::families().join(", ")
            ))),
        }
    }

    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        self.shape.apply(z)
    }

    pub fn lipschitz(&self) -> f64 {
        self.shape.lipschitz()
    }

    pub fn is_identity(&self) -> bool {
        self.shape.is_identity()
    }

    pub fn strictly_positive(&self) -> bool {
        self.shape.strictly_positive()
    }

    pub fn family(&self) -> &'static str {
        self.shape.family()
    }
}
