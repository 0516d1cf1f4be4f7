//! Simulation and statistical verification of nonlinear compound marked
//! Hawkes processes.
//!
//! The model is the triple `(L, H, λ)` on `[0, T]`:
//!
//! ```text
//! L_t = Σ_{i ≤ H_t} g(X_i)
//! H_t = #{events in (0, t]}
//! λ_t = h( μ + Σ_{τ_i < t} φ(t − τ_i) · b(X_i) )
//! ```
//!
//! with memory kernel `φ`, i.i.d. marks `X_i`, excitation weight `b`, claim
//! size `g ≥ 0`, and an `α`-Lipschitz nonlinearity `h ≥ 0` subject to the
//! subcriticality condition `ρ = α · m_{b,1} · ‖φ‖₁ < 1`.
//!
//! Paths are generated exactly by thinning a lazily materialized unit-rate
//! Poisson field on time × threshold space ([`field::PoissonField`]); every
//! path is a deterministic function of `(seed, config)`, which is what makes
//! the coupled point-insertion derivatives in [`malliavin`] exact rather than
//! finite-difference approximations.
//!
//! The verification layers on top:
//! * [`rescale`] builds the normalized martingale
//!   `F^(T)_t = (L_{tT} − m_{g,1} Λ(tT)) / √T` and its piecewise-constant
//!   discretizations,
//! * [`wasserstein`] measures 1-D and functional 1-Wasserstein distances to
//!   the Brownian limit with variance `σ̃² = σ² m_{g,2}`,
//! * [`malliavin`] checks the resolvent bound on intensity perturbations.

pub mod error;
pub mod field;
pub mod kernel;
pub mod malliavin;
pub mod marks;
pub mod model;
pub mod rescale;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod wasserstein;

pub use error::{Error, Result};
pub use kernel::{Kernel, Resolvent};
pub use marks::{MarkMap, MarkModel, Nonlinearity};
pub use model::Model;
pub use sim::{PathRecord, SimOptions};
