//! Nonparametric Hamiltonian Monte Carlo for trace-based probabilistic
//! programs.
//!
//! A [`Model`] is a program that reads standard-normal trace coordinates at
//! sample sites and scores observations. Its weight is a density on the union
//! of all ℝⁿ that is positive on at most one prefix of any trace. The samplers
//! in [`nphmc`], [`npdhmc`] and [`nprhmc`] move a particle on the potential
//! −log w, appending fresh coordinates whenever it leaves the support.
//!
//! ```
//! use nphmc::{models, nphmc::SamplerConfig, noise::seeded_rng};
//!
//! let model = models::geometric(0.2).unwrap();
//! let cfg = SamplerConfig { n_samples: 200, burn_in: 20, ..SamplerConfig::default() };
//! let chain = nphmc::npdhmc::run_chain(&model, &cfg, &mut seeded_rng(7)).unwrap();
//! assert_eq!(chain.samples.len(), 180);
//! ```

pub mod ad;
pub mod baselines;
pub mod diagnostics;
pub mod dist;
pub mod error;
pub mod model;
pub mod models;
pub mod noise;
pub mod npdhmc;
pub mod nphmc;
pub mod nprhmc;
pub mod scalar;
pub mod trace;

pub use error::{Error, Result};
pub use model::{run_extending, run_replay, Halt, Model, RunContext, RunOutcome, RunStatus};
pub use scalar::{Scalar, Var};
pub use trace::{CoordKind, State, Trace};
