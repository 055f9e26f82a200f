//! Experiment specifications.

use std::path::PathBuf;

use nphmc::nphmc::{Potential, SamplerConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    Geometric,
    Walk,
    Gmm,
    Dpmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Nphmc,
    Npdhmc,
    Nprhmc,
    Lmh,
    Rmh,
    Is,
}

impl Algorithm {
    /// Samplers that do one program run per transition and get thinned by L.
    pub fn is_baseline(self) -> bool {
        matches!(self, Algorithm::Lmh | Algorithm::Rmh | Algorithm::Is)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub model: ModelId,
    pub algorithm: Algorithm,
    #[serde(flatten)]
    pub sampler: SamplerConfig,
    pub runs: usize,
    /// Output directory for `samples.jsonl` and `summary.json`.
    pub out: PathBuf,
    /// Seed of the generated GMM/DPMM data set.
    pub data_seed: u64,
    pub rmh_sigma: f64,
    /// Upper bound on runs executed at once.
    pub jobs: usize,
    pub geometric_p: f64,
    pub dpmm_alpha: f64,
    pub dpmm_eps: f64,
}

impl ExperimentSpec {
    /// Per-model defaults: step size, leapfrog steps, chain length and burn-in.
    pub fn defaults_for(model: ModelId) -> Self {
        let (epsilon, steps, n_samples, burn_in) = match model {
            ModelId::Geometric => (0.1, 5, 1000, 100),
            ModelId::Walk => (0.1, 50, 1000, 100),
            ModelId::Gmm => (0.05, 50, 1000, 100),
            ModelId::Dpmm => (0.05, 20, 100, 50),
        };
        ExperimentSpec {
            model,
            algorithm: Algorithm::Npdhmc,
            sampler: SamplerConfig {
                epsilon,
                steps,
                n_samples,
                burn_in,
                ..SamplerConfig::default()
            },
            runs: 10,
            out: PathBuf::from("out"),
            data_seed: nphmc::models::MixtureDataConfig::default().seed,
            rmh_sigma: 0.5,
            jobs: 1,
            geometric_p: 0.2,
            dpmm_alpha: 5.0,
            dpmm_eps: 0.01,
        }
    }

    /// Thinning as given, or L for the baselines when `thin` was not set.
    pub fn effective_thinning(&self, explicit: bool) -> usize {
        if !explicit && self.algorithm.is_baseline() {
            self.sampler.steps.max(1)
        } else {
            self.sampler.thinning
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate().map_err(|e| CliError::Spec(e.to_string()))?;
        if self.runs == 0 {
            return Err(CliError::Spec("runs must be at least 1".into()));
        }
        if self.jobs == 0 {
            return Err(CliError::Spec("jobs must be at least 1".into()));
        }
        if self.algorithm == Algorithm::Nprhmc && self.model != ModelId::Geometric {
            return Err(CliError::Spec(
                "nprhmc needs a boundary oracle; only the geometric model has axis-aligned boundaries".into(),
            ));
        }
        if !(self.rmh_sigma >= 0.0) || !self.rmh_sigma.is_finite() {
            return Err(CliError::Spec(format!("rmh sigma must be nonnegative, got {}", self.rmh_sigma)));
        }
        Ok(())
    }
}

/// Command-line overrides; `None` leaves the value from the config file or
/// the model defaults.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub model: Option<ModelId>,
    pub algorithm: Option<Algorithm>,
    pub samples: Option<usize>,
    pub burnin: Option<usize>,
    pub runs: Option<usize>,
    pub eps: Option<f64>,
    pub steps: Option<usize>,
    pub thin: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub trim: Option<bool>,
    pub rmh_sigma: Option<f64>,
    pub potential: Option<Potential>,
    pub init_draws: Option<usize>,
    pub jobs: Option<usize>,
    pub data_seed: Option<u64>,
}

/// Builds a spec: model defaults, then the JSON config, then the flags.
pub fn resolve(config: Option<&str>, o: &Overrides) -> Result<ExperimentSpec> {
    let config: Value = match config {
        Some(text) => serde_json::from_str(text).map_err(|e| CliError::Spec(format!("config: {e}")))?,
        None => Value::Object(Default::default()),
    };
    let Value::Object(config) = config else {
        return Err(CliError::Spec("config must be a JSON object".into()));
    };
    let model = match (o.model, config.get("model")) {
        (Some(m), _) => m,
        (None, Some(v)) => serde_json::from_value(v.clone()).map_err(|e| CliError::Spec(format!("config model: {e}")))?,
        (None, None) => return Err(CliError::Spec("no model given".into())),
    };
    let mut merged = serde_json::to_value(ExperimentSpec::defaults_for(model)).expect("spec serialises");
    let thin_in_config = config.contains_key("thinning");
    for (k, v) in config {
        merged[k] = v;
    }
    let mut spec: ExperimentSpec = serde_json::from_value(merged).map_err(|e| CliError::Spec(format!("config: {e}")))?;
    spec.model = model;
    if let Some(a) = o.algorithm {
        spec.algorithm = a;
    }
    let s = &mut spec.sampler;
    macro_rules! set {
        ($dst:expr, $src:expr) => {
            if let Some(v) = $src {
                $dst = v;
            }
        };
    }
    set!(s.n_samples, o.samples);
    set!(s.burn_in, o.burnin);
    set!(s.epsilon, o.eps);
    set!(s.steps, o.steps);
    set!(s.thinning, o.thin);
    set!(s.seed, o.seed);
    set!(s.trim, o.trim);
    set!(s.potential, o.potential);
    set!(s.init_draws, o.init_draws);
    set!(spec.runs, o.runs);
    set!(spec.out, o.out.clone());
    set!(spec.rmh_sigma, o.rmh_sigma);
    set!(spec.jobs, o.jobs);
    set!(spec.data_seed, o.data_seed);
    spec.sampler.thinning = spec.effective_thinning(thin_in_config || o.thin.is_some());
    spec.validate()?;
    Ok(spec)
}
