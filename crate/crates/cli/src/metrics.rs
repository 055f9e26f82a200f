//! Per-run diagnostics computed from emitted samples.

use std::collections::BTreeMap;

use nphmc::diagnostics::{ess_autocorr, ess_log_weights, mean_sd, tvd, Histogram};
use nphmc::dist::log_sum_exp;
use nphmc::models::{dpmm_params, generate_mixture_data, gmm_params, mixture_point_log_density, Dataset3D, MixtureDataConfig};
use serde::{Deserialize, Serialize};

use crate::spec::{Algorithm, ExperimentSpec, ModelId};
use crate::Result;

/// Largest K given its own histogram cell; larger values share a tail cell.
pub const GEOMETRIC_MAX_K: u64 = 50;

/// One emitted sample, as written to the JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub run: usize,
    pub index: usize,
    pub value: Vec<f64>,
    pub trace_len: usize,
    pub accepted: bool,
    /// Absent when the weight is zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_weight: Option<f64>,
}

/// Diagnostics of one run. Which fields are set depends on the model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tvd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ess: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lppd: Option<f64>,
    /// Fraction of samples per number of components.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_histogram: Option<BTreeMap<usize, f64>>,
}

impl Metrics {
    /// Scalar metrics by name, for aggregation.
    pub fn scalars(&self) -> Vec<(&'static str, f64)> {
        [("tvd", self.tvd), ("ess", self.ess), ("lppd", self.lppd)]
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k, v)))
            .collect()
    }
}

/// Mean and standard deviation of a metric over the successful runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

pub fn aggregate<'a>(metrics: impl IntoIterator<Item = &'a Metrics>) -> BTreeMap<String, Aggregate> {
    let mut by_name: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for m in metrics {
        for (k, v) in m.scalars() {
            by_name.entry(k.to_string()).or_default().push(v);
        }
    }
    by_name
        .into_iter()
        .map(|(k, xs)| {
            let (mean, sd) = mean_sd(&xs);
            (k, Aggregate { mean, sd, n: xs.len() })
        })
        .collect()
}

/// What the metrics of a model need besides the samples.
#[derive(Debug, Clone)]
pub enum MetricContext {
    Geometric { p: f64 },
    Walk,
    Mixture { model: ModelId, train: Dataset3D, test: Dataset3D },
}

impl MetricContext {
    pub fn for_spec(spec: &ExperimentSpec) -> Result<Self> {
        Ok(match spec.model {
            ModelId::Geometric => MetricContext::Geometric { p: spec.geometric_p },
            ModelId::Walk => MetricContext::Walk,
            ModelId::Gmm | ModelId::Dpmm => {
                let (train, test) = generate_mixture_data(&MixtureDataConfig {
                    seed: spec.data_seed,
                    ..Default::default()
                })?;
                MetricContext::Mixture {
                    model: spec.model,
                    train,
                    test,
                }
            }
        })
    }

    /// Computes the model's metrics from the samples of one run.
    pub fn metrics(&self, algorithm: Algorithm, records: &[SampleRecord]) -> Result<Metrics> {
        let mut m = Metrics::default();
        if records.is_empty() {
            return Ok(m);
        }
        let weights = importance_weights(algorithm, records);
        let first: Vec<f64> = records.iter().map(|r| r.value[0]).collect();
        match self {
            MetricContext::Geometric { p } => {
                let h = match &weights {
                    None => Histogram::counts_with_tail(&first, GEOMETRIC_MAX_K)?,
                    Some(w) => weighted_counts(&first, w)?,
                };
                m.tvd = Some(tvd(&h, &Histogram::geometric_pmf(*p, GEOMETRIC_MAX_K)?)?);
            }
            MetricContext::Walk => {
                m.ess = Some(match &weights {
                    None => ess_autocorr(&first)?.value,
                    Some(_) => ess_log_weights(&log_weights(records))?,
                });
            }
            MetricContext::Mixture { model, test, .. } => {
                m.lppd = Some(self.lppd_prefix(*model, test, records, weights.as_deref(), records.len()));
                if *model == ModelId::Gmm {
                    let mut hist = BTreeMap::new();
                    let total: f64 = weights.as_ref().map_or(records.len() as f64, |w| w.iter().sum());
                    for (i, r) in records.iter().enumerate() {
                        *hist.entry(gmm_params(&r.value).0).or_insert(0.0) += weights.as_ref().map_or(1.0, |w| w[i]) / total;
                    }
                    m.k_histogram = Some(hist);
                }
            }
        }
        Ok(m)
    }

    /// LPPD of the test set under the first `upto` samples.
    pub fn lppd_prefix(&self, model: ModelId, test: &Dataset3D, records: &[SampleRecord], weights: Option<&[f64]>, upto: usize) -> f64 {
        let records = &records[..upto];
        let log_w: Vec<f64> = match weights {
            None => vec![0.0; records.len()],
            Some(w) => w[..upto].iter().map(|w| w.ln()).collect(),
        };
        let log_total = log_sum_exp(&log_w);
        test.points
            .iter()
            .map(|x| {
                let terms: Vec<f64> = records
                    .iter()
                    .zip(&log_w)
                    .map(|(r, lw)| {
                        lw + match model {
                            ModelId::Gmm => {
                                let (k, mu) = gmm_params(&r.value);
                                mixture_point_log_density(x, &vec![1.0 / k as f64; k], mu)
                            }
                            _ => {
                                let (w, mu) = dpmm_params(&r.value);
                                mixture_point_log_density(x, w, mu)
                            }
                        }
                    })
                    .collect();
                log_sum_exp(&terms) - log_total
            })
            .sum()
    }
}

fn log_weights(records: &[SampleRecord]) -> Vec<f64> {
    records.iter().map(|r| r.log_weight.unwrap_or(f64::NEG_INFINITY)).collect()
}

/// Self-normalised importance weights (largest weight 1), or `None` for
/// unweighted samplers.
pub fn importance_weights(algorithm: Algorithm, records: &[SampleRecord]) -> Option<Vec<f64>> {
    if algorithm != Algorithm::Is {
        return None;
    }
    let lw = log_weights(records);
    let top = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(lw.iter().map(|l| if top.is_finite() { (l - top).exp() } else { 0.0 }).collect())
}

fn weighted_counts(values: &[f64], weights: &[f64]) -> Result<Histogram> {
    let max = GEOMETRIC_MAX_K as usize;
    let mut cells = vec![0.0; max + 1];
    for (v, w) in values.iter().zip(weights) {
        let k = v.round() as usize;
        if k >= 1 {
            cells[(k - 1).min(max)] += w;
        }
    }
    let labels = Histogram::geometric_pmf(0.5, GEOMETRIC_MAX_K)?.support;
    Ok(Histogram::from_weights(labels, cells)?)
}
