//! Running an experiment and writing its outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use nphmc::baselines::{importance_sample, run_lmh_chain, run_rmh_chain};
use nphmc::dist::std_normal_inv_cdf;
use nphmc::models::{dpmm, geometric, gmm, random_walk};
use nphmc::noise::{derive_seed, seeded_rng};
use nphmc::nphmc::Chain;
use nphmc::nprhmc::AxisThresholdOracle;
use nphmc::{npdhmc, nphmc as np, nprhmc, Model};
use serde::{Deserialize, Serialize};

use crate::metrics::{aggregate, Aggregate, MetricContext, Metrics, SampleRecord};
use crate::spec::{Algorithm, ExperimentSpec};
use crate::{write_file, CliError, Result};

pub const SAMPLES_FILE: &str = "samples.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

/// Outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run: usize,
    pub seed: u64,
    pub samples: usize,
    pub transitions: usize,
    pub acceptance_rate: f64,
    pub rejections: BTreeMap<String, usize>,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Metrics>,
    /// Set when the run failed; its samples are then absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub spec: ExperimentSpec,
    pub runs: Vec<RunReport>,
    pub aggregate: BTreeMap<String, Aggregate>,
    /// Wall-clock seconds per emitted sample over all successful runs.
    pub seconds_per_sample: f64,
}

/// The samplers' output for one run, before diagnostics.
struct RunOutput {
    records: Vec<SampleRecord>,
    transitions: usize,
    accepted: usize,
    rejections: BTreeMap<String, usize>,
}

fn chain_output(run: usize, chain: Chain) -> RunOutput {
    let records = chain
        .samples
        .iter()
        .enumerate()
        .map(|(index, s)| SampleRecord {
            run,
            index,
            value: s.value.clone(),
            trace_len: s.trace.len(),
            accepted: s.accepted,
            log_weight: s.log_weight.is_finite().then_some(s.log_weight),
        })
        .collect();
    let rejections = chain
        .rejections
        .iter()
        .map(|(k, v)| (serde_json::to_value(k).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(), *v))
        .collect();
    RunOutput {
        records,
        transitions: chain.transitions,
        accepted: chain.accepted,
        rejections,
    }
}

fn sample_run<M: Model>(m: &M, spec: &ExperimentSpec, run: usize, seed: u64) -> nphmc::Result<RunOutput> {
    let cfg = &spec.sampler;
    let rng = &mut seeded_rng(seed);
    let chain = match spec.algorithm {
        Algorithm::Nphmc => np::run_chain(m, cfg, rng)?,
        Algorithm::Npdhmc => npdhmc::run_chain(m, cfg, rng)?,
        Algorithm::Nprhmc => {
            let oracle = AxisThresholdOracle::uniform(std_normal_inv_cdf(spec.geometric_p)?);
            nprhmc::run_chain(m, &oracle, cfg, rng)?
        }
        Algorithm::Lmh => run_lmh_chain(m, cfg, rng)?,
        Algorithm::Rmh => run_rmh_chain(m, spec.rmh_sigma, cfg, rng)?,
        Algorithm::Is => {
            // Same number of program runs as a thinned baseline chain.
            let n = (cfg.n_samples - cfg.burn_in) * cfg.thinning;
            let is = importance_sample(m, n, cfg.extend_cap, rng)?;
            let records = is
                .samples
                .into_iter()
                .enumerate()
                .map(|(index, s)| SampleRecord {
                    run,
                    index,
                    value: s.value,
                    trace_len: s.trace.len(),
                    accepted: true,
                    log_weight: s.log_weight.is_finite().then_some(s.log_weight),
                })
                .collect::<Vec<_>>();
            let mut rejections = BTreeMap::new();
            if is.skipped > 0 {
                rejections.insert("extend_budget".to_string(), is.skipped);
            }
            return Ok(RunOutput {
                transitions: n,
                accepted: records.len(),
                records,
                rejections,
            });
        }
    };
    Ok(chain_output(run, chain))
}

fn dispatch(spec: &ExperimentSpec, run: usize, seed: u64) -> nphmc::Result<RunOutput> {
    use crate::spec::ModelId::*;
    match spec.model {
        Geometric => sample_run(&geometric(spec.geometric_p)?, spec, run, seed),
        Walk => sample_run(&random_walk(), spec, run, seed),
        Gmm | Dpmm => {
            let (train, _) = nphmc::models::generate_mixture_data(&nphmc::models::MixtureDataConfig {
                seed: spec.data_seed,
                ..Default::default()
            })?;
            if spec.model == Gmm {
                sample_run(&gmm(&train)?, spec, run, seed)
            } else {
                sample_run(&dpmm(&train, spec.dpmm_alpha, spec.dpmm_eps)?, spec, run, seed)
            }
        }
    }
}

fn execute_run(spec: &ExperimentSpec, ctx: &MetricContext, run: usize) -> (Vec<SampleRecord>, RunReport) {
    let seed = derive_seed(spec.sampler.seed, run as u64);
    let start = Instant::now();
    let out = dispatch(spec, run, seed);
    let seconds = start.elapsed().as_secs_f64();
    let mut report = RunReport {
        run,
        seed,
        samples: 0,
        transitions: 0,
        acceptance_rate: 0.0,
        rejections: BTreeMap::new(),
        seconds,
        metrics: None,
        error: None,
    };
    match out {
        Ok(out) => {
            report.samples = out.records.len();
            report.transitions = out.transitions;
            report.acceptance_rate = if out.transitions == 0 { 0.0 } else { out.accepted as f64 / out.transitions as f64 };
            report.rejections = out.rejections;
            match ctx.metrics(spec.algorithm, &out.records) {
                Ok(m) => report.metrics = Some(m),
                Err(e) => report.error = Some(format!("metrics: {e}")),
            }
            (out.records, report)
        }
        Err(e) => {
            report.error = Some(e.to_string());
            (Vec::new(), report)
        }
    }
}

/// Runs every chain of `spec` (up to `spec.jobs` at a time) and computes the
/// diagnostics. Records come back ordered by run, then index, whatever the
/// scheduling.
pub fn execute(spec: &ExperimentSpec) -> Result<(Vec<SampleRecord>, Report)> {
    spec.validate()?;
    let ctx = MetricContext::for_spec(spec)?;
    let slots: Mutex<Vec<Option<(Vec<SampleRecord>, RunReport)>>> = Mutex::new(vec![None; spec.runs]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..spec.jobs.min(spec.runs) {
            scope.spawn(|| loop {
                let run = next.fetch_add(1, Ordering::Relaxed);
                if run >= spec.runs {
                    break;
                }
                let result = execute_run(spec, &ctx, run);
                slots.lock().expect("no worker panics while holding the lock")[run] = Some(result);
            });
        }
    });
    let mut records = Vec::new();
    let mut runs = Vec::with_capacity(spec.runs);
    for slot in slots.into_inner().expect("workers finished") {
        let (r, report) = slot.expect("every run was executed");
        records.extend(r);
        runs.push(report);
    }
    let total_seconds: f64 = runs.iter().filter(|r| r.error.is_none()).map(|r| r.seconds).sum();
    let total_samples: usize = runs.iter().filter(|r| r.error.is_none()).map(|r| r.samples).sum();
    let report = Report {
        spec: spec.clone(),
        aggregate: aggregate(runs.iter().filter_map(|r| r.metrics.as_ref())),
        runs,
        seconds_per_sample: if total_samples == 0 { 0.0 } else { total_seconds / total_samples as f64 },
    };
    Ok((records, report))
}

pub fn samples_to_jsonl(records: &[SampleRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialise"));
        out.push('\n');
    }
    out
}

/// Runs the experiment and writes `samples.jsonl` and `summary.json` into
/// `spec.out`. Returns the report and the output directory.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<(Report, PathBuf)> {
    let (records, report) = execute(spec)?;
    let dir = spec.out.clone();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    write_file(&dir.join(SAMPLES_FILE), &samples_to_jsonl(&records))?;
    let summary = serde_json::to_string_pretty(&report).map_err(|e| CliError::json(dir.join(SUMMARY_FILE), e))?;
    write_file(&dir.join(SUMMARY_FILE), &summary)?;
    Ok((report, dir))
}

/// Reads an output directory written by [`run_experiment`].
pub fn load(dir: &Path) -> Result<(Vec<SampleRecord>, Report)> {
    let summary_path = dir.join(SUMMARY_FILE);
    let report: Report = serde_json::from_str(&crate::read_file(&summary_path)?).map_err(|e| CliError::json(&summary_path, e))?;
    let samples_path = dir.join(SAMPLES_FILE);
    let records = crate::read_file(&samples_path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| CliError::json(&samples_path, e)))
        .collect::<Result<Vec<SampleRecord>>>()?;
    Ok((records, report))
}
