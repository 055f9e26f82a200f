//! Recomputes a summary from its sample file.

use std::path::Path;

use crate::experiment::load;
use crate::metrics::{aggregate, MetricContext, Metrics, SampleRecord};
use crate::{CliError, Result};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn metrics_match(a: &Metrics, b: &Metrics) -> bool {
    let sa = a.scalars();
    let sb = b.scalars();
    let hist = match (&a.k_histogram, &b.k_histogram) {
        (None, None) => true,
        (Some(x), Some(y)) => x.len() == y.len() && x.iter().zip(y).all(|((k1, v1), (k2, v2))| k1 == k2 && close(*v1, *v2)),
        _ => false,
    };
    hist && sa.len() == sb.len() && sa.iter().zip(&sb).all(|((n1, v1), (n2, v2))| n1 == n2 && close(*v1, *v2))
}

/// Checks that every per-run metric and every aggregate in the summary of
/// `dir` follows from its samples. Returns a one-line description.
pub fn verify_dir(dir: &Path) -> Result<String> {
    let (records, report) = load(dir)?;
    let ctx = MetricContext::for_spec(&report.spec)?;
    let mut by_run: Vec<Vec<SampleRecord>> = vec![Vec::new(); report.runs.len()];
    for r in records {
        let slot = by_run
            .get_mut(r.run)
            .ok_or_else(|| CliError::Verify(format!("sample for unknown run {}", r.run)))?;
        slot.push(r);
    }
    let mut recomputed = Vec::new();
    for (run, samples) in report.runs.iter().zip(&by_run) {
        if run.samples != samples.len() {
            return Err(CliError::Verify(format!("run {} reports {} samples, file has {}", run.run, run.samples, samples.len())));
        }
        if samples.iter().enumerate().any(|(i, s)| s.index != i) {
            return Err(CliError::Verify(format!("run {} samples are out of order", run.run)));
        }
        if let Some(m) = &run.metrics {
            let again = ctx.metrics(report.spec.algorithm, samples)?;
            if !metrics_match(m, &again) {
                return Err(CliError::Verify(format!("run {} metrics {m:?} recompute to {again:?}", run.run)));
            }
            recomputed.push(again);
        }
    }
    let agg = aggregate(&recomputed);
    if agg.len() != report.aggregate.len() {
        return Err(CliError::Verify("aggregate metrics differ".into()));
    }
    for ((k1, a), (k2, b)) in agg.iter().zip(&report.aggregate) {
        if k1 != k2 || a.n != b.n || !close(a.mean, b.mean) || !(close(a.sd, b.sd) || (a.sd.is_nan() && b.sd.is_nan())) {
            return Err(CliError::Verify(format!("aggregate {k2}: reported {b:?}, recomputed {a:?}")));
        }
    }
    Ok(format!(
        "ok: {} runs, {} samples, metrics {:?}",
        report.runs.len(),
        by_run.iter().map(Vec::len).sum::<usize>(),
        agg.keys().collect::<Vec<_>>()
    ))
}
