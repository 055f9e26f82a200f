//! CSV files for external plotting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::path::{Path, PathBuf};

use nphmc::diagnostics::{kde_weighted, mean_sd, scott_bandwidth};

use crate::experiment::{load, Report};
use crate::metrics::{importance_weights, MetricContext, SampleRecord};
use crate::spec::ModelId;
use crate::{write_file, CliError, Result};

pub const KDE_FILE: &str = "kde.csv";
pub const K_HISTOGRAM_FILE: &str = "k_histogram.csv";
pub const KDE_POINTS: usize = 200;
/// Points on each LPPD-vs-sample-count curve.
pub const LPPD_POINTS: usize = 50;

/// One labelled experiment output.
pub struct Input {
    pub label: String,
    pub records: Vec<SampleRecord>,
    pub report: Report,
}

/// Loads run directories, labelling each by algorithm and making labels unique.
pub fn load_inputs(dirs: &[PathBuf]) -> Result<Vec<Input>> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    dirs.iter()
        .map(|d| {
            let (records, report) = load(d)?;
            let base = serde_json::to_value(report.spec.algorithm)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default();
            let n = seen.entry(base.clone()).or_insert(0);
            *n += 1;
            let label = if *n == 1 { base } else { format!("{base}_{n}") };
            Ok(Input { label, records, report })
        })
        .collect()
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

/// Density of the first returned value on a shared grid, one column per input.
pub fn kde_csv(inputs: &[Input]) -> Result<String> {
    let mut out = String::from("x");
    for i in inputs {
        write!(out, ",{}", i.label).unwrap();
    }
    out.push('\n');
    let all: Vec<f64> = inputs.iter().flat_map(|i| i.records.iter().map(|r| r.value[0])).collect();
    if all.is_empty() {
        return Ok(out);
    }
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.1 * (hi - lo).max(1.0);
    let grid: Vec<f64> = (0..KDE_POINTS)
        .map(|k| lo - pad + (hi - lo + 2.0 * pad) * k as f64 / (KDE_POINTS - 1) as f64)
        .collect();
    let columns = inputs
        .iter()
        .map(|i| {
            let xs: Vec<f64> = i.records.iter().map(|r| r.value[0]).collect();
            if xs.is_empty() {
                return Ok(vec![0.0; grid.len()]);
            }
            let h = scott_bandwidth(&xs).unwrap_or(0.05 * (hi - lo).max(1.0));
            let w = importance_weights(i.report.spec.algorithm, &i.records);
            Ok(kde_weighted(&xs, w.as_deref(), &grid, Some(h))?)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    for (k, x) in grid.iter().enumerate() {
        out.push_str(&fmt(*x));
        for c in &columns {
            write!(out, ",{}", fmt(c[k])).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

/// Pooled fraction of samples per K for GMM inputs (other inputs get empty cells).
pub fn k_histogram_csv(inputs: &[Input]) -> String {
    let mut out = String::from("k");
    for i in inputs {
        write!(out, ",{}", i.label).unwrap();
    }
    out.push('\n');
    let hists: Vec<BTreeMap<usize, f64>> = inputs
        .iter()
        .map(|i| {
            let mut h = BTreeMap::new();
            if i.report.spec.model != ModelId::Gmm {
                return h;
            }
            let w = importance_weights(i.report.spec.algorithm, &i.records);
            let total: f64 = w.as_ref().map_or(i.records.len() as f64, |w| w.iter().sum());
            for (n, r) in i.records.iter().enumerate() {
                *h.entry(r.value[0] as usize).or_insert(0.0) += w.as_ref().map_or(1.0, |w| w[n]) / total;
            }
            h
        })
        .collect();
    let ks: BTreeSet<usize> = hists.iter().flat_map(|h| h.keys().copied()).collect();
    for k in ks {
        write!(out, "{k}").unwrap();
        for h in &hists {
            write!(out, ",{}", h.get(&k).map_or(String::new(), |v| fmt(*v))).unwrap();
        }
        out.push('\n');
    }
    out
}

/// LPPD of the test set against the number of samples used, per run, with
/// the mean and standard deviation across runs. Header only for models
/// without a test set.
pub fn lppd_curve_csv(input: &Input) -> Result<String> {
    let runs = input.report.runs.len();
    let mut out = String::from("index");
    for r in 0..runs {
        write!(out, ",run_{r}").unwrap();
    }
    out.push_str(",mean,sd\n");
    let ctx = MetricContext::for_spec(&input.report.spec)?;
    let MetricContext::Mixture { model, test, .. } = &ctx else {
        return Ok(out);
    };
    let mut by_run: Vec<Vec<SampleRecord>> = vec![Vec::new(); runs];
    for r in &input.records {
        if let Some(slot) = by_run.get_mut(r.run) {
            slot.push(r.clone());
        }
    }
    let longest = by_run.iter().map(Vec::len).max().unwrap_or(0);
    if longest == 0 {
        return Ok(out);
    }
    let stride = longest.div_ceil(LPPD_POINTS).max(1);
    let weights: Vec<Option<Vec<f64>>> = by_run.iter().map(|r| importance_weights(input.report.spec.algorithm, r)).collect();
    let mut upto = stride.min(longest);
    loop {
        let vals: Vec<Option<f64>> = by_run
            .iter()
            .zip(&weights)
            .map(|(recs, w)| (recs.len() >= upto).then(|| ctx.lppd_prefix(*model, test, recs, w.as_deref(), upto)))
            .collect();
        let present: Vec<f64> = vals.iter().flatten().copied().collect();
        let (m, s) = mean_sd(&present);
        write!(out, "{upto}").unwrap();
        for v in &vals {
            write!(out, ",{}", v.map_or(String::new(), fmt)).unwrap();
        }
        writeln!(out, ",{},{}", fmt(m), fmt(s)).unwrap();
        if upto == longest {
            break;
        }
        upto = (upto + stride).min(longest);
    }
    Ok(out)
}

/// Writes `kde.csv`, `k_histogram.csv` and one `lppd_<label>.csv` per input
/// into `out`. Returns the written paths.
pub fn emit_plot_data(dirs: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>> {
    let inputs = load_inputs(dirs)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, text: String| -> Result<()> {
        let p = out.join(name);
        write_file(&p, &text)?;
        written.push(p);
        Ok(())
    };
    put(KDE_FILE.into(), kde_csv(&inputs)?)?;
    put(K_HISTOGRAM_FILE.into(), k_histogram_csv(&inputs))?;
    for i in &inputs {
        put(format!("lppd_{}.csv", i.label), lppd_curve_csv(i)?)?;
    }
    Ok(written)
}
