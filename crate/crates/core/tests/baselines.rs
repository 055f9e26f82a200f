mod common;

use common::{mean_var, Gauss};
use nphmc::baselines::{importance_sample, lmh_step, rmh_step, run_lmh_chain, run_rmh_chain};
use nphmc::diagnostics::{tvd, Histogram};
use nphmc::model::DEFAULT_EXTEND_CAP;
use nphmc::models::geometric;
use nphmc::noise::seeded_rng;
use nphmc::nphmc::SamplerConfig;
use nphmc::Trace;

const CAP: usize = DEFAULT_EXTEND_CAP;

fn chain_cfg(n: usize) -> SamplerConfig {
    SamplerConfig {
        n_samples: n,
        burn_in: n / 20,
        ..Default::default()
    }
}

#[test]
fn lmh_recovers_geometric_pmf() {
    // Moves change the trace length, so this exercises the n/n′ factor.
    let g = geometric(0.2).unwrap();
    let ch = run_lmh_chain(&g, &chain_cfg(100_000), &mut seeded_rng(1)).unwrap();
    let ks: Vec<f64> = ch.samples.iter().map(|s| s.value[0]).collect();
    let h = Histogram::counts_with_tail(&ks, 50).unwrap();
    let truth = Histogram::geometric_pmf(0.2, 50).unwrap();
    let d = tvd(&h, &truth).unwrap();
    assert!(d < 0.03, "tvd {d}");
}

#[test]
fn mh_chains_recover_gaussian_posterior() {
    // w(q) = N(q; 1, 1) against an N(0, 1) prior: posterior N(1/2, 1/2).
    let g = Gauss { dim: 1, mean: 1.0 };
    let lmh = run_lmh_chain(&g, &chain_cfg(40_000), &mut seeded_rng(2)).unwrap();
    let rmh = run_rmh_chain(&g, 0.8, &chain_cfg(40_000), &mut seeded_rng(3)).unwrap();
    for ch in [lmh, rmh] {
        let xs: Vec<f64> = ch.samples.iter().map(|s| s.value[0]).collect();
        let (m, v) = mean_var(&xs);
        assert!((m - 0.5).abs() < 0.05 && (v - 0.5).abs() < 0.05, "mean {m} var {v}");
    }
}

#[test]
fn rmh_rejects_bad_scale() {
    let g = Gauss { dim: 1, mean: 0.0 };
    let q = Trace::new(vec![0.0]).unwrap();
    assert!(rmh_step(&q, &g, -1.0, CAP, &mut seeded_rng(0)).is_err());
    assert!(rmh_step(&q, &g, f64::NAN, CAP, &mut seeded_rng(0)).is_err());
}

#[test]
fn mh_steps_return_supported_traces() {
    let g = geometric(0.3).unwrap();
    let mut q = Trace::new(vec![1.0, -2.0]).unwrap();
    for i in 0..200 {
        q = lmh_step(&q, &g, CAP, &mut seeded_rng(i)).unwrap().trace;
        let out = nphmc::run_replay(&g, q.as_slice());
        assert!(out.is_complete() && out.consumed == q.len());
    }
    assert!(lmh_step(&Trace::new(vec![1.0]).unwrap(), &g, CAP, &mut seeded_rng(0)).is_err());
}

#[test]
fn importance_weights_give_posterior_mean() {
    let g = Gauss { dim: 1, mean: 1.0 };
    let run = importance_sample(&g, 100_000, CAP, &mut seeded_rng(4)).unwrap();
    assert_eq!(run.skipped, 0);
    let w: Vec<f64> = run.samples.iter().map(|s| s.log_weight.exp()).collect();
    let m = run.samples.iter().zip(&w).map(|(s, w)| s.value[0] * w).sum::<f64>() / w.iter().sum::<f64>();
    assert!((m - 0.5).abs() < 0.02, "{m}");
    assert!(importance_sample(&g, 0, CAP, &mut seeded_rng(0)).is_err());
}

#[test]
fn importance_sampling_counts_capped_draws() {
    let g = geometric(0.01).unwrap();
    let run = importance_sample(&g, 2000, 5, &mut seeded_rng(5)).unwrap();
    // P(K > 5) = 0.99⁵.
    let frac = run.skipped as f64 / 2000.0;
    assert!((frac - 0.99f64.powi(5)).abs() < 0.03, "{frac}");
    assert_eq!(run.samples.len() + run.skipped, 2000);
}
