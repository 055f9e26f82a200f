//! Browser demo: three interactive operations exported through wasm-bindgen.
//! Each returns a JSON string for the page script to draw.

use nphmc::diagnostics::{ess_autocorr, kde, tvd, Histogram};
use nphmc::models::{geometric, random_walk, two_branch};
use nphmc::noise::seeded_rng;
use nphmc::nphmc::{np_integrate, Potential, SamplerConfig};
use nphmc::{npdhmc, State};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest K shown; larger values go to a tail cell.
const MAX_K: u64 = 20;
/// Upper bound on chain length so the page stays responsive.
const MAX_SAMPLES: usize = 20_000;

fn error(e: impl std::fmt::Display) -> String {
    json!({ "error": e.to_string() }).to_string()
}

fn chain_cfg(eps: f64, steps: usize, samples: usize, seed: u64) -> SamplerConfig {
    let samples = samples.clamp(2, MAX_SAMPLES);
    SamplerConfig {
        epsilon: eps,
        steps,
        n_samples: samples,
        burn_in: samples / 10,
        seed,
        ..Default::default()
    }
}

/// NP-DHMC on geometric(p): empirical frequencies of K against the pmf.
pub fn geometric_histogram_value(p: f64, eps: f64, steps: usize, samples: usize, seed: u64) -> Result<Value, nphmc::Error> {
    let m = geometric(p)?;
    let cfg = chain_cfg(eps, steps, samples, seed);
    let ch = npdhmc::run_chain(&m, &cfg, &mut seeded_rng(seed))?;
    let ks: Vec<f64> = ch.samples.iter().map(|s| s.value[0]).collect();
    let emp = Histogram::counts_with_tail(&ks, MAX_K)?;
    let exact = Histogram::geometric_pmf(p, MAX_K)?;
    Ok(json!({
        "k": (1..=MAX_K).map(|k| k.to_string()).chain([format!(">{MAX_K}")]).collect::<Vec<_>>(),
        "empirical": emp.masses,
        "exact": exact.masses,
        "tvd": tvd(&emp, &exact)?,
        "acceptance": ch.acceptance_rate(),
    }))
}

/// NP-DHMC on the random walk: density estimate of the starting point.
pub fn walk_density_value(eps: f64, steps: usize, samples: usize, seed: u64) -> Result<Value, nphmc::Error> {
    let cfg = SamplerConfig {
        init_draws: 10,
        trim: false,
        ..chain_cfg(eps, steps, samples, seed)
    };
    let ch = npdhmc::run_chain(&random_walk(), &cfg, &mut seeded_rng(seed))?;
    let xs: Vec<f64> = ch.samples.iter().map(|s| s.value[0]).collect();
    let grid: Vec<f64> = (0..=120).map(|i| -0.5 + 4.0 * i as f64 / 120.0).collect();
    let density = kde(&xs, &grid, None).unwrap_or_else(|_| vec![0.0; grid.len()]);
    Ok(json!({
        "grid": grid,
        "density": density,
        "ess": ess_autocorr(&xs).map(|e| e.value).unwrap_or(0.0),
        "acceptance": ch.acceptance_rate(),
    }))
}

/// NP-HMC positions on the two-branch density after each leapfrog step,
/// starting from (q₁, p₁). The trajectory gains a second coordinate when
/// q₁ crosses 0.
pub fn two_branch_trajectory_value(q1: f64, p1: f64, eps: f64, steps: usize, seed: u64) -> Result<Value, nphmc::Error> {
    let start = State::new(vec![q1], vec![p1])?;
    let m = two_branch();
    let mut points = vec![json!({ "step": 0, "q": [q1], "p": [p1] })];
    let mut initial = start.clone();
    let mut stopped = None;
    for k in 1..=steps.min(200) {
        let cfg = SamplerConfig {
            epsilon: eps,
            steps: k,
            potential: Potential::Weight,
            trim: false,
            ..Default::default()
        };
        // Same seed each time: the extension draws are the same along the way.
        match np_integrate(&start, &m, &cfg, &mut seeded_rng(seed)) {
            Ok((prop, init)) => {
                let p: Vec<f64> = prop.p.iter().map(|x| -x).collect();
                points.push(json!({ "step": k, "q": prop.q, "p": p }));
                initial = init;
            }
            Err(e) => {
                stopped = Some(e.to_string());
                break;
            }
        }
    }
    Ok(json!({
        "points": points,
        "initial": { "q": initial.q, "p": initial.p },
        "stopped": stopped,
    }))
}

#[wasm_bindgen]
pub fn geometric_histogram(p: f64, eps: f64, steps: usize, samples: usize, seed: u32) -> String {
    geometric_histogram_value(p, eps, steps, samples, seed as u64).map_or_else(error, |v| v.to_string())
}

#[wasm_bindgen]
pub fn walk_density(eps: f64, steps: usize, samples: usize, seed: u32) -> String {
    walk_density_value(eps, steps, samples, seed as u64).map_or_else(error, |v| v.to_string())
}

#[wasm_bindgen]
pub fn two_branch_trajectory(q1: f64, p1: f64, eps: f64, steps: usize, seed: u32) -> String {
    two_branch_trajectory_value(q1, p1, eps, steps, seed as u64).map_or_else(error, |v| v.to_string())
}
