//! Comparison samplers: single-site trace Metropolis–Hastings with prior
//! (LMH) or random-walk (RMH) proposals, and importance sampling from the
//! prior.

use crate::dist::std_normal_log_pdf;
use crate::error::{Error, Result};
use crate::model::{run_extending, Model, RunStatus};
use crate::noise::Noise;
use crate::nphmc::{drive_chain, supported_start, Chain, Rejection, SamplerConfig, Step};
use crate::trace::{CoordKind, Trace};

/// Single-site proposal used by [`mh_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SiteProposal {
    /// Redraw the site from N(0, 1).
    Prior,
    /// Perturb the site by σ·N(0, 1).
    RandomWalk { sigma: f64 },
}

/// One single-site trace MH transition.
///
/// A site `i` of the current trace (length n) is chosen uniformly and
/// proposed anew; the program is re-run reusing every other coordinate at
/// the same position and drawing fresh N(0, 1) coordinates if it asks for
/// more; coordinates it no longer reads are dropped. With target
/// w(q)·φ(q) the Hastings ratio is
///
/// * prior proposal: w(q′)·n / (w(q)·n′)
/// * random walk:    w(q′)·φ(x′ᵢ)·n / (w(q)·φ(xᵢ)·n′)
///
/// where the base densities of reused, fresh and dropped coordinates cancel
/// against the proposal densities.
pub fn mh_step<M: Model + ?Sized, N: Noise>(q0: &Trace, m: &M, proposal: SiteProposal, cap: usize, noise: &mut N) -> Result<Step> {
    let out0 = supported_start(q0, m)?;
    let n = q0.len();
    if n == 0 {
        // Nothing to propose; the program reads no coordinates.
        return Ok(Step {
            trace: q0.clone(),
            value: out0.value,
            log_weight: out0.log_weight,
            accepted: true,
            rejection: None,
        });
    }
    let i = noise.index(n);
    let old = q0[i];
    let (new, log_site) = match proposal {
        SiteProposal::Prior => (noise.normal(), 0.0),
        SiteProposal::RandomWalk { sigma } => {
            let x = old + sigma * noise.normal();
            (x, std_normal_log_pdf(x) - std_normal_log_pdf(old))
        }
    };
    let mut q = q0.to_vec();
    q[i] = new;
    let mut hook = |_: usize, _: CoordKind| Ok(noise.normal());
    let (out, mut grown) = match run_extending(m, &q, &mut hook, cap) {
        Ok(r) => r,
        Err(e) => return Ok(Step::stay(q0, &out0, Rejection::from_error(&e))),
    };
    if out.status != RunStatus::Complete || !out.log_weight.is_finite() {
        return Ok(Step::stay(q0, &out0, Rejection::Hastings));
    }
    grown.truncate(out.consumed);
    let log_ratio = out.log_weight - out0.log_weight + log_site + (n as f64).ln() - (grown.len() as f64).ln();
    let u = noise.uniform();
    if u.ln() < log_ratio.min(0.0) {
        Ok(Step {
            trace: Trace::from_vec_unchecked(grown),
            value: out.value,
            log_weight: out.log_weight,
            accepted: true,
            rejection: None,
        })
    } else {
        Ok(Step::stay(q0, &out0, Rejection::Hastings))
    }
}

/// Lightweight MH: redraw one site from the prior.
pub fn lmh_step<M: Model + ?Sized, N: Noise>(q0: &Trace, m: &M, cap: usize, noise: &mut N) -> Result<Step> {
    mh_step(q0, m, SiteProposal::Prior, cap, noise)
}

/// Random-walk lightweight MH: perturb one site by σ·N(0, 1).
pub fn rmh_step<M: Model + ?Sized, N: Noise>(q0: &Trace, m: &M, sigma: f64, cap: usize, noise: &mut N) -> Result<Step> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Config(format!("random-walk scale must be nonnegative, got {sigma}")));
    }
    mh_step(q0, m, SiteProposal::RandomWalk { sigma }, cap, noise)
}

pub fn run_lmh_chain<M: Model + ?Sized, N: Noise>(m: &M, cfg: &SamplerConfig, noise: &mut N) -> Result<Chain> {
    drive_chain(m, cfg, noise, |q, noise| lmh_step(q, m, cfg.extend_cap, noise))
}

pub fn run_rmh_chain<M: Model + ?Sized, N: Noise>(m: &M, sigma: f64, cfg: &SamplerConfig, noise: &mut N) -> Result<Chain> {
    drive_chain(m, cfg, noise, |q, noise| rmh_step(q, m, sigma, cfg.extend_cap, noise))
}

/// A prior draw with its importance weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    pub trace: Trace,
    pub value: Vec<f64>,
    /// Accumulated observation log-weight (−∞ for failed runs).
    pub log_weight: f64,
}

/// Importance samples and the number of draws abandoned at the extension cap.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImportanceRun {
    pub samples: Vec<WeightedSample>,
    pub skipped: usize,
}

/// Streams `n` prior draws through `sink`; returns how many were skipped
/// because they hit the extension cap.
pub fn importance_sample_with<M, N, F>(m: &M, n: usize, cap: usize, noise: &mut N, mut sink: F) -> Result<usize>
where
    M: Model + ?Sized,
    N: Noise,
    F: FnMut(WeightedSample),
{
    if n == 0 {
        return Err(Error::Config("importance sampling needs at least one draw".into()));
    }
    let mut skipped = 0;
    for _ in 0..n {
        let mut hook = |_: usize, _: CoordKind| Ok(noise.normal());
        match run_extending(m, &[], &mut hook, cap) {
            Ok((out, mut q)) => {
                q.truncate(out.consumed);
                sink(WeightedSample {
                    trace: Trace::from_vec_unchecked(q),
                    value: out.value,
                    log_weight: out.log_weight,
                });
            }
            Err(Error::ExtendBudgetExceeded { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(skipped)
}

/// `n` importance samples with the prior as proposal.
pub fn importance_sample<M: Model + ?Sized, N: Noise>(m: &M, n: usize, cap: usize, noise: &mut N) -> Result<ImportanceRun> {
    let mut samples = Vec::with_capacity(n);
    let skipped = importance_sample_with(m, n, cap, noise, |s| samples.push(s))?;
    Ok(ImportanceRun { samples, skipped })
}
