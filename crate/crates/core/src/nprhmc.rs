//! Nonparametric reflective/refractive HMC.
//!
//! Within each position step the particle moves in straight lines between
//! discontinuities reported by a [`BoundaryOracle`]. At a boundary the
//! momentum component perpendicular to it is either shrunk to pay for the
//! potential increase (refraction) or negated (reflection).

use crate::error::{Error, Result};
use crate::model::{run_replay, Model};
use crate::noise::Noise;
use crate::nphmc::{drive_chain, finish_step, start_energy, start_kinds, supported_start, Chain, Clock, Flow, Integrated, MomentumLaw, SamplerConfig, Step};
use crate::trace::{State, Trace};

/// A crossing of a discontinuity of the potential.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryHit {
    /// Time from the query point to the crossing, in (0, limit].
    pub time: f64,
    /// Position just before the boundary.
    pub before: Vec<f64>,
    /// Position just past the boundary.
    pub after: Vec<f64>,
}

/// Knowledge of where the potential is discontinuous.
pub trait BoundaryOracle {
    /// The first boundary hit by the straight line `q + t·p` for `t ∈ (0, limit]`.
    fn next_boundary(&self, q: &[f64], p: &[f64], limit: f64) -> Option<BoundaryHit>;

    /// Splits `p` into components parallel and perpendicular to the boundary
    /// at `q`. The two parts sum to `p`.
    fn decompose(&self, q: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>);
}

/// An oracle that never reports a boundary.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoBoundary;

impl BoundaryOracle for NoBoundary {
    fn next_boundary(&self, _: &[f64], _: &[f64], _: f64) -> Option<BoundaryHit> {
        None
    }

    fn decompose(&self, _: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (p.to_vec(), vec![0.0; p.len()])
    }
}

/// Boundaries of the form `q_i = c_i`: coordinate `i` crossing a fixed
/// threshold. Indices past the explicit list use `default`.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisThresholdOracle {
    thresholds: Vec<Option<f64>>,
    default: Option<f64>,
}

impl AxisThresholdOracle {
    pub fn new(thresholds: Vec<Option<f64>>) -> Self {
        AxisThresholdOracle { thresholds, default: None }
    }

    /// The same threshold on every coordinate.
    pub fn uniform(threshold: f64) -> Self {
        AxisThresholdOracle {
            thresholds: Vec::new(),
            default: Some(threshold),
        }
    }

    fn threshold(&self, i: usize) -> Option<f64> {
        self.thresholds.get(i).copied().unwrap_or(self.default)
    }

    /// Distance by which points are placed off the boundary so that they are
    /// unambiguously on one side.
    fn offset(c: f64) -> f64 {
        1e-9 * c.abs().max(1.0)
    }
}

/// Builds an [`AxisThresholdOracle`].
pub fn axis_threshold_oracle(thresholds: Vec<Option<f64>>) -> AxisThresholdOracle {
    AxisThresholdOracle::new(thresholds)
}

impl BoundaryOracle for AxisThresholdOracle {
    fn next_boundary(&self, q: &[f64], p: &[f64], limit: f64) -> Option<BoundaryHit> {
        let mut best: Option<(f64, usize, f64)> = None;
        for (i, (&qi, &pi)) in q.iter().zip(p).enumerate() {
            let Some(c) = self.threshold(i) else { continue };
            if pi == 0.0 {
                continue;
            }
            let t = (c - qi) / pi;
            if t > 0.0 && t <= limit && best.is_none_or(|(bt, _, _)| t < bt) {
                best = Some((t, i, c));
            }
        }
        let (t, i, c) = best?;
        let mut at: Vec<f64> = q.iter().zip(p).map(|(q, p)| q + t * p).collect();
        let d = Self::offset(c) * p[i].signum();
        at[i] = c - d;
        let before = at.clone();
        at[i] = c + d;
        Some(BoundaryHit { time: t, before, after: at })
    }

    fn decompose(&self, q: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let axis = q
            .iter()
            .enumerate()
            .filter_map(|(i, &qi)| self.threshold(i).map(|c| (i, (qi - c).abs())))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i);
        let mut par = p.to_vec();
        let mut perp = vec![0.0; p.len()];
        if let Some(i) = axis {
            perp[i] = p[i];
            par[i] = 0.0;
        }
        (par, perp)
    }
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// What happened at a boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMove {
    Refract,
    Reflect,
}

/// Resolves one boundary crossing. `flow.cur.q` is the query point; on return
/// it holds the post-event position and momentum.
fn cross<M: Model + ?Sized, N: Noise, O: BoundaryOracle + ?Sized>(
    flow: &mut Flow,
    hit: BoundaryHit,
    clock: Clock,
    m: &M,
    oracle: &O,
    cfg: &SamplerConfig,
    noise: &mut N,
) -> Result<BoundaryMove> {
    let u_before = -run_replay(m, &hit.before).log_truncation();
    if !u_before.is_finite() {
        return Err(Error::NumericalFailure("boundary oracle placed a point outside the support".into()));
    }
    let mut star = flow.clone();
    star.cur.q = hit.after.clone();
    let u_after = star
        .settle_potential(m, clock, MomentumLaw::Gaussian, noise, cfg)
        .unwrap_or(f64::INFINITY);
    let delta = u_after - u_before;
    let (_, perp) = oracle.decompose(&star.cur.q, &star.cur.p);
    let perp_sq = norm_sq(&perp);
    if perp_sq > 2.0 * delta {
        let (par, perp) = oracle.decompose(&star.cur.q, &star.cur.p);
        let scale = (perp_sq - 2.0 * delta).sqrt() / perp_sq.sqrt();
        star.cur.p = par.iter().zip(&perp).map(|(a, b)| a + scale * b).collect();
        *flow = star;
        Ok(BoundaryMove::Refract)
    } else {
        let (par, perp) = oracle.decompose(&hit.before, &flow.cur.p);
        flow.cur.p = par.iter().zip(&perp).map(|(a, b)| a - b).collect();
        flow.cur.q = hit.before;
        Ok(BoundaryMove::Reflect)
    }
}

pub(crate) fn integrate_reflective<M: Model + ?Sized, N: Noise, O: BoundaryOracle + ?Sized>(
    mut flow: Flow,
    m: &M,
    oracle: &O,
    cfg: &SamplerConfig,
    noise: &mut N,
) -> Result<Integrated> {
    let eps = cfg.epsilon;
    let law = MomentumLaw::Gaussian;
    let mut e = start_energy(&mut flow, m, cfg)?;
    let u_initial = e.u;
    for i in 0..cfg.steps {
        let t0 = i as f64 * eps;
        flow.kick(&e.grad, 0.5 * eps, None);
        let mut t = 0.0;
        while let Some(hit) = oracle.next_boundary(&flow.cur.q, &flow.cur.p, eps - t) {
            if !(hit.time > 0.0 && hit.time <= eps - t) {
                return Err(Error::OracleContractViolation {
                    t_hit: hit.time,
                    limit: eps - t,
                });
            }
            t += hit.time;
            let clock = Clock {
                c: t0 + t,
                d: t0 + t,
                steps: i,
                sweeps: 0,
            };
            cross(&mut flow, hit, clock, m, oracle, cfg, noise)?;
        }
        flow.drift(eps - t, None);
        let end = Clock {
            c: t0 + eps,
            d: t0 + eps,
            steps: i,
            sweeps: 0,
        };
        e = flow.settle(m, end, law, noise, cfg)?;
        flow.kick(&e.grad, 0.5 * eps, None);
    }
    flow.flip();
    Ok(Integrated { flow, u_initial, end: e })
}

/// Runs L steps of the NP-RHMC integrator from `start`.
pub fn nprhmc_integrate<M: Model + ?Sized, N: Noise, O: BoundaryOracle + ?Sized>(
    start: &State,
    m: &M,
    oracle: &O,
    cfg: &SamplerConfig,
    noise: &mut N,
) -> Result<(State, State)> {
    let out = run_replay(m, &start.q);
    let flow = Flow::new(start.clone(), start_kinds(&out, start.len()));
    let done = integrate_reflective(flow, m, oracle, cfg, noise)?;
    Ok((done.flow.cur, done.flow.init))
}

/// One NP-RHMC transition from the supported trace `q0`.
pub fn nprhmc_step<M: Model + ?Sized, N: Noise, O: BoundaryOracle + ?Sized>(
    q0: &Trace,
    m: &M,
    oracle: &O,
    cfg: &SamplerConfig,
    noise: &mut N,
) -> Result<Step> {
    let out0 = supported_start(q0, m)?;
    let p0: Vec<f64> = (0..q0.len()).map(|_| noise.normal()).collect();
    let flow = Flow::new(
        State {
            q: q0.to_vec(),
            p: p0,
        },
        out0.kinds.clone(),
    );
    let result = integrate_reflective(flow, m, oracle, cfg, noise);
    Ok(finish_step(q0, &out0, result, MomentumLaw::Gaussian, MomentumLaw::Gaussian, noise))
}

/// An NP-RHMC chain.
pub fn run_chain<M: Model + ?Sized, N: Noise, O: BoundaryOracle + ?Sized>(m: &M, oracle: &O, cfg: &SamplerConfig, noise: &mut N) -> Result<Chain> {
    drive_chain(m, cfg, noise, |q, noise| nprhmc_step(q, m, oracle, cfg, noise))
}
