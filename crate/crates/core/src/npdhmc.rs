//! Nonparametric discontinuous HMC.
//!
//! Continuous coordinates carry Gaussian momentum and follow leapfrog
//! dynamics; discontinuous coordinates carry Laplace momentum (kinetic energy
//! |p|) and are moved one at a time by a fixed ε·sign(p) jump that is accepted
//! when the kinetic energy pays for the potential change and reflected
//! otherwise.

use crate::error::{Error, Result};
use crate::model::{run_replay, Model};
use crate::noise::Noise;
use crate::nphmc::{
    drive_chain, extend_with, finish_step, sign, start_energy, start_kinds, supported_start, Chain, Clock, ExtendResult, Flow, Integrated,
    MomentumLaw, Potential, SamplerConfig, Step, Sweep,
};
use crate::trace::{CoordKind, State, Trace};

/// [`crate::nphmc::extend`] with Laplace momentum for coordinates the program
/// declares discontinuous.
///
/// A continuous coordinate is appended at `x₀ + t·y₀`. A discontinuous one
/// moves at speed sign(p) under the kinetic energy |p|, so it is appended at
/// `x₀ + t·sign(y₀)`.
pub fn extend_mixed<M: Model + ?Sized, N: Noise>(
    current: &State,
    initial: &State,
    t: f64,
    m: &M,
    noise: &mut N,
    cfg: &SamplerConfig,
) -> Result<ExtendResult> {
    extend_with(current, initial, t, m, noise, cfg, MomentumLaw::Mixed)
}

/// Which branch a coordinate update took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordMove {
    Jump,
    Reflect,
}

/// Moves discontinuous coordinate `j` by ε·sign(p_j) if the kinetic energy
/// |p_j| exceeds the potential increase, otherwise negates p_j.
///
/// `u` is the potential at the current point on entry and is updated on a
/// jump. Returns the branch taken.
pub(crate) fn coord_update<M: Model + ?Sized, N: Noise>(
    flow: &mut Flow,
    u: &mut f64,
    j: usize,
    clock: Clock,
    m: &M,
    cfg: &SamplerConfig,
    noise: &mut N,
) -> CoordMove {
    let pj = flow.cur.p[j];
    let xj = flow.cur.q[j];
    let moved = xj + cfg.epsilon * sign(pj);
    let mut star = flow.clone();
    star.cur.q[j] = moved;
    // A point that cannot be made supported has infinite potential.
    let u_star = star
        .settle_potential(m, clock, MomentumLaw::Mixed, noise, cfg)
        .unwrap_or(f64::INFINITY);
    let mut delta = u_star - *u;
    if cfg.potential == Potential::Joint {
        delta += 0.5 * (moved * moved - xj * xj);
    }
    if pj.abs() > delta {
        *flow = star;
        *u = u_star;
        // Trimming may have dropped j if it is no longer consumed.
        if j < flow.len() {
            flow.cur.p[j] = pj - sign(pj) * delta;
        }
        CoordMove::Jump
    } else {
        flow.cur.p[j] = -pj;
        CoordMove::Reflect
    }
}

/// Public form of the coordinate update on explicit states.
///
/// Returns the updated current and initial states. `j` must index a
/// discontinuous coordinate of `current`; coordinates appended by the
/// update are placed by free flight for time `t`, so U = −log w here
/// whatever `cfg.potential` says.
pub fn coord_integrator<M: Model + ?Sized, N: Noise>(
    current: &State,
    initial: &State,
    j: usize,
    t: f64,
    m: &M,
    cfg: &SamplerConfig,
    noise: &mut N,
) -> Result<(State, State, CoordMove)> {
    if current.len() != initial.len() {
        return Err(Error::Domain("current and initial states differ in length".into()));
    }
    let out = run_replay(m, &current.q);
    if !out.is_complete() {
        return Err(Error::OutOfDomain);
    }
    let kinds = start_kinds(&out, current.len());
    if j >= current.len() || kinds[j] != CoordKind::Discontinuous {
        return Err(Error::Domain(format!("index {j} is not a discontinuous coordinate")));
    }
    let mut flow = Flow {
        cur: current.clone(),
        init: initial.clone(),
        kinds,
        floor: current.len(),
        sweep: None,
    };
    let mut u = -out.log_weight;
    let cfg = SamplerConfig {
        potential: Potential::Weight,
        ..cfg.clone()
    };
    let mv = coord_update(&mut flow, &mut u, j, Clock::at(t), m, &cfg, noise);
    Ok((flow.cur, flow.init, mv))
}

/// Updates every discontinuous coordinate once, in a random order.
///
/// Coordinates appended during the sweep join the permutation at a uniform
/// random slot (see [`Sweep`]), so the order stays uniform over everything
/// that exists at the end of the sweep.
fn sweep<M: Model + ?Sized, N: Noise>(flow: &mut Flow, u: &mut f64, clock: Clock, m: &M, cfg: &SamplerConfig, noise: &mut N) {
    let mut order: Vec<usize> = (0..flow.len()).filter(|&j| flow.kinds[j] == CoordKind::Discontinuous).collect();
    noise.shuffle(&mut order);
    let mut c = 0;
    while c < order.len() {
        let j = order[c];
        flow.sweep = Some(Sweep {
            len: order.len(),
            cursor: c,
            step: cfg.epsilon,
            pending: Vec::new(),
        });
        // Earlier updates may have trimmed the trace.
        if j < flow.len() && flow.kinds[j] == CoordKind::Discontinuous {
            coord_update(flow, u, j, clock, m, cfg, noise);
        }
        let s = flow.sweep.take().expect("sweep state is set above");
        for (k, slot) in s.pending {
            order.insert(slot, k);
        }
        c = s.cursor + 1;
    }
}

pub(crate) fn integrate_mixed<M: Model + ?Sized, N: Noise>(
    mut flow: Flow,
    m: &M,
    cfg: &SamplerConfig,
    noise: &mut N,
) -> Result<Integrated> {
    let eps = cfg.epsilon;
    let law = MomentumLaw::Mixed;
    let mut e = start_energy(&mut flow, m, cfg)?;
    let u_initial = e.u;
    let c = Some(CoordKind::Continuous);
    for i in 0..cfg.steps {
        let t0 = i as f64 * eps;
        let half = Clock {
            c: t0 + 0.5 * eps,
            d: t0,
            steps: i,
            sweeps: i,
        };
        let end = Clock {
            c: t0 + eps,
            d: t0 + eps,
            steps: i,
            sweeps: i + 1,
        };
        flow.kick(&e.grad, 0.5 * eps, c);
        if !flow.kinds.contains(&CoordKind::Discontinuous) {
            // With nothing to sweep the two half drifts are one leapfrog
            // drift, unless the midpoint needs more coordinates.
            let mut mid = flow.clone();
            mid.drift(0.5 * eps, c);
            if run_replay(m, &mid.cur.q).is_complete() {
                flow.drift(eps, c);
                e = flow.settle(m, end, law, noise, cfg)?;
                flow.kick(&e.grad, 0.5 * eps, c);
                continue;
            }
        }
        let mut u = e.u;
        flow.drift(0.5 * eps, c);
        if flow.kinds.contains(&CoordKind::Continuous) {
            u = flow.settle_potential(m, half, law, noise, cfg)?;
        }
        sweep(&mut flow, &mut u, half, m, cfg, noise);
        flow.drift(0.5 * eps, c);
        e = flow.settle(m, end, law, noise, cfg)?;
        flow.kick(&e.grad, 0.5 * eps, c);
    }
    flow.flip();
    Ok(Integrated { flow, u_initial, end: e })
}

/// Runs L iterations of the NP-DHMC integrator from `start`.
pub fn npdhmc_integrate<M: Model + ?Sized, N: Noise>(start: &State, m: &M, cfg: &SamplerConfig, noise: &mut N) -> Result<(State, State)> {
    let out = run_replay(m, &start.q);
    let flow = Flow::new(start.clone(), start_kinds(&out, start.len()));
    let done = integrate_mixed(flow, m, cfg, noise)?;
    Ok((done.flow.cur, done.flow.init))
}

/// One NP-DHMC transition from the supported trace `q0`.
pub fn npdhmc_step<M: Model + ?Sized, N: Noise>(q0: &Trace, m: &M, cfg: &SamplerConfig, noise: &mut N) -> Result<Step> {
    let out0 = supported_start(q0, m)?;
    let p0: Vec<f64> = out0.kinds.iter().map(|&k| MomentumLaw::Mixed.draw(k, noise)).collect();
    let flow = Flow::new(
        State {
            q: q0.to_vec(),
            p: p0,
        },
        out0.kinds.clone(),
    );
    let result = integrate_mixed(flow, m, cfg, noise);
    let score = if cfg.laplace_density {
        MomentumLaw::Mixed
    } else {
        MomentumLaw::Gaussian
    };
    Ok(finish_step(q0, &out0, result, MomentumLaw::Mixed, score, noise))
}

/// An NP-DHMC chain.
pub fn run_chain<M: Model + ?Sized, N: Noise>(m: &M, cfg: &SamplerConfig, noise: &mut N) -> Result<Chain> {
    drive_chain(m, cfg, noise, |q, noise| npdhmc_step(q, m, cfg, noise))
}
