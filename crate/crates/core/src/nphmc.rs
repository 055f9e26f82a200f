//! Nonparametric HMC: the extend subroutine, the nonparametric leapfrog
//! integrator, the Hastings correction, single steps and chains, and the
//! fixed-dimension reference algorithm used to cross-check it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ad::run_with_gradient;
use crate::dist::std_normal_log_pdf;
use crate::dist::std_laplace_log_pdf;
use crate::error::{Error, Result};
use crate::model::{run_extending, run_replay, Model, RunOutcome, RunStatus, DEFAULT_EXTEND_CAP};
use crate::noise::Noise;
use crate::trace::{check_finite, log_base_density, supported_prefix, CoordKind, State, Trace};

/// Sampler settings shared by every algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Leapfrog step size ε.
    pub epsilon: f64,
    /// Number of leapfrog steps L.
    pub steps: usize,
    /// Chain length, burn-in included.
    pub n_samples: usize,
    pub burn_in: usize,
    /// Transitions per emitted sample.
    pub thinning: usize,
    pub seed: u64,
    /// Drop coordinates past the supported prefix after each extension.
    pub trim: bool,
    /// Maximum coordinates one extension may append.
    pub extend_cap: usize,
    /// NP-DHMC only: score Laplace-drawn momenta with the Laplace density in
    /// the acceptance ratio. When false every momentum is scored as Gaussian.
    pub laplace_density: bool,
    /// Which energy the trajectories follow.
    pub potential: Potential,
    /// The chain starts at the highest-weight trace among this many prior
    /// draws.
    pub init_draws: usize,
}

/// The potential the integrators simulate.
///
/// Both choices target the same distribution and use the same Hastings
/// ratio exp(−U)·φ(q)·m(p); they differ only in the trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Potential {
    /// U = −log w. The standard-normal base density only enters the
    /// Hastings ratio, and coordinates nobody reads move in straight lines.
    Weight,
    /// U = −log w − log φ(q). Every coordinate is pulled towards the origin,
    /// and a coordinate appended mid-trajectory is placed where its own
    /// dynamics in that quadratic well would have taken it.
    #[default]
    Joint,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            epsilon: 0.1,
            steps: 5,
            n_samples: 1000,
            burn_in: 100,
            thinning: 1,
            seed: 0,
            trim: true,
            extend_cap: DEFAULT_EXTEND_CAP,
            laplace_density: true,
            potential: Potential::Joint,
            init_draws: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Config(format!("step size must be positive, got {}", self.epsilon)));
        }
        if self.thinning == 0 {
            return Err(Error::Config("thinning must be at least 1".into()));
        }
        if self.burn_in >= self.n_samples {
            return Err(Error::Config(format!(
                "burn-in ({}) must be smaller than the number of samples ({})",
                self.burn_in, self.n_samples
            )));
        }
        if self.init_draws == 0 {
            return Err(Error::Config("at least one initial prior draw is needed".into()));
        }
        if self.extend_cap == 0 {
            return Err(Error::Config("extend cap must be positive".into()));
        }
        Ok(())
    }
}

/// Output of [`extend`]: current and initial states of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendResult {
    pub current: State,
    pub initial: State,
}

/// Distribution of the momentum coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum MomentumLaw {
    /// Every coordinate N(0, 1).
    Gaussian,
    /// N(0, 1) on continuous coordinates, Laplace(0, 1) on discontinuous ones.
    Mixed,
}

impl MomentumLaw {
    pub(crate) fn draw(self, kind: CoordKind, noise: &mut impl Noise) -> f64 {
        match (self, kind) {
            (MomentumLaw::Mixed, CoordKind::Discontinuous) => noise.laplace(),
            _ => noise.normal(),
        }
    }

    pub(crate) fn log_density(self, p: &[f64], kinds: &[CoordKind]) -> f64 {
        match self {
            MomentumLaw::Gaussian => p.iter().map(|&x| std_normal_log_pdf(x)).sum(),
            MomentumLaw::Mixed => p
                .iter()
                .zip(kinds)
                .map(|(&x, k)| match k {
                    CoordKind::Continuous => std_normal_log_pdf(x),
                    CoordKind::Discontinuous => std_laplace_log_pdf(x),
                })
                .sum(),
        }
    }
}

/// Potential energy and gradient at the current position of a [`Flow`].
#[derive(Debug, Clone)]
pub(crate) struct Energy {
    pub u: f64,
    pub grad: Vec<f64>,
    pub outcome: RunOutcome,
}

/// Mutable integrator state: the moving point, the dimension-matched initial
/// point, and the kind of every coordinate.
///
/// The kind of an index is fixed when the coordinate is created (drawn at the
/// start of the step or appended by an extension) so the momentum density of
/// each coordinate is the one it was drawn from.
#[derive(Debug, Clone)]
pub(crate) struct Flow {
    pub cur: State,
    pub init: State,
    pub kinds: Vec<CoordKind>,
    /// Trimming never shortens below this length (the start length).
    pub floor: usize,
    /// Set while NP-DHMC sweeps its discontinuous coordinates.
    pub sweep: Option<Sweep>,
}

/// Where a trajectory is when a coordinate gets appended.
///
/// Under [`Potential::Weight`] only the elapsed times matter: a continuous
/// coordinate moves at speed y₀ and lands at `x₀ + c·y₀`, a Laplace-momentum
/// coordinate moves at speed sign(y₀) and lands at `x₀ + d·sign(y₀)`. Under
/// [`Potential::Joint`] the appended pair is pushed through the integrator
/// schedule instead: `steps` whole leapfrog iterations, then the opening half
/// kick and a drift of `c − steps·ε` for a continuous coordinate, or `sweeps`
/// coordinate updates for a discontinuous one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Clock {
    pub c: f64,
    pub d: f64,
    pub steps: usize,
    pub sweeps: usize,
}

impl Clock {
    /// Free flight for time `t` (no schedule).
    pub(crate) fn at(t: f64) -> Self {
        Clock { c: t, d: t, steps: 0, sweeps: 0 }
    }
}

/// A continuous coordinate nobody reads, integrated under U = x²/2 along the
/// schedule of `clock`.
fn harmonic_history(x0: f64, y0: f64, clock: Clock, eps: f64) -> (f64, f64) {
    let h = 0.5 * eps;
    let (mut x, mut y) = (x0, y0);
    for _ in 0..clock.steps {
        y -= h * x;
        x += eps * y;
        y -= h * x;
    }
    let drift = clock.c - clock.steps as f64 * eps;
    if drift > 0.0 {
        y -= h * x;
        x += drift * y;
    }
    (x, y)
}

/// A discontinuous coordinate nobody reads, put through `sweeps` coordinate
/// updates under U = x²/2.
fn laplace_history(x0: f64, y0: f64, sweeps: usize, eps: f64) -> (f64, f64) {
    let (mut x, mut y) = (x0, y0);
    for _ in 0..sweeps {
        let s = sign(y);
        let moved = x + eps * s;
        let delta = 0.5 * (moved * moved - x * x);
        if y.abs() > delta {
            x = moved;
            y -= s * delta;
        } else {
            y = -y;
        }
    }
    (x, y)
}

/// Position of an NP-DHMC sweep over the permuted discontinuous indices.
///
/// A discontinuous coordinate appended mid-sweep takes a uniformly random
/// slot in the permutation. A slot at or before the cursor means the sweep
/// already passed it while it had no influence on U, which moves it by one
/// step `ε·sign(y₀)`. Later slots are queued in `pending` for the sweep
/// loop to insert.
#[derive(Debug, Clone)]
pub(crate) struct Sweep {
    pub len: usize,
    pub cursor: usize,
    pub step: f64,
    pub pending: Vec<(usize, usize)>,
}

impl Flow {
    pub(crate) fn new(start: State, kinds: Vec<CoordKind>) -> Self {
        debug_assert_eq!(start.len(), kinds.len());
        Flow {
            floor: start.len(),
            init: start.clone(),
            cur: start,
            kinds,
            sweep: None,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.cur.q.len()
    }

    fn truncate(&mut self, n: usize) {
        self.cur.truncate(n);
        self.init.truncate(n);
        self.kinds.truncate(n);
    }

    /// Drops coordinates past the supported prefix (but never below the start
    /// length, so the initial point keeps its supported prefix).
    pub(crate) fn trim(&mut self, consumed: usize, cfg: &SamplerConfig) {
        if cfg.trim {
            let keep = consumed.max(self.floor);
            if keep < self.len() {
                self.truncate(keep);
            }
        }
    }

    /// Grows the current point until it is supported, appending `(x₀, y₀)` to
    /// the initial point and the pair advanced to `clock` to the current
    /// point for every coordinate the program asks for.
    pub(crate) fn extend<M: Model + ?Sized, N: Noise>(
        &mut self,
        m: &M,
        clock: Clock,
        law: MomentumLaw,
        noise: &mut N,
        cfg: &SamplerConfig,
    ) -> Result<RunOutcome> {
        let joint = cfg.potential == Potential::Joint;
        let eps = cfg.epsilon;
        let Flow { cur, init, kinds, sweep, .. } = self;
        let State { q, p } = cur;
        let mut hook = |i: usize, kind: CoordKind| {
            let x0 = noise.normal();
            let y0 = law.draw(kind, noise);
            init.q.push(x0);
            init.p.push(y0);
            kinds.push(kind);
            let (x, y) = if law == MomentumLaw::Mixed && kind == CoordKind::Discontinuous {
                let (mut d, mut sweeps) = (clock.d, clock.sweeps);
                if let Some(s) = sweep.as_mut() {
                    let slot = noise.index(s.len + 1);
                    if slot <= s.cursor {
                        d += s.step;
                        sweeps += 1;
                        s.cursor += 1;
                    }
                    s.len += 1;
                    s.pending.push((i, slot));
                }
                if joint {
                    laplace_history(x0, y0, sweeps, eps)
                } else {
                    (x0 + d * sign(y0), y0)
                }
            } else if joint {
                harmonic_history(x0, y0, clock, eps)
            } else {
                (x0 + clock.c * y0, y0)
            };
            p.push(y);
            Ok(x)
        };
        let (out, grown) = run_extending(m, q, &mut hook, cfg.extend_cap)?;
        *q = grown;
        match out.status {
            RunStatus::Complete => {}
            RunStatus::Failed => return Err(Error::Unextendable),
            RunStatus::TooShort => unreachable!("extending runs never run out of coordinates"),
        }
        if !out.log_weight.is_finite() {
            return Err(Error::NumericalFailure(format!("log-weight {} after extension", out.log_weight)));
        }
        self.trim(out.consumed, cfg);
        Ok(out)
    }

    /// Makes the current point supported (extending at time `t` if needed)
    /// and returns the potential and its gradient there.
    pub(crate) fn settle<M: Model + ?Sized, N: Noise>(
        &mut self,
        m: &M,
        t: Clock,
        law: MomentumLaw,
        noise: &mut N,
        cfg: &SamplerConfig,
    ) -> Result<Energy> {
        check_finite(&self.cur.q).map_err(|e| Error::NumericalFailure(e.to_string()))?;
        let (mut out, mut grad) = run_with_gradient(m, &self.cur.q);
        match out.status {
            RunStatus::Complete => self.trim(out.consumed, cfg),
            RunStatus::Failed => return Err(Error::Unextendable),
            RunStatus::TooShort => {
                self.extend(m, t, law, noise, cfg)?;
                (out, grad) = run_with_gradient(m, &self.cur.q);
                debug_assert_eq!(out.status, RunStatus::Complete);
            }
        }
        grad.truncate(self.len());
        add_base_gradient(&mut grad, &self.cur.q, cfg);
        energy(out, grad)
    }

    /// Potential at the current point (extending at time `t` if needed),
    /// without a gradient.
    pub(crate) fn settle_potential<M: Model + ?Sized, N: Noise>(
        &mut self,
        m: &M,
        t: Clock,
        law: MomentumLaw,
        noise: &mut N,
        cfg: &SamplerConfig,
    ) -> Result<f64> {
        check_finite(&self.cur.q).map_err(|e| Error::NumericalFailure(e.to_string()))?;
        let out = self.extend(m, t, law, noise, cfg)?;
        Ok(-out.log_weight)
    }

    /// p ← p − h·∇U on the selected coordinates.
    pub(crate) fn kick(&mut self, grad: &[f64], h: f64, only: Option<CoordKind>) {
        for (j, (p, g)) in self.cur.p.iter_mut().zip(grad).enumerate() {
            if only.is_none_or(|k| self.kinds[j] == k) {
                *p -= h * g;
            }
        }
    }

    /// q ← q + h·p on the selected coordinates.
    pub(crate) fn drift(&mut self, h: f64, only: Option<CoordKind>) {
        for (j, (q, p)) in self.cur.q.iter_mut().zip(&self.cur.p).enumerate() {
            if only.is_none_or(|k| self.kinds[j] == k) {
                *q += h * p;
            }
        }
    }

    pub(crate) fn flip(&mut self) {
        for p in &mut self.cur.p {
            *p = -*p;
        }
    }
}

pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Adds ∂(−log φ)/∂qᵢ = qᵢ under [`Potential::Joint`].
pub(crate) fn add_base_gradient(grad: &mut [f64], q: &[f64], cfg: &SamplerConfig) {
    if cfg.potential == Potential::Joint {
        for (g, x) in grad.iter_mut().zip(q) {
            *g += x;
        }
    }
}

fn energy(outcome: RunOutcome, grad: Vec<f64>) -> Result<Energy> {
    let u = -outcome.log_weight;
    if !u.is_finite() {
        return Err(Error::NumericalFailure(format!("potential energy {u}")));
    }
    if let Some((i, g)) = grad.iter().enumerate().find(|(_, g)| !g.is_finite()) {
        return Err(Error::NumericalFailure(format!("partial {i} of the potential is {g}")));
    }
    Ok(Energy { u, grad, outcome })
}

/// Kinds for a start trace: the run's kinds on the consumed prefix, and
/// Continuous for any coordinates past it.
pub(crate) fn start_kinds(out: &RunOutcome, len: usize) -> Vec<CoordKind> {
    let mut kinds = out.kinds.clone();
    kinds.resize(len, CoordKind::Continuous);
    kinds.truncate(len);
    kinds
}

/// Appends coordinates until `current.q` is supported.
///
/// Each appended coordinate comes from a pair `x₀, y₀ ~ N(0, 1)`: the initial
/// state receives `(x₀, y₀)` and the current state `(x₀ + t·y₀, y₀)`, the
/// position a particle started at `x₀` with momentum `y₀` would have reached
/// at time `t` on the flat part of the potential. Draw order per coordinate
/// is `x₀` then `y₀`.
pub fn extend<M: Model + ?Sized, N: Noise>(
    current: &State,
    initial: &State,
    t: f64,
    m: &M,
    noise: &mut N,
    cfg: &SamplerConfig,
) -> Result<ExtendResult> {
    extend_with(current, initial, t, m, noise, cfg, MomentumLaw::Gaussian)
}

pub(crate) fn extend_with<M: Model + ?Sized, N: Noise>(
    current: &State,
    initial: &State,
    t: f64,
    m: &M,
    noise: &mut N,
    cfg: &SamplerConfig,
    law: MomentumLaw,
) -> Result<ExtendResult> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("extension time must be nonnegative, got {t}")));
    }
    if current.len() != initial.len() {
        return Err(Error::Domain("current and initial states differ in length".into()));
    }
    let kinds = start_kinds(&run_replay(m, &current.q), current.len());
    let mut flow = Flow {
        cur: current.clone(),
        init: initial.clone(),
        kinds,
        floor: current.len(),
        sweep: None,
    };
    let cfg = SamplerConfig {
        potential: Potential::Weight,
        ..cfg.clone()
    };
    flow.extend(m, Clock::at(t), law, noise, &cfg)?;
    Ok(ExtendResult {
        current: flow.cur,
        initial: flow.init,
    })
}

/// Outcome of a nonparametric integration with cached energies.
pub(crate) struct Integrated {
    pub flow: Flow,
    pub u_initial: f64,
    pub end: Energy,
}

/// The nonparametric leapfrog integrator on a prepared flow.
pub(crate) fn integrate_flow<M: Model + ?Sized, N: Noise>(
    mut flow: Flow,
    m: &M,
    cfg: &SamplerConfig,
    noise: &mut N,
    law: MomentumLaw,
) -> Result<Integrated> {
    let eps = cfg.epsilon;
    let mut e = start_energy(&mut flow, m, cfg)?;
    let u_initial = e.u;
    for i in 0..cfg.steps {
        flow.kick(&e.grad, 0.5 * eps, None);
        flow.drift(eps, None);
        let clock = Clock {
            c: (i + 1) as f64 * eps,
            d: (i + 1) as f64 * eps,
            steps: i,
            sweeps: i + 1,
        };
        e = flow.settle(m, clock, law, noise, cfg)?;
        flow.kick(&e.grad, 0.5 * eps, None);
    }
    flow.flip();
    Ok(Integrated { flow, u_initial, end: e })
}

/// Energy at the start point, which must already be supported.
pub(crate) fn start_energy<M: Model + ?Sized>(flow: &mut Flow, m: &M, cfg: &SamplerConfig) -> Result<Energy> {
    let (out, mut grad) = run_with_gradient(m, &flow.cur.q);
    if out.status != RunStatus::Complete {
        return Err(Error::OutOfDomain);
    }
    flow.trim(out.consumed, cfg);
    grad.truncate(flow.len());
    add_base_gradient(&mut grad, &flow.cur.q, cfg);
    energy(out, grad)
}

/// Runs L steps of the nonparametric leapfrog integrator from `start`.
///
/// Returns the proposal (momentum negated) and the initial state extended to
/// the proposal's length.
pub fn np_integrate<M: Model + ?Sized, N: Noise>(start: &State, m: &M, cfg: &SamplerConfig, noise: &mut N) -> Result<(State, State)> {
    let out = run_replay(m, &start.q);
    let flow = Flow::new(start.clone(), start_kinds(&out, start.len()));
    let done = integrate_flow(flow, m, cfg, noise, MomentumLaw::Gaussian)?;
    Ok((done.flow.cur, done.flow.init))
}

/// log of the Hastings ratio w_{≤N}(q)·φ_{2N}(q, p) / w_{≤N}(q₀)·φ_{2N}(q₀, p₀).
///
/// −∞ when the proposal (or both points) lie outside the support.
pub fn acceptance_log_ratio<M: Model + ?Sized>(proposal: &State, initial: &State, m: &M) -> Result<f64> {
    if proposal.len() != initial.len() {
        return Err(Error::Domain("proposal and initial states differ in length".into()));
    }
    let lw_prop = run_replay(m, &proposal.q).log_truncation();
    let lw_init = run_replay(m, &initial.q).log_truncation();
    if lw_prop == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if lw_init == f64::NEG_INFINITY {
        return Ok(f64::INFINITY);
    }
    Ok(joint_log_ratio(-lw_prop, proposal, -lw_init, initial, MomentumLaw::Gaussian, &[]))
}

/// Log ratio of the extended joint densities exp(−U)·φ_N(q)·m(p).
pub(crate) fn joint_log_ratio(u_prop: f64, proposal: &State, u_init: f64, initial: &State, law: MomentumLaw, kinds: &[CoordKind]) -> f64 {
    let joint = |u: f64, s: &State| {
        if s.is_empty() {
            -u
        } else {
            -u + log_base_density(&s.q).unwrap_or(f64::NEG_INFINITY) + law.log_density(&s.p, kinds)
        }
    };
    joint(u_prop, proposal) - joint(u_init, initial)
}

/// Why a step did not move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    /// The Hastings test rejected the proposal.
    Hastings,
    /// The trajectory reached a point that no extension can make supported.
    Unextendable,
    /// A potential or gradient was not finite.
    NumericalFailure,
    /// An extension hit the coordinate cap.
    ExtendBudget,
    /// Any other integrator error.
    Other,
}

impl Rejection {
    pub(crate) fn from_error(e: &Error) -> Self {
        match e {
            Error::Unextendable => Rejection::Unextendable,
            Error::NumericalFailure(_) | Error::NonFinite { .. } => Rejection::NumericalFailure,
            Error::ExtendBudgetExceeded { .. } => Rejection::ExtendBudget,
            _ => Rejection::Other,
        }
    }
}

/// Result of one MCMC transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    /// The new sample (a supported trace).
    pub trace: Trace,
    /// Program return value at the sample.
    pub value: Vec<f64>,
    /// Log-weight of the sample.
    pub log_weight: f64,
    pub accepted: bool,
    pub rejection: Option<Rejection>,
}

impl Step {
    pub(crate) fn stay(q0: &Trace, out0: &RunOutcome, reason: Rejection) -> Self {
        Step {
            trace: q0.clone(),
            value: out0.value.clone(),
            log_weight: out0.log_weight,
            accepted: false,
            rejection: Some(reason),
        }
    }
}

/// Checks the precondition of a step and returns the run at `q0`.
pub(crate) fn supported_start<M: Model + ?Sized>(q0: &Trace, m: &M) -> Result<RunOutcome> {
    let out = run_replay(m, q0);
    if out.log_density(q0.len()) == f64::NEG_INFINITY {
        return Err(Error::OutOfDomain);
    }
    Ok(out)
}

/// Shared tail of a Hamiltonian step: Hastings test and marginalisation to
/// the supported prefix.
pub(crate) fn finish_step<N: Noise>(
    q0: &Trace,
    out0: &RunOutcome,
    result: Result<Integrated>,
    law: MomentumLaw,
    score_law: MomentumLaw,
    noise: &mut N,
) -> Step {
    let done = match result {
        Ok(d) => d,
        Err(e) => return Step::stay(q0, out0, Rejection::from_error(&e)),
    };
    debug_assert!(law == score_law || law == MomentumLaw::Mixed);
    let flow = &done.flow;
    let log_ratio = joint_log_ratio(done.end.u, &flow.cur, done.u_initial, &flow.init, score_law, &flow.kinds);
    let u = noise.uniform();
    if u.ln() < log_ratio.min(0.0) {
        let out = &done.end.outcome;
        Step {
            trace: Trace::from_vec_unchecked(flow.cur.q[..out.consumed].to_vec()),
            value: out.value.clone(),
            log_weight: out.log_weight,
            accepted: true,
            rejection: None,
        }
    } else {
        Step::stay(q0, out0, Rejection::Hastings)
    }
}

/// One NP-HMC transition from the supported trace `q0`.
///
/// A step whose integration fails (unextendable point, non-finite energy,
/// extension cap) leaves the chain at `q0` and reports the reason.
pub fn nphmc_step<M: Model + ?Sized, N: Noise>(q0: &Trace, m: &M, cfg: &SamplerConfig, noise: &mut N) -> Result<Step> {
    let out0 = supported_start(q0, m)?;
    let p0: Vec<f64> = (0..q0.len()).map(|_| noise.normal()).collect();
    let flow = Flow::new(
        State {
            q: q0.to_vec(),
            p: p0,
        },
        out0.kinds.clone(),
    );
    let result = integrate_flow(flow, m, cfg, noise, MomentumLaw::Gaussian);
    Ok(finish_step(q0, &out0, result, MomentumLaw::Gaussian, MomentumLaw::Gaussian, noise))
}

/// One emitted chain element.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSample {
    pub trace: Trace,
    pub value: Vec<f64>,
    pub log_weight: f64,
    /// Whether the last transition producing this sample moved.
    pub accepted: bool,
}

/// A finished chain.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Chain {
    /// Post-burn-in samples.
    pub samples: Vec<ChainSample>,
    /// Number of transitions performed (burn-in and thinning included).
    pub transitions: usize,
    pub accepted: usize,
    /// Count of non-moving transitions per reason.
    pub rejections: BTreeMap<Rejection, usize>,
}

impl Chain {
    pub fn acceptance_rate(&self) -> f64 {
        if self.transitions == 0 {
            0.0
        } else {
            self.accepted as f64 / self.transitions as f64
        }
    }
}

/// Draws a supported trace from the prior by running the program with fresh
/// standard-normal coordinates, retrying if the run fails.
pub fn initial_trace<M: Model + ?Sized, N: Noise>(m: &M, noise: &mut N, cap: usize) -> Result<(Trace, RunOutcome)> {
    const ATTEMPTS: usize = 10_000;
    for _ in 0..ATTEMPTS {
        let mut hook = |_: usize, _: CoordKind| Ok(noise.normal());
        let (out, q) = run_extending(m, &[], &mut hook, cap)?;
        if out.status == RunStatus::Complete && out.log_weight.is_finite() {
            return Ok((Trace::from_vec_unchecked(q), out));
        }
    }
    Err(Error::NumericalFailure(format!("no supported trace found in {ATTEMPTS} prior runs")))
}

/// Runs a chain with an arbitrary transition kernel.
///
/// Starts from a prior draw, performs `thinning` transitions per sample for
/// `n_samples` samples and emits the ones after `burn_in`.
pub fn drive_chain<M, N, K>(m: &M, cfg: &SamplerConfig, noise: &mut N, mut kernel: K) -> Result<Chain>
where
    M: Model + ?Sized,
    N: Noise,
    K: FnMut(&Trace, &mut N) -> Result<Step>,
{
    cfg.validate()?;
    let (mut q, mut out) = initial_trace(m, noise, cfg.extend_cap)?;
    for _ in 1..cfg.init_draws {
        let (q2, out2) = initial_trace(m, noise, cfg.extend_cap)?;
        if out2.log_weight > out.log_weight {
            (q, out) = (q2, out2);
        }
    }
    let mut value = out.value;
    let mut log_weight = out.log_weight;
    let mut chain = Chain::default();
    for i in 0..cfg.n_samples {
        let mut accepted = false;
        for _ in 0..cfg.thinning {
            let step = kernel(&q, noise)?;
            chain.transitions += 1;
            if step.accepted {
                chain.accepted += 1;
            }
            if let Some(r) = step.rejection {
                *chain.rejections.entry(r).or_insert(0) += 1;
            }
            accepted = step.accepted;
            q = step.trace;
            value = step.value;
            log_weight = step.log_weight;
        }
        if i >= cfg.burn_in {
            chain.samples.push(ChainSample {
                trace: q.clone(),
                value: value.clone(),
                log_weight,
                accepted,
            });
        }
    }
    Ok(chain)
}

/// An NP-HMC chain.
pub fn run_chain<M: Model + ?Sized, N: Noise>(m: &M, cfg: &SamplerConfig, noise: &mut N) -> Result<Chain> {
    drive_chain(m, cfg, noise, |q, noise| nphmc_step(q, m, cfg, noise))
}

// ---------------------------------------------------------------------------
// Fixed-dimension reference algorithm.

/// Standard leapfrog on the fixed-dimension potential U_{|q|}, ending with a
/// momentum flip. Fails with [`Error::OutOfDomain`] as soon as a position
/// needs more coordinates than it has, and with [`Error::Unextendable`] when
/// a position has weight zero on a prefix it already holds.
pub fn hmc_integrate<M: Model + ?Sized>(start: &State, m: &M, cfg: &SamplerConfig) -> Result<State> {
    let eps = cfg.epsilon;
    let grad_at = |q: &[f64]| -> Result<Vec<f64>> {
        let (out, mut grad) = run_with_gradient(m, q);
        match out.status {
            RunStatus::Complete => {
                grad.resize(q.len(), 0.0);
                add_base_gradient(&mut grad, q, cfg);
                Ok(grad)
            }
            RunStatus::TooShort => Err(Error::OutOfDomain),
            RunStatus::Failed => Err(Error::Unextendable),
        }
    };
    let mut q = start.q.clone();
    let mut p = start.p.clone();
    let mut g = grad_at(&q)?;
    for _ in 0..cfg.steps {
        for (p, g) in p.iter_mut().zip(&g) {
            *p -= 0.5 * eps * g;
        }
        for (q, p) in q.iter_mut().zip(&p) {
            *q += eps * p;
        }
        g = grad_at(&q)?;
        for (p, g) in p.iter_mut().zip(&g) {
            *p -= 0.5 * eps * g;
        }
    }
    for p in &mut p {
        *p = -*p;
    }
    Ok(State { q, p })
}

/// Whether L leapfrog steps on U_{|q|} from `s` stay inside its domain.
pub fn validstate<M: Model + ?Sized>(s: &State, m: &M, cfg: &SamplerConfig) -> bool {
    if cfg.steps == 0 {
        return true;
    }
    hmc_integrate(s, m, cfg).is_ok()
}

/// One step of the extended reference algorithm: draw momentum for the
/// supported prefix of `s.q`, append `(x₀, y₀)` pairs until the state is
/// valid, run fixed-dimension HMC and apply the Hastings test.
///
/// Consumes random draws in the same order as [`nphmc_step`], so with trimming
/// off the two produce the same samples.
pub fn enphmc_step<M: Model + ?Sized, N: Noise>(s: &State, m: &M, cfg: &SamplerConfig, noise: &mut N) -> Result<State> {
    let q0 = supported_prefix(&s.q, m).ok_or(Error::OutOfDomain)?;
    let p0: Vec<f64> = (0..q0.len()).map(|_| noise.normal()).collect();
    let mut start = State { q: q0.to_vec(), p: p0 };
    let mut appended = 0;
    let proposal = loop {
        match hmc_integrate(&start, m, cfg) {
            Ok(proposal) => break proposal,
            Err(Error::OutOfDomain) => {}
            Err(e) => return Err(e),
        }
        if appended >= cfg.extend_cap {
            return Err(Error::ExtendBudgetExceeded { cap: cfg.extend_cap });
        }
        let x0 = noise.normal();
        let y0 = noise.normal();
        start.q.push(x0);
        start.p.push(y0);
        appended += 1;
    };
    let log_ratio = acceptance_log_ratio(&proposal, &start, m)?;
    let u = noise.uniform();
    if u.ln() < log_ratio.min(0.0) {
        Ok(proposal)
    } else {
        Ok(start)
    }
}
