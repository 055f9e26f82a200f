//! Model runtime: programs consume trace coordinates at sample sites and
//! accumulate log-weight at observe sites.
//!
//! A model is an ordinary Rust function over a [`RunContext`]. Each call to
//! [`RunContext::sample`] reads the next standard-normal coordinate `x` and
//! returns `inv_cdf(Φ(x))` for the requested distribution; the base density of
//! `x` is accounted for by the trace measure and is not added to the weight.
//! Early termination (trace exhausted, zero weight) travels back through `?`.

use crate::dist::Dist;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::trace::CoordKind;

/// Default cap on the number of coordinates a single extending run may append.
pub const DEFAULT_EXTEND_CAP: usize = 1_000_000;

/// An executable density over traces.
///
/// `run` must be a deterministic function of the coordinates it consumes.
/// The same program is executed with `S = f64` for plain evaluation and with
/// `S = Var` when a gradient is needed.
pub trait Model: Sync {
    fn name(&self) -> &str;

    fn run<S: Scalar>(&self, ctx: &mut RunContext<'_, S>) -> std::result::Result<Vec<f64>, Halt>;
}

impl<M: Model + ?Sized> Model for &M {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn run<S: Scalar>(&self, ctx: &mut RunContext<'_, S>) -> std::result::Result<Vec<f64>, Halt> {
        (**self).run(ctx)
    }
}

/// Why a run stopped before returning a value.
#[derive(Debug, Clone, PartialEq)]
pub enum Halt {
    /// The trace ran out of coordinates in replay mode.
    TooShort,
    /// The weight became zero (failed observation, primitive domain failure).
    Failed,
    /// The extender could not supply a coordinate.
    Aborted(Error),
}

impl From<Error> for Halt {
    /// Invalid primitive arguments inside a program give density zero.
    fn from(_: Error) -> Self {
        Halt::Failed
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// The program returned with positive weight.
    Complete,
    /// The program asked for more coordinates than the trace holds.
    TooShort,
    /// The program's weight is zero on the consumed prefix.
    Failed,
}

/// Supplies a coordinate when an extending run exhausts its trace. Receives
/// the index being filled and the kind declared by the sample site.
pub type Extender<'a> = dyn FnMut(usize, CoordKind) -> Result<f64> + 'a;

enum Mode<'a> {
    Replay,
    Extending { hook: &'a mut Extender<'a>, cap: usize, appended: usize },
}

/// Execution state of one model run.
pub struct RunContext<'a, S: Scalar> {
    trace: Vec<S>,
    cursor: usize,
    log_weight: S,
    kinds: Vec<CoordKind>,
    mode: Mode<'a>,
}

impl<'a, S: Scalar> RunContext<'a, S> {
    fn new(trace: Vec<S>, mode: Mode<'a>) -> Self {
        RunContext {
            trace,
            cursor: 0,
            log_weight: S::constant(0.0),
            kinds: Vec::new(),
            mode,
        }
    }

    /// Reads the next coordinate and transforms it into a draw from `dist`.
    pub fn sample(&mut self, dist: Dist<S>, kind: CoordKind) -> std::result::Result<S, Halt> {
        let x = self.next_coordinate(kind)?;
        let v = dist.from_std_normal(x);
        if v.value().is_nan() {
            return Err(Halt::Failed);
        }
        Ok(v)
    }

    /// Reads the next raw standard-normal coordinate without transforming it.
    pub fn sample_std_normal(&mut self, kind: CoordKind) -> std::result::Result<S, Halt> {
        self.next_coordinate(kind)
    }

    /// Adds `log pdf_dist(datum)` to the log-weight.
    pub fn observe(&mut self, dist: Dist<S>, datum: S) -> std::result::Result<(), Halt> {
        self.score(dist.log_pdf(datum))
    }

    /// Adds an arbitrary log-factor to the log-weight. A factor of −∞ (or NaN)
    /// ends the run with weight zero.
    pub fn score(&mut self, log_factor: S) -> std::result::Result<(), Halt> {
        let v = log_factor.value();
        if v.is_nan() || v == f64::NEG_INFINITY {
            return Err(Halt::Failed);
        }
        self.log_weight += log_factor;
        Ok(())
    }

    /// Log-weight accumulated so far.
    pub fn log_weight(&self) -> S {
        self.log_weight
    }

    fn next_coordinate(&mut self, kind: CoordKind) -> std::result::Result<S, Halt> {
        let i = self.cursor;
        if i == self.trace.len() {
            match &mut self.mode {
                Mode::Replay => return Err(Halt::TooShort),
                Mode::Extending { hook, cap, appended } => {
                    if *appended >= *cap {
                        return Err(Halt::Aborted(Error::ExtendBudgetExceeded { cap: *cap }));
                    }
                    let x = hook(i, kind).map_err(Halt::Aborted)?;
                    if !x.is_finite() {
                        return Err(Halt::Aborted(Error::NonFinite { index: i, value: x }));
                    }
                    *appended += 1;
                    self.trace.push(S::constant(x));
                }
            }
        }
        self.cursor += 1;
        self.kinds.push(kind);
        Ok(self.trace[i])
    }
}

/// Result of one model execution.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub status: RunStatus,
    /// Accumulated log-weight; −∞ unless the run completed.
    pub log_weight: f64,
    /// Number of coordinates read.
    pub consumed: usize,
    /// Kind of each consumed coordinate.
    pub kinds: Vec<CoordKind>,
    /// Program return value (empty unless the run completed).
    pub value: Vec<f64>,
}

impl RunOutcome {
    /// log w_{≤n}(q) for the trace the run was executed on: the log-weight of
    /// a completed run, −∞ otherwise.
    pub fn log_truncation(&self) -> f64 {
        match self.status {
            RunStatus::Complete => self.log_weight,
            _ => f64::NEG_INFINITY,
        }
    }

    /// log density of exactly the trace the run was executed on, which must
    /// be consumed completely.
    pub fn log_density(&self, trace_len: usize) -> f64 {
        if self.status == RunStatus::Complete && self.consumed == trace_len {
            self.log_weight
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn is_complete(&self) -> bool {
        self.status == RunStatus::Complete
    }
}

fn finish<S: Scalar>(ctx: RunContext<'_, S>, result: std::result::Result<Vec<f64>, Halt>) -> Result<(RunOutcome, Vec<S>, S)> {
    let status = match result {
        Ok(ref _v) if ctx.log_weight.value().is_nan() => RunStatus::Failed,
        Ok(_) => RunStatus::Complete,
        Err(Halt::TooShort) => RunStatus::TooShort,
        Err(Halt::Failed) => RunStatus::Failed,
        Err(Halt::Aborted(e)) => return Err(e),
    };
    let complete = status == RunStatus::Complete;
    let out = RunOutcome {
        status,
        log_weight: if complete { ctx.log_weight.value() } else { f64::NEG_INFINITY },
        consumed: ctx.cursor,
        kinds: ctx.kinds,
        value: if complete { result.unwrap_or_default() } else { Vec::new() },
    };
    Ok((out, ctx.trace, ctx.log_weight))
}

/// Executes `m` on the fixed trace `q` with plain floats.
pub fn run_replay<M: Model + ?Sized>(m: &M, q: &[f64]) -> RunOutcome {
    let mut ctx = RunContext::<f64>::new(q.to_vec(), Mode::Replay);
    let result = m.run(&mut ctx);
    finish(ctx, result).expect("replay runs cannot abort").0
}

/// Executes `m` on fixed scalar inputs (used by the gradient code).
pub(crate) fn run_replay_scalar<M: Model + ?Sized, S: Scalar>(m: &M, q: Vec<S>) -> (RunOutcome, S) {
    let mut ctx = RunContext::<S>::new(q, Mode::Replay);
    let result = m.run(&mut ctx);
    let (out, _, lw) = finish(ctx, result).expect("replay runs cannot abort");
    (out, lw)
}

/// Executes `m` starting from `q`, asking `extender` for every coordinate
/// beyond the end of `q`. Returns the outcome and the grown trace.
///
/// At most `cap` coordinates are appended; beyond that the run aborts with
/// [`Error::ExtendBudgetExceeded`]. Errors from the extender propagate.
pub fn run_extending<M: Model + ?Sized>(
    m: &M,
    q: &[f64],
    extender: &mut Extender<'_>,
    cap: usize,
) -> Result<(RunOutcome, Vec<f64>)> {
    // Shorten the extender's lifetime to that of this call.
    let mut hook = |i: usize, k: CoordKind| extender(i, k);
    let mut ctx = RunContext::<f64>::new(
        q.to_vec(),
        Mode::Extending {
            hook: &mut hook,
            cap,
            appended: 0,
        },
    );
    let result = m.run(&mut ctx);
    let (out, trace, _) = finish(ctx, result)?;
    Ok((out, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Geo;
    impl Model for Geo {
        fn name(&self) -> &str {
            "geo"
        }
        fn run<S: Scalar>(&self, ctx: &mut RunContext<'_, S>) -> std::result::Result<Vec<f64>, Halt> {
            let mut k = 1.0;
            loop {
                let u = ctx.sample(Dist::uniform(S::constant(0.0), S::constant(1.0))?, CoordKind::Discontinuous)?;
                if u.value() < 0.2 {
                    return Ok(vec![k]);
                }
                k += 1.0;
            }
        }
    }

    struct Obs;
    impl Model for Obs {
        fn name(&self) -> &str {
            "obs"
        }
        fn run<S: Scalar>(&self, ctx: &mut RunContext<'_, S>) -> std::result::Result<Vec<f64>, Halt> {
            let x = ctx.sample(Dist::normal(S::constant(0.0), S::constant(1.0))?, CoordKind::Continuous)?;
            ctx.observe(Dist::uniform(S::constant(0.0), S::constant(1.0))?, x)?;
            Ok(vec![x.value()])
        }
    }

    #[test]
    fn replay_statuses() {
        let out = run_replay(&Geo, &[-1.0]);
        assert_eq!(out.status, RunStatus::Complete);
        assert_eq!((out.consumed, out.log_weight, out.value.clone()), (1, 0.0, vec![1.0]));
        assert_eq!(out.log_density(1), 0.0);
        assert_eq!(out.log_density(2), f64::NEG_INFINITY);

        let out = run_replay(&Geo, &[1.0]);
        assert_eq!(out.status, RunStatus::TooShort);
        assert_eq!(out.log_weight, f64::NEG_INFINITY);

        let out = run_replay(&Obs, &[2.0]);
        assert_eq!(out.status, RunStatus::Failed);
        let out = run_replay(&Obs, &[-0.5]);
        assert_eq!(out.status, RunStatus::Failed);
        let out = run_replay(&Obs, &[0.5]);
        assert_eq!(out.status, RunStatus::Complete);
        assert_eq!(out.log_weight, 0.0);
    }

    #[test]
    fn extending_grows_until_termination_and_replays() {
        let draws = [1.0, 0.5, 2.0, -2.0, 3.0];
        let mut i = 0;
        let mut hook = |_: usize, _: CoordKind| {
            let x = draws[i];
            i += 1;
            Ok(x)
        };
        let (out, trace) = run_extending(&Geo, &[], &mut hook, 100).unwrap();
        assert_eq!(trace, vec![1.0, 0.5, 2.0, -2.0]);
        assert_eq!(out.value, vec![4.0]);
        assert_eq!(run_replay(&Geo, &trace), out);
    }

    #[test]
    fn extending_untouched_when_long_enough() {
        let mut hook = |_: usize, _: CoordKind| -> Result<f64> { panic!("hook must not run") };
        let (_, trace) = run_extending(&Geo, &[-3.0, 7.0], &mut hook, 10).unwrap();
        assert_eq!(trace, vec![-3.0, 7.0]);
    }

    #[test]
    fn extending_respects_cap() {
        let mut hook = |_: usize, _: CoordKind| Ok(5.0);
        let err = run_extending(&Geo, &[], &mut hook, 7).unwrap_err();
        assert_eq!(err, Error::ExtendBudgetExceeded { cap: 7 });
    }
}
