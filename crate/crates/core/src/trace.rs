//! Traces, phase-space states, the trace base measure, supported prefixes,
//! truncations and potential energies.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::dist::HALF_LN_2PI;
use crate::error::{Error, Result};
use crate::model::{run_replay, Model, RunStatus};

/// A finite sequence of latent coordinates. All coordinates are finite.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Trace(Vec<f64>);

impl Trace {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = coords.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Trace(coords))
    }

    pub fn empty() -> Self {
        Trace(Vec::new())
    }

    /// Wraps coordinates already known to be finite.
    pub(crate) fn from_vec_unchecked(coords: Vec<f64>) -> Self {
        debug_assert!(coords.iter().all(|v| v.is_finite()));
        Trace(coords)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// The first `k` coordinates.
    pub fn prefix(&self, k: usize) -> Trace {
        Trace(self.0[..k.min(self.0.len())].to_vec())
    }

    /// `self ++ other`.
    pub fn concat(&self, other: &Trace) -> Trace {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Trace(v)
    }
}

impl Deref for Trace {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Trace {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Trace::new(v)
    }
}

impl From<Trace> for Vec<f64> {
    fn from(t: Trace) -> Self {
        t.0
    }
}

/// Position and momentum of equal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl State {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::Domain(format!(
                "position has length {} but momentum has length {}",
                q.len(),
                p.len()
            )));
        }
        check_finite(&q)?;
        check_finite(&p)?;
        Ok(State { q, p })
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub(crate) fn truncate(&mut self, n: usize) {
        self.q.truncate(n);
        self.p.truncate(n);
    }
}

pub(crate) fn check_finite(xs: &[f64]) -> Result<()> {
    match xs.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        Some((index, &value)) => Err(Error::NonFinite { index, value }),
        None => Ok(()),
    }
}

/// Whether a coordinate behaves smoothly (Continuous) or can change control
/// flow (Discontinuous). Declared by the model at each sample site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoordKind {
    Continuous,
    Discontinuous,
}

/// log φ_n(q): the standard normal log density of q ∈ ℝⁿ.
pub fn log_base_density(q: &[f64]) -> Result<f64> {
    if q.is_empty() {
        return Err(Error::Domain("the empty trace carries no base density".into()));
    }
    check_finite(q)?;
    Ok(-(q.len() as f64) * HALF_LN_2PI - 0.5 * q.iter().map(|x| x * x).sum::<f64>())
}

/// The unique prefix of `q` on which the model has positive density, if any.
pub fn supported_prefix<M: Model + ?Sized>(q: &[f64], m: &M) -> Option<Trace> {
    let out = run_replay(m, q);
    match out.status {
        RunStatus::Complete => Some(Trace::from_vec_unchecked(q[..out.consumed].to_vec())),
        _ => None,
    }
}

/// log w_{≤n}(q), −∞ when no prefix of q is supported.
///
/// Because at most one prefix is supported, this is the log weight of that
/// prefix, which a single run over `q` computes directly.
pub fn log_truncation<M: Model + ?Sized>(m: &M, q: &[f64]) -> f64 {
    run_replay(m, q).log_truncation()
}

/// w_{≤n}(q).
pub fn truncation<M: Model + ?Sized>(m: &M, q: &[f64]) -> f64 {
    log_truncation(m, q).exp()
}

/// U_n(q) = −log w_{≤n}(q).
pub fn potential<M: Model + ?Sized>(m: &M, q: &[f64]) -> Result<f64> {
    if q.is_empty() {
        return Err(Error::Domain("potential of the empty trace is undefined".into()));
    }
    let lw = log_truncation(m, q);
    if lw == f64::NEG_INFINITY {
        return Err(Error::OutOfDomain);
    }
    Ok(-lw)
}
