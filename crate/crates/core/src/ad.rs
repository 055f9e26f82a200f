//! Gradients of the potential energy U_n = −log w_{≤n} with respect to trace
//! coordinates, and a finite-difference oracle to check them.

use crate::error::{Error, Result};
use crate::model::{run_replay, run_replay_scalar, Model, RunOutcome, RunStatus};
use crate::scalar::differentiate;
use crate::trace::{potential, CoordKind};

/// Potential gradient at a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    /// log w_{≤n}(q) = −U_n(q).
    pub value: f64,
    /// ∂U_n/∂q_i for every index of q. Coordinates the run did not consume get 0.
    pub partials: Vec<f64>,
    /// Kinds of the consumed coordinates.
    pub kinds: Vec<CoordKind>,
}

impl Gradient {
    /// Partial derivative at `i` if `i` is a consumed continuous coordinate.
    pub fn continuous(&self, i: usize) -> Option<f64> {
        match self.kinds.get(i) {
            Some(CoordKind::Continuous) => Some(self.partials[i]),
            _ => None,
        }
    }

    pub fn potential(&self) -> f64 {
        -self.value
    }
}

/// Runs the model once on tape variables and returns the outcome together
/// with ∂U/∂q for every coordinate of `q`.
///
/// Unlike [`grad_potential`] this never fails: an incomplete run simply has
/// `log_weight = −∞` and zero partials.
pub(crate) fn run_with_gradient<M: Model + ?Sized>(m: &M, q: &[f64]) -> (RunOutcome, Vec<f64>) {
    let (_, grad, out) = differentiate(q, |vars| {
        let (out, lw) = run_replay_scalar(m, vars.to_vec());
        (lw, out)
    });
    if out.status != RunStatus::Complete {
        return (out, vec![0.0; q.len()]);
    }
    let partials = grad.into_iter().map(|g| -g).collect();
    (out, partials)
}

/// ∂U_{|q|}/∂q at `q` by reverse-mode differentiation of one execution.
///
/// Branch predicates are constants of the executed path, so partials with
/// respect to discontinuous coordinates are whatever the straight-line code
/// of that path gives (usually 0); samplers that only move continuous
/// coordinates ignore them.
pub fn grad_potential<M: Model + ?Sized>(m: &M, q: &[f64]) -> Result<Gradient> {
    let (out, partials) = run_with_gradient(m, q);
    if out.status != RunStatus::Complete {
        return Err(Error::OutOfDomain);
    }
    if let Some((i, g)) = partials.iter().enumerate().find(|(_, g)| !g.is_finite()) {
        return Err(Error::NumericalFailure(format!("partial {i} of the potential is {g}")));
    }
    Ok(Gradient {
        value: out.log_weight,
        partials,
        kinds: out.kinds,
    })
}

/// Central finite-difference gradient of U_{|q|}.
#[derive(Debug, Clone, PartialEq)]
pub struct FdGradient {
    /// One entry per coordinate of q; `None` where the index is not a
    /// consumed continuous coordinate or where a perturbed point leaves the
    /// support or changes the executed path.
    pub partials: Vec<Option<f64>>,
}

/// (U(q + h·eᵢ) − U(q − h·eᵢ)) / 2h for each consumed continuous coordinate.
pub fn grad_fd<M: Model + ?Sized>(m: &M, q: &[f64], h: f64) -> Result<FdGradient> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Domain(format!("finite-difference step must be positive, got {h}")));
    }
    let base = run_replay(m, q);
    if base.status != RunStatus::Complete {
        return Err(Error::OutOfDomain);
    }
    let mut partials = vec![None; q.len()];
    let mut work = q.to_vec();
    for i in 0..base.consumed {
        if base.kinds[i] != CoordKind::Continuous {
            continue;
        }
        work[i] = q[i] + h;
        let plus = run_replay(m, &work);
        work[i] = q[i] - h;
        let minus = run_replay(m, &work);
        work[i] = q[i];
        let same_path = |o: &RunOutcome| o.status == RunStatus::Complete && o.consumed == base.consumed && o.kinds == base.kinds;
        if same_path(&plus) && same_path(&minus) {
            partials[i] = Some((minus.log_weight - plus.log_weight) / (2.0 * h));
        }
    }
    Ok(FdGradient { partials })
}

/// Relative discrepancy used when comparing gradients: |a − b| / max(1, |a|, |b|).
pub fn gradient_discrepancy(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// Checks `grad_potential` against `grad_fd` and returns the largest
/// discrepancy over verifiable continuous coordinates, along with how many
/// coordinates were compared.
pub fn check_gradient<M: Model + ?Sized>(m: &M, q: &[f64], h: f64) -> Result<(f64, usize)> {
    let ad = grad_potential(m, q)?;
    let fd = grad_fd(m, q, h)?;
    debug_assert!((ad.value + potential(m, q)?).abs() <= 1e-12 * (1.0 + ad.value.abs()));
    let mut worst = 0.0f64;
    let mut compared = 0;
    for (i, f) in fd.partials.iter().enumerate() {
        if let Some(f) = f {
            worst = worst.max(gradient_discrepancy(ad.partials[i], *f));
            compared += 1;
        }
    }
    Ok((worst, compared))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{Dist, HALF_LN_2PI};
    use crate::model::{Halt, RunContext};
    use crate::scalar::Scalar;

    /// w([q1]) = φ(0 | q1, 1)·[q1 ≤ 0].
    struct HalfLine;
    impl Model for HalfLine {
        fn name(&self) -> &str {
            "half-line"
        }
        fn run<S: Scalar>(&self, ctx: &mut RunContext<'_, S>) -> std::result::Result<Vec<f64>, Halt> {
            let x = ctx.sample_std_normal(CoordKind::Continuous)?;
            if x.value() > 0.0 {
                return Err(Halt::Failed);
            }
            ctx.observe(Dist::normal(x, S::constant(1.0))?, S::constant(0.0))?;
            Ok(vec![x.value()])
        }
    }

    struct Quadratic;
    impl Model for Quadratic {
        fn name(&self) -> &str {
            "quadratic"
        }
        fn run<S: Scalar>(&self, ctx: &mut RunContext<'_, S>) -> std::result::Result<Vec<f64>, Halt> {
            let x = ctx.sample_std_normal(CoordKind::Continuous)?;
            ctx.score(-(x.square() * 0.5))?;
            Ok(vec![])
        }
    }

    struct Flat;
    impl Model for Flat {
        fn name(&self) -> &str {
            "flat"
        }
        fn run<S: Scalar>(&self, ctx: &mut RunContext<'_, S>) -> std::result::Result<Vec<f64>, Halt> {
            ctx.sample_std_normal(CoordKind::Continuous)?;
            ctx.sample_std_normal(CoordKind::Continuous)?;
            Ok(vec![])
        }
    }

    #[test]
    fn half_line_potential_and_gradient() {
        let u = potential(&HalfLine, &[-3.1]).unwrap();
        assert!((u - (3.1 * 3.1 / 2.0 + HALF_LN_2PI)).abs() < 1e-12);
        assert!((u - 5.72394).abs() < 1e-5);
        let g = grad_potential(&HalfLine, &[-3.1]).unwrap();
        assert!((g.partials[0] + 3.1).abs() < 1e-12);
        assert!((g.value + u).abs() < 1e-12);
        assert_eq!(grad_potential(&HalfLine, &[0.5]).unwrap_err(), Error::OutOfDomain);
    }

    #[test]
    fn constant_density_has_zero_gradient() {
        let g = grad_potential(&Flat, &[0.3, -2.0]).unwrap();
        assert_eq!(g.partials, vec![0.0, 0.0]);
    }

    #[test]
    fn finite_difference_on_quadratic() {
        let fd = grad_fd(&Quadratic, &[2.0], 1e-5).unwrap();
        assert!((fd.partials[0].unwrap() - 2.0).abs() < 1e-6);
        assert!(matches!(grad_fd(&Quadratic, &[2.0], 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn finite_difference_flags_boundary_crossing() {
        let fd = grad_fd(&HalfLine, &[-1e-6], 1e-5).unwrap();
        assert_eq!(fd.partials, vec![None]);
    }
}
