//! One-dimensional distribution primitives.
//!
//! A [`Dist`] is generic over the scalar type of its parameters so the same
//! value can carry tape variables (for gradients) or plain floats. The cdf and
//! inverse cdf are only offered for `Dist<f64>`.

use std::f64::consts::{LN_2, PI, SQRT_2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// ½·log(2π).
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Standard normal density φ(x).
#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal cdf Φ(x), via `erfc` so that the lower tail keeps full
/// relative precision.
#[inline]
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal log density.
#[inline]
pub fn std_normal_log_pdf(x: f64) -> f64 {
    -0.5 * x * x - HALF_LN_2PI
}

/// Inverse of the standard normal cdf.
///
/// Acklam's rational approximation (relative error about 1.2e−9) followed by
/// one Newton step on Φ.
pub fn std_normal_inv_cdf(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("probability {u} outside (0, 1)")));
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let x = if u < P_LOW {
        let q = (-2.0 * u.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if u <= 1.0 - P_LOW {
        let q = u - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - u).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // Newton refinement. In the upper tail work with the survival function so
    // the residual is not swamped by rounding in 1 − u.
    let pdf = std_normal_pdf(x);
    if pdf == 0.0 {
        return Ok(x);
    }
    let residual = if u > 0.5 {
        (1.0 - u) - std_normal_cdf(-x)
    } else {
        std_normal_cdf(x) - u
    };
    Ok(x - residual / pdf)
}

/// log Γ(x) for x > 0.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// A one-dimensional distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dist<S = f64> {
    Normal { mean: S, std: S },
    Uniform { low: S, high: S },
    /// Beta(1, α).
    Beta1 { alpha: S },
    Poisson { rate: f64 },
    Laplace { loc: S, scale: S },
}

impl<S: Scalar> Dist<S> {
    pub fn normal(mean: S, std: S) -> Result<Self> {
        if !(std.value() > 0.0) || !mean.value().is_finite() || !std.value().is_finite() {
            return Err(Error::Domain(format!(
                "Normal needs finite mean and std > 0, got ({:?}, {:?})",
                mean.value(),
                std.value()
            )));
        }
        Ok(Dist::Normal { mean, std })
    }

    pub fn uniform(low: S, high: S) -> Result<Self> {
        if !(low.value() < high.value()) || !low.value().is_finite() || !high.value().is_finite() {
            return Err(Error::Domain(format!(
                "Uniform needs finite a < b, got ({}, {})",
                low.value(),
                high.value()
            )));
        }
        Ok(Dist::Uniform { low, high })
    }

    pub fn beta1(alpha: S) -> Result<Self> {
        if !(alpha.value() > 0.0) || !alpha.value().is_finite() {
            return Err(Error::Domain(format!("Beta(1, α) needs α > 0, got {}", alpha.value())));
        }
        Ok(Dist::Beta1 { alpha })
    }

    pub fn poisson(rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::Domain(format!("Poisson needs λ > 0, got {rate}")));
        }
        Ok(Dist::Poisson { rate })
    }

    pub fn laplace(loc: S, scale: S) -> Result<Self> {
        if !(scale.value() > 0.0) || !loc.value().is_finite() || !scale.value().is_finite() {
            return Err(Error::Domain(format!(
                "Laplace needs finite loc and scale > 0, got ({}, {})",
                loc.value(),
                scale.value()
            )));
        }
        Ok(Dist::Laplace { loc, scale })
    }

    /// Natural-log density (mass for Poisson); −∞ outside the support.
    pub fn log_pdf(&self, x: S) -> S {
        let neg_inf = S::constant(f64::NEG_INFINITY);
        match *self {
            Dist::Normal { mean, std } => {
                let z = (x - mean) / std;
                -(z.square() * 0.5) - std.ln() - HALF_LN_2PI
            }
            Dist::Uniform { low, high } => {
                let v = x.value();
                if v >= low.value() && v <= high.value() {
                    -(high - low).ln()
                } else {
                    neg_inf
                }
            }
            Dist::Beta1 { alpha } => {
                let v = x.value();
                if v > 0.0 && v < 1.0 {
                    alpha.ln() + (alpha - 1.0) * (-x + 1.0).ln()
                } else {
                    neg_inf
                }
            }
            Dist::Poisson { rate } => {
                let v = x.value();
                if v >= 0.0 && v.fract() == 0.0 && v.is_finite() {
                    S::constant(v * rate.ln() - rate - ln_gamma(v + 1.0))
                } else {
                    neg_inf
                }
            }
            Dist::Laplace { loc, scale } => -((x - loc).abs() / scale) - (scale * 2.0).ln(),
        }
    }

    /// Maps one standard-normal trace coordinate `x` to a draw from this
    /// distribution, i.e. `inv_cdf(Φ(x))`.
    ///
    /// Each case is written in a form that stays accurate in both tails and is
    /// differentiable in `x` (except Poisson, whose quantile is piecewise
    /// constant).
    pub fn from_std_normal(&self, x: S) -> S {
        match *self {
            Dist::Normal { mean, std } => mean + std * x,
            Dist::Uniform { low, high } => low + (high - low) * x.norm_cdf(),
            // 1 − (1 − Φ(x))^{1/α} with 1 − Φ(x) computed as Φ(−x).
            Dist::Beta1 { alpha } => {
                let sf = x.norm_sf();
                -((sf.ln() / alpha).exp()) + 1.0
            }
            Dist::Poisson { rate } => {
                let v = x.value();
                S::constant(poisson_quantile(rate, std_normal_cdf(v), std_normal_cdf(-v)) as f64)
            }
            Dist::Laplace { loc, scale } => {
                if x.value() <= 0.0 {
                    loc + scale * (x.norm_cdf() * 2.0).ln()
                } else {
                    loc - scale * (x.norm_sf() * 2.0).ln()
                }
            }
        }
    }
}

impl Dist<f64> {
    /// Cumulative distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Dist::Normal { mean, std } => std_normal_cdf((x - mean) / std),
            Dist::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            Dist::Beta1 { alpha } => {
                if x <= 0.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    -(alpha * (-x).ln_1p()).exp_m1()
                }
            }
            Dist::Poisson { rate } => {
                if x < 0.0 {
                    return 0.0;
                }
                let k = x.floor() as u64;
                let mut term = (-rate).exp();
                let mut acc = term;
                for j in 1..=k {
                    term *= rate / j as f64;
                    acc += term;
                }
                acc.min(1.0)
            }
            Dist::Laplace { loc, scale } => {
                let z = (x - loc) / scale;
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                }
            }
        }
    }

    /// Inverse cdf; for Poisson the quantile `min{k : cdf(k) ≥ u}`.
    pub fn inv_cdf(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("probability {u} outside (0, 1)")));
        }
        Ok(match *self {
            Dist::Normal { mean, std } => mean + std * std_normal_inv_cdf(u)?,
            Dist::Uniform { low, high } => low + u * (high - low),
            Dist::Beta1 { alpha } => -((-u).ln_1p() / alpha).exp_m1(),
            Dist::Poisson { rate } => poisson_quantile(rate, u, 1.0 - u) as f64,
            Dist::Laplace { loc, scale } => {
                if u < 0.5 {
                    loc + scale * (2.0 * u).ln()
                } else {
                    loc - scale * (2.0 * (1.0 - u)).ln()
                }
            }
        })
    }
}

/// Smallest `k` with `P(X ≤ k) ≥ lower`, where `upper = 1 − lower` is passed
/// separately so the upper tail can be resolved without cancellation.
fn poisson_quantile(rate: f64, lower: f64, upper: f64) -> u64 {
    if lower <= 0.5 {
        let mut term = (-rate).exp();
        let mut acc = term;
        let mut k = 0u64;
        while acc < lower {
            k += 1;
            term *= rate / k as f64;
            acc += term;
            if term == 0.0 && k as f64 > rate {
                break;
            }
        }
        return k;
    }
    // Upper half: find the smallest k with P(X > k) ≤ upper. Tail masses are
    // accumulated from a cutoff far beyond the bulk, downward.
    let cutoff = (rate + 40.0 * rate.sqrt() + 40.0).ceil() as u64;
    let log_pmf = |k: u64| k as f64 * rate.ln() - rate - ln_gamma(k as f64 + 1.0);
    let mut tail = 0.0; // P(X > k) for the current k
    let mut k = cutoff;
    loop {
        // tail currently holds P(X > k); moving to k − 1 adds pmf(k).
        if k == 0 {
            return 0;
        }
        let next_tail = tail + log_pmf(k).exp();
        if next_tail > upper {
            return k;
        }
        tail = next_tail;
        k -= 1;
    }
}

/// log(Σ exp(xᵢ)) computed stably; −∞ for an empty slice.
pub fn log_sum_exp<S: Scalar>(xs: &[S]) -> S {
    let max = xs.iter().map(|x| x.value()).fold(f64::NEG_INFINITY, f64::max);
    if xs.is_empty() || max == f64::NEG_INFINITY {
        return S::constant(f64::NEG_INFINITY);
    }
    if max == f64::INFINITY {
        return S::constant(f64::INFINITY);
    }
    let mut acc = S::constant(0.0);
    for &x in xs {
        acc += (x - max).exp();
    }
    acc.ln() + max
}

/// Standard Laplace(0, 1) log density.
#[inline]
pub fn std_laplace_log_pdf(x: f64) -> f64 {
    -x.abs() - LN_2
}
