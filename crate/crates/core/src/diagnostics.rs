//! Posterior-quality metrics.

use serde::{Deserialize, Serialize};

use crate::dist::log_sum_exp;
use crate::error::{Error, Result};

/// How histogram cells are identified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    /// Ascending bin edges; cell `i` is `[edges[i], edges[i+1])`, the last
    /// cell closed on the right.
    Bins(Vec<f64>),
    /// Named discrete outcomes.
    Labels(Vec<String>),
}

impl Support {
    pub fn cells(&self) -> usize {
        match self {
            Support::Bins(e) => e.len().saturating_sub(1),
            Support::Labels(l) => l.len(),
        }
    }
}

/// A normalised histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub support: Support,
    pub masses: Vec<f64>,
}

impl Histogram {
    /// Normalises nonnegative cell weights.
    pub fn from_weights(support: Support, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != support.cells() {
            return Err(Error::Domain(format!("{} weights for {} cells", weights.len(), support.cells())));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Domain("histogram weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Domain("histogram has no mass".into()));
        }
        Ok(Histogram {
            support,
            masses: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    /// Bins weighted real values. Values outside the edges are ignored.
    pub fn binned(edges: Vec<f64>, values: &[f64], weights: Option<&[f64]>) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("bin edges must be strictly ascending with at least two entries".into()));
        }
        let mut counts = vec![0.0; edges.len() - 1];
        for (k, &v) in values.iter().enumerate() {
            let w = weights.map_or(1.0, |w| w[k]);
            if let Some(cell) = bin_index(&edges, v) {
                counts[cell] += w;
            }
        }
        Histogram::from_weights(Support::Bins(edges), counts)
    }

    /// `n` equal-width bins on `[lo, hi]`.
    pub fn uniform_edges(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
    }

    /// Counts of positive integers `1..=max` plus a tail cell `>max`.
    pub fn counts_with_tail(values: &[f64], max: u64) -> Result<Self> {
        let mut counts = vec![0.0; max as usize + 1];
        for &v in values {
            let k = v.round();
            if k >= 1.0 && k <= max as f64 {
                counts[k as usize - 1] += 1.0;
            } else if k > max as f64 {
                counts[max as usize] += 1.0;
            }
        }
        Histogram::from_weights(tail_labels(max), counts)
    }

    /// The geometric(p) pmf on `1..=max` with the remaining mass in a tail cell.
    pub fn geometric_pmf(p: f64, max: u64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("geometric parameter {p} outside (0, 1)")));
        }
        let mut masses: Vec<f64> = (1..=max).map(|k| (1.0 - p).powi(k as i32 - 1) * p).collect();
        masses.push((1.0 - p).powi(max as i32));
        Histogram::from_weights(tail_labels(max), masses)
    }
}

fn tail_labels(max: u64) -> Support {
    let mut labels: Vec<String> = (1..=max).map(|k| k.to_string()).collect();
    labels.push(format!(">{max}"));
    Support::Labels(labels)
}

fn bin_index(edges: &[f64], v: f64) -> Option<usize> {
    let last = *edges.last()?;
    if !(v >= edges[0] && v <= last) {
        return None;
    }
    if v == last {
        return Some(edges.len() - 2);
    }
    Some(edges.partition_point(|&e| e <= v) - 1)
}

/// Total variation distance ½·Σ|aᵢ − bᵢ| between histograms on one support.
pub fn tvd(a: &Histogram, b: &Histogram) -> Result<f64> {
    if a.support != b.support {
        return Err(Error::MismatchedSupport("histograms are defined on different cells".into()));
    }
    Ok(0.5 * a.masses.iter().zip(&b.masses).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Autocorrelation effective sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ess {
    /// n / (1 + 2·Σρ̂ₜ) before clamping.
    pub raw: f64,
    /// `raw` clamped to (0, n].
    pub value: f64,
    pub clamped: bool,
}

/// ESS of a chain, n / (1 + 2·Σ_{t=1}^{T} ρ̂ₜ).
///
/// Autocorrelations use the biased (divide-by-n) autocovariance and are
/// computed lazily. T is the first odd lag with ρ̂_{T+1} + ρ̂_{T+2} < 0, so
/// ρ̂₁ is always included and later lags enter in pairs while the pair sum
/// stays nonnegative. A nonpositive denominator gives a raw ESS of +∞. A
/// constant series has ESS = n by convention.
pub fn ess_autocorr(series: &[f64]) -> Result<Ess> {
    let n = series.len();
    if n < 10 {
        return Err(Error::Domain(format!("ESS needs at least 10 values, got {n}")));
    }
    let nf = n as f64;
    let mean = series.iter().sum::<f64>() / nf;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let autocov = |lag: usize| -> f64 { centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum::<f64>() / nf };
    let c0 = autocov(0);
    if !(c0 > 0.0) || series.iter().all(|&x| x == series[0]) {
        return Ok(Ess {
            raw: nf,
            value: nf,
            clamped: false,
        });
    }
    let mut sum = autocov(1) / c0;
    let mut t = 1;
    while t + 2 < n {
        let pair = (autocov(t + 1) + autocov(t + 2)) / c0;
        if pair < 0.0 {
            break;
        }
        sum += pair;
        t += 2;
    }
    let denom = 1.0 + 2.0 * sum;
    let raw = if denom > 0.0 { nf / denom } else { f64::INFINITY };
    Ok(clamp_ess(raw, nf))
}

fn clamp_ess(raw: f64, n: f64) -> Ess {
    if raw > n || !raw.is_finite() {
        Ess {
            raw,
            value: n,
            clamped: true,
        }
    } else {
        Ess {
            raw,
            value: raw,
            clamped: false,
        }
    }
}

/// (Σw)² / Σw² for nonnegative weights.
pub fn ess_weighted(weights: &[f64]) -> Result<f64> {
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::Domain("weights must be nonnegative".into()));
    }
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if !(s > 0.0) {
        return Err(Error::Domain("all weights are zero".into()));
    }
    Ok(s * s / s2)
}

/// [`ess_weighted`] from log-weights, normalised by the largest weight first.
pub fn ess_log_weights(log_weights: &[f64]) -> Result<f64> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Domain("all weights are zero".into()));
    }
    let w: Vec<f64> = log_weights.iter().map(|lw| (lw - max).exp()).collect();
    ess_weighted(&w)
}

/// Log pointwise predictive density of held-out points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lppd {
    pub total: f64,
    pub per_point: Vec<f64>,
}

/// Σᵢ log[(1/M)·Σⱼ p(yᵢ | θⱼ)], evaluated with log-sum-exp.
pub fn lppd<P, T, F>(params: &[P], test_points: &[T], loglik: F) -> Result<Lppd>
where
    F: Fn(&P, &T) -> f64,
{
    if params.is_empty() || test_points.is_empty() {
        return Err(Error::Domain("LPPD needs at least one parameter sample and one test point".into()));
    }
    let log_m = (params.len() as f64).ln();
    let per_point: Vec<f64> = test_points
        .iter()
        .map(|y| {
            let terms: Vec<f64> = params.iter().map(|theta| loglik(theta, y)).collect();
            log_sum_exp(&terms) - log_m
        })
        .collect();
    Ok(Lppd {
        total: per_point.iter().sum(),
        per_point,
    })
}

/// Scott's rule bandwidth 1.06·σ̂·n^(−1/5).
pub fn scott_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Domain("bandwidth needs at least two samples".into()));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(Error::Domain("samples have zero variance".into()));
    }
    Ok(1.06 * sd * (n as f64).powf(-0.2))
}

/// Gaussian kernel density estimate on `grid`.
pub fn kde(samples: &[f64], grid: &[f64], bandwidth: Option<f64>) -> Result<Vec<f64>> {
    kde_weighted(samples, None, grid, bandwidth)
}

/// Weighted Gaussian kernel density estimate; weights need not be normalised.
/// Without an explicit bandwidth, Scott's rule is applied to the unweighted
/// samples.
pub fn kde_weighted(samples: &[f64], weights: Option<&[f64]>, grid: &[f64], bandwidth: Option<f64>) -> Result<Vec<f64>> {
    if samples.len() < 2 && bandwidth.is_none() {
        return Err(Error::Domain("KDE needs at least two samples".into()));
    }
    if samples.is_empty() {
        return Err(Error::Domain("KDE needs samples".into()));
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::Domain(format!("bandwidth must be positive, got {h}"))),
        None => scott_bandwidth(samples)?,
    };
    let total: f64 = weights.map_or(samples.len() as f64, |w| w.iter().sum());
    if !(total > 0.0) {
        return Err(Error::Domain("KDE weights sum to zero".into()));
    }
    let norm = 1.0 / (total * h * (2.0 * std::f64::consts::PI).sqrt());
    Ok(grid
        .iter()
        .map(|&x| {
            let s: f64 = samples
                .iter()
                .enumerate()
                .map(|(k, &v)| {
                    let z = (x - v) / h;
                    weights.map_or(1.0, |w| w[k]) * (-0.5 * z * z).exp()
                })
                .sum();
            s * norm
        })
        .collect())
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{seeded_rng, Noise};

    fn labels(n: usize) -> Support {
        Support::Labels((0..n).map(|i| i.to_string()).collect())
    }

    #[test]
    fn tvd_examples() {
        let a = Histogram::from_weights(labels(2), vec![0.5, 0.5]).unwrap();
        let b = Histogram::from_weights(labels(2), vec![0.8, 0.2]).unwrap();
        assert!((tvd(&a, &b).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(tvd(&a, &a).unwrap(), 0.0);
        let x = Histogram::from_weights(labels(2), vec![1.0, 0.0]).unwrap();
        let y = Histogram::from_weights(labels(2), vec![0.0, 1.0]).unwrap();
        assert_eq!(tvd(&x, &y).unwrap(), 1.0);
        let c = Histogram::from_weights(labels(3), vec![1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(tvd(&a, &c), Err(Error::MismatchedSupport(_))));
    }

    #[test]
    fn weighted_ess_examples() {
        assert_eq!(ess_weighted(&[2.0; 7]).unwrap(), 7.0);
        assert_eq!(ess_weighted(&[0.0, 3.0, 0.0]).unwrap(), 1.0);
        assert!((ess_weighted(&[1.0, 1.0, 2.0]).unwrap() - 16.0 / 6.0).abs() < 1e-15);
        assert!(ess_weighted(&[0.0, 0.0]).is_err());
        assert!((ess_log_weights(&[-1000.0, -1000.0]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ess_iid_and_ar1() {
        let mut rng = seeded_rng(3);
        let iid: Vec<f64> = (0..10_000).map(|_| rng.normal()).collect();
        let e = ess_autocorr(&iid).unwrap();
        assert!(e.value >= 8_000.0 && e.value <= 10_000.0, "{e:?}");

        let n = 100_000;
        let phi = 0.5;
        let mut x = 0.0;
        let ar: Vec<f64> = (0..n)
            .map(|_| {
                x = phi * x + (1.0 - phi * phi as f64).sqrt() * rng.normal();
                x
            })
            .collect();
        let e = ess_autocorr(&ar).unwrap();
        let expect = n as f64 * (1.0 - phi) / (1.0 + phi);
        assert!((e.value - expect).abs() < 0.15 * expect, "{e:?} vs {expect}");
    }

    #[test]
    fn ess_alternating_series_is_clamped() {
        let s: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let e = ess_autocorr(&s).unwrap();
        assert!(e.raw > 100.0);
        assert!(e.clamped);
        assert_eq!(e.value, 100.0);
    }

    #[test]
    fn ess_constant_series() {
        let e = ess_autocorr(&[4.2; 50]).unwrap();
        assert_eq!(e.value, 50.0);
        assert!(ess_autocorr(&[1.0; 5]).is_err());
    }

    #[test]
    fn lppd_examples() {
        let ll = |theta: &f64, y: &f64| -0.5 * (y - theta) * (y - theta);
        let ys = [0.1, -0.3, 2.0];
        let single = lppd(&[0.5], &ys, ll).unwrap();
        let direct: f64 = ys.iter().map(|y| ll(&0.5, y)).sum();
        assert!((single.total - direct).abs() < 1e-12);
        let a = lppd(&[0.5, 1.5], &ys, ll).unwrap();
        let b = lppd(&[0.5, 1.5, 0.5, 1.5], &ys, ll).unwrap();
        assert!((a.total - b.total).abs() < 1e-12);
        let c = lppd(&[1.5, 0.5], &[2.0, 0.1, -0.3], ll).unwrap();
        assert!((a.total - c.total).abs() < 1e-12);
    }

    #[test]
    fn kde_examples() {
        let grid: Vec<f64> = (0..=2000).map(|i| -10.0 + i as f64 * 0.01).collect();
        let d = kde(&[1.0, 1.0, 1.0], &grid, Some(0.5)).unwrap();
        let peak = d.iter().copied().fold(0.0, f64::max);
        assert!((peak - 1.0 / (0.5 * (2.0 * std::f64::consts::PI).sqrt())).abs() < 1e-9);
        let integral: f64 = d.windows(2).map(|w| 0.5 * (w[0] + w[1]) * 0.01).sum();
        assert!((integral - 1.0).abs() < 1e-3);
        assert!(kde(&[2.0, 2.0], &grid, None).is_err());

        let mut rng = seeded_rng(11);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.normal()).collect();
        let grid: Vec<f64> = (0..=60).map(|i| -3.0 + i as f64 * 0.1).collect();
        let d = kde(&xs, &grid, None).unwrap();
        let worst = grid
            .iter()
            .zip(&d)
            .map(|(x, v)| (v - crate::dist::std_normal_pdf(*x)).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 0.03, "{worst}");
    }

    #[test]
    fn geometric_histogram() {
        let h = Histogram::geometric_pmf(0.2, 50).unwrap();
        assert_eq!(h.masses.len(), 51);
        assert!((h.masses[0] - 0.2).abs() < 1e-15);
        assert!((h.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let c = Histogram::counts_with_tail(&[1.0, 1.0, 3.0, 60.0], 50).unwrap();
        assert_eq!(c.masses[0], 0.5);
        assert_eq!(c.masses[2], 0.25);
        assert_eq!(c.masses[50], 0.25);
        assert_eq!(c.support, h.support);
    }

    #[test]
    fn binning_includes_right_edge() {
        let h = Histogram::binned(Histogram::uniform_edges(0.0, 3.0, 3), &[0.0, 1.0, 2.5, 3.0, 4.0], None).unwrap();
        assert_eq!(h.masses, vec![0.25, 0.25, 0.5]);
    }
}
