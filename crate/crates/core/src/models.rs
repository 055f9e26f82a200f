//! Benchmark models: geometric recursion, one-sided random walk, Gaussian
//! mixture with a Poisson number of components, and a stick-breaking
//! Dirichlet process mixture. Also the small two-branch density used to
//! illustrate how extension works.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dist::{Dist, HALF_LN_2PI};
use crate::error::{Error, Result};
use crate::model::{Halt, Model, RunContext};
use crate::noise::seeded_rng;
use crate::scalar::Scalar;
use crate::trace::CoordKind::{self, Continuous, Discontinuous};

type Step<T> = std::result::Result<T, Halt>;

/// Number of trials until the first success of a p-coin.
#[derive(Debug, Clone)]
pub struct Geometric {
    p: f64,
}

/// `geometric(p)`: flip until a uniform draw falls below `p`; returns `[K]`.
pub fn geometric(p: f64) -> Result<Geometric> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("geometric needs 0 < p < 1, got {p}")));
    }
    Ok(Geometric { p })
}

impl Geometric {
    pub fn p(&self) -> f64 {
        self.p
    }

    /// P(K = k).
    pub fn pmf(&self, k: u64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        (1.0 - self.p).powi((k - 1) as i32) * self.p
    }
}

impl Model for Geometric {
    fn name(&self) -> &str {
        "geometric"
    }

    fn run<S: Scalar>(&self, ctx: &mut RunContext<'_, S>) -> Step<Vec<f64>> {
        let unit = Dist::uniform(S::constant(0.0), S::constant(1.0))?;
        let mut k = 1.0;
        loop {
            if ctx.sample(unit, Discontinuous)?.value() < self.p {
                return Ok(vec![k]);
            }
            k += 1.0;
        }
    }
}

/// The one-sided random walk: start uniformly in [0, 3], take Uniform(−1, 1)
/// steps while the position is positive and less than 10 units have been
/// walked, then observe the total distance under N(1.1, 0.1). Returns
/// `[start]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomWalk {
    /// Kind of the `start` site. The steps are always discontinuous.
    pub start_kind: CoordKind,
}

/// The walk with a discontinuous `start`: U jumps whenever moving `start`
/// changes how many steps the walk takes, so it gets Laplace momentum like
/// the steps.
pub fn random_walk() -> RandomWalk {
    RandomWalk { start_kind: Discontinuous }
}

/// The walk with `start` declared continuous. Leapfrog moves of `start`
/// then cross the step-count discontinuities blindly.
pub fn random_walk_continuous_start() -> RandomWalk {
    RandomWalk { start_kind: Continuous }
}

impl Model for RandomWalk {
    fn name(&self) -> &str {
        "walk"
    }

    fn run<S: Scalar>(&self, ctx: &mut RunContext<'_, S>) -> Step<Vec<f64>> {
        let start = ctx.sample(Dist::uniform(S::constant(0.0), S::constant(3.0))?, self.start_kind)?;
        let step_dist = Dist::uniform(S::constant(-1.0), S::constant(1.0))?;
        let mut position = start;
        let mut distance = S::constant(0.0);
        while position.value() > 0.0 && distance.value() < 10.0 {
            let step = ctx.sample(step_dist, Discontinuous)?;
            position += step;
            distance += step.abs();
        }
        ctx.observe(Dist::normal(S::constant(1.1), S::constant(0.1))?, distance)?;
        Ok(vec![start.value()])
    }
}

/// Mixture component standard deviation on every axis.
pub const MIXTURE_SIGMA: f64 = 10.0;
/// Component means live in [0, BOX]³.
pub const MIXTURE_BOX: f64 = 100.0;

/// Points in ℝ³ together with how they were generated.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset3D {
    pub points: Vec<[f64; 3]>,
    /// Seed the points were generated from.
    pub seed: u64,
    /// The generating component means (its length is K*).
    pub means: Vec<[f64; 3]>,
}

/// Settings for [`generate_mixture_data`].
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDataConfig {
    pub seed: u64,
    pub components: usize,
    pub train: usize,
    pub test: usize,
    /// Minimum Euclidean distance between generating means.
    pub min_separation: f64,
    /// Means are drawn uniformly from [margin, 100 − margin]³.
    pub margin: f64,
}

impl Default for MixtureDataConfig {
    fn default() -> Self {
        MixtureDataConfig {
            seed: 2021,
            components: 9,
            train: 100,
            test: 25,
            min_separation: 30.0,
            margin: 10.0,
        }
    }
}

/// Draws K* well-separated means and samples train and test points from the
/// equal-weight mixture with σ = 10 per axis.
///
/// Component labels are balanced (each component gets ⌊N/K*⌋ or ⌈N/K*⌉
/// points, in shuffled order) so that small training sets still show every
/// component.
pub fn generate_mixture_data(cfg: &MixtureDataConfig) -> Result<(Dataset3D, Dataset3D)> {
    if cfg.components == 0 || cfg.train == 0 {
        return Err(Error::Config("mixture data needs at least one component and one training point".into()));
    }
    let lo = cfg.margin;
    let hi = MIXTURE_BOX - cfg.margin;
    if !(lo < hi) {
        return Err(Error::Config(format!("margin {} leaves no room for means", cfg.margin)));
    }
    let mut rng = seeded_rng(cfg.seed);
    let mut means: Vec<[f64; 3]> = Vec::with_capacity(cfg.components);
    let mut attempts = 0usize;
    while means.len() < cfg.components {
        attempts += 1;
        if attempts > 1_000_000 {
            return Err(Error::Config(format!(
                "could not place {} means {} apart",
                cfg.components, cfg.min_separation
            )));
        }
        let c = [rng.gen_range(lo..hi), rng.gen_range(lo..hi), rng.gen_range(lo..hi)];
        if means.iter().all(|m| dist3(m, &c) >= cfg.min_separation) {
            means.push(c);
        }
    }
    let mut draw = |n: usize| -> Vec<[f64; 3]> {
        let mut labels: Vec<usize> = (0..n).map(|i| i % cfg.components).collect();
        labels.shuffle(&mut rng);
        labels
            .into_iter()
            .map(|k| {
                let m = means[k];
                let mut x = [0.0; 3];
                for a in 0..3 {
                    let z: f64 = rng.sample(StandardNormal);
                    x[a] = m[a] + MIXTURE_SIGMA * z;
                }
                x
            })
            .collect()
    };
    let train = draw(cfg.train);
    let test = draw(cfg.test);
    Ok((
        Dataset3D {
            points: train,
            seed: cfg.seed,
            means: means.clone(),
        },
        Dataset3D {
            points: test,
            seed: cfg.seed,
            means,
        },
    ))
}

fn dist3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

impl Dataset3D {
    /// One point per row, three comma-separated columns, with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,z\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{},{}", p[0], p[1], p[2]);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Parses the output of [`Dataset3D::to_csv`]. Seed and means are unknown
    /// and left empty.
    pub fn from_csv(text: &str) -> Result<Dataset3D> {
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with('x')) {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Config(format!("line {}: expected 3 columns, got {}", lineno + 1, cols.len())));
            }
            let mut p = [0.0; 3];
            for (a, c) in cols.iter().enumerate() {
                p[a] = c
                    .trim()
                    .parse()
                    .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
            }
            points.push(p);
        }
        Ok(Dataset3D {
            points,
            seed: 0,
            means: Vec::new(),
        })
    }
}

/// log N₃(x; μ, σ²I).
fn log_normal3(x: &[f64; 3], mu: [f64; 3], sigma: f64) -> f64 {
    let mut ss = 0.0;
    for a in 0..3 {
        let z = (x[a] - mu[a]) / sigma;
        ss += z * z;
    }
    -0.5 * ss - 3.0 * (sigma.ln() + HALF_LN_2PI)
}

/// Σₙ log Σₖ wₖ N₃(xₙ; μₖ, σ²I), computed with log-sum-exp. `means` is
/// flattened (three entries per component).
pub fn mixture_log_likelihood(points: &[[f64; 3]], weights: &[f64], means: &[f64], sigma: f64) -> f64 {
    mixture_with_gradient(points, weights, means, sigma, false).0
}

/// The same sum evaluated directly in linear space. Underflows for points far
/// from every component; kept as an independent check.
pub fn mixture_log_likelihood_naive(points: &[[f64; 3]], weights: &[f64], means: &[f64], sigma: f64) -> f64 {
    let norm = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-1.5);
    points
        .iter()
        .map(|x| {
            let s: f64 = weights
                .iter()
                .zip(means.chunks_exact(3))
                .map(|(w, m)| {
                    let ss: f64 = (0..3).map(|a| (x[a] - m[a]).powi(2)).sum();
                    w * norm * (-ss / (2.0 * sigma * sigma)).exp()
                })
                .sum();
            s.ln()
        })
        .sum()
}

/// Log-likelihood and, when asked, its partials with respect to each weight
/// and each mean coordinate.
fn mixture_with_gradient(points: &[[f64; 3]], weights: &[f64], means: &[f64], sigma: f64, grad: bool) -> (f64, Vec<f64>, Vec<f64>) {
    let k = weights.len();
    debug_assert_eq!(means.len(), 3 * k);
    let mus: Vec<[f64; 3]> = means.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    let log_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let mut dw = vec![0.0; if grad { k } else { 0 }];
    let mut dmu = vec![0.0; if grad { 3 * k } else { 0 }];
    let mut comp = vec![0.0; k];
    let mut total = 0.0;
    let inv_var = 1.0 / (sigma * sigma);
    for x in points {
        let mut top = f64::NEG_INFINITY;
        for j in 0..k {
            comp[j] = log_normal3(x, mus[j], sigma);
            top = top.max(log_w[j] + comp[j]);
        }
        if top == f64::NEG_INFINITY {
            return (f64::NEG_INFINITY, dw, dmu);
        }
        let s: f64 = (0..k).map(|j| (log_w[j] + comp[j] - top).exp()).sum();
        let ln = top + s.ln();
        total += ln;
        if grad {
            for j in 0..k {
                // ∂/∂wⱼ = Nⱼ / Σᵢ wᵢNᵢ; the responsibility is wⱼ times that.
                let share = (comp[j] - ln).exp();
                dw[j] += share;
                let r = weights[j] * share;
                for a in 0..3 {
                    dmu[3 * j + a] += r * (x[a] - mus[j][a]) * inv_var;
                }
            }
        }
    }
    (total, dw, dmu)
}

/// Mixture log-likelihood as a scalar whose derivatives flow back into the
/// weights and means.
fn mixture_scalar<S: Scalar>(points: &[[f64; 3]], weights: &[S], means: &[S], sigma: f64) -> S {
    let wv: Vec<f64> = weights.iter().map(|w| w.value()).collect();
    let mv: Vec<f64> = means.iter().map(|m| m.value()).collect();
    let (v, dw, dmu) = mixture_with_gradient(points, &wv, &mv, sigma, true);
    if !v.is_finite() {
        return S::constant(v);
    }
    let parents: Vec<(S, f64)> = weights
        .iter()
        .copied()
        .zip(dw)
        .chain(means.iter().copied().zip(dmu))
        .collect();
    S::with_partials(v, &parents)
}

/// Gaussian mixture with K ~ Poisson(10) + 1 equally weighted components,
/// means uniform on [0, 100]³ and σ = 10. Returns `[K, μ₁ₓ, μ₁ᵧ, μ₁𝓏, …]`.
#[derive(Debug, Clone)]
pub struct Gmm {
    data: Vec<[f64; 3]>,
}

pub fn gmm(training: &Dataset3D) -> Result<Gmm> {
    if training.points.is_empty() {
        return Err(Error::Config("GMM needs a nonempty training set".into()));
    }
    Ok(Gmm {
        data: training.points.clone(),
    })
}

impl Model for Gmm {
    fn name(&self) -> &str {
        "gmm"
    }

    fn run<S: Scalar>(&self, ctx: &mut RunContext<'_, S>) -> Step<Vec<f64>> {
        let k = ctx.sample(Dist::poisson(10.0)?, Discontinuous)?.value() as usize + 1;
        let bx = Dist::uniform(S::constant(0.0), S::constant(MIXTURE_BOX))?;
        let mut means = Vec::with_capacity(3 * k);
        for _ in 0..3 * k {
            means.push(ctx.sample(bx, Continuous)?);
        }
        let w = vec![S::constant(1.0 / k as f64); k];
        ctx.score(mixture_scalar(&self.data, &w, &means, MIXTURE_SIGMA))?;
        let mut value = Vec::with_capacity(1 + 3 * k);
        value.push(k as f64);
        value.extend(means.iter().map(|m| m.value()));
        Ok(value)
    }
}

/// Splits a GMM return value into K and the flattened means.
pub fn gmm_params(value: &[f64]) -> (usize, &[f64]) {
    (value[0] as usize, &value[1..])
}

/// Dirichlet process mixture by stick-breaking with β ~ Beta(1, α), cut off
/// once the remaining stick is at most `eps_cut`. Component means are uniform
/// on [0, 100]³, σ = 10. Returns `[w₁, …, w_K, μ₁ₓ, μ₁ᵧ, μ₁𝓏, …]`.
///
/// The weights enter the likelihood as they are; they sum to more than
/// 1 − `eps_cut` but are not renormalised.
#[derive(Debug, Clone)]
pub struct Dpmm {
    data: Vec<[f64; 3]>,
    alpha: f64,
    eps_cut: f64,
}

pub fn dpmm(training: &Dataset3D, alpha: f64, eps_cut: f64) -> Result<Dpmm> {
    if training.points.is_empty() {
        return Err(Error::Config("DPMM needs a nonempty training set".into()));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("DPMM needs α > 0, got {alpha}")));
    }
    if !(eps_cut > 0.0 && eps_cut < 1.0) {
        return Err(Error::Domain(format!("DPMM needs 0 < ε < 1, got {eps_cut}")));
    }
    Ok(Dpmm {
        data: training.points.clone(),
        alpha,
        eps_cut,
    })
}

impl Model for Dpmm {
    fn name(&self) -> &str {
        "dpmm"
    }

    fn run<S: Scalar>(&self, ctx: &mut RunContext<'_, S>) -> Step<Vec<f64>> {
        let stick_dist = Dist::beta1(S::constant(self.alpha))?;
        let bx = Dist::uniform(S::constant(0.0), S::constant(MIXTURE_BOX))?;
        let mut stick = S::constant(1.0);
        let mut beta = S::constant(0.0);
        let mut cumulative = S::constant(1.0);
        let mut weights = Vec::new();
        let mut means = Vec::new();
        while stick.value() > self.eps_cut {
            cumulative *= -beta + 1.0;
            beta = ctx.sample(stick_dist, Discontinuous)?;
            for _ in 0..3 {
                means.push(ctx.sample(bx, Continuous)?);
            }
            let w = beta * cumulative;
            weights.push(w);
            stick -= w;
        }
        ctx.score(mixture_scalar(&self.data, &weights, &means, MIXTURE_SIGMA))?;
        let mut value: Vec<f64> = weights.iter().map(|w| w.value()).collect();
        value.extend(means.iter().map(|m| m.value()));
        Ok(value)
    }
}

/// Splits a DPMM return value into weights and flattened means.
pub fn dpmm_params(value: &[f64]) -> (&[f64], &[f64]) {
    let k = value.len() / 4;
    value.split_at(k)
}

/// Per-point predictive log-density of a mixture parameter set.
pub fn mixture_point_log_density(x: &[f64; 3], weights: &[f64], means: &[f64]) -> f64 {
    mixture_log_likelihood(std::slice::from_ref(x), weights, means, MIXTURE_SIGMA)
}

/// The density with two branches on its first coordinate:
/// w([q₁]) = φ(q₁) for q₁ ≤ 0 and w([q₁, q₂]) = φ(q₂ − q₁) for
/// 0 < q₁ ≤ q₂, zero elsewhere. Returns the consumed coordinates.
#[derive(Debug, Clone, Default)]
pub struct TwoBranch;

pub fn two_branch() -> TwoBranch {
    TwoBranch
}

impl Model for TwoBranch {
    fn name(&self) -> &str {
        "two-branch"
    }

    fn run<S: Scalar>(&self, ctx: &mut RunContext<'_, S>) -> Step<Vec<f64>> {
        let std = Dist::normal(S::constant(0.0), S::constant(1.0))?;
        let q1 = ctx.sample_std_normal(Continuous)?;
        if q1.value() <= 0.0 {
            ctx.observe(std, q1)?;
            return Ok(vec![q1.value()]);
        }
        let q2 = ctx.sample_std_normal(Continuous)?;
        if q1.value() > q2.value() {
            return Err(Halt::Failed);
        }
        ctx.observe(std, q2 - q1)?;
        Ok(vec![q1.value(), q2.value()])
    }
}
