//! Randomness used by the samplers.
//!
//! Samplers draw through the [`Noise`] trait rather than a concrete RNG so
//! tests can inject exact values. Every `rand::Rng` is a `Noise`.
//!
//! Draw order within one step is fixed: momentum coordinates in index order,
//! then one `(x₀, y₀)` pair per appended coordinate, then the acceptance
//! uniform. NP-DHMC additionally draws one sweep permutation per leapfrog
//! iteration that touches discontinuous coordinates.

use std::collections::VecDeque;

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// The RNG used by chains and experiments.
pub type ChainRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for run `index` of an experiment with master seed `master`:
/// one round of SplitMix64 applied to `master + (index + 1)·γ`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub trait Noise {
    /// A standard normal draw.
    fn normal(&mut self) -> f64;

    /// A uniform draw on the open interval (0, 1).
    fn uniform(&mut self) -> f64;

    /// A standard Laplace(0, 1) draw, by inversion of one uniform.
    fn laplace(&mut self) -> f64 {
        let u = self.uniform();
        if u < 0.5 {
            (2.0 * u).ln()
        } else {
            -(2.0 * (1.0 - u)).ln()
        }
    }

    /// A uniformly chosen index in `0..n`, from one uniform. `n` must be positive.
    fn index(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    /// Fisher–Yates shuffle driven by [`Noise::index`].
    fn shuffle(&mut self, items: &mut [usize]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}

impl<R: Rng + ?Sized> Noise for R {
    fn normal(&mut self) -> f64 {
        self.sample(StandardNormal)
    }

    fn uniform(&mut self) -> f64 {
        self.sample(Open01)
    }
}

/// Replays scripted draws, falling back to a seeded RNG once a queue runs dry.
#[derive(Debug, Clone)]
pub struct Scripted {
    normals: VecDeque<f64>,
    uniforms: VecDeque<f64>,
    laplaces: VecDeque<f64>,
    fallback: ChainRng,
}

impl Scripted {
    pub fn new(seed: u64) -> Self {
        Scripted {
            normals: VecDeque::new(),
            uniforms: VecDeque::new(),
            laplaces: VecDeque::new(),
            fallback: seeded_rng(seed),
        }
    }

    pub fn with_normals(mut self, xs: impl IntoIterator<Item = f64>) -> Self {
        self.normals.extend(xs);
        self
    }

    pub fn with_uniforms(mut self, xs: impl IntoIterator<Item = f64>) -> Self {
        self.uniforms.extend(xs);
        self
    }

    pub fn with_laplaces(mut self, xs: impl IntoIterator<Item = f64>) -> Self {
        self.laplaces.extend(xs);
        self
    }

    /// Number of scripted normal draws not yet consumed.
    pub fn normals_left(&self) -> usize {
        self.normals.len()
    }
}

impl Noise for Scripted {
    fn normal(&mut self) -> f64 {
        self.normals.pop_front().unwrap_or_else(|| self.fallback.normal())
    }

    fn uniform(&mut self) -> f64 {
        self.uniforms.pop_front().unwrap_or_else(|| Noise::uniform(&mut self.fallback))
    }

    fn laplace(&mut self) -> f64 {
        match self.laplaces.pop_front() {
            Some(x) => x,
            None => self.fallback.laplace(),
        }
    }
}
