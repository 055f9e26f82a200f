//! Small models shared by the integration tests.
#![allow(dead_code)]

use nphmc::dist::Dist;
use nphmc::{CoordKind, Halt, Model, RunContext, Scalar};

/// `dim` standard-normal sites, each observed under N(mean, 1).
/// Full support; w(q) = Π N(qᵢ; mean, 1).
pub struct Gauss {
    pub dim: usize,
    pub mean: f64,
}

impl Model for Gauss {
    fn name(&self) -> &str {
        "gauss"
    }

    fn run<S: Scalar>(&self, ctx: &mut RunContext<'_, S>) -> Result<Vec<f64>, Halt> {
        let mut out = Vec::with_capacity(self.dim);
        for _ in 0..self.dim {
            let x = ctx.sample_std_normal(CoordKind::Continuous)?;
            ctx.observe(Dist::normal(S::constant(self.mean), S::constant(1.0))?, x)?;
            out.push(x.value());
        }
        Ok(out)
    }
}

/// `dim` sites of the given kind with weight one everywhere.
pub struct Flat {
    pub dim: usize,
    pub kind: CoordKind,
}

impl Model for Flat {
    fn name(&self) -> &str {
        "flat"
    }

    fn run<S: Scalar>(&self, ctx: &mut RunContext<'_, S>) -> Result<Vec<f64>, Halt> {
        let mut out = Vec::with_capacity(self.dim);
        for _ in 0..self.dim {
            out.push(ctx.sample_std_normal(self.kind)?.value());
        }
        Ok(out)
    }
}

/// Two continuous sites with the nonlinear coupling −½(q₁ − q₀²)².
pub struct Banana;

impl Model for Banana {
    fn name(&self) -> &str {
        "banana"
    }

    fn run<S: Scalar>(&self, ctx: &mut RunContext<'_, S>) -> Result<Vec<f64>, Halt> {
        let a = ctx.sample_std_normal(CoordKind::Continuous)?;
        let b = ctx.sample_std_normal(CoordKind::Continuous)?;
        ctx.score(S::constant(-0.5) * (b - a * a).square())?;
        Ok(vec![a.value(), b.value()])
    }
}

/// One site with U = 0 below `wall` and U = `height` at or above it.
pub struct Step1 {
    pub wall: f64,
    pub height: f64,
    pub kind: CoordKind,
}

impl Model for Step1 {
    fn name(&self) -> &str {
        "step"
    }

    fn run<S: Scalar>(&self, ctx: &mut RunContext<'_, S>) -> Result<Vec<f64>, Halt> {
        let x = ctx.sample_std_normal(self.kind)?;
        if x.value() >= self.wall {
            ctx.score(S::constant(-self.height))?;
        }
        Ok(vec![x.value()])
    }
}

/// `dim` discontinuous sites; U is a staircase: each site adds ⌊qᵢ⌋·slope.
pub struct Stairs {
    pub dim: usize,
    pub slope: f64,
}

impl Model for Stairs {
    fn name(&self) -> &str {
        "stairs"
    }

    fn run<S: Scalar>(&self, ctx: &mut RunContext<'_, S>) -> Result<Vec<f64>, Halt> {
        let mut out = Vec::with_capacity(self.dim);
        for _ in 0..self.dim {
            let x = ctx.sample_std_normal(CoordKind::Discontinuous)?.value();
            ctx.score(S::constant(-self.slope * x.floor()))?;
            out.push(x);
        }
        Ok(out)
    }
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

pub fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}
