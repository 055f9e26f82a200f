//! Scalar abstraction shared by plain evaluation (`f64`) and reverse-mode
//! differentiation ([`Var`]).
//!
//! Models are written once against [`Scalar`] and executed either with `f64`
//! (cheap density evaluation) or with [`Var`] (density plus gradient). `Var`
//! records onto a thread-local tape that is only live inside
//! [`differentiate`]; a `Var` created outside a session is a constant.

use std::cell::{Cell, RefCell};
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::dist::{std_normal_cdf, std_normal_pdf};

pub trait Scalar:
    Copy
    + Debug
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn constant(v: f64) -> Self;
    fn value(self) -> f64;

    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn powf(self, e: f64) -> Self;
    fn square(self) -> Self {
        self * self
    }
    /// Standard normal cdf Φ(x).
    fn norm_cdf(self) -> Self;
    /// Standard normal survival function 1 − Φ(x), accurate in the upper tail.
    fn norm_sf(self) -> Self;

    /// A value computed outside the scalar algebra, with known partial
    /// derivatives `∂value/∂parent`. Lets hot loops run in plain `f64`.
    fn with_partials(value: f64, parents: &[(Self, f64)]) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn constant(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn powf(self, e: f64) -> Self {
        f64::powf(self, e)
    }
    #[inline]
    fn norm_cdf(self) -> Self {
        std_normal_cdf(self)
    }
    #[inline]
    fn norm_sf(self) -> Self {
        std_normal_cdf(-self)
    }
    #[inline]
    fn with_partials(value: f64, _: &[(Self, f64)]) -> Self {
        value
    }
}

const NO_PARENT: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Node {
    a: u32,
    da: f64,
    b: u32,
    db: f64,
}

thread_local! {
    static TAPE: RefCell<Vec<Node>> = const { RefCell::new(Vec::new()) };
    static ACTIVE: Cell<bool> = const { Cell::new(false) };
}

fn push(node: Node) -> u32 {
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        let idx = t.len() as u32;
        t.push(node);
        idx
    })
}

/// A reverse-mode differentiable scalar.
#[derive(Clone, Copy, Debug)]
pub struct Var {
    val: f64,
    idx: u32,
}

impl Var {
    fn is_const(self) -> bool {
        self.idx == NO_PARENT
    }

    fn unary(val: f64, a: Var, da: f64) -> Var {
        if a.is_const() {
            return Var::constant(val);
        }
        let idx = push(Node {
            a: a.idx,
            da,
            b: NO_PARENT,
            db: 0.0,
        });
        Var { val, idx }
    }

    fn binary(val: f64, a: Var, da: f64, b: Var, db: f64) -> Var {
        match (a.is_const(), b.is_const()) {
            (true, true) => Var::constant(val),
            (false, true) => Var::unary(val, a, da),
            (true, false) => Var::unary(val, b, db),
            (false, false) => {
                let idx = push(Node { a: a.idx, da, b: b.idx, db });
                Var { val, idx }
            }
        }
    }
}

/// Evaluates `f` on fresh tape variables seeded with `inputs` and returns the
/// output value, its gradient with respect to every input, and whatever else
/// `f` produced.
///
/// Sessions do not nest; calling `differentiate` from inside `f` panics.
pub fn differentiate<R>(inputs: &[f64], f: impl FnOnce(&[Var]) -> (Var, R)) -> (f64, Vec<f64>, R) {
    ACTIVE.with(|a| {
        assert!(!a.get(), "nested differentiation sessions are not supported");
        a.set(true);
    });
    struct Reset;
    impl Drop for Reset {
        fn drop(&mut self) {
            ACTIVE.with(|a| a.set(false));
            TAPE.with(|t| t.borrow_mut().clear());
        }
    }
    let _reset = Reset;

    TAPE.with(|t| t.borrow_mut().clear());
    let leaves: Vec<Var> = inputs
        .iter()
        .map(|&v| Var {
            val: v,
            idx: push(Node {
                a: NO_PARENT,
                da: 0.0,
                b: NO_PARENT,
                db: 0.0,
            }),
        })
        .collect();
    let (out, extra) = f(&leaves);

    let mut grad = vec![0.0; inputs.len()];
    if !out.is_const() {
        TAPE.with(|t| {
            let tape = t.borrow();
            let mut adj = vec![0.0; tape.len()];
            adj[out.idx as usize] = 1.0;
            for i in (0..tape.len()).rev() {
                let g = adj[i];
                if g == 0.0 {
                    continue;
                }
                let node = tape[i];
                if node.a != NO_PARENT {
                    adj[node.a as usize] += g * node.da;
                }
                if node.b != NO_PARENT {
                    adj[node.b as usize] += g * node.db;
                }
            }
            grad.copy_from_slice(&adj[..inputs.len()]);
        });
    }
    (out.val, grad, extra)
}

impl Add for Var {
    type Output = Var;
    #[inline]
    fn add(self, rhs: Var) -> Var {
        Var::binary(self.val + rhs.val, self, 1.0, rhs, 1.0)
    }
}

impl Sub for Var {
    type Output = Var;
    #[inline]
    fn sub(self, rhs: Var) -> Var {
        Var::binary(self.val - rhs.val, self, 1.0, rhs, -1.0)
    }
}

impl Mul for Var {
    type Output = Var;
    #[inline]
    fn mul(self, rhs: Var) -> Var {
        Var::binary(self.val * rhs.val, self, rhs.val, rhs, self.val)
    }
}

impl Div for Var {
    type Output = Var;
    #[inline]
    fn div(self, rhs: Var) -> Var {
        let q = self.val / rhs.val;
        Var::binary(q, self, 1.0 / rhs.val, rhs, -q / rhs.val)
    }
}

impl Neg for Var {
    type Output = Var;
    #[inline]
    fn neg(self) -> Var {
        Var::unary(-self.val, self, -1.0)
    }
}

impl Add<f64> for Var {
    type Output = Var;
    #[inline]
    fn add(self, rhs: f64) -> Var {
        Var::unary(self.val + rhs, self, 1.0)
    }
}

impl Sub<f64> for Var {
    type Output = Var;
    #[inline]
    fn sub(self, rhs: f64) -> Var {
        Var::unary(self.val - rhs, self, 1.0)
    }
}

impl Mul<f64> for Var {
    type Output = Var;
    #[inline]
    fn mul(self, rhs: f64) -> Var {
        Var::unary(self.val * rhs, self, rhs)
    }
}

impl Div<f64> for Var {
    type Output = Var;
    #[inline]
    fn div(self, rhs: f64) -> Var {
        Var::unary(self.val / rhs, self, 1.0 / rhs)
    }
}

impl AddAssign for Var {
    fn add_assign(&mut self, rhs: Var) {
        *self = *self + rhs;
    }
}

impl SubAssign for Var {
    fn sub_assign(&mut self, rhs: Var) {
        *self = *self - rhs;
    }
}

impl MulAssign for Var {
    fn mul_assign(&mut self, rhs: Var) {
        *self = *self * rhs;
    }
}

impl Scalar for Var {
    fn constant(v: f64) -> Self {
        Var {
            val: v,
            idx: NO_PARENT,
        }
    }

    fn value(self) -> f64 {
        self.val
    }

    fn exp(self) -> Self {
        let e = self.val.exp();
        Var::unary(e, self, e)
    }

    fn ln(self) -> Self {
        Var::unary(self.val.ln(), self, 1.0 / self.val)
    }

    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        Var::unary(s, self, 0.5 / s)
    }

    fn abs(self) -> Self {
        // d|x|/dx at 0 is taken as 0.
        let d = if self.val > 0.0 {
            1.0
        } else if self.val < 0.0 {
            -1.0
        } else {
            0.0
        };
        Var::unary(self.val.abs(), self, d)
    }

    fn powf(self, e: f64) -> Self {
        Var::unary(self.val.powf(e), self, e * self.val.powf(e - 1.0))
    }

    fn norm_cdf(self) -> Self {
        Var::unary(std_normal_cdf(self.val), self, std_normal_pdf(self.val))
    }

    fn norm_sf(self) -> Self {
        Var::unary(std_normal_cdf(-self.val), self, -std_normal_pdf(self.val))
    }

    fn with_partials(value: f64, parents: &[(Self, f64)]) -> Self {
        // A chain of binary nodes; each link passes its adjoint through
        // unchanged and adds one parent.
        let mut live = parents.iter().filter(|(p, d)| !p.is_const() && *d != 0.0);
        let Some(&(first, d0)) = live.next() else {
            return Var::constant(value);
        };
        live.fold(Var::unary(value, first, d0), |acc, &(p, d)| Var::binary(value, acc, 1.0, p, d))
    }
}
