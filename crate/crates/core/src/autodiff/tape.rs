//! Append-only reverse-mode tape over scalar primitives.
//!
//! Every [`Var`] either refers to a node on a [`Tape`] or is a constant that
//! never touches the tape. Nodes store the indices of their operands and the
//! local partial derivatives, so a single backward sweep in reverse insertion
//! order accumulates adjoints.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::Scalar;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
struct Node {
    parents: [u32; 2],
    partials: [f64; 2],
    arity: u8,
}

#[derive(Default)]
struct TapeInner {
    nodes: Vec<Node>,
    values: Vec<f64>,
}

/// Single-owner recording of one computation.
#[derive(Default)]
pub struct Tape {
    inner: RefCell<TapeInner>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            inner: RefCell::new(TapeInner {
                nodes: Vec::with_capacity(n),
                values: Vec::with_capacity(n),
            }),
        }
    }

    /// Registers an independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        let idx = self.push(
            Node {
                parents: [0; 2],
                partials: [0.0; 2],
                arity: 0,
            },
            value,
        );
        Var {
            val: value,
            node: Some((self, idx)),
        }
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops every node. Outstanding `Var`s referring to this tape must not be
    /// used afterwards.
    pub fn clear(&mut self) {
        let inner = self.inner.get_mut();
        inner.nodes.clear();
        inner.values.clear();
    }

    /// Recorded forward values in topological order.
    pub fn values(&self) -> Vec<f64> {
        self.inner.borrow().values.clone()
    }

    fn push(&self, node: Node, value: f64) -> u32 {
        let mut inner = self.inner.borrow_mut();
        let idx = inner.nodes.len();
        debug_assert!(node.parents[..node.arity as usize]
            .iter()
            .all(|&p| (p as usize) < idx));
        inner.nodes.push(node);
        inner.values.push(value);
        idx as u32
    }

    /// Reverse sweep from `output` seeded with `seed`. On return `adjoints`
    /// holds d(seed*output)/d(node) for every node up to `output`.
    pub fn backward(&self, output: &Var<'_>, seed: f64, adjoints: &mut Vec<f64>) {
        adjoints.clear();
        let Some((_, out)) = output.node else {
            return;
        };
        let inner = self.inner.borrow();
        let out = out as usize;
        adjoints.resize(out + 1, 0.0);
        adjoints[out] = seed;
        for i in (0..=out).rev() {
            let a = adjoints[i];
            if a == 0.0 {
                continue;
            }
            let node = &inner.nodes[i];
            for k in 0..node.arity as usize {
                adjoints[node.parents[k] as usize] += a * node.partials[k];
            }
        }
    }

    /// Gradient of `output` with respect to `wrt`, failing on non-finite
    /// entries.
    pub fn gradient(&self, output: &Var<'_>, wrt: &[Var<'_>]) -> Result<Vec<f64>> {
        let mut adj = Vec::new();
        self.backward(output, 1.0, &mut adj);
        collect_gradient(&adj, wrt)
    }
}

/// Reads the adjoints belonging to `wrt` out of a sweep buffer.
pub(crate) fn collect_gradient(adj: &[f64], wrt: &[Var<'_>]) -> Result<Vec<f64>> {
    wrt.iter()
        .map(|v| match v.node {
            Some((_, idx)) => {
                let g = adj.get(idx as usize).copied().unwrap_or(0.0);
                if g.is_finite() {
                    Ok(g)
                } else {
                    Err(Error::Numeric {
                        index: idx as usize,
                        reason: format!("non-finite gradient entry {g}"),
                    })
                }
            }
            None => Ok(0.0),
        })
        .collect()
}

/// A scalar that is either recorded on a tape or a free constant.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    val: f64,
    node: Option<(&'t Tape, u32)>,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Some((_, i)) => write!(f, "Var({} @{})", self.val, i),
            None => write!(f, "Const({})", self.val),
        }
    }
}

impl<'t> Var<'t> {
    pub fn constant(val: f64) -> Self {
        Var { val, node: None }
    }

    pub fn value(&self) -> f64 {
        self.val
    }

    pub fn index(&self) -> Option<usize> {
        self.node.map(|(_, i)| i as usize)
    }

    pub fn is_constant(&self) -> bool {
        self.node.is_none()
    }

    fn unary(self, val: f64, d: f64) -> Self {
        match self.node {
            None => Var::constant(val),
            Some((tape, i)) => {
                let idx = tape.push(
                    Node {
                        parents: [i, 0],
                        partials: [d, 0.0],
                        arity: 1,
                    },
                    val,
                );
                Var {
                    val,
                    node: Some((tape, idx)),
                }
            }
        }
    }

    fn binary(a: Self, b: Self, val: f64, da: f64, db: f64) -> Self {
        match (a.node, b.node) {
            (None, None) => Var::constant(val),
            (Some((tape, i)), None) => {
                let idx = tape.push(
                    Node {
                        parents: [i, 0],
                        partials: [da, 0.0],
                        arity: 1,
                    },
                    val,
                );
                Var {
                    val,
                    node: Some((tape, idx)),
                }
            }
            (None, Some((tape, j))) => {
                let idx = tape.push(
                    Node {
                        parents: [j, 0],
                        partials: [db, 0.0],
                        arity: 1,
                    },
                    val,
                );
                Var {
                    val,
                    node: Some((tape, idx)),
                }
            }
            (Some((tape, i)), Some((other, j))) => {
                debug_assert!(std::ptr::eq(tape, other), "operands on different tapes");
                let idx = tape.push(
                    Node {
                        parents: [i, j],
                        partials: [da, db],
                        arity: 2,
                    },
                    val,
                );
                Var {
                    val,
                    node: Some((tape, idx)),
                }
            }
        }
    }

    fn is_const(&self, c: f64) -> bool {
        self.node.is_none() && self.val == c
    }
}

impl Add for Var<'_> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        if rhs.is_const(0.0) && self.node.is_some() {
            return self;
        }
        if self.is_const(0.0) && rhs.node.is_some() {
            return rhs;
        }
        Var::binary(self, rhs, self.val + rhs.val, 1.0, 1.0)
    }
}

impl Sub for Var<'_> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        if rhs.is_const(0.0) && self.node.is_some() {
            return self;
        }
        Var::binary(self, rhs, self.val - rhs.val, 1.0, -1.0)
    }
}

impl Mul for Var<'_> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let val = self.val * rhs.val;
        if self.is_const(0.0) || rhs.is_const(0.0) {
            return Var::constant(val);
        }
        if self.is_const(1.0) {
            return rhs;
        }
        if rhs.is_const(1.0) {
            return self;
        }
        Var::binary(self, rhs, val, rhs.val, self.val)
    }
}

impl Div for Var<'_> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let val = self.val / rhs.val;
        if self.is_const(0.0) {
            return Var::constant(val);
        }
        Var::binary(self, rhs, val, 1.0 / rhs.val, -val / rhs.val)
    }
}

impl Neg for Var<'_> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(-self.val, -1.0)
    }
}

impl Scalar for Var<'_> {
    fn cst(v: f64) -> Self {
        Var::constant(v)
    }
    fn val(&self) -> f64 {
        self.val
    }
    fn is_cst(&self) -> bool {
        self.is_constant()
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.unary(e, e)
    }
    fn ln(self) -> Self {
        self.unary(self.val.ln(), 1.0 / self.val)
    }
    fn tanh(self) -> Self {
        let t = self.val.tanh();
        self.unary(t, 1.0 - t * t)
    }
    fn sin(self) -> Self {
        self.unary(self.val.sin(), self.val.cos())
    }
    fn cos(self) -> Self {
        self.unary(self.val.cos(), -self.val.sin())
    }
    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        self.unary(s, 0.5 / s)
    }
    fn powf(self, e: f64) -> Self {
        let v = self.val.powf(e);
        self.unary(v, e * self.val.powf(e - 1.0))
    }
    fn pow(self, e: Self) -> Self {
        let v = self.val.powf(e.val);
        let da = e.val * self.val.powf(e.val - 1.0);
        let db = if e.is_constant() { 0.0 } else { v * self.val.ln() };
        Var::binary(self, e, v, da, db)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let tape = Tape::new();
        let x = tape.var(3.0);
        let y = x * x;
        assert_eq!(y.value(), 9.0);
        assert_eq!(tape.gradient(&y, &[x]).unwrap(), vec![6.0]);
    }

    #[test]
    fn constants_stay_off_tape() {
        let tape = Tape::new();
        let x = tape.var(2.0);
        let c = Var::constant(5.0) * Var::constant(2.0);
        assert!(c.is_constant());
        let z = Var::constant(0.0) * x;
        assert!(z.is_constant());
        assert_eq!(tape.len(), 1);
    }

    #[test]
    fn topological_order() {
        let tape = Tape::new();
        let x = tape.var(0.3);
        let y = tape.var(-1.1);
        let z = (x * y).tanh() + x.sin() / y.exp();
        let inner = tape.inner.borrow();
        for (i, n) in inner.nodes.iter().enumerate() {
            for k in 0..n.arity as usize {
                assert!((n.parents[k] as usize) < i);
            }
        }
        assert_eq!(inner.values.last().copied(), Some(z.value()));
    }

    #[test]
    fn replay_is_bit_identical() {
        let run = || {
            let tape = Tape::new();
            let x = tape.var(0.7);
            let y = (x.powf(1.5) + x.cos()).sqrt().ln();
            let g = tape.gradient(&y, &[x]).unwrap();
            (tape.values(), g)
        };
        let (v1, g1) = run();
        let (v2, g2) = run();
        assert_eq!(
            v1.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            v2.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(g1[0].to_bits(), g2[0].to_bits());
    }

    #[test]
    fn non_finite_gradient_reports_node() {
        let tape = Tape::new();
        let x = tape.var(0.0);
        let y = x.sqrt();
        let err = tape.gradient(&y, &[x]).unwrap_err();
        assert!(matches!(err, Error::Numeric { index: 0, .. }));
    }
}
