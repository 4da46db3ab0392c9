//! Second-order spatial jets.
//!
//! A [`Jet2`] carries a value with its gradient and Hessian with respect to
//! the spatial coordinates. Components are generic over [`Scalar`], so with
//! `S = Var` every entry of the jet is itself a taped quantity and parameter
//! gradients of losses containing second derivatives come out of a single
//! reverse sweep.

use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::Scalar;
use crate::error::{input, Error, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;
const TRI: usize = MAX_DIM * (MAX_DIM + 1) / 2;

#[inline]
fn tri(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * MAX_DIM - i + 1) / 2 + (j - i)
}

#[derive(Clone, Copy, Debug)]
pub struct Jet2<S> {
    pub value: S,
    d1: [S; MAX_DIM],
    // upper triangle of the Hessian
    d2: [S; TRI],
    dim: usize,
}

/// Registered primitives for [`Jet2::apply`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Primitive {
    Add,
    Sub,
    Mul,
    Div,
    /// `a^b`; a constant exponent takes the real-power path, one varying in
    /// space or in taped parameters requires a positive base.
    Pow,
    Exp,
    Tanh,
    Sin,
    Cos,
    Sqrt,
    /// `sqrt(x^2 + kappa^2)`
    AbsSmooth { kappa: f64 },
}

impl Primitive {
    pub fn arity(&self) -> usize {
        match self {
            Primitive::Add | Primitive::Sub | Primitive::Mul | Primitive::Div | Primitive::Pow => 2,
            _ => 1,
        }
    }
}

pub const DEFAULT_ABS_KAPPA: f64 = 1e-12;

impl<S: Scalar> Jet2<S> {
    pub fn constant(value: S, dim: usize) -> Self {
        debug_assert!(dim <= MAX_DIM);
        Jet2 {
            value,
            d1: [S::cst(0.0); MAX_DIM],
            d2: [S::cst(0.0); TRI],
            dim,
        }
    }

    /// Coordinate jet: value `x[axis]`, unit gradient along `axis`, zero Hessian.
    /// With `axis = None` a constant jet with value `0` is returned.
    pub fn seed(x: &[f64], axis: Option<usize>) -> Result<Self> {
        let dim = x.len();
        if dim == 0 || dim > MAX_DIM {
            return input(format!("spatial dimension {dim} outside 1..={MAX_DIM}"));
        }
        match axis {
            None => Ok(Self::constant(S::cst(0.0), dim)),
            Some(a) if a >= dim => input(format!("axis {a} out of range for dimension {dim}")),
            Some(a) => {
                let mut j = Self::constant(S::cst(x[a]), dim);
                j.d1[a] = S::cst(1.0);
                Ok(j)
            }
        }
    }

    /// All coordinate jets of a point.
    pub fn coordinates(x: &[f64]) -> Vec<Self> {
        let dim = x.len();
        (0..dim)
            .map(|a| {
                let mut j = Self::constant(S::cst(x[a]), dim);
                j.d1[a] = S::cst(1.0);
                j
            })
            .collect()
    }

    pub fn from_parts(value: S, d1: &[S], d2: &[Vec<S>]) -> Self {
        let dim = d1.len();
        let mut j = Self::constant(value, dim);
        j.d1[..dim].copy_from_slice(d1);
        for i in 0..dim {
            for k in i..dim {
                j.d2[tri(i, k)] = d2[i][k];
            }
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn d1(&self, i: usize) -> S {
        self.d1[i]
    }

    pub fn d2(&self, i: usize, j: usize) -> S {
        self.d2[tri(i, j)]
    }

    pub fn gradient(&self) -> &[S] {
        &self.d1[..self.dim]
    }

    pub fn laplacian(&self) -> S {
        let mut s = S::cst(0.0);
        for i in 0..self.dim {
            s = s + self.d2[tri(i, i)];
        }
        s
    }

    /// Hessian as a dense matrix.
    pub fn hessian(&self) -> Vec<Vec<S>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.d2(i, j)).collect())
            .collect()
    }

    pub fn scale(self, c: S) -> Self {
        let mut out = self;
        out.value = self.value * c;
        for i in 0..self.dim {
            out.d1[i] = self.d1[i] * c;
        }
        for i in 0..self.dim {
            for j in i..self.dim {
                let k = tri(i, j);
                out.d2[k] = self.d2[k] * c;
            }
        }
        out
    }

    /// Adds a constant to the value.
    pub fn shift(mut self, c: S) -> Self {
        self.value = self.value + c;
        self
    }

    /// Composition with a scalar function given its value and first two
    /// derivatives at `self.value`.
    pub fn chain(self, g: S, g1: S, g2: S) -> Self {
        let mut out = Self::constant(g, self.dim);
        for i in 0..self.dim {
            out.d1[i] = g1 * self.d1[i];
        }
        for i in 0..self.dim {
            for j in i..self.dim {
                let k = tri(i, j);
                out.d2[k] = g2 * (self.d1[i] * self.d1[j]) + g1 * self.d2[k];
            }
        }
        out
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn ln(self) -> Self {
        let r = S::cst(1.0) / self.value;
        self.chain(self.value.ln(), r, -(r * r))
    }

    pub fn tanh(self) -> Self {
        let t = self.value.tanh();
        let t1 = S::cst(1.0) - t * t;
        let t2 = S::cst(-2.0) * t * t1;
        self.chain(t, t1, t2)
    }

    pub fn sin(self) -> Self {
        let s = self.value.sin();
        let c = self.value.cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let s = self.value.sin();
        let c = self.value.cos();
        self.chain(c, -s, -c)
    }

    pub fn sqrt(self) -> Self {
        let r = self.value.sqrt();
        let r1 = S::cst(0.5) / r;
        let r2 = -(r1 / (S::cst(2.0) * self.value));
        self.chain(r, r1, r2)
    }

    pub fn powf(self, e: f64) -> Self {
        let v = self.value;
        let g = v.powf(e);
        let g1 = v.powf(e - 1.0).scale(e);
        let g2 = v.powf(e - 2.0).scale(e * (e - 1.0));
        self.chain(g, g1, g2)
    }

    pub fn square(self) -> Self {
        self * self
    }

    pub fn recip(self) -> Self {
        let r = S::cst(1.0) / self.value;
        let r2 = r * r;
        self.chain(r, -r2, S::cst(2.0) * r2 * r)
    }

    /// Smooth absolute value `sqrt(x^2 + kappa^2)`.
    pub fn abs_smooth(self, kappa: f64) -> Self {
        let v = self.value;
        let s = (v * v + S::cst(kappa * kappa)).sqrt();
        let s1 = v / s;
        let s2 = S::cst(kappa * kappa) / (s * s * s);
        self.chain(s, s1, s2)
    }

    /// `ln(1 + e^x)`.
    pub fn softplus(self) -> Self {
        let v = self.value;
        let sig = S::cst(1.0) / (S::cst(1.0) + (-v).exp());
        let sp = (S::cst(1.0) + v.exp()).ln();
        self.chain(sp, sig, sig * (S::cst(1.0) - sig))
    }

    /// Checked application of a registered primitive.
    pub fn apply(op: Primitive, args: &[Self]) -> Result<Self> {
        if args.len() != op.arity() {
            return input(format!(
                "{op:?} expects {} argument(s), got {}",
                op.arity(),
                args.len()
            ));
        }
        if op.arity() == 2 && args[0].dim != args[1].dim {
            return input("jet dimensions differ");
        }
        let a = args[0];
        let av = a.value.val();
        Ok(match op {
            Primitive::Add => a + args[1],
            Primitive::Sub => a - args[1],
            Primitive::Mul => a * args[1],
            Primitive::Div => {
                let bv = args[1].value.val();
                if bv == 0.0 {
                    return Err(Error::Domain { op: "div", value: bv });
                }
                a / args[1]
            }
            Primitive::Pow => {
                let b = args[1];
                if b.is_constant() {
                    let e = b.value.val();
                    if av < 0.0 && e.fract() != 0.0 {
                        return Err(Error::Domain { op: "pow", value: av });
                    }
                    if av == 0.0 && e < 2.0 && e != 0.0 && e != 1.0 {
                        return Err(Error::Domain { op: "pow", value: av });
                    }
                    if b.value.is_cst() {
                        a.powf(e)
                    } else {
                        // taped exponent: the partial in b needs ln a
                        if av <= 0.0 {
                            return Err(Error::Domain { op: "pow", value: av });
                        }
                        let (v, e) = (a.value, b.value);
                        let one = S::cst(1.0);
                        let g1 = e * v.pow(e - one);
                        let g2 = e * (e - one) * v.pow(e - one - one);
                        a.chain(v.pow(e), g1, g2)
                    }
                } else {
                    if av <= 0.0 {
                        return Err(Error::Domain { op: "pow", value: av });
                    }
                    (b * a.ln()).exp()
                }
            }
            Primitive::Exp => a.exp(),
            Primitive::Tanh => a.tanh(),
            Primitive::Sin => a.sin(),
            Primitive::Cos => a.cos(),
            Primitive::Sqrt => {
                if av <= 0.0 {
                    return Err(Error::Domain { op: "sqrt", value: av });
                }
                a.sqrt()
            }
            Primitive::AbsSmooth { kappa } => {
                if kappa <= 0.0 {
                    return input("abs_smooth requires kappa > 0");
                }
                a.abs_smooth(kappa)
            }
        })
    }

    /// True when every derivative component is the constant zero.
    pub fn is_constant(&self) -> bool {
        (0..self.dim).all(|i| {
            self.d1[i].val() == 0.0 && (i..self.dim).all(|j| self.d2[tri(i, j)].val() == 0.0)
        })
    }
}

impl Jet2<f64> {
    /// Lifts a value-only jet into any scalar type as constants.
    pub fn lift<S: Scalar>(&self) -> Jet2<S> {
        let mut out = Jet2::constant(S::cst(self.value), self.dim);
        for i in 0..MAX_DIM {
            out.d1[i] = S::cst(self.d1[i]);
        }
        for k in 0..TRI {
            out.d2[k] = S::cst(self.d2[k]);
        }
        out
    }
}

impl<S: Scalar> Jet2<S> {
    /// Value-only copy.
    pub fn to_f64(&self) -> Jet2<f64> {
        let mut out = Jet2::constant(self.value.val(), self.dim);
        for i in 0..MAX_DIM {
            out.d1[i] = self.d1[i].val();
        }
        for k in 0..TRI {
            out.d2[k] = self.d2[k].val();
        }
        out
    }
}

impl<S: Scalar> Add for Jet2<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut out = self;
        out.value = self.value + rhs.value;
        for i in 0..self.dim {
            out.d1[i] = self.d1[i] + rhs.d1[i];
        }
        for i in 0..self.dim {
            for j in i..self.dim {
                let k = tri(i, j);
                out.d2[k] = self.d2[k] + rhs.d2[k];
            }
        }
        out
    }
}

impl<S: Scalar> Sub for Jet2<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<S: Scalar> Neg for Jet2<S> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut out = self;
        out.value = -self.value;
        for i in 0..self.dim {
            out.d1[i] = -self.d1[i];
        }
        for i in 0..self.dim {
            for j in i..self.dim {
                let k = tri(i, j);
                out.d2[k] = -self.d2[k];
            }
        }
        out
    }
}

impl<S: Scalar> Mul for Jet2<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let (u, v) = (self, rhs);
        let mut out = Self::constant(u.value * v.value, u.dim);
        for i in 0..u.dim {
            out.d1[i] = u.d1[i] * v.value + u.value * v.d1[i];
        }
        for i in 0..u.dim {
            for j in i..u.dim {
                let k = tri(i, j);
                out.d2[k] = u.d2[k] * v.value
                    + u.d1[i] * v.d1[j]
                    + u.d1[j] * v.d1[i]
                    + u.value * v.d2[k];
            }
        }
        out
    }
}

impl<S: Scalar> Div for Jet2<S> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn seed_and_constant() {
        let j = Jet2::<f64>::seed(&[3.0], Some(0)).unwrap();
        assert_eq!((j.value, j.d1(0), j.d2(0, 0)), (3.0, 1.0, 0.0));
        let c = Jet2::<f64>::constant(5.0, 1);
        assert_eq!((c.value, c.d1(0), c.d2(0, 0)), (5.0, 0.0, 0.0));
        let sq = j * j;
        assert_eq!((sq.value, sq.d1(0), sq.d2(0, 0)), (9.0, 6.0, 2.0));
    }

    #[test]
    fn seed_axis_out_of_range() {
        assert!(matches!(
            Jet2::<f64>::seed(&[1.0, 2.0], Some(2)),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn tanh_at_zero() {
        let x = Jet2::<f64>::seed(&[0.0], Some(0)).unwrap();
        let t = Jet2::apply(Primitive::Tanh, &[x]).unwrap();
        assert_eq!((t.value, t.d1(0), t.d2(0, 0)), (0.0, 1.0, 0.0));
    }

    #[test]
    fn gaussian_jet() {
        // f = exp(-x^2): f' = -2x f, f'' = (4x^2 - 2) f
        let x = Jet2::<f64>::seed(&[1.0], Some(0)).unwrap();
        let f = (-(x * x)).exp();
        let e = (-1.0f64).exp();
        assert!(close(f.value, e, 1e-15));
        assert!(close(f.d1(0), -2.0 * e, 1e-15));
        assert!(close(f.d2(0, 0), 2.0 * e, 1e-15));
    }

    #[test]
    fn sine_jet() {
        let x = Jet2::<f64>::seed(&[0.25], Some(0)).unwrap();
        let f = x.scale(2.0 * PI).sin();
        assert!(close(f.value, 1.0, 1e-15));
        assert!(f.d1(0).abs() < 1e-14);
        assert!(close(f.d2(0, 0), -4.0 * PI * PI, 1e-14));
    }

    #[test]
    fn domain_errors() {
        let x = Jet2::<f64>::seed(&[-1.0], Some(0)).unwrap();
        let z = Jet2::constant(0.0, 1);
        assert!(matches!(
            Jet2::apply(Primitive::Sqrt, &[x]),
            Err(Error::Domain { op: "sqrt", value }) if value == -1.0
        ));
        assert!(matches!(
            Jet2::apply(Primitive::Div, &[x, z]),
            Err(Error::Domain { op: "div", .. })
        ));
        assert!(matches!(Jet2::apply(Primitive::Exp, &[x, x]), Err(Error::Input(_))));
    }

    #[test]
    fn taped_exponent_keeps_its_gradient() {
        use crate::autodiff::Tape;
        // d/dt x^t at x = 2, t = 3 is 8 ln 2; the jet is spatially constant in t
        let tape = Tape::new();
        let t = tape.var(3.0);
        let x = Jet2::<crate::autodiff::Var>::coordinates(&[2.0])[0];
        let e = Jet2::constant(t, 1);
        let y = Jet2::apply(Primitive::Pow, &[x, e]).unwrap();
        assert_eq!(y.value.value(), 8.0);
        let g = tape.gradient(&y.value, &[t]).unwrap();
        assert!(close(g[0], 8.0 * 2f64.ln(), 1e-14));
        let gd = tape.gradient(&y.d1[0], &[t]).unwrap();
        // d/dt (t x^{t-1}) = x^{t-1} (1 + t ln x)
        assert!(close(gd[0], 4.0 * (1.0 + 3.0 * 2f64.ln()), 1e-13));
        let neg = Jet2::<crate::autodiff::Var>::coordinates(&[-2.0])[0];
        assert!(Jet2::apply(Primitive::Pow, &[neg, e]).is_err());
    }

    #[test]
    fn hessian_symmetric_and_affine_zero() {
        let p = [0.3, -0.7, 1.1];
        let c = Jet2::<f64>::coordinates(&p);
        let lin = c[0].scale(2.0) + c[1] - c[2].scale(0.5);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(lin.d2(i, j), 0.0);
            }
        }
        let f = (c[0] * c[1]).sin() * c[2].exp();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(f.d2(i, j).to_bits(), f.d2(j, i).to_bits());
            }
        }
        // d2/dxdy sin(xy) e^z = (cos(xy) - xy sin(xy)) e^z
        let (x, y, z) = (p[0], p[1], p[2]);
        let want = ((x * y).cos() - x * y * (x * y).sin()) * z.exp();
        assert!(close(f.d2(0, 1), want, 1e-14));
    }

    #[test]
    fn pow_paths() {
        let x = Jet2::<f64>::seed(&[2.0], Some(0)).unwrap();
        let three = Jet2::constant(3.0, 1);
        let c = Jet2::apply(Primitive::Pow, &[x, three]).unwrap();
        assert_eq!((c.value, c.d1(0), c.d2(0, 0)), (8.0, 12.0, 12.0));
        // x^x at 2: value 4, d1 = x^x (ln x + 1), d2 = x^x((ln x + 1)^2 + 1/x)
        let v = Jet2::apply(Primitive::Pow, &[x, x]).unwrap();
        let l = 2f64.ln() + 1.0;
        assert!(close(v.value, 4.0, 1e-14));
        assert!(close(v.d1(0), 4.0 * l, 1e-14));
        assert!(close(v.d2(0, 0), 4.0 * (l * l + 0.5), 1e-14));
        let neg = Jet2::<f64>::seed(&[-2.0], Some(0)).unwrap();
        let half = Jet2::constant(0.5, 1);
        assert!(Jet2::apply(Primitive::Pow, &[neg, half]).is_err());
    }
}
