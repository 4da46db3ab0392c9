use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// The closed set of scalar primitives every differentiable computation is
/// built from. Implemented by plain `f64` (value-only evaluation) and by
/// [`Var`](super::Var) (taped evaluation for parameter gradients).
pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// A constant carrying no derivative information.
    fn cst(v: f64) -> Self;
    fn val(&self) -> f64;

    /// False when the value depends on taped parameters.
    fn is_cst(&self) -> bool {
        true
    }

    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn powf(self, e: f64) -> Self;

    /// `self^e` with both operands differentiable; the value matches `powf`.
    fn pow(self, e: Self) -> Self {
        self.powf(e.val())
    }

    fn scale(self, c: f64) -> Self {
        self * Self::cst(c)
    }

    fn square(self) -> Self {
        self * self
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn val(&self) -> f64 {
        *self
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
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn powf(self, e: f64) -> Self {
        f64::powf(self, e)
    }
}
