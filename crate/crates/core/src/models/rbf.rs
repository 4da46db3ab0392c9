use serde::{Deserialize, Serialize};

use crate::autodiff::{Jet2, Scalar, MAX_DIM};
use crate::error::{input, Result};

/// Member of `G_{n,m}`: `sum_k a_k exp(-|x - x_k|^2)` with fixed centers.
/// The coefficients `a_k` are the trainable parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbfSpec {
    pub dim: usize,
    pub centers: Vec<Vec<f64>>,
    /// Separation parameter: centers must be more than `1/m` apart.
    pub m: f64,
}

impl RbfSpec {
    pub fn new(dim: usize, centers: Vec<Vec<f64>>, m: f64) -> Result<Self> {
        let s = RbfSpec { dim, centers, m };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_DIM).contains(&self.dim) {
            return input(format!("RBF dimension {} unsupported", self.dim));
        }
        if self.centers.is_empty() || self.centers.iter().any(|c| c.len() != self.dim) {
            return input("RBF centers must be non-empty and match the dimension");
        }
        if !(self.m > 0.0) {
            return input("separation parameter m must be positive");
        }
        let n = self.centers.len() as f64;
        if n.ln() > self.m * self.m {
            return input(format!("{n} terms exceed exp(m^2) for m = {}", self.m));
        }
        for i in 0..self.centers.len() {
            for j in i + 1..self.centers.len() {
                let d2: f64 = self.centers[i]
                    .iter()
                    .zip(&self.centers[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if d2.sqrt() <= 1.0 / self.m {
                    return input(format!("centers {i} and {j} closer than 1/m"));
                }
            }
        }
        Ok(())
    }

    fn basis(&self, k: usize, x: &[f64]) -> Jet2<f64> {
        let c = &self.centers[k];
        let coords = Jet2::<f64>::coordinates(x);
        let mut r2 = Jet2::constant(0.0, x.len());
        for (xa, ca) in coords.into_iter().zip(c) {
            let d = xa.shift(-ca);
            r2 = r2 + d * d;
        }
        (-r2).exp()
    }

    pub fn forward_value<S: Scalar>(&self, coeffs: &[S], x: &[f64]) -> S {
        let mut out = S::cst(0.0);
        for (c, &a) in self.centers.iter().zip(coeffs) {
            let r2: f64 = x.iter().zip(c).map(|(xa, ca)| (xa - ca) * (xa - ca)).sum();
            out = out + a * S::cst((-r2).exp());
        }
        out
    }

    pub fn forward<S: Scalar>(&self, coeffs: &[S], x: &[f64]) -> Jet2<S> {
        let mut out = Jet2::constant(S::cst(0.0), x.len());
        for (k, &a) in coeffs.iter().enumerate() {
            out = out + self.basis(k, x).lift::<S>().scale(a);
        }
        out
    }
}
