//! One-dimensional fractional Laplacian in symmetric-difference form,
//! `c_{1,α} ∫_0^∞ (2u(x) - u(x+y) - u(x-y)) / y^{1+α} dy`.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use super::coeffs::FractionalSpec;
use crate::autodiff::Scalar;
use crate::error::{input, Error, Result};
use crate::models::Evaluable;
use crate::quadrature::{gauss_legendre, graded_breaks};

/// `c_{d,α} = 2^α Γ((α+d)/2) / (π^{d/2} |Γ(-α/2)|)`.
pub fn frac_constant(alpha: f64, d: usize) -> f64 {
    let d = d as f64;
    2f64.powf(alpha) * gamma((alpha + d) / 2.0) / (PI.powf(d / 2.0) * gamma(-alpha / 2.0).abs())
}

/// The fractional integral at `x` as a fixed linear functional of `u`:
/// `center * u(x) + Σ w_k u(z_k) + d2 * u''(x) + d4 * u''''(x)`, constant
/// included. `u''''` is the central difference of `u''` with step `delta`.
#[derive(Clone, Debug)]
pub struct FracStencil {
    pub x: f64,
    pub center: f64,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub d2: f64,
    pub d4: f64,
    pub delta: f64,
}

fn push_panels(breaks: &[f64], order: usize, out: &mut Vec<(f64, f64)>) {
    let rule = gauss_legendre(order);
    for win in breaks.windows(2) {
        let (lo, hi) = (win[0], win[1]);
        if hi <= lo {
            continue;
        }
        let h = hi - lo;
        for (t, w) in rule.nodes.iter().zip(&rule.weights) {
            out.push((lo + 0.5 * h * (t + 1.0), 0.5 * h * w));
        }
    }
}

impl FracStencil {
    pub fn new(spec: &FractionalSpec, x: f64) -> Result<Self> {
        let alpha = spec.alpha;
        let big_r = spec.support_radius;
        let r = big_r - x.abs();
        if !(r > 0.0) {
            return input(format!("point {x} not inside the support (-{big_r}, {big_r})"));
        }
        let far = big_r + x.abs();
        let t = spec.truncation.unwrap_or(far + 1.0);
        if t < far {
            return Err(Error::Config(format!("truncation T = {t} below R + |x| = {far}; tail formula invalid")));
        }
        let q = spec.quadrature;
        if !(q.taylor_cutoff > 0.0) {
            return Err(Error::Config("Taylor cutoff must be positive".into()));
        }
        let h0 = 0.5 * r;
        let y_min = q.taylor_cutoff.min(r / 16.0);

        let mut nodes = Vec::new();
        // near field, geometric from y_min up to h0
        let levels = (h0 / y_min).log2().ceil().max(1.0) as i32;
        let near: Vec<f64> = (0..=levels)
            .map(|k| y_min * (h0 / y_min).powf(k as f64 / levels as f64))
            .collect();
        push_panels(&near, q.order, &mut nodes);
        // up to the first kink (x ± y leaves the support)
        push_panels(&graded_breaks(h0, r, false, true, q.kink_levels), q.order, &mut nodes);
        if far > r {
            push_panels(&graded_breaks(r, far, true, true, q.kink_levels), q.order, &mut nodes);
        }
        if t > far {
            push_panels(&graded_breaks(far, t, true, false, 4), q.order, &mut nodes);
        }

        let c = frac_constant(alpha, 1);
        let mut center = 0.0;
        let mut points = Vec::with_capacity(2 * nodes.len());
        let mut weights = Vec::with_capacity(2 * nodes.len());
        for (y, w) in nodes {
            let k = w / y.powf(1.0 + alpha);
            center += 2.0 * k;
            for z in [x + y, x - y] {
                if z.abs() <= big_r {
                    points.push(z);
                    weights.push(-c * k);
                }
            }
        }
        // exact tail beyond T, where u(x ± y) = 0
        center += 2.0 * t.powf(-alpha) / alpha;
        // below y_min: 2u(x) - u(x+y) - u(x-y) = -u''(x) y^2 - u''''(x) y^4 / 12 + O(y^6)
        let d2 = -c * y_min.powf(2.0 - alpha) / (2.0 - alpha);
        let d4 = -c * y_min.powf(4.0 - alpha) / (12.0 * (4.0 - alpha));
        Ok(FracStencil {
            x,
            center: c * center,
            points,
            weights,
            d2,
            d4,
            delta: 0.5 * y_min,
        })
    }

    /// `(-Δ)^{α/2} u (x)`.
    pub fn apply<S: Scalar, E: Evaluable<S> + ?Sized>(&self, u: &E) -> Result<S> {
        let ux = u.jet(&[self.x])?;
        let up = u.jet(&[self.x + self.delta])?.d2(0, 0);
        let um = u.jet(&[self.x - self.delta])?.d2(0, 0);
        let d4 = (up + um - ux.d2(0, 0).scale(2.0)).scale(1.0 / (self.delta * self.delta));
        let mut acc = ux.value.scale(self.center) + ux.d2(0, 0).scale(self.d2) + d4.scale(self.d4);
        for (z, w) in self.points.iter().zip(&self.weights) {
            let v = u.value(&[*z])?;
            if !v.val().is_finite() {
                return Err(Error::Numeric {
                    index: 0,
                    reason: format!("non-finite integrand value at {z}"),
                });
            }
            acc = acc + v.scale(*w);
        }
        Ok(acc)
    }
}

/// `(-Δ)^{α/2} u(x) + b(x) u'(x) + c(x) u(x)`.
pub fn apply_frac_lap<S: Scalar, E: Evaluable<S> + ?Sized>(spec: &FractionalSpec, u: &E, x: f64) -> Result<S> {
    let st = FracStencil::new(spec, x)?;
    let lap = st.apply(u)?;
    let ux = u.jet(&[x])?;
    let b = spec.b.eval(&[x]).value;
    let c = spec.c.eval(&[x]).value;
    Ok(lap + ux.d1(0).scale(b) + ux.value.scale(c))
}
