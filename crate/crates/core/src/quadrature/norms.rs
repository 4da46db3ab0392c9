use serde::{Deserialize, Serialize};

use super::gauss::gauss_legendre;
use super::sampling::{sample_iid, derive_seed, SampleKind, SampleSet, SampleTarget};
use crate::error::{input, Error, Result};
use crate::geometry::{BoxDomain, Region};

/// Fixed-order pairwise summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// `(Σ w_i |v_i|^q)^{1/q}` over precomputed values.
pub fn discrete_norm_values(weights: &[f64], values: &[f64], q: f64) -> Result<f64> {
    if q < 1.0 {
        return input(format!("norm exponent {q} below 1"));
    }
    if weights.len() != values.len() {
        return input("weights and values differ in length");
    }
    let mut terms = Vec::with_capacity(values.len());
    for (i, (w, v)) in weights.iter().zip(values).enumerate() {
        if !v.is_finite() {
            return Err(Error::Numeric {
                index: i,
                reason: format!("non-finite residual {v}"),
            });
        }
        terms.push(w * v.abs().powf(q));
    }
    Ok(pairwise_sum(&terms).powf(1.0 / q))
}

/// Discrete norm of `residual` over a sample set, using the stored weights.
pub fn discrete_norm<F>(samples: &SampleSet, residual: F, q: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let values: Vec<f64> = samples.points().map(residual).collect();
    discrete_norm_values(&samples.weights, &values, q)
}

/// Composite tensor-product Gauss–Legendre rule, described per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub order: usize,
    pub panels: Vec<usize>,
}

impl QuadratureRule {
    pub fn new(order: usize, panels: Vec<usize>) -> Result<Self> {
        if !(1..=super::gauss::MAX_ORDER).contains(&order) {
            return input(format!("quadrature order {order} out of range"));
        }
        if panels.iter().any(|&p| p == 0) || panels.is_empty() {
            return input("panel counts must be positive");
        }
        Ok(QuadratureRule { order, panels })
    }

    pub fn uniform(order: usize, panels: usize, dim: usize) -> Self {
        QuadratureRule {
            order,
            panels: vec![panels; dim],
        }
    }

    pub fn refined(&self) -> Self {
        QuadratureRule {
            order: self.order,
            panels: self.panels.iter().map(|p| 2 * p).collect(),
        }
    }

    /// Tensor nodes and Lebesgue weights on a box; degenerate axes get one
    /// node of weight one.
    pub fn nodes(&self, b: &BoxDomain) -> (Vec<f64>, Vec<f64>) {
        let dim = b.dim();
        let rule = gauss_legendre(self.order);
        let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..dim)
            .map(|a| {
                if b.is_degenerate(a) {
                    return (vec![b.lo[a]], vec![1.0]);
                }
                let panels = self.panels.get(a).copied().unwrap_or(self.panels[0]);
                let h = b.len(a) / panels as f64;
                let mut xs = Vec::with_capacity(panels * self.order);
                let mut ws = Vec::with_capacity(panels * self.order);
                for p in 0..panels {
                    let lo = b.lo[a] + h * p as f64;
                    for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                        xs.push(lo + 0.5 * h * (t + 1.0));
                        ws.push(0.5 * h * w);
                    }
                }
                (xs, ws)
            })
            .collect();
        let total: usize = axes.iter().map(|(x, _)| x.len()).product();
        let mut coords = Vec::with_capacity(total * dim);
        let mut weights = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut w = 1.0;
            for (xs, ws) in &axes {
                let i = rem % xs.len();
                rem /= xs.len();
                coords.push(xs[i]);
                w *= ws[i];
            }
            weights.push(w);
        }
        (coords, weights)
    }

    pub fn node_count(&self, b: &BoxDomain) -> usize {
        (0..b.dim())
            .map(|a| {
                if b.is_degenerate(a) {
                    1
                } else {
                    self.order * self.panels.get(a).copied().unwrap_or(self.panels[0])
                }
            })
            .product()
    }

    /// `∫ f dx` (Lebesgue) over one box.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, b: &BoxDomain, f: F) -> f64 {
        let (coords, weights) = self.nodes(b);
        let terms: Vec<f64> = coords
            .chunks(b.dim())
            .zip(&weights)
            .map(|(x, w)| w * f(x))
            .collect();
        pairwise_sum(&terms)
    }

    /// `∫ f ρ dx` over a region.
    pub fn integrate_density<F: Fn(&[f64]) -> f64>(&self, region: &Region, f: F) -> f64 {
        let per_piece: Vec<f64> = region
            .pieces
            .iter()
            .enumerate()
            .map(|(k, b)| self.integrate(b, |x| f(x) * region.pdf(k, x)))
            .collect();
        pairwise_sum(&per_piece)
    }

    /// Reference nodes as a sample set with Lebesgue weights.
    pub fn samples(&self, region: &Region, target: SampleTarget) -> SampleSet {
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for b in &region.pieces {
            let (c, w) = self.nodes(b);
            coords.extend(c);
            weights.extend(w);
        }
        SampleSet {
            dim: region.dim(),
            coords,
            weights,
            kind: SampleKind::GaussLegendre,
            seed: None,
            target,
        }
    }
}

/// Relative tolerance for panel doubling.
pub const REFINE_RTOL: f64 = 1e-9;
/// Node budget per piece for auto-refinement.
pub const REFINE_NODE_CAP: usize = 1 << 21;

/// Result of an auto-refined integral. `converged == false` is the accuracy
/// warning: the node cap was hit before two successive levels agreed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certified {
    pub value: f64,
    pub rule: QuadratureRule,
    pub rel_change: f64,
    pub converged: bool,
}

/// Stopping rule for panel doubling: `|Δ| ≤ rtol |I| + atol`, at most
/// `max_nodes` nodes per piece.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refine {
    pub rtol: f64,
    pub atol: f64,
    pub max_nodes: usize,
}

impl Default for Refine {
    fn default() -> Self {
        Refine {
            rtol: REFINE_RTOL,
            atol: 1e-24,
            max_nodes: REFINE_NODE_CAP,
        }
    }
}

/// `∫ f ρ dx`, doubling panels from `rule` until successive levels agree.
pub fn integrate_refined<F>(rule: &QuadratureRule, region: &Region, f: F) -> Certified
where
    F: Fn(&[f64]) -> f64,
{
    integrate_refined_with(rule, region, f, Refine::default())
}

pub fn integrate_refined_with<F>(rule: &QuadratureRule, region: &Region, f: F, tol: Refine) -> Certified
where
    F: Fn(&[f64]) -> f64,
{
    let mut current = rule.clone();
    let mut prev = current.integrate_density(region, &f);
    loop {
        let next = current.refined();
        let too_big = region.pieces.iter().any(|b| next.node_count(b) > tol.max_nodes);
        if too_big {
            return Certified {
                value: prev,
                rule: current,
                rel_change: f64::INFINITY,
                converged: false,
            };
        }
        let value = next.integrate_density(region, &f);
        let change = (value - prev).abs();
        let rel = if value == 0.0 { change } else { change / value.abs() };
        if change <= tol.rtol * value.abs() + tol.atol {
            return Certified {
                value,
                rule: next,
                rel_change: rel,
                converged: true,
            };
        }
        if !value.is_finite() {
            return Certified {
                value,
                rule: next,
                rel_change: f64::NAN,
                converged: false,
            };
        }
        prev = value;
        current = next;
    }
}

/// `(∫ |f|^q ρ dx)^{1/q}` with auto-refinement. The certificate refers to the
/// integral of `|f|^q`.
pub fn continuous_norm<F>(rule: &QuadratureRule, region: &Region, integrand: F, q: f64) -> Result<Certified>
where
    F: Fn(&[f64]) -> f64,
{
    if q < 1.0 {
        return input(format!("norm exponent {q} below 1"));
    }
    let mut c = integrate_refined(rule, region, |x| integrand(x).abs().powf(q));
    if !c.value.is_finite() {
        return Err(Error::Numeric {
            index: 0,
            reason: format!("non-finite integral {}", c.value),
        });
    }
    c.value = c.value.powf(1.0 / q);
    Ok(c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub m: usize,
    pub mean_abs_error: f64,
    pub stddev: f64,
    /// Standard error of `mean_abs_error` over the trials.
    pub stderr: f64,
}

/// Sampling error of the Monte-Carlo mean of `integrand` against its
/// reference integral, for each sample size in `m_list`.
pub fn mc_convergence_probe<F>(
    integrand: F,
    region: &Region,
    reference_rule: &QuadratureRule,
    m_list: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<McRow>>
where
    F: Fn(&[f64]) -> f64,
{
    if trials < 2 {
        return input("need at least two trials");
    }
    let reference = integrate_refined(reference_rule, region, &integrand).value;
    let mut rows = Vec::with_capacity(m_list.len());
    for &m in m_list {
        let errs: Vec<f64> = (0..trials)
            .map(|t| {
                let s = sample_iid(region, m, derive_seed(seed, &[m as u64, t as u64]), SampleTarget::Interior)?;
                let terms: Vec<f64> = s.points().zip(&s.weights).map(|(x, w)| w * integrand(x)).collect();
                Ok((pairwise_sum(&terms) - reference).abs())
            })
            .collect::<Result<_>>()?;
        let n = errs.len() as f64;
        let mean = pairwise_sum(&errs) / n;
        let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
        rows.push(McRow {
            m,
            mean_abs_error: mean,
            stddev: var.sqrt(),
            stderr: (var / n).sqrt(),
        });
    }
    Ok(rows)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return input("slope fit needs at least two paired points");
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return input("log-log fit requires positive data");
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::Density;
    use std::f64::consts::PI;

    #[test]
    fn discrete_norm_examples() {
        let s = SampleSet {
            dim: 1,
            coords: vec![0.5],
            weights: vec![1.0],
            kind: SampleKind::Grid,
            seed: None,
            target: SampleTarget::Interior,
        };
        assert_eq!(discrete_norm(&s, |x| 2.0 * x[0], 2.0).unwrap(), 1.0);
        let g = super::super::grid_samples(&BoxDomain::unit(1), 4).unwrap();
        let v = discrete_norm(&g, |x| (2.0 * PI * 4.0 * x[0]).sin(), 2.0).unwrap();
        assert!(v < 1e-12);
        assert!(matches!(
            discrete_norm(&g, |_| f64::NAN, 2.0),
            Err(Error::Numeric { index: 0, .. })
        ));
    }

    #[test]
    fn counterexample_norm_is_half() {
        let r = Region::interior(&BoxDomain::unit(1), Density::Uniform);
        let rule = QuadratureRule::uniform(16, 4, 1);
        for m in [4.0, 16.0, 64.0] {
            let c = continuous_norm(&rule, &r, |x| (2.0 * PI * m * x[0]).sin(), 2.0).unwrap();
            assert!(c.converged);
            assert!((c.value * c.value - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_has_unit_norm() {
        let r = Region::interior(&BoxDomain::new(vec![-1.0, 0.0], vec![1.0, 3.0]).unwrap(), Density::Uniform);
        for p in [1.0, 1.5, 2.0, 3.0] {
            let c = continuous_norm(&QuadratureRule::uniform(4, 1, 2), &r, |_| 1.0, p).unwrap();
            assert!((c.value - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gl_weights_sum_to_measure() {
        let b = BoxDomain::new(vec![0.0, -1.0], vec![2.0, 2.0]).unwrap();
        let s = QuadratureRule::uniform(5, 3, 2).samples(&Region::interior(&b, Density::Uniform), SampleTarget::Interior);
        assert!((s.weights.iter().sum::<f64>() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn cap_reports_non_convergence() {
        let r = Region::interior(&BoxDomain::unit(1), Density::Uniform);
        // |x - 1/3|^{-1/2} never converges to 1e-9 under panel doubling
        let c = integrate_refined(&QuadratureRule::uniform(2, 1, 1), &r, |x| (x[0] - 1.0 / 3.0).abs().powf(-0.5));
        assert!(!c.converged);
    }

    #[test]
    fn mc_constant_integrand_is_exact() {
        let r = Region::interior(&BoxDomain::unit(1), Density::Uniform);
        let rows = mc_convergence_probe(|_| 3.0, &r, &QuadratureRule::uniform(4, 1, 1), &[4, 16], 4, 1).unwrap();
        assert!(rows.iter().all(|row| row.mean_abs_error < 1e-15));
    }

    #[test]
    fn slope_fit() {
        let xs = [1.0, 10.0, 100.0];
        let ys = [1.0, 0.1, 0.01];
        assert!((fit_loglog_slope(&xs, &ys).unwrap() + 1.0).abs() < 1e-12);
    }
}
