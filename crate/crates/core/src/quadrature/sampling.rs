use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gauss::composite;
use crate::error::{input, Result};
use crate::geometry::{BoxDomain, Region};

/// Reproducible generator for `(seed, stream)`. ChaCha is counter based, so
/// distinct streams are disjoint and independent of evaluation order.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a base seed with a key path into a new seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, keys: &[u64]) -> u64 {
    let mut z = seed ^ 0x9E37_79B9_7F4A_7C15;
    for &k in keys {
        z = z.wrapping_add(k.wrapping_mul(0xBF58_476D_1CE4_E5B9)).wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

type AxisFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Per-axis density on the normalized coordinate `t ∈ [0, 1]`.
#[derive(Clone)]
pub enum AxisDensity {
    Uniform,
    /// pdf `(k + 1) t^k`, `k > -1`.
    Power(f64),
    Custom { pdf: AxisFn, inv_cdf: AxisFn },
}

impl fmt::Debug for AxisDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisDensity::Uniform => write!(f, "Uniform"),
            AxisDensity::Power(k) => write!(f, "Power({k})"),
            AxisDensity::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl AxisDensity {
    pub fn pdf(&self, t: f64) -> f64 {
        match self {
            AxisDensity::Uniform => 1.0,
            AxisDensity::Power(k) => (k + 1.0) * t.powf(*k),
            AxisDensity::Custom { pdf, .. } => pdf(t),
        }
    }

    pub fn inv_cdf(&self, u: f64) -> f64 {
        match self {
            AxisDensity::Uniform => u,
            AxisDensity::Power(k) => u.powf(1.0 / (k + 1.0)),
            AxisDensity::Custom { inv_cdf, .. } => inv_cdf(u),
        }
    }
}

/// Sampling density ρ on a region.
#[derive(Clone, Debug, Default)]
pub enum Density {
    /// Normalized uniform measure over all pieces.
    #[default]
    Uniform,
    /// Product of per-axis densities; only valid on single-box regions.
    Product(Vec<AxisDensity>),
}

impl Density {
    /// Checks that the density integrates to one over `region` (to 1e-8).
    pub fn validate(&self, region: &Region) -> Result<()> {
        match self {
            Density::Uniform => {
                if region.total_measure() > 0.0 {
                    Ok(())
                } else {
                    input("uniform density over a region of zero measure")
                }
            }
            Density::Product(axes) => {
                if region.pieces.len() != 1 {
                    return input("product densities require a single-box region");
                }
                if axes.len() != region.dim() {
                    return input("product density arity does not match region dimension");
                }
                for (a, ad) in axes.iter().enumerate() {
                    if let AxisDensity::Power(k) = ad {
                        if *k <= -1.0 {
                            return input(format!("power density exponent {k} not normalizable"));
                        }
                    }
                    let (ts, ws) = composite(0.0, 1.0, 20, 64);
                    let mass: f64 = ts.iter().zip(&ws).map(|(t, w)| w * ad.pdf(*t)).sum();
                    if !mass.is_finite() || (mass - 1.0).abs() > 1e-8 {
                        return input(format!("density on axis {a} integrates to {mass}, not 1"));
                    }
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    IidMc,
    Grid,
    GaussLegendre,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleTarget {
    Interior,
    Boundary,
}

/// Weighted point set. For `iid_mc` and `grid` the weights integrate against
/// the sampling density (they sum to one); for `gauss_legendre` they are raw
/// Lebesgue weights summing to the region measure.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleSet {
    pub dim: usize,
    pub coords: Vec<f64>,
    pub weights: Vec<f64>,
    pub kind: SampleKind,
    pub seed: Option<u64>,
    pub target: SampleTarget,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks(self.dim)
    }

    /// Weights against the density of `region` (probability weights).
    pub fn density_weights(&self, region: &Region) -> Vec<f64> {
        match self.kind {
            SampleKind::IidMc | SampleKind::Grid => self.weights.clone(),
            SampleKind::GaussLegendre => self
                .points()
                .zip(&self.weights)
                .map(|(x, w)| {
                    let piece = region
                        .pieces
                        .iter()
                        .position(|p| p.contains(x, 1e-12))
                        .unwrap_or(0);
                    w * region.pdf(piece, x)
                })
                .collect(),
        }
    }

    /// CSV export `x0,..,x{d-1},weight` for audit.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for a in 0..self.dim {
            s.push_str(&format!("x{a},"));
        }
        s.push_str("weight\n");
        for (x, w) in self.points().zip(&self.weights) {
            for v in x {
                s.push_str(&format!("{v},"));
            }
            s.push_str(&format!("{w}\n"));
        }
        s
    }
}

fn uniform_in(b: &BoxDomain, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
    for a in 0..b.dim() {
        if b.is_degenerate(a) {
            out.push(b.lo[a]);
        } else {
            let u: f64 = rng.random();
            out.push(b.lo[a] + u * b.len(a));
        }
    }
}

/// `m` i.i.d. draws from the region's density; weights `1/m`.
pub fn sample_iid(region: &Region, m: usize, seed: u64, target: SampleTarget) -> Result<SampleSet> {
    if m == 0 {
        return input("sample count must be at least 1");
    }
    if region.pieces.is_empty() {
        return input("cannot sample an empty region");
    }
    region.density.validate(region)?;
    let dim = region.dim();
    let mut rng = stream_rng(seed, 0);
    let mut coords = Vec::with_capacity(m * dim);
    match &region.density {
        Density::Uniform => {
            let total = region.total_measure();
            let cdf: Vec<f64> = region
                .pieces
                .iter()
                .scan(0.0, |acc, p| {
                    *acc += p.measure() / total;
                    Some(*acc)
                })
                .collect();
            for _ in 0..m {
                let piece = if region.pieces.len() == 1 {
                    0
                } else {
                    let u: f64 = rng.random();
                    cdf.iter().position(|&c| u < c).unwrap_or(region.pieces.len() - 1)
                };
                uniform_in(&region.pieces[piece], &mut rng, &mut coords);
            }
        }
        Density::Product(axes) => {
            let b = &region.pieces[0];
            for _ in 0..m {
                for (a, ad) in axes.iter().enumerate() {
                    if b.is_degenerate(a) {
                        coords.push(b.lo[a]);
                    } else {
                        let u: f64 = rng.random();
                        coords.push(b.lo[a] + ad.inv_cdf(u) * b.len(a));
                    }
                }
            }
        }
    }
    Ok(SampleSet {
        dim,
        coords,
        weights: vec![1.0 / m as f64; m],
        kind: SampleKind::IidMc,
        seed: Some(seed),
        target,
    })
}

/// Uniform grid `lo + i h`, `i = 1..=n` per axis, weights `1/n^d`. In one
/// dimension on (0, 1) these are the points `i/n`.
pub fn grid_samples(domain: &BoxDomain, n: usize) -> Result<SampleSet> {
    if n == 0 {
        return input("grid size must be at least 1");
    }
    let dim = domain.dim();
    let total = n.pow(dim as u32);
    let mut coords = Vec::with_capacity(total * dim);
    for flat in 0..total {
        let mut rem = flat;
        for a in 0..dim {
            let i = rem % n + 1;
            rem /= n;
            coords.push(domain.lo[a] + domain.len(a) * i as f64 / n as f64);
        }
    }
    Ok(SampleSet {
        dim,
        coords,
        weights: vec![1.0 / total as f64; total],
        kind: SampleKind::Grid,
        seed: None,
        target: SampleTarget::Interior,
    })
}

/// Every point piece of a boundary region with equal weight (the d = 1
/// counting-measure convention).
pub fn boundary_atoms(region: &Region) -> Result<SampleSet> {
    if region.pieces.iter().any(|p| (0..p.dim()).any(|a| !p.is_degenerate(a))) {
        return input("boundary_atoms requires a region made of points");
    }
    let n = region.pieces.len();
    Ok(SampleSet {
        dim: region.dim(),
        coords: region.pieces.iter().flat_map(|p| p.lo.clone()).collect(),
        weights: vec![1.0 / n as f64; n],
        kind: SampleKind::Grid,
        seed: None,
        target: SampleTarget::Boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Face;

    #[test]
    fn reproducible_uniform_draws() {
        let r = Region::interior(&BoxDomain::unit(1), Density::Uniform);
        let a = sample_iid(&r, 4, 7, SampleTarget::Interior).unwrap();
        let b = sample_iid(&r, 4, 7, SampleTarget::Interior).unwrap();
        assert_eq!(a.coords, b.coords);
        assert_eq!(a.weights, vec![0.25; 4]);
    }

    #[test]
    fn uniform_mean_within_clt_band() {
        let r = Region::interior(&BoxDomain::unit(1), Density::Uniform);
        let s = sample_iid(&r, 100_000, 11, SampleTarget::Interior).unwrap();
        let mean = s.coords.iter().sum::<f64>() / s.len() as f64;
        assert!((mean - 0.5).abs() < 0.005);
    }

    #[test]
    fn boundary_draws_balanced() {
        let d = BoxDomain::unit(1);
        let r = Region::faces(&d, &d.faces());
        let s = sample_iid(&r, 10_000, 3, SampleTarget::Boundary).unwrap();
        assert!(s.coords.iter().all(|&x| x == 0.0 || x == 1.0));
        let zeros = s.coords.iter().filter(|&&x| x == 0.0).count() as f64 / 1e4;
        assert!((zeros - 0.5).abs() < 0.02);
        let _ = Face { axis: 0, upper: true };
    }

    #[test]
    fn non_normalizable_density_rejected() {
        let r = Region::interior(&BoxDomain::unit(1), Density::Product(vec![AxisDensity::Power(-1.5)]));
        assert!(sample_iid(&r, 10, 0, SampleTarget::Interior).is_err());
        let bad = AxisDensity::Custom {
            pdf: Arc::new(|_| 2.0),
            inv_cdf: Arc::new(|u| u),
        };
        let r = Region::interior(&BoxDomain::unit(1), Density::Product(vec![bad]));
        assert!(sample_iid(&r, 10, 0, SampleTarget::Interior).is_err());
    }

    #[test]
    fn power_density_mean() {
        // pdf 2t has mean 2/3
        let r = Region::interior(&BoxDomain::unit(1), Density::Product(vec![AxisDensity::Power(1.0)]));
        let s = sample_iid(&r, 50_000, 5, SampleTarget::Interior).unwrap();
        let mean = s.coords.iter().sum::<f64>() / s.len() as f64;
        assert!((mean - 2.0 / 3.0).abs() < 0.006);
    }

    #[test]
    fn grid_points() {
        let g = grid_samples(&BoxDomain::unit(1), 4).unwrap();
        assert_eq!(g.coords, vec![0.25, 0.5, 0.75, 1.0]);
    }
}
