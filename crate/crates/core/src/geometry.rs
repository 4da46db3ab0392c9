//! Axis-aligned boxes, their faces, and measured regions built from them.

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::quadrature::Density;

/// Closed axis-aligned box. An axis with `lo == hi` is degenerate, which is
/// how faces (and, in one dimension, boundary points) are represented.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// One face of a box: the side `upper` (x = hi) or lower (x = lo) of `axis`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Face {
    pub axis: usize,
    pub upper: bool,
}

impl Face {
    pub fn outward_normal(&self, dim: usize) -> Vec<f64> {
        let mut n = vec![0.0; dim];
        n[self.axis] = if self.upper { 1.0 } else { -1.0 };
        n
    }
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return input("box bounds must be non-empty and of equal length");
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
            return input(format!("invalid box bounds {lo:?} .. {hi:?}"));
        }
        Ok(BoxDomain { lo, hi })
    }

    pub fn interval(a: f64, b: f64) -> Self {
        BoxDomain::new(vec![a], vec![b]).expect("invalid interval")
    }

    pub fn unit(dim: usize) -> Self {
        BoxDomain {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn is_degenerate(&self, axis: usize) -> bool {
        self.lo[axis] == self.hi[axis]
    }

    /// Measure over the non-degenerate axes (a point has measure 1).
    pub fn measure(&self) -> f64 {
        (0..self.dim())
            .filter(|&a| !self.is_degenerate(a))
            .map(|a| self.len(a))
            .product()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .enumerate()
                .all(|(a, &v)| v >= self.lo[a] - tol && v <= self.hi[a] + tol)
    }

    pub fn faces(&self) -> Vec<Face> {
        (0..self.dim())
            .flat_map(|axis| [Face { axis, upper: false }, Face { axis, upper: true }])
            .collect()
    }

    pub fn face_box(&self, face: Face) -> BoxDomain {
        let mut b = self.clone();
        let v = if face.upper { self.hi[face.axis] } else { self.lo[face.axis] };
        b.lo[face.axis] = v;
        b.hi[face.axis] = v;
        b
    }

    pub fn on_face(&self, x: &[f64], face: Face, tol: f64) -> bool {
        let v = if face.upper { self.hi[face.axis] } else { self.lo[face.axis] };
        self.contains(x, tol) && (x[face.axis] - v).abs() <= tol
    }

    /// Uniform tiling with `cells[a]` cells along axis `a`.
    pub fn tile(&self, cells: &[usize]) -> Vec<BoxDomain> {
        let dim = self.dim();
        let mut out = vec![BoxDomain {
            lo: Vec::new(),
            hi: Vec::new(),
        }];
        for a in 0..dim {
            let n = cells[a].max(1);
            let h = self.len(a) / n as f64;
            let mut next = Vec::with_capacity(out.len() * n);
            for b in &out {
                for k in 0..n {
                    let mut c = b.clone();
                    c.lo.push(self.lo[a] + h * k as f64);
                    c.hi.push(if k + 1 == n { self.hi[a] } else { self.lo[a] + h * (k + 1) as f64 });
                    next.push(c);
                }
            }
            out = next;
        }
        out
    }
}

/// A finite union of boxes carrying a probability density.
#[derive(Clone, Debug)]
pub struct Region {
    pub pieces: Vec<BoxDomain>,
    pub density: Density,
}

impl Region {
    pub fn interior(domain: &BoxDomain, density: Density) -> Self {
        Region {
            pieces: vec![domain.clone()],
            density,
        }
    }

    /// Uniform probability on the selected faces.
    pub fn faces(domain: &BoxDomain, faces: &[Face]) -> Self {
        Region {
            pieces: faces.iter().map(|&f| domain.face_box(f)).collect(),
            density: Density::Uniform,
        }
    }

    pub fn uniform(pieces: Vec<BoxDomain>) -> Self {
        Region {
            pieces,
            density: Density::Uniform,
        }
    }

    pub fn dim(&self) -> usize {
        self.pieces.first().map(|p| p.dim()).unwrap_or(0)
    }

    pub fn total_measure(&self) -> f64 {
        self.pieces.iter().map(|p| p.measure()).sum()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.pieces.iter().any(|p| p.contains(x, tol))
    }

    /// Probability density at `x` in piece `piece`.
    pub fn pdf(&self, piece: usize, x: &[f64]) -> f64 {
        match &self.density {
            Density::Uniform => 1.0 / self.total_measure(),
            Density::Product(axes) => {
                let b = &self.pieces[piece];
                axes.iter()
                    .enumerate()
                    .map(|(a, ad)| {
                        if b.is_degenerate(a) {
                            1.0
                        } else {
                            ad.pdf((x[a] - b.lo[a]) / b.len(a)) / b.len(a)
                        }
                    })
                    .product()
            }
        }
    }
}
