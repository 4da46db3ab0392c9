use crate::autodiff::MAX_DIM;
use crate::error::{input, Error, Result};
use crate::geometry::{BoxDomain, Face, Region};
use crate::models::AnalyticFn;
use crate::quadrature::{sample_iid, Density, SampleTarget};

/// Number of random points used for coefficient certificates.
pub const CERTIFICATE_POINTS: usize = 1000;
const CERTIFICATE_SEED: u64 = 0x5eed;

fn certificate_points(domain: &BoxDomain) -> Result<Vec<Vec<f64>>> {
    let s = sample_iid(
        &Region::interior(domain, Density::Uniform),
        CERTIFICATE_POINTS,
        CERTIFICATE_SEED,
        SampleTarget::Interior,
    )?;
    Ok(s.points().map(|p| p.to_vec()).collect())
}

/// Coefficient values of a local operator at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalCoeffs {
    pub dim: usize,
    pub a: [[f64; MAX_DIM]; MAX_DIM],
    pub b: [f64; MAX_DIM],
    pub c: f64,
}

/// Smallest eigenvalue of a symmetric matrix of size 1, 2 or 3 (closed form).
pub fn min_eigenvalue_sym(a: &[[f64; MAX_DIM]; MAX_DIM], dim: usize) -> f64 {
    match dim {
        1 => a[0][0],
        2 => {
            let tr = a[0][0] + a[1][1];
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            let disc = ((tr * tr / 4.0) - det).max(0.0).sqrt();
            tr / 2.0 - disc
        }
        _ => {
            // trigonometric solution of the characteristic cubic
            let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
            let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
            if p1 == 0.0 {
                return a[0][0].min(a[1][1]).min(a[2][2]);
            }
            let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
            let p = (p2 / 6.0).sqrt();
            let mut bm = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    bm[i][j] = (a[i][j] - if i == j { q } else { 0.0 }) / p;
                }
            }
            let det = bm[0][0] * (bm[1][1] * bm[2][2] - bm[1][2] * bm[2][1])
                - bm[0][1] * (bm[1][0] * bm[2][2] - bm[1][2] * bm[2][0])
                + bm[0][2] * (bm[1][0] * bm[2][1] - bm[1][1] * bm[2][0]);
            let r = (det / 2.0).clamp(-1.0, 1.0);
            let phi = r.acos() / 3.0;
            q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos()
        }
    }
}

/// `A = -sum a_ij d_i d_j + sum b_i d_i + c`.
#[derive(Clone, Debug)]
pub struct EllipticCoeffs {
    pub a: Vec<Vec<AnalyticFn>>,
    pub b: Vec<AnalyticFn>,
    pub c: AnalyticFn,
    /// Sampled uniform-ellipticity constant.
    pub lambda0: f64,
}

impl EllipticCoeffs {
    pub fn new(domain: &BoxDomain, a: Vec<Vec<AnalyticFn>>, b: Vec<AnalyticFn>, c: AnalyticFn) -> Result<Self> {
        let d = domain.dim();
        if a.len() != d || a.iter().any(|r| r.len() != d) || b.len() != d {
            return input("elliptic coefficient shapes do not match the dimension");
        }
        let mut e = EllipticCoeffs { a, b, c, lambda0: 0.0 };
        let mut lambda0 = f64::INFINITY;
        for x in certificate_points(domain)? {
            let k = e.at(&x);
            for i in 0..d {
                for j in 0..i {
                    if k.a[i][j] != k.a[j][i] {
                        return input("diffusion matrix is not symmetric");
                    }
                }
            }
            lambda0 = lambda0.min(min_eigenvalue_sym(&k.a, d));
        }
        if !(lambda0 > 0.0) {
            return Err(Error::Config(format!("operator not uniformly elliptic: sampled min eigenvalue {lambda0}")));
        }
        e.lambda0 = lambda0;
        Ok(e)
    }

    /// `-Δ + c` with constant `c`.
    pub fn laplacian(domain: &BoxDomain, c: f64) -> Result<Self> {
        let d = domain.dim();
        let a = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| AnalyticFn::constant(if i == j { "1" } else { "0" }, d, if i == j { 1.0 } else { 0.0 }))
                    .collect()
            })
            .collect();
        let b = (0..d).map(|_| AnalyticFn::zero(d)).collect();
        EllipticCoeffs::new(domain, a, b, AnalyticFn::constant(format!("{c}"), d, c))
    }

    pub fn at(&self, x: &[f64]) -> LocalCoeffs {
        let d = x.len();
        let mut k = LocalCoeffs {
            dim: d,
            a: [[0.0; MAX_DIM]; MAX_DIM],
            b: [0.0; MAX_DIM],
            c: self.c.eval(x).value,
        };
        for i in 0..d {
            k.b[i] = self.b[i].eval(x).value;
            for j in 0..d {
                k.a[i][j] = self.a[i][j].eval(x).value;
            }
        }
        k
    }
}

/// How the Poincaré condition is met.
#[derive(Clone, Debug)]
pub enum AdvectionRoute {
    /// `c - div(b)/p >= mu0 > 0`.
    Friedrichs,
    /// `c - div(b)/p - b.grad(eta)/p >= mu1 > 0` for the given Lipschitz eta.
    Eta(AnalyticFn),
}

/// `A = b.grad + c` with data on the inflow boundary.
#[derive(Clone, Debug)]
pub struct AdvectionCoeffs {
    pub b: Vec<AnalyticFn>,
    pub c: AnalyticFn,
    pub route: AdvectionRoute,
    /// Sampled positivity constant of the chosen route.
    pub mu0: f64,
    pub inflow: Vec<Face>,
    pub outflow: Vec<Face>,
}

impl AdvectionCoeffs {
    pub fn new(domain: &BoxDomain, b: Vec<AnalyticFn>, c: AnalyticFn, route: AdvectionRoute, p: f64) -> Result<Self> {
        let d = domain.dim();
        if b.len() != d {
            return input("velocity field has the wrong number of components");
        }
        let mut inflow = Vec::new();
        let mut outflow = Vec::new();
        for face in domain.faces() {
            let (mut neg, mut pos) = (false, false);
            for x in face_probe_points(domain, face) {
                let bn = b[face.axis].eval(&x).value * if face.upper { 1.0 } else { -1.0 };
                neg |= bn < 0.0;
                pos |= bn > 0.0;
            }
            match (neg, pos) {
                (true, true) => {
                    return Err(Error::Config(format!(
                        "b.n changes sign on face (axis {}, upper {}); inflow and outflow must be separated",
                        face.axis, face.upper
                    )))
                }
                (true, false) => inflow.push(face),
                (false, true) => outflow.push(face),
                _ => {}
            }
        }
        let mut a = AdvectionCoeffs {
            b,
            c,
            route,
            mu0: 0.0,
            inflow,
            outflow,
        };
        let mut mu0 = f64::INFINITY;
        for x in certificate_points(domain)? {
            mu0 = mu0.min(a.positivity(&x, p));
        }
        if !(mu0 > 0.0) {
            return Err(Error::Config(format!("advection positivity fails: sampled minimum {mu0}")));
        }
        a.mu0 = mu0;
        Ok(a)
    }

    pub fn divergence(&self, x: &[f64]) -> f64 {
        self.b.iter().enumerate().map(|(i, bi)| bi.eval(x).d1(i)).sum()
    }

    fn positivity(&self, x: &[f64], p: f64) -> f64 {
        let base = self.c.eval(x).value - self.divergence(x) / p;
        match &self.route {
            AdvectionRoute::Friedrichs => base,
            AdvectionRoute::Eta(eta) => {
                let g = eta.eval(x);
                let b_grad: f64 = self.b.iter().enumerate().map(|(i, bi)| bi.eval(x).value * g.d1(i)).sum();
                base - b_grad / p
            }
        }
    }

    pub fn at(&self, x: &[f64]) -> LocalCoeffs {
        let d = x.len();
        let mut k = LocalCoeffs {
            dim: d,
            a: [[0.0; MAX_DIM]; MAX_DIM],
            b: [0.0; MAX_DIM],
            c: self.c.eval(x).value,
        };
        for i in 0..d {
            k.b[i] = self.b[i].eval(x).value;
        }
        k
    }

    /// `|b.n|` at a boundary point on `face`.
    pub fn flux_weight(&self, x: &[f64], face: Face) -> f64 {
        self.b[face.axis].eval(x).value.abs()
    }
}

/// Corner and interior points of a face used for sign checks.
fn face_probe_points(domain: &BoxDomain, face: Face) -> Vec<Vec<f64>> {
    let fb = domain.face_box(face);
    let d = fb.dim();
    let n: usize = 9;
    let free: Vec<usize> = (0..d).filter(|&a| !fb.is_degenerate(a)).collect();
    let total = n.pow(free.len() as u32);
    (0..total)
        .map(|flat| {
            let mut x = fb.lo.clone();
            let mut rem = flat;
            for &a in &free {
                let i = rem % n;
                rem /= n;
                x[a] = fb.lo[a] + fb.len(a) * i as f64 / (n - 1) as f64;
            }
            x
        })
        .collect()
}

/// Quadrature resolution of the fractional integral.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FracQuadrature {
    /// Gauss–Legendre order per panel.
    pub order: usize,
    /// Largest offset handled by the Taylor expansion instead of quadrature.
    /// Smaller values amplify roundoff like `y^{-α}`.
    pub taylor_cutoff: f64,
    /// Geometric levels towards each support kink.
    pub kink_levels: usize,
}

impl Default for FracQuadrature {
    fn default() -> Self {
        FracQuadrature {
            order: 12,
            taylor_cutoff: 0.02,
            kink_levels: 26,
        }
    }
}

/// `A = (-Δ)^{α/2} + b d/dx + c` in one dimension, with solutions supported
/// in `[-R, R]`.
#[derive(Clone, Debug)]
pub struct FractionalSpec {
    pub alpha: f64,
    pub b: AnalyticFn,
    pub c: AnalyticFn,
    pub support_radius: f64,
    /// Far-field cut; `None` uses `R + |x| + 1` at each point.
    pub truncation: Option<f64>,
    pub quadrature: FracQuadrature,
    /// Sampled lower bound of `c - b'/2`.
    pub c0: f64,
}

impl FractionalSpec {
    pub fn new(domain: &BoxDomain, alpha: f64, b: AnalyticFn, c: AnalyticFn, support_radius: f64) -> Result<Self> {
        if domain.dim() != 1 {
            return input("fractional operator implemented in one dimension only");
        }
        if !(alpha > 1.0 && alpha < 2.0) {
            return input(format!("alpha = {alpha} outside (1, 2)"));
        }
        if support_radius < domain.lo[0].abs().max(domain.hi[0].abs()) {
            return input("support radius must cover the domain");
        }
        let mut c0 = f64::INFINITY;
        for x in certificate_points(domain)? {
            c0 = c0.min(c.eval(&x).value - 0.5 * b.eval(&x).d1(0));
        }
        if !(c0 > 0.0) {
            return Err(Error::Config(format!("fractional positivity 2c - b' >= 2c0 > 0 fails: c0 = {c0}")));
        }
        Ok(FractionalSpec {
            alpha,
            b,
            c,
            support_radius,
            truncation: None,
            quadrature: FracQuadrature::default(),
            c0,
        })
    }
}
