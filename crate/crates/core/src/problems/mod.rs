//! Linear problems `Au = f` in Ω, `Bu = g` on Γ.

mod coeffs;
mod fractional;
mod norms;
mod presets;

use serde::{Deserialize, Serialize};

use crate::autodiff::Scalar;
use crate::error::{input, Error, Result};
use crate::geometry::{BoxDomain, Face, Region};
use crate::models::{AnalyticFn, Evaluable};
use crate::quadrature::Density;

pub use coeffs::{
    min_eigenvalue_sym, AdvectionCoeffs, AdvectionRoute, EllipticCoeffs, FracQuadrature, FractionalSpec, LocalCoeffs,
    CERTIFICATE_POINTS,
};
pub use fractional::{apply_frac_lap, frac_constant, FracStencil};
pub use norms::{norm_of, probe_stability_constant, v_norm_distance, NormKind, StabilityProbe};
pub use presets::{preset, probe_family, recast_time_dependent, TimeDependentAdvection, PRESETS};

/// Point tolerance for domain and face membership.
pub const GEOM_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub enum Operator {
    Elliptic(EllipticCoeffs),
    AdvectionReaction(AdvectionCoeffs),
    FractionalAdr(FractionalSpec),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryOp {
    DirichletTrace,
    InflowTrace,
    ExteriorIdentity,
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub name: String,
    pub domain: BoxDomain,
    pub operator: Operator,
    pub boundary: BoundaryOp,
    pub f: AnalyticFn,
    pub g: AnalyticFn,
    pub p: f64,
    pub rho: Density,
    pub v_norm: NormKind,
    pub x_norm: NormKind,
    pub exact: Option<AnalyticFn>,
}

impl ProblemSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        domain: BoxDomain,
        operator: Operator,
        f: AnalyticFn,
        g: AnalyticFn,
        p: f64,
        v_norm: NormKind,
        x_norm: NormKind,
        exact: Option<AnalyticFn>,
    ) -> Result<Self> {
        if !(p >= 1.0) {
            return input(format!("norm exponent p = {p} below 1"));
        }
        let d = domain.dim();
        if f.dim() != d || g.dim() != d || exact.as_ref().is_some_and(|e| e.dim() != d) {
            return input("data dimension does not match the domain");
        }
        let boundary = match &operator {
            Operator::Elliptic(_) => BoundaryOp::DirichletTrace,
            Operator::AdvectionReaction(_) => BoundaryOp::InflowTrace,
            Operator::FractionalAdr(_) => BoundaryOp::ExteriorIdentity,
        };
        Ok(ProblemSpec {
            name: name.into(),
            domain,
            operator,
            boundary,
            f,
            g,
            p,
            rho: Density::Uniform,
            v_norm,
            x_norm,
            exact,
        })
    }

    pub fn with_density(mut self, rho: Density) -> Result<Self> {
        rho.validate(&Region::interior(&self.domain, Density::Uniform))?;
        self.rho = rho;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn interior_region(&self) -> Region {
        Region::interior(&self.domain, self.rho.clone())
    }

    /// Γ with the normalized uniform measure. For the exterior identity the
    /// datum is imposed at ∂Ω, the only part of R∖Ω where a compactly
    /// supported candidate is not zero by construction when `R = |Ω|/2`.
    pub fn boundary_region(&self) -> Region {
        match &self.operator {
            Operator::AdvectionReaction(a) => Region::faces(&self.domain, &a.inflow),
            _ => Region::faces(&self.domain, &self.domain.faces()),
        }
    }

    pub fn boundary_faces(&self) -> Vec<Face> {
        match &self.operator {
            Operator::AdvectionReaction(a) => a.inflow.clone(),
            _ => self.domain.faces(),
        }
    }

    /// Weight multiplying the boundary measure: `|b.n|` on inflow faces.
    pub fn boundary_weight(&self, x: &[f64]) -> Result<f64> {
        match &self.operator {
            Operator::AdvectionReaction(a) => {
                let face = a
                    .inflow
                    .iter()
                    .find(|&&f| self.domain.on_face(x, f, GEOM_TOL))
                    .ok_or_else(|| Error::Input(format!("{x:?} is not on the inflow boundary")))?;
                Ok(a.flux_weight(x, *face))
            }
            _ => Ok(1.0),
        }
    }

    /// Coefficients of a local operator at `x` (`None` for the fractional one).
    pub fn local_coeffs(&self, x: &[f64]) -> Option<LocalCoeffs> {
        match &self.operator {
            Operator::Elliptic(e) => Some(e.at(x)),
            Operator::AdvectionReaction(a) => Some(a.at(x)),
            Operator::FractionalAdr(_) => None,
        }
    }

    fn check_interior(&self, x: &[f64]) -> Result<()> {
        if !self.domain.contains(x, GEOM_TOL) {
            return input(format!("{x:?} lies outside Ω"));
        }
        Ok(())
    }

    pub fn apply_a<S: Scalar, E: Evaluable<S> + ?Sized>(&self, u: &E, x: &[f64]) -> Result<S> {
        self.check_interior(x)?;
        match &self.operator {
            Operator::FractionalAdr(spec) => apply_frac_lap(spec, u, x[0]),
            _ => {
                let k = self.local_coeffs(x).expect("local operator");
                Ok(k.apply(&u.jet(x)?))
            }
        }
    }

    pub fn apply_b<S: Scalar, E: Evaluable<S> + ?Sized>(&self, u: &E, x: &[f64]) -> Result<S> {
        match self.boundary {
            BoundaryOp::DirichletTrace => {
                if !self.domain.faces().iter().any(|&f| self.domain.on_face(x, f, GEOM_TOL)) {
                    return input(format!("{x:?} is not on ∂Ω"));
                }
            }
            BoundaryOp::InflowTrace => {
                self.boundary_weight(x)?;
            }
            BoundaryOp::ExteriorIdentity => {
                let inside_open = x
                    .iter()
                    .enumerate()
                    .all(|(a, &v)| v > self.domain.lo[a] + GEOM_TOL && v < self.domain.hi[a] - GEOM_TOL);
                if inside_open {
                    return input(format!("{x:?} lies inside Ω, not in R∖Ω"));
                }
                if let Operator::FractionalAdr(spec) = &self.operator {
                    if x[0].abs() > spec.support_radius {
                        return Ok(S::cst(0.0));
                    }
                }
            }
        }
        u.value(x)
    }

    /// `f - Au`.
    pub fn interior_residual<S: Scalar, E: Evaluable<S> + ?Sized>(&self, u: &E, x: &[f64]) -> Result<S> {
        let au = self.apply_a(u, x)?;
        Ok(S::cst(self.f.eval(x).value) - au)
    }

    /// `Bu - g`.
    pub fn boundary_residual<S: Scalar, E: Evaluable<S> + ?Sized>(&self, u: &E, x: &[f64]) -> Result<S> {
        let bu = self.apply_b(u, x)?;
        Ok(bu - S::cst(self.g.eval(x).value))
    }

    /// Largest `|A[exact] - f|` and `|B[exact] - g|` over random interior
    /// points and the boundary probe points.
    pub fn manufactured_defect(&self, points: usize, seed: u64) -> Result<(f64, f64)> {
        let Some(exact) = &self.exact else {
            return input(format!("problem {} has no exact solution", self.name));
        };
        let s = crate::quadrature::sample_iid(
            &Region::interior(&self.domain, Density::Uniform),
            points,
            seed,
            crate::quadrature::SampleTarget::Interior,
        )?;
        let mut ri: f64 = 0.0;
        for x in s.points() {
            let r: f64 = self.interior_residual(exact, x)?;
            ri = ri.max(r.abs());
        }
        let b = crate::quadrature::sample_iid(
            &self.boundary_region(),
            points,
            seed ^ 1,
            crate::quadrature::SampleTarget::Boundary,
        )?;
        let mut rb: f64 = 0.0;
        for x in b.points() {
            let r: f64 = self.boundary_residual(exact, x)?;
            rb = rb.max(r.abs());
        }
        Ok((ri, rb))
    }
}

impl LocalCoeffs {
    /// `-Σ a_ij u_ij + Σ b_i u_i + c u`; zero coefficients are skipped.
    pub fn apply<S: Scalar>(&self, u: &crate::autodiff::Jet2<S>) -> S {
        let mut s = if self.c != 0.0 { u.value.scale(self.c) } else { S::cst(0.0) };
        for i in 0..self.dim {
            if self.b[i] != 0.0 {
                s = s + u.d1(i).scale(self.b[i]);
            }
        }
        for i in 0..self.dim {
            for j in 0..self.dim {
                if self.a[i][j] != 0.0 {
                    s = s - u.d2(i, j).scale(self.a[i][j]);
                }
            }
        }
        s
    }
}
