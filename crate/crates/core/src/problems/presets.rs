use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use super::{
    AdvectionCoeffs, AdvectionRoute, EllipticCoeffs, FractionalSpec, NormKind, Operator, ProblemSpec, GEOM_TOL,
};
use crate::autodiff::Jet2;
use crate::error::{input, Result};
use crate::geometry::BoxDomain;
use crate::models::AnalyticFn;

pub const PRESETS: [&str; 5] = [
    "poisson1d_sin",
    "poisson2d_product",
    "advreac1d_friedrichs",
    "advreac_spacetime",
    "frac_adr_1d",
];

/// Fractional order of the `frac_adr_1d` preset.
pub const FRAC_PRESET_ALPHA: f64 = 1.5;

fn cst(x: &[Jet2<f64>], c: f64) -> Jet2<f64> {
    Jet2::constant(c, x[0].dim())
}

/// Transport data on Ω × (0, T) before recasting.
#[derive(Clone, Debug)]
pub struct TimeDependentAdvection {
    pub name: String,
    pub space: BoxDomain,
    pub horizon: f64,
    /// Spatial velocity as functions of `(x, t)`.
    pub b: Vec<AnalyticFn>,
    pub c: AnalyticFn,
    pub f: AnalyticFn,
    /// Initial datum, a function of `x`.
    pub u0: AnalyticFn,
    /// Lateral inflow datum, a function of `(x, t)`.
    pub g_b: AnalyticFn,
    pub p: f64,
    pub exact: Option<AnalyticFn>,
}

/// Space-time recast with velocity `(b, 1)` on `Q = Ω × (0, T)`. Positivity
/// is certified through `η(x, t) = -p t`, which adds 1 to `c - div(b)/p`.
pub fn recast_time_dependent(data: &TimeDependentAdvection) -> Result<ProblemSpec> {
    let d = data.space.dim();
    if !(data.horizon > 0.0) {
        return input("time horizon must be positive");
    }
    if d + 1 > crate::autodiff::MAX_DIM {
        return input("space-time dimension exceeds the supported maximum");
    }
    if data.b.len() != d || data.u0.dim() != d || data.g_b.dim() != d + 1 || data.c.dim() != d + 1 {
        return input("time-dependent data have inconsistent dimensions");
    }
    let mut lo = data.space.lo.clone();
    let mut hi = data.space.hi.clone();
    lo.push(0.0);
    hi.push(data.horizon);
    let q = BoxDomain::new(lo, hi)?;
    let mut b = data.b.clone();
    b.push(AnalyticFn::constant("1", d + 1, 1.0));
    let p = data.p;
    let eta = AnalyticFn::new(format!("-{p}t"), d + 1, move |x| x[d].scale(-p));
    let adv = AdvectionCoeffs::new(&q, b, data.c.clone(), AdvectionRoute::Eta(eta), p)?;
    let (u0, g_b) = (data.u0.clone(), data.g_b.clone());
    let g = AnalyticFn::new("g(u0, g_b)", d + 1, move |x| {
        if x[d].value.abs() <= GEOM_TOL {
            u0.call(&x[..d])
        } else {
            g_b.call(x)
        }
    });
    ProblemSpec::new(
        data.name.clone(),
        q,
        Operator::AdvectionReaction(adv),
        data.f.clone(),
        g,
        p,
        NormKind::GraphLp,
        NormKind::GraphLp,
        data.exact.clone(),
    )
}

/// `K_α = (-Δ)^{α/2} (1 - x²)_+^{α/2} = 2^α Γ(1 + α/2) Γ((1 + α)/2) / √π`.
pub fn frac_bump_constant(alpha: f64) -> f64 {
    2f64.powf(alpha) * gamma(1.0 + alpha / 2.0) * gamma((1.0 + alpha) / 2.0) / PI.sqrt()
}

/// `(1 - |x|²)_+^s` in one dimension.
pub fn bump(s: f64) -> AnalyticFn {
    AnalyticFn::new(format!("(1-x^2)_+^{s}"), 1, move |x| {
        if x[0].value.abs() >= 1.0 {
            cst(x, 0.0)
        } else {
            (x[0] * x[0]).scale(-1.0).shift(1.0).powf(s)
        }
    })
}

pub fn preset(name: &str) -> Result<ProblemSpec> {
    match name {
        "poisson1d_sin" => {
            let d = BoxDomain::unit(1);
            let op = Operator::Elliptic(EllipticCoeffs::laplacian(&d, 0.0)?);
            let f = AnalyticFn::new("pi^2 sin(pi x)", 1, |x| x[0].scale(PI).sin().scale(PI * PI));
            let exact = AnalyticFn::new("sin(pi x)", 1, |x| x[0].scale(PI).sin());
            ProblemSpec::new(
                name,
                d,
                op,
                f,
                AnalyticFn::zero(1),
                2.0,
                NormKind::HhalfSurrogate,
                NormKind::H2,
                Some(exact),
            )
        }
        "poisson2d_product" => {
            let d = BoxDomain::unit(2);
            let op = Operator::Elliptic(EllipticCoeffs::laplacian(&d, 0.0)?);
            let f = AnalyticFn::new("2pi^2 sin sin", 2, |x| {
                (x[0].scale(PI).sin() * x[1].scale(PI).sin()).scale(2.0 * PI * PI)
            });
            let exact = AnalyticFn::new("sin(pi x) sin(pi y)", 2, |x| x[0].scale(PI).sin() * x[1].scale(PI).sin());
            ProblemSpec::new(
                name,
                d,
                op,
                f,
                AnalyticFn::zero(2),
                2.0,
                NormKind::HhalfSurrogate,
                NormKind::H2,
                Some(exact),
            )
        }
        "advreac1d_friedrichs" => {
            let d = BoxDomain::unit(1);
            let adv = AdvectionCoeffs::new(
                &d,
                vec![AnalyticFn::constant("1", 1, 1.0)],
                AnalyticFn::constant("1", 1, 1.0),
                AdvectionRoute::Friedrichs,
                2.0,
            )?;
            let exact = AnalyticFn::new("1+sin(pi x)", 1, |x| x[0].scale(PI).sin().shift(1.0));
            let f = AnalyticFn::new("pi cos(pi x) + 1 + sin(pi x)", 1, |x| {
                x[0].scale(PI).cos().scale(PI) + x[0].scale(PI).sin().shift(1.0)
            });
            ProblemSpec::new(
                name,
                d,
                Operator::AdvectionReaction(adv),
                f,
                AnalyticFn::constant("1", 1, 1.0),
                2.0,
                NormKind::GraphLp,
                NormKind::GraphLp,
                Some(exact),
            )
        }
        "advreac_spacetime" => {
            // u_t + u_x = 0, u(x, t) = sin(pi (x - t))
            let shifted = |x: &[Jet2<f64>]| (x[0] - x[1]).scale(PI).sin();
            recast_time_dependent(&TimeDependentAdvection {
                name: name.to_string(),
                space: BoxDomain::unit(1),
                horizon: 1.0,
                b: vec![AnalyticFn::constant("1", 2, 1.0)],
                c: AnalyticFn::zero(2),
                f: AnalyticFn::zero(2),
                u0: AnalyticFn::new("sin(pi x)", 1, |x| x[0].scale(PI).sin()),
                g_b: AnalyticFn::new("sin(pi (x - t))", 2, shifted),
                p: 2.0,
                exact: Some(AnalyticFn::new("sin(pi (x - t))", 2, shifted)),
            })
        }
        "frac_adr_1d" => {
            let alpha = FRAC_PRESET_ALPHA;
            let d = BoxDomain::interval(-1.0, 1.0);
            let spec = FractionalSpec::new(&d, alpha, AnalyticFn::zero(1), AnalyticFn::constant("1", 1, 1.0), 1.0)?;
            let exact = bump(alpha / 2.0);
            let k = frac_bump_constant(alpha);
            let e2 = exact.clone();
            let f = AnalyticFn::new("K + (1-x^2)_+^{a/2}", 1, move |x| e2.call(x).shift(k));
            ProblemSpec::new(
                name,
                d,
                Operator::FractionalAdr(spec),
                f,
                AnalyticFn::zero(1),
                2.0,
                NormKind::Halpha2Surrogate,
                NormKind::C2,
                Some(exact),
            )
        }
        other => input(format!("unknown preset {other:?}; known: {}", PRESETS.join(", "))),
    }
}

/// Smooth test functions used to probe the norm-relation constants.
pub fn probe_family(name: &str) -> Result<Vec<AnalyticFn>> {
    let mut fam = Vec::new();
    match name {
        "poisson1d_sin" | "advreac1d_friedrichs" => {
            for k in 1..=8 {
                let kf = k as f64;
                fam.push(AnalyticFn::new(format!("sin({k} pi x)"), 1, move |x| x[0].scale(kf * PI).sin()));
            }
            fam.push(AnalyticFn::constant("1", 1, 1.0));
            fam.push(AnalyticFn::new("x", 1, |x| x[0]));
            fam.push(AnalyticFn::new("x(1-x)", 1, |x| x[0] * x[0].scale(-1.0).shift(1.0)));
            if name == "advreac1d_friedrichs" {
                for k in 1..=4 {
                    let kf = k as f64;
                    fam.push(AnalyticFn::new(format!("cos({k} pi x)"), 1, move |x| x[0].scale(kf * PI).cos()));
                }
                fam.push(AnalyticFn::new("exp(-x)", 1, |x| x[0].scale(-1.0).exp()));
                fam.push(AnalyticFn::new("exp(x)", 1, |x| x[0].exp()));
            }
        }
        "poisson2d_product" | "advreac_spacetime" => {
            for k in 1..=3 {
                for l in 1..=3 {
                    let (kf, lf) = (k as f64, l as f64);
                    fam.push(AnalyticFn::new(format!("sin({k} pi x) sin({l} pi y)"), 2, move |x| {
                        x[0].scale(kf * PI).sin() * x[1].scale(lf * PI).sin()
                    }));
                }
            }
            fam.push(AnalyticFn::constant("1", 2, 1.0));
            fam.push(AnalyticFn::new("x", 2, |x| x[0]));
            fam.push(AnalyticFn::new("y", 2, |x| x[1]));
            fam.push(AnalyticFn::new("xy", 2, |x| x[0] * x[1]));
        }
        "frac_adr_1d" => {
            for s in [FRAC_PRESET_ALPHA / 2.0, 1.0, 2.0, 3.0] {
                fam.push(bump(s));
            }
            let b2 = bump(2.0);
            fam.push(AnalyticFn::new("x(1-x^2)_+^2", 1, move |x| x[0] * b2.call(x)));
        }
        other => return input(format!("no probe family for {other:?}")),
    }
    Ok(fam)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_consistent() {
        for name in ["poisson1d_sin", "poisson2d_product", "advreac1d_friedrichs", "advreac_spacetime"] {
            let p = preset(name).unwrap();
            let (ri, rb) = p.manufactured_defect(1000, 3).unwrap();
            assert!(ri < 1e-10 && rb < 1e-10, "{name}: {ri} {rb}");
        }
    }

    #[test]
    fn recast_inflow_faces() {
        let data = TimeDependentAdvection {
            name: "t".into(),
            space: BoxDomain::unit(1),
            horizon: 1.0,
            b: vec![AnalyticFn::zero(2)],
            c: AnalyticFn::zero(2),
            f: AnalyticFn::zero(2),
            u0: AnalyticFn::zero(1),
            g_b: AnalyticFn::zero(2),
            p: 2.0,
            exact: None,
        };
        let p = recast_time_dependent(&data).unwrap();
        let Operator::AdvectionReaction(a) = &p.operator else { panic!() };
        assert_eq!(a.inflow, vec![crate::geometry::Face { axis: 1, upper: false }]);
        assert_eq!(a.b[1].eval(&[0.3, 0.2]).value, 1.0);
        let st = preset("advreac_spacetime").unwrap();
        assert_eq!(st.boundary_weight(&[0.0, 0.5]).unwrap(), 1.0);
    }
}
