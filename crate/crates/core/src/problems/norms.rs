use std::cell::RefCell;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Operator, ProblemSpec};
use crate::autodiff::Jet2;
use crate::error::{input, Error, Result};
use crate::geometry::{BoxDomain, Region};
use crate::models::{AnalyticFn, Evaluable};
use crate::quadrature::{composite, continuous_norm, integrate_refined, QuadratureRule};

/// Error-reporting norms `‖·‖_V` (and solution-space norms `‖·‖_X`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    L2,
    H1,
    H2,
    /// Reported as the L² norm, a lower bound of the H^{1/2} norm.
    #[serde(rename = "Hhalf_surrogate")]
    HhalfSurrogate,
    #[serde(rename = "graph_Lp")]
    GraphLp,
    /// L² part plus a Gagliardo seminorm with a diagonal strip removed.
    #[serde(rename = "Halpha2_surrogate")]
    Halpha2Surrogate,
    /// `sup|w| + sup|∇w| + sup|D²w|` over a dense node set.
    C2,
}

impl NormKind {
    pub fn id(&self) -> &'static str {
        match self {
            NormKind::L2 => "L2",
            NormKind::H1 => "H1",
            NormKind::H2 => "H2",
            NormKind::HhalfSurrogate => "Hhalf_surrogate",
            NormKind::GraphLp => "graph_Lp",
            NormKind::Halpha2Surrogate => "Halpha2_surrogate",
            NormKind::C2 => "C2",
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            NormKind::L2,
            NormKind::H1,
            NormKind::H2,
            NormKind::HhalfSurrogate,
            NormKind::GraphLp,
            NormKind::Halpha2Surrogate,
            NormKind::C2,
        ]
        .into_iter()
        .find(|k| k.id() == s)
        .ok_or_else(|| Error::Input(format!("unknown norm identifier {s:?}")))
    }
}

/// Diagonal strip excluded from the Gagliardo double integral.
pub const GAGLIARDO_STRIP: f64 = 1e-4;

fn reference_rule(dim: usize) -> QuadratureRule {
    QuadratureRule::uniform(16, 4, dim)
}

/// Lebesgue integral of `f` over a box, auto-refined.
fn lebesgue<F: Fn(&[f64]) -> f64>(domain: &BoxDomain, f: F) -> f64 {
    let r = Region::uniform(vec![domain.clone()]);
    integrate_refined(&reference_rule(domain.dim()), &r, f).value * domain.measure()
}

struct Guard(RefCell<Option<Error>>);

impl Guard {
    fn new() -> Self {
        Guard(RefCell::new(None))
    }

    fn jet(&self, w: &dyn Evaluable<f64>, x: &[f64]) -> Jet2<f64> {
        match w.jet(x) {
            Ok(j) => j,
            Err(e) => {
                self.0.borrow_mut().get_or_insert(e);
                Jet2::constant(f64::NAN, x.len())
            }
        }
    }

    fn finish(self, v: f64) -> Result<f64> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }
}

fn lp_norm(domain: &BoxDomain, p: f64, g: impl Fn(&[f64]) -> f64) -> f64 {
    lebesgue(domain, |x| g(x).abs().powf(p)).powf(1.0 / p)
}

/// `‖w‖` in the requested norm over Ω (Lebesgue measure).
pub fn norm_of(spec: &ProblemSpec, w: &dyn Evaluable<f64>, kind: NormKind) -> Result<f64> {
    let dom = &spec.domain;
    let d = dom.dim();
    let g = Guard::new();
    let v = match kind {
        NormKind::L2 | NormKind::HhalfSurrogate => lp_norm(dom, 2.0, |x| g.jet(w, x).value),
        NormKind::H1 => lebesgue(dom, |x| {
            let j = g.jet(w, x);
            j.value * j.value + (0..d).map(|i| j.d1(i).powi(2)).sum::<f64>()
        })
        .sqrt(),
        NormKind::H2 => lebesgue(dom, |x| {
            let j = g.jet(w, x);
            j.value * j.value
                + (0..d).map(|i| j.d1(i).powi(2)).sum::<f64>()
                + (0..d).flat_map(|i| (0..d).map(move |k| (i, k))).map(|(i, k)| j.d2(i, k).powi(2)).sum::<f64>()
        })
        .sqrt(),
        NormKind::GraphLp => {
            let Operator::AdvectionReaction(adv) = &spec.operator else {
                return input("graph_Lp norm requires an advection operator");
            };
            let p = spec.p;
            let a = lp_norm(dom, p, |x| g.jet(w, x).value);
            let b = lp_norm(dom, p, |x| {
                let j = g.jet(w, x);
                (0..d).map(|i| adv.b[i].eval(x).value * j.d1(i)).sum::<f64>()
            });
            (a * a + b * b).sqrt()
        }
        NormKind::Halpha2Surrogate => {
            let Operator::FractionalAdr(fs) = &spec.operator else {
                return input("Halpha2_surrogate requires the fractional operator");
            };
            let big_r = fs.support_radius;
            let (xs, ws) = composite(-big_r, big_r, 8, 128);
            let vals: Vec<f64> = xs.iter().map(|&x| g.jet(w, &[x]).value).collect();
            let l2: f64 = vals.iter().zip(&ws).map(|(v, w)| w * v * v).sum();
            let mut semi = 0.0;
            for i in 0..xs.len() {
                let mut row = 0.0;
                for j in 0..xs.len() {
                    let dist = (xs[i] - xs[j]).abs();
                    if dist > GAGLIARDO_STRIP {
                        row += ws[j] * (vals[i] - vals[j]).powi(2) / dist.powf(1.0 + fs.alpha);
                    }
                }
                semi += ws[i] * row;
            }
            (l2 + semi).sqrt()
        }
        NormKind::C2 => {
            let rule = QuadratureRule::uniform(16, 16, d);
            let (coords, _) = rule.nodes(dom);
            let (mut s0, mut s1, mut s2) = (0.0f64, 0.0f64, 0.0f64);
            for x in coords.chunks(d) {
                let j = g.jet(w, x);
                s0 = s0.max(j.value.abs());
                for i in 0..d {
                    s1 = s1.max(j.d1(i).abs());
                    for k in 0..d {
                        s2 = s2.max(j.d2(i, k).abs());
                    }
                }
            }
            s0 + s1 + s2
        }
    };
    g.finish(v)
}

struct Diff<'a> {
    u: &'a dyn Evaluable<f64>,
    v: &'a dyn Evaluable<f64>,
}

impl Evaluable<f64> for Diff<'_> {
    fn dim(&self) -> usize {
        self.u.dim()
    }

    fn jet(&self, x: &[f64]) -> Result<Jet2<f64>> {
        Ok(self.u.jet(x)? - self.v.jet(x)?)
    }
}

/// `‖u - v‖_V` with the problem's error-reporting norm.
pub fn v_norm_distance(spec: &ProblemSpec, u: &dyn Evaluable<f64>, v: &dyn Evaluable<f64>) -> Result<f64> {
    norm_of(spec, &Diff { u, v }, spec.v_norm)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub label: String,
    pub residual_norm: f64,
    pub boundary_norm: f64,
    pub v_norm: f64,
    pub x_norm: f64,
}

/// Empirical norm-relation constants over a finite family. `c1_hat` is an
/// upper estimate of C₁ and `c2_hat` a lower estimate of C₂.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityProbe {
    pub c1_hat: f64,
    pub c2_hat: f64,
    pub v_norm: NormKind,
    pub x_norm: NormKind,
    pub rows: Vec<StabilityRow>,
}

/// `‖Au‖_Y` and `‖Bu‖_Z` for the problem's loss norms (ρ and ρ_b weighted).
pub(crate) fn operator_norms(spec: &ProblemSpec, u: &dyn Evaluable<f64>) -> Result<(f64, f64)> {
    let g = Guard::new();
    let p = spec.p;
    let rule = reference_rule(spec.dim());
    let ay = continuous_norm(
        &rule,
        &spec.interior_region(),
        |x| match spec.apply_a::<f64, _>(u, x) {
            Ok(v) => v,
            Err(e) => {
                g.0.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        p,
    )?
    .value;
    let bz = integrate_refined(&rule, &spec.boundary_region(), |x| {
        let w = spec.boundary_weight(x).unwrap_or(0.0);
        match spec.apply_b::<f64, _>(u, x) {
            Ok(v) => w * v.abs().powf(p),
            Err(e) => {
                g.0.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    })
    .value
    .powf(1.0 / p);
    let ay = g.finish(ay)?;
    Ok((ay, bz))
}

pub fn probe_stability_constant(spec: &ProblemSpec, family: &[AnalyticFn]) -> Result<StabilityProbe> {
    if family.is_empty() {
        return input("probe family is empty");
    }
    let mut rows = Vec::with_capacity(family.len());
    for u in family {
        let (ay, bz) = operator_norms(spec, u)?;
        let vn = norm_of(spec, u, spec.v_norm)?;
        let xn = norm_of(spec, u, spec.x_norm)?;
        if !(vn > 0.0) || !(xn > 0.0) {
            return input(format!("probe member {} has zero norm", u.label));
        }
        rows.push(StabilityRow {
            label: u.label.clone(),
            residual_norm: ay,
            boundary_norm: bz,
            v_norm: vn,
            x_norm: xn,
        });
    }
    let c1_hat = rows
        .iter()
        .map(|r| (r.residual_norm + r.boundary_norm) / r.v_norm)
        .fold(f64::INFINITY, f64::min);
    let c2_hat = rows
        .iter()
        .map(|r| (r.residual_norm + r.boundary_norm) / r.x_norm)
        .fold(0.0, f64::max);
    Ok(StabilityProbe {
        c1_hat,
        c2_hat,
        v_norm: spec.v_norm,
        x_norm: spec.x_norm,
        rows,
    })
}
