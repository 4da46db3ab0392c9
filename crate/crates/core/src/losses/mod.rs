//! Residual-minimization loss functionals and subdomain bases.

mod basis;
mod plan;

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::geometry::Region;
use crate::models::Evaluable;
use crate::problems::{Operator, ProblemSpec, GEOM_TOL};
use crate::quadrature::{
    boundary_atoms, derive_seed, grid_samples, integrate_refined_with, sample_iid, QuadratureRule, Refine,
    SampleSet, SampleTarget,
};

pub use basis::{build_basis, project, Basis, BasisKind, Partition, GRAM_TOL};
pub use plan::LossPlan;
use plan::{Term, WeakCell};

/// Refinement used when a continuous loss is reported. The absolute floor
/// keeps noise-level residuals of exact solutions from exhausting the cap.
pub const LOSS_REFINE: Refine = Refine {
    rtol: 1e-9,
    atol: 1e-14,
    max_nodes: 1 << 16,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossForm {
    ContinuousRm,
    DiscreteRm,
    HpVrm,
    RegularizedRm,
    PwconstWeak,
}

impl LossForm {
    pub fn id(&self) -> &'static str {
        match self {
            LossForm::ContinuousRm => "continuous_rm",
            LossForm::DiscreteRm => "discrete_rm",
            LossForm::HpVrm => "hp_vrm",
            LossForm::RegularizedRm => "regularized_rm",
            LossForm::PwconstWeak => "pwconst_weak",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadCertificate {
    pub converged: bool,
    pub interior_rel_change: f64,
    pub boundary_rel_change: f64,
    pub interior_nodes: usize,
}

/// `total = interior + tau * boundary`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub form: LossForm,
    pub p: f64,
    pub tau: f64,
    pub interior: f64,
    pub boundary: f64,
    pub total: f64,
    pub quadrature_certificate: Option<QuadCertificate>,
}

/// Smallest `m` with `2(m-1) < p ≤ 2m`.
pub fn minimal_m(p: f64) -> u32 {
    ((p / 2.0).ceil() as u32).max(1)
}

/// `φ_{p,ε}(x) = x^{2m} (x+ε)^{p-2m}` and its derivative.
pub fn phi_regularizer(x: f64, p: f64, m: u32, eps: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0);
    }
    if eps == 0.0 {
        return (x.powf(p), p * x.powf(p - 1.0));
    }
    let m2 = 2.0 * m as f64;
    let xe = x + eps;
    let value = x.powf(m2) * xe.powf(p - m2);
    let deriv = x.powf(m2 - 1.0) * xe.powf(p - m2 - 1.0) * (p * x + m2 * eps);
    (value, deriv)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingKind {
    #[default]
    Iid,
    Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    #[serde(default = "default_m_r")]
    pub m_r: usize,
    /// Boundary sample count; all boundary atoms when unset in 1D.
    #[serde(default)]
    pub m_b: Option<usize>,
    #[serde(default)]
    pub kind: SamplingKind,
}

fn default_m_r() -> usize {
    128
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            m_r: default_m_r(),
            m_b: None,
            kind: SamplingKind::Iid,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    /// Cells per axis.
    pub cells: Vec<usize>,
    pub kind: BasisKind,
    #[serde(default = "one_usize")]
    pub order: usize,
    #[serde(default)]
    pub integrate_by_parts: bool,
}

fn one_usize() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleConfig {
    pub order: usize,
    pub panels: usize,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig { order: 16, panels: 4 }
    }
}

fn two() -> f64 {
    2.0
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub form: LossForm,
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default = "one")]
    pub tau: f64,
    #[serde(default)]
    pub samples: SampleConfig,
    #[serde(default)]
    pub partition: Option<PartitionConfig>,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub m: Option<u32>,
    #[serde(default)]
    pub quadrature: RuleConfig,
}

impl LossSpec {
    pub fn new(form: LossForm, p: f64, tau: f64) -> Self {
        LossSpec {
            form,
            p,
            tau,
            samples: SampleConfig::default(),
            partition: None,
            epsilon: 0.0,
            m: None,
            quadrature: RuleConfig::default(),
        }
    }

    pub fn rule(&self, dim: usize) -> Result<QuadratureRule> {
        QuadratureRule::new(self.quadrature.order, vec![self.quadrature.panels; dim])
    }

    /// Checks the spec; returns warnings that do not prevent training.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if !(self.p >= 1.0) {
            return input(format!("loss exponent p = {} below 1", self.p));
        }
        if !(self.tau > 0.0) {
            return input("tau must be positive");
        }
        if self.tau < 1.0 {
            warnings.push(format!("tau = {} < 1: bounds assume tau >= 1", self.tau));
        }
        match self.form {
            LossForm::HpVrm | LossForm::PwconstWeak => {
                if self.p != 2.0 {
                    return input("hp-VRM and pwconst weak losses are defined for p = 2");
                }
                if self.partition.is_none() {
                    return Err(Error::Config(format!("{} needs a [loss.partition] section", self.form.id())));
                }
            }
            LossForm::RegularizedRm => {
                let m = self.m.unwrap_or(minimal_m(self.p));
                if m != minimal_m(self.p) {
                    return input(format!("m = {m} is not minimal for p = {}", self.p));
                }
                if !(self.epsilon > 0.0) {
                    return input("regularized loss needs epsilon > 0");
                }
                let cond = 2.0 * (2.0 * m as f64 - self.p) * self.epsilon * (self.p - 1.0) / self.p;
                if cond > 1.0 {
                    warnings.push(format!("small-epsilon condition violated: 2(2m-p)eps(p-1)/p = {cond} > 1"));
                }
            }
            LossForm::DiscreteRm => {
                if self.samples.m_r == 0 {
                    return input("m_r must be positive");
                }
            }
            LossForm::ContinuousRm => {}
        }
        Ok(warnings)
    }

    /// Residual rows and reduction for `prob`. `seed` drives the discrete
    /// samples.
    pub fn plan(&self, prob: &ProblemSpec, seed: u64) -> Result<LossPlan> {
        self.validate()?;
        let d = prob.dim();
        let rule = self.rule(d)?;
        match self.form {
            LossForm::ContinuousRm => continuous_plan(prob, self.p, self.tau, &rule, None),
            LossForm::RegularizedRm => continuous_plan(
                prob,
                self.p,
                self.tau,
                &rule,
                Some((self.m.unwrap_or(minimal_m(self.p)), self.epsilon)),
            ),
            LossForm::DiscreteRm => {
                let (si, sb) = self.draw_samples(prob, seed)?;
                discrete_plan(prob, self.p, self.tau, &si, &sb)
            }
            LossForm::HpVrm | LossForm::PwconstWeak => {
                let pc = self.partition.as_ref().expect("validated");
                let kind = if self.form == LossForm::PwconstWeak { BasisKind::Pwconst } else { pc.kind };
                let part = Partition::uniform(&prob.domain, &pc.cells, kind, pc.order)?;
                if self.form == LossForm::PwconstWeak {
                    pwconst_weak_plan(prob, self.tau, &part, &rule, pc.integrate_by_parts)
                } else {
                    if pc.integrate_by_parts {
                        return Err(Error::Config("integrate_by_parts applies to pwconst_weak only".into()));
                    }
                    hp_plan(prob, self.tau, &build_basis(&part)?, &rule)
                }
            }
        }
    }

    /// Interior and boundary training samples for the discrete loss.
    pub fn draw_samples(&self, prob: &ProblemSpec, seed: u64) -> Result<(SampleSet, SampleSet)> {
        let s = &self.samples;
        let interior = match s.kind {
            SamplingKind::Iid => sample_iid(
                &prob.interior_region(),
                s.m_r,
                derive_seed(seed, &[0x1]),
                SampleTarget::Interior,
            )?,
            SamplingKind::Grid => {
                let per_axis = (s.m_r as f64).powf(1.0 / prob.dim() as f64).round() as usize;
                grid_samples(&prob.domain, per_axis.max(1))?
            }
        };
        let breg = prob.boundary_region();
        let boundary = match s.m_b {
            None if prob.dim() == 1 => boundary_atoms(&breg)?,
            None => sample_iid(&breg, s.m_r, derive_seed(seed, &[0x2]), SampleTarget::Boundary)?,
            Some(mb) => sample_iid(&breg, mb, derive_seed(seed, &[0x2]), SampleTarget::Boundary)?,
        };
        Ok((interior, boundary))
    }
}

fn power_or_phi(rows: std::ops::Range<usize>, w: Vec<f64>, p: f64, reg: Option<(u32, f64)>) -> Term {
    match reg {
        Some((m, eps)) => Term::Phi { rows, w, p, m, eps },
        None => Term::Power { rows, w, p },
    }
}

fn boundary_weights(prob: &ProblemSpec, s: &SampleSet, region: &Region) -> Result<Vec<f64>> {
    s.points()
        .zip(s.density_weights(region))
        .map(|(x, w)| Ok(w * prob.boundary_weight(x)?))
        .collect()
}

fn check_samples(prob: &ProblemSpec, s: &SampleSet, target: SampleTarget) -> Result<()> {
    if s.dim != prob.dim() || s.target != target {
        return input(format!("{target:?} samples do not match problem {}", prob.name));
    }
    if target == SampleTarget::Interior {
        if let Some(i) = s.points().position(|x| !prob.domain.contains(x, GEOM_TOL)) {
            return input(format!("interior sample {i} lies outside Ω"));
        }
    }
    Ok(())
}

pub(crate) fn discrete_plan(
    prob: &ProblemSpec,
    p: f64,
    tau: f64,
    interior: &SampleSet,
    boundary: &SampleSet,
) -> Result<LossPlan> {
    check_samples(prob, interior, SampleTarget::Interior)?;
    check_samples(prob, boundary, SampleTarget::Boundary)?;
    let mut plan = LossPlan::new(prob, LossForm::DiscreteRm, p, tau);
    plan.interior = interior.coords.clone();
    plan.boundary = boundary.coords.clone();
    let ni = interior.len();
    let wi = interior.density_weights(&prob.interior_region());
    let wb = boundary_weights(prob, boundary, &prob.boundary_region())?;
    plan.interior_terms.push(Term::Power { rows: 0..ni, w: wi, p });
    plan.boundary_terms.push(Term::Power {
        rows: ni..ni + boundary.len(),
        w: wb,
        p,
    });
    Ok(plan)
}

fn continuous_plan(
    prob: &ProblemSpec,
    p: f64,
    tau: f64,
    rule: &QuadratureRule,
    reg: Option<(u32, f64)>,
) -> Result<LossPlan> {
    let form = if reg.is_some() { LossForm::RegularizedRm } else { LossForm::ContinuousRm };
    let ireg = prob.interior_region();
    let breg = prob.boundary_region();
    let si = rule.samples(&ireg, SampleTarget::Interior);
    let sb = rule.samples(&breg, SampleTarget::Boundary);
    let mut plan = LossPlan::new(prob, form, p, tau);
    plan.interior = si.coords.clone();
    plan.boundary = sb.coords.clone();
    let ni = si.len();
    plan.interior_terms.push(power_or_phi(0..ni, si.density_weights(&ireg), p, reg));
    plan.boundary_terms.push(power_or_phi(
        ni..ni + sb.len(),
        boundary_weights(prob, &sb, &breg)?,
        p,
        reg,
    ));
    Ok(plan)
}

/// Strong boundary term with `p = 2` on the reference nodes.
fn strong_boundary(plan: &mut LossPlan, prob: &ProblemSpec, rule: &QuadratureRule) -> Result<()> {
    let breg = prob.boundary_region();
    let sb = rule.samples(&breg, SampleTarget::Boundary);
    let start = plan.rows();
    plan.boundary = sb.coords.clone();
    plan.boundary_terms.push(Term::Power {
        rows: start..start + sb.len(),
        w: boundary_weights(prob, &sb, &breg)?,
        p: 2.0,
    });
    Ok(())
}

pub(crate) fn hp_plan(prob: &ProblemSpec, tau: f64, basis: &Basis, rule: &QuadratureRule) -> Result<LossPlan> {
    if basis.partition.domain != prob.domain {
        return input("partition does not tile the problem domain");
    }
    let d = prob.dim();
    let mut plan = LossPlan::new(prob, LossForm::HpVrm, 2.0, tau);
    for k in 0..basis.partition.len() {
        let (coords, weights) = basis.cell_rule(k, rule).nodes(&basis.partition.cells[k]);
        let start = plan.interior.len() / d;
        let n = basis.count(k);
        let cols = weights.len();
        let mut b = Vec::with_capacity(n * cols);
        for i in 0..n {
            for (x, w) in coords.chunks(d).zip(&weights) {
                b.push(w * basis.eval(k, i, x));
            }
        }
        plan.interior.extend_from_slice(&coords);
        plan.interior_terms.push(Term::Quadratic {
            rows: start..start + cols,
            n,
            b,
        });
    }
    strong_boundary(&mut plan, prob, rule)?;
    Ok(plan)
}

pub(crate) fn pwconst_weak_plan(
    prob: &ProblemSpec,
    tau: f64,
    partition: &Partition,
    rule: &QuadratureRule,
    by_parts: bool,
) -> Result<LossPlan> {
    let mut part = partition.clone();
    part.kinds.iter_mut().for_each(|k| *k = BasisKind::Pwconst);
    part.orders.iter_mut().for_each(|n| *n = 1);
    let basis = build_basis(&part)?;
    if !by_parts {
        let mut plan = hp_plan(prob, tau, &basis, rule)?;
        plan.form = LossForm::PwconstWeak;
        return Ok(plan);
    }
    let Operator::Elliptic(ell) = &prob.operator else {
        return Err(Error::Config("integration by parts is implemented for 1D elliptic operators only".into()));
    };
    if prob.dim() != 1 {
        return Err(Error::Config("integration by parts is implemented for 1D elliptic operators only".into()));
    }
    let (lo, hi) = (prob.domain.lo[0], prob.domain.hi[0]);
    let k0 = ell.at(&[lo]);
    for i in 0..=32 {
        let k = ell.at(&[lo + (hi - lo) * i as f64 / 32.0]);
        if (k.a[0][0] - k0.a[0][0]).abs() > 1e-14 || (k.b[0] - k0.b[0]).abs() > 1e-14 {
            return Err(Error::Config(
                "integration by parts needs constant diffusion and advection coefficients".into(),
            ));
        }
    }
    let mut plan = LossPlan::new(prob, LossForm::PwconstWeak, 2.0, tau);
    strong_boundary(&mut plan, prob, rule)?;
    for (k, cell) in part.cells.iter().enumerate() {
        let (coords, weights) = basis.cell_rule(k, rule).nodes(cell);
        let f_terms: Vec<f64> = coords.iter().zip(&weights).map(|(x, w)| w * prob.f.eval(&[*x]).value).collect();
        plan.cells.push(WeakCell {
            lo: cell.lo[0],
            hi: cell.hi[0],
            f_int: crate::quadrature::pairwise_sum(&f_terms),
            a: k0.a[0][0],
            b: k0.b[0],
            c_nodes: coords.iter().zip(&weights).map(|(x, w)| (*x, w * ell.at(&[*x]).c)).collect(),
            scale: cell.measure().powf(-0.5),
        });
    }
    let rows = plan.cell_rows();
    let n = rows.len();
    plan.interior_terms.push(Term::Power {
        rows,
        w: vec![1.0; n],
        p: 2.0,
    });
    Ok(plan)
}

struct ErrSlot(RefCell<Option<Error>>);

impl ErrSlot {
    fn take<T: Default>(&self, r: Result<T>) -> T {
        r.unwrap_or_else(|e| {
            self.0.borrow_mut().get_or_insert(e);
            T::default()
        })
    }
}

fn continuous_like(
    prob: &ProblemSpec,
    u: &dyn Evaluable<f64>,
    p: f64,
    tau: f64,
    rule: &QuadratureRule,
    reg: Option<(u32, f64)>,
) -> Result<LossBreakdown> {
    if !(p >= 1.0) {
        return input(format!("loss exponent p = {p} below 1"));
    }
    let phi = |r: f64| match reg {
        Some((m, eps)) => phi_regularizer(r.abs(), p, m, eps).0,
        None => r.abs().powf(p),
    };
    let slot = ErrSlot(RefCell::new(None));
    let ci = integrate_refined_with(
        rule,
        &prob.interior_region(),
        |x| phi(slot.take(prob.interior_residual::<f64, _>(u, x))),
        LOSS_REFINE,
    );
    let cb = integrate_refined_with(
        rule,
        &prob.boundary_region(),
        |x| slot.take(prob.boundary_weight(x)) * phi(slot.take(prob.boundary_residual::<f64, _>(u, x))),
        LOSS_REFINE,
    );
    if let Some(e) = slot.0.into_inner() {
        return Err(e);
    }
    if !ci.value.is_finite() || !cb.value.is_finite() {
        return Err(Error::Numeric {
            index: 0,
            reason: "non-finite loss integral".into(),
        });
    }
    let nodes = prob.interior_region().pieces.iter().map(|b| ci.rule.node_count(b)).sum();
    Ok(LossBreakdown {
        form: if reg.is_some() { LossForm::RegularizedRm } else { LossForm::ContinuousRm },
        p,
        tau,
        interior: ci.value,
        boundary: cb.value,
        total: ci.value + tau * cb.value,
        quadrature_certificate: Some(QuadCertificate {
            converged: ci.converged && cb.converged,
            interior_rel_change: ci.rel_change,
            boundary_rel_change: cb.rel_change,
            interior_nodes: nodes,
        }),
    })
}

/// `‖f - Au‖^p_{L^p_ρ} + τ ‖Bu - g‖^p_{L^p_{ρ_b}}` by auto-refined quadrature.
pub fn loss_continuous(
    prob: &ProblemSpec,
    u: &dyn Evaluable<f64>,
    p: f64,
    tau: f64,
    rule: &QuadratureRule,
) -> Result<LossBreakdown> {
    continuous_like(prob, u, p, tau, rule, None)
}

/// `‖φ(|Au - f|)‖_{L¹_ρ} + τ ‖φ(|Bu - g|)‖_{L¹_{ρ_b}}`; `epsilon = 0` is the
/// continuous loss.
pub fn loss_regularized(
    prob: &ProblemSpec,
    u: &dyn Evaluable<f64>,
    p: f64,
    m: u32,
    epsilon: f64,
    tau: f64,
    rule: &QuadratureRule,
) -> Result<LossBreakdown> {
    if epsilon == 0.0 {
        return loss_continuous(prob, u, p, tau, rule);
    }
    if !(epsilon > 0.0) || m != minimal_m(p) {
        return input(format!("regularization needs epsilon > 0 and minimal m (got m = {m}, p = {p})"));
    }
    continuous_like(prob, u, p, tau, rule, Some((m, epsilon)))
}

/// Weighted sums over the given interior and boundary samples.
pub fn loss_discrete(
    prob: &ProblemSpec,
    u: &(dyn Evaluable<f64> + Sync),
    p: f64,
    tau: f64,
    interior: &SampleSet,
    boundary: &SampleSet,
) -> Result<LossBreakdown> {
    discrete_plan(prob, p, tau, interior, boundary)?.evaluate(u)
}

/// `Σ_k Σ_i (f - Au, Φ_{k,i})² + τ ‖Bu - g‖²_Z`.
pub fn loss_hp_vrm(
    prob: &ProblemSpec,
    u: &(dyn Evaluable<f64> + Sync),
    tau: f64,
    basis: &Basis,
    rule: &QuadratureRule,
) -> Result<LossBreakdown> {
    hp_plan(prob, tau, basis, rule)?.evaluate(u)
}

/// `Σ_k |Ω_k|^{-1} (∫_{Ω_k} f - Au)² + τ ‖Bu - g‖²_Z`.
pub fn loss_pwconst_weak(
    prob: &ProblemSpec,
    u: &(dyn Evaluable<f64> + Sync),
    tau: f64,
    partition: &Partition,
    rule: &QuadratureRule,
    integrate_by_parts: bool,
) -> Result<LossBreakdown> {
    pwconst_weak_plan(prob, tau, partition, rule, integrate_by_parts)?.evaluate(u)
}

/// `‖(I - P)(f - Au)‖²_{L²(Ω)}` from the same cell quadrature as the
/// projection: the squared residual norm minus the captured energy.
pub fn projection_deficit(
    prob: &ProblemSpec,
    u: &(dyn Evaluable<f64> + Sync),
    basis: &Basis,
    rule: &QuadratureRule,
) -> Result<f64> {
    let plan = hp_plan(prob, 1.0, basis, rule)?;
    let r = plan.residuals(u)?;
    let (b, _) = plan.reduce(&r);
    let d = prob.dim();
    let mut full = Vec::new();
    for k in 0..basis.partition.len() {
        let (_, weights) = basis.cell_rule(k, rule).nodes(&basis.partition.cells[k]);
        full.extend(weights);
    }
    debug_assert_eq!(full.len(), plan.interior.len() / d);
    let terms: Vec<f64> = full.iter().zip(&r).map(|(w, v)| w * v * v).collect();
    Ok(crate::quadrature::pairwise_sum(&terms) - b.interior)
}
