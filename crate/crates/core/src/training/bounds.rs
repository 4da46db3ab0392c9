use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{probe_family, probe_stability_constant, ProblemSpec};
use crate::quadrature::QuadratureRule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Probed,
    Configured,
}

/// A norm-relation constant together with where it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityConstant {
    pub value: f64,
    pub provenance: Provenance,
    pub note: String,
}

impl StabilityConstant {
    pub fn configured(value: f64) -> Result<Self> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::Config(format!("C1 must be positive, got {value}")));
        }
        Ok(StabilityConstant {
            value,
            provenance: Provenance::Configured,
            note: "configured".into(),
        })
    }

    /// `c1_hat` of the preset's probe family.
    pub fn probed(prob: &ProblemSpec) -> Result<Self> {
        let fam = probe_family(&prob.name)?;
        let probe = probe_stability_constant(prob, &fam)?;
        Ok(StabilityConstant {
            value: probe.c1_hat,
            provenance: Provenance::Probed,
            note: format!("min over {} probe functions", fam.len()),
        })
    }
}

/// `C₁⁻¹ 2^{(p-1)/p} J^{1/p}`. Requires `c1 > 0`, `j ≥ 0`, `p ≥ 1`.
pub fn aposteriori_bound(j: f64, c1: f64, p: f64) -> f64 {
    2f64.powf((p - 1.0) / p) * j.max(0.0).powf(1.0 / p) / c1
}

/// `c_p` of the regularized functional sandwich. It is 1 whenever the
/// `(2m - p)` correction vanishes, so no absorption step is needed.
pub fn sandwich_factor(p: f64, m: u32) -> f64 {
    if p == 1.0 || 2.0 * m as f64 == p {
        1.0
    } else {
        2.0
    }
}

/// Constant `C` such that `J_τ ≤ c_p J_τ^ε + C ε (1 + τ)`, from the masses
/// `‖ρ‖_{L¹}` and `‖ρ_b‖_{L¹}`.
pub fn regularization_constant(p: f64, m: u32, rho_masses: (f64, f64)) -> f64 {
    sandwich_factor(p, m) * (2.0 * m as f64 - p) * (rho_masses.0 + rho_masses.1) / p
}

/// `2^{1-1/p} C₁⁻¹ (c_p J^ε + C ε (1 + τ))^{1/p}`.
pub fn aposteriori_bound_regularized(
    j_eps: f64,
    c1: f64,
    p: f64,
    m: u32,
    epsilon: f64,
    tau: f64,
    rho_masses: (f64, f64),
) -> f64 {
    let c = regularization_constant(p, m, rho_masses);
    let inner = sandwich_factor(p, m) * j_eps.max(0.0) + c * epsilon * (1.0 + tau);
    2f64.powf(1.0 - 1.0 / p) * inner.powf(1.0 / p) / c1
}

/// `‖ρ‖_{L¹}` and the mass of the boundary measure including flux weights.
pub fn measure_masses(prob: &ProblemSpec) -> Result<(f64, f64)> {
    let rule = QuadratureRule::uniform(16, 4, prob.dim());
    let interior = rule.integrate_density(&prob.interior_region(), |_| 1.0);
    let err = std::cell::RefCell::new(None);
    let boundary = rule.integrate_density(&prob.boundary_region(), |x| match prob.boundary_weight(x) {
        Ok(w) => w,
        Err(e) => {
            err.borrow_mut().get_or_insert(e);
            0.0
        }
    });
    match err.into_inner() {
        Some(e) => Err(e),
        None => Ok((interior, boundary)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteBoundInput {
    pub j_m: f64,
    pub c1: f64,
    pub p: f64,
    pub tau: f64,
    pub rademacher_interior: f64,
    pub rademacher_boundary: f64,
    pub delta: f64,
    pub g_r: f64,
    pub g_b: f64,
    pub m_r: usize,
    pub m_b: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteBound {
    pub value: f64,
    /// `R̃_M = R_{M_r} + τ R_{M_b}`.
    pub rademacher_total: f64,
    pub q_r: f64,
    pub q_b: f64,
    pub q_rb: f64,
    /// True when `Q_{r,b} ≤ 0`: the bound holds with no guaranteed probability.
    pub vacuous: bool,
    pub input: DiscreteBoundInput,
}

/// `1 - 2 exp(-M δ² / (32 G^{2p}))`.
pub fn q_factor(m: usize, delta: f64, g: f64, p: f64) -> f64 {
    1.0 - 2.0 * (-(m as f64) * delta * delta / (32.0 * g.powf(2.0 * p))).exp()
}

/// Smallest δ for which one factor of `Q_{r,b}` reaches `q`.
pub fn delta_for_q(m: usize, g: f64, p: f64, q: f64) -> f64 {
    (32.0 * g.powf(2.0 * p) * (2.0 / (1.0 - q)).ln() / m as f64).sqrt()
}

pub fn discrete_bound(input: &DiscreteBoundInput) -> DiscreteBound {
    let r = input.rademacher_interior + input.tau * input.rademacher_boundary;
    let j = input.j_m + 2.0 * r + (1.0 + input.tau) * input.delta / 2.0;
    let q_r = q_factor(input.m_r, input.delta, input.g_r, input.p);
    let q_b = q_factor(input.m_b, input.delta, input.g_b, input.p);
    let q_rb = q_r * q_b;
    DiscreteBound {
        value: aposteriori_bound(j, input.c1, input.p),
        rademacher_total: r,
        q_r,
        q_b,
        // both factors negative also gives a positive product
        vacuous: q_r <= 0.0 || q_b <= 0.0,
        q_rb,
        input: input.clone(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HpBound {
    pub value: f64,
    pub j_hp: f64,
    pub delta_n: f64,
    pub projection_deficit: f64,
    pub c1: f64,
}

/// `√2 C₁⁻¹ (J^{h,N} + δ_n + ε)^{1/2}`. A deficit below `-1e-10` means the
/// projection violated Bessel's inequality.
pub fn hp_bound(j_hp: f64, c1: f64, epsilon_proj: f64, delta_n: f64) -> Result<HpBound> {
    if epsilon_proj < -1e-10 {
        return Err(Error::Numeric {
            index: 0,
            reason: format!("negative projection deficit {epsilon_proj:e}"),
        });
    }
    let eps = epsilon_proj.max(0.0);
    Ok(HpBound {
        value: 2f64.sqrt() * (j_hp + delta_n + eps).sqrt() / c1,
        j_hp,
        delta_n,
        projection_deficit: eps,
        c1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_examples() {
        assert!((aposteriori_bound(0.08, 1.0, 2.0) - 0.4).abs() < 1e-15);
        assert_eq!(aposteriori_bound(0.3, 2.0, 1.0), 0.15);
        assert_eq!(aposteriori_bound(0.0, 1.0, 2.0), 0.0);
        // p = 1: C ε (1 + τ) = 0.02 with C = 1, ε = 0.01, τ = 1 and unit masses split as (1, 0)
        let b = aposteriori_bound_regularized(0.1, 1.0, 1.0, 1, 0.01, 1.0, (1.0, 0.0));
        assert!((b - 0.12).abs() < 1e-15);
        let h = hp_bound(0.01, 1.0, 0.01, 0.0).unwrap();
        assert!((h.value - 0.2).abs() < 1e-15);
        assert!(hp_bound(0.01, 1.0, -1e-9, 0.0).is_err());
        assert_eq!(hp_bound(0.01, 1.0, -1e-12, 0.0).unwrap().projection_deficit, 0.0);
    }

    #[test]
    fn regularized_limits() {
        let j = 0.05;
        let base = aposteriori_bound(j, 1.0, 2.0);
        let r = aposteriori_bound_regularized(j, 1.0, 2.0, 1, 1e-9, 1.0, (1.0, 1.0));
        assert!((r - base).abs() < 1e-8);
        let mut last = 0.0;
        for eps in [1e-4, 1e-3, 1e-2, 0.1] {
            let b = aposteriori_bound_regularized(j, 1.0, 1.5, 1, eps, 2.0, (1.0, 1.0));
            assert!(b > last);
            last = b;
        }
    }

    #[test]
    fn discrete_examples() {
        let q = q_factor(10_000, 0.5, 1.0, 2.0);
        let oracle = 1.0 - 2.0 * (-78.125f64).exp();
        assert_eq!(q, oracle);
        let mut input = DiscreteBoundInput {
            j_m: 0.02,
            c1: 1.0,
            p: 2.0,
            tau: 1.0,
            rademacher_interior: 0.0,
            rademacher_boundary: 0.0,
            delta: 0.0,
            g_r: 1.0,
            g_b: 1.0,
            m_r: 64,
            m_b: 2,
        };
        let b = discrete_bound(&input);
        assert!(b.vacuous && b.q_r == -1.0);
        assert_eq!(b.value, aposteriori_bound(0.02, 1.0, 2.0));
        input.delta = delta_for_q(64, 1.0, 2.0, 0.9);
        input.m_b = 64;
        let b = discrete_bound(&input);
        assert!((b.q_r - 0.9).abs() < 1e-12 && !b.vacuous);
    }
}
