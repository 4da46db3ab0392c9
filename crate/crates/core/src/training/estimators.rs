use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bounds::delta_for_q;
use crate::error::{input, Result};
use crate::geometry::{BoxDomain, Region};
use crate::losses::{loss_continuous, loss_discrete};
use crate::models::{Activation, Evaluable, MlpArch, ParamModel, RbfSpec};
use crate::problems::ProblemSpec;
use crate::quadrature::{
    composite, derive_seed, fit_loglog_slope, pairwise_sum, sample_iid, stream_rng, QuadratureRule, SampleTarget,
};

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RademacherEstimate {
    pub m: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub family_size: usize,
    pub sample_trials: usize,
    pub sign_trials: usize,
}

/// Monte-Carlo estimate of `E sup_f |1/M Σ ε_i f(X_i)|` with `X_i` drawn from
/// the region's density. The sup is exact over the finite family, which
/// makes this a lower estimate for any larger class containing it.
pub fn estimate_rademacher<F>(
    family: &[F],
    region: &Region,
    target: SampleTarget,
    m: usize,
    sign_trials: usize,
    sample_trials: usize,
    seed: u64,
) -> Result<RademacherEstimate>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if family.is_empty() {
        return input("Rademacher family is empty");
    }
    if m == 0 || sign_trials == 0 || sample_trials == 0 {
        return input("M and trial counts must be positive");
    }
    let per_sample: Vec<Vec<f64>> = (0..sample_trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<f64>> {
            let key = derive_seed(seed, &[m as u64, t as u64]);
            let s = sample_iid(region, m, key, target)?;
            let values: Vec<Vec<f64>> = family
                .iter()
                .map(|f| s.points().map(f).collect::<Result<Vec<f64>>>())
                .collect::<Result<_>>()?;
            let mut rng = stream_rng(key, 2);
            let mut sups = Vec::with_capacity(sign_trials);
            let mut eps = vec![0.0; m];
            for _ in 0..sign_trials {
                for e in eps.iter_mut() {
                    *e = if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
                let sup = values
                    .iter()
                    .map(|v| v.iter().zip(&eps).map(|(a, b)| a * b).sum::<f64>().abs() / m as f64)
                    .fold(0.0, f64::max);
                sups.push(sup);
            }
            Ok(sups)
        })
        .collect::<Result<_>>()?;
    let (estimate, stderr) = if sample_trials >= 2 {
        let means: Vec<f64> = per_sample.iter().map(|s| pairwise_sum(s) / s.len() as f64).collect();
        mean_stderr(&means)
    } else {
        mean_stderr(&per_sample[0])
    };
    Ok(RademacherEstimate {
        m,
        estimate,
        stderr,
        family_size: family.len(),
        sample_trials,
        sign_trials,
    })
}

/// `count` tanh networks `(dim, width, 1)` with zero output bias, rescaled to
/// unit path norm `Σ_j |a_j| (Σ_i |w_ji| + |b_j|)`.
pub fn unit_path_norm_family(dim: usize, width: usize, count: usize, seed: u64) -> Result<Vec<ParamModel>> {
    let arch = MlpArch::new(vec![dim, width, 1], Activation::Tanh)?;
    (0..count)
        .map(|k| {
            let mut rng = stream_rng(derive_seed(seed, &[k as u64]), 3);
            let mut theta: Vec<f64> = (0..arch.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (w1, b1) = (width * dim, width);
            let out = w1 + b1;
            theta[out + width] = 0.0;
            let path: f64 = (0..width)
                .map(|j| {
                    let inner: f64 = theta[j * dim..(j + 1) * dim].iter().map(|w| w.abs()).sum::<f64>() + theta[w1 + j].abs();
                    theta[out + j].abs() * inner
                })
                .sum();
            for a in &mut theta[out..out + width] {
                *a /= path;
            }
            let mut m = ParamModel::mlp(arch.clone(), theta)?;
            m.seed = Some(seed);
            Ok(m)
        })
        .collect()
}

/// Dense-node sup norms `(G_r, G_b)` of the interior residual and of the
/// flux-weighted boundary residual `w^{1/p} |Bu - g|`.
pub fn residual_sup_norms(prob: &ProblemSpec, u: &(dyn Evaluable<f64> + Sync), p: f64) -> Result<(f64, f64)> {
    let d = prob.dim();
    let panels = if d == 1 { 64 } else { 8 };
    let rule = QuadratureRule::uniform(16, panels, d);
    let si = rule.samples(&prob.interior_region(), SampleTarget::Interior);
    let sb = rule.samples(&prob.boundary_region(), SampleTarget::Boundary);
    let gi = si
        .points()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|x| prob.interior_residual::<f64, _>(u, x).map(f64::abs))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let mut gb = 0.0f64;
    for x in sb.points() {
        let w = prob.boundary_weight(x)?;
        let r: f64 = prob.boundary_residual(u, x)?;
        gb = gb.max(w.powf(1.0 / p) * r.abs());
    }
    Ok((gi, gb))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    /// Target probability `Q_{r,b}` used to calibrate δ_r and δ_b.
    pub q_target: f64,
    pub sign_trials: usize,
    pub rademacher_trials: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            q_target: 0.95,
            sign_trials: 16,
            rademacher_trials: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub m: usize,
    pub trials: usize,
    /// Mean over trials of `sup_v |J^M(v) - J(v)|`.
    pub gap_mean: f64,
    pub gap_stderr: f64,
    pub rademacher_interior: f64,
    pub rademacher_boundary: f64,
    pub delta_r: f64,
    pub delta_b: f64,
    /// `2R_r + 2τR_b + δ_r/2 + τδ_b/2`.
    pub rhs: f64,
    /// The Rademacher terms alone.
    pub rhs_rademacher: f64,
    pub holds_fraction: f64,
    pub holds_fraction_rademacher: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapAudit {
    pub rows: Vec<GapRow>,
    pub g_r: f64,
    pub g_b: f64,
    pub q_target: f64,
    /// Log-log slope of `gap_mean` against M.
    pub gap_slope: Option<f64>,
    /// Fraction of all (M, trial) pairs with the gap below the full right-hand side.
    pub holds_fraction: f64,
}

/// Empirical check of `sup_v |J^M - J| ≤ 2R_{M_r} + 2τR_{M_b} + δ_r/2 + τδ_b/2`
/// over a finite model list, with `M_r = M_b = M` i.i.d. draws.
#[allow(clippy::too_many_arguments)]
pub fn loss_gap_audit(
    prob: &ProblemSpec,
    models: &[ParamModel],
    p: f64,
    tau: f64,
    m_list: &[usize],
    trials: usize,
    seed: u64,
    cfg: &AuditConfig,
) -> Result<GapAudit> {
    if models.is_empty() || trials == 0 {
        return input("audit needs at least one model and one trial");
    }
    let rule = QuadratureRule::uniform(16, 4, prob.dim());
    let reference: Vec<f64> = models
        .iter()
        .map(|v| loss_continuous(prob, v, p, tau, &rule).map(|b| b.total))
        .collect::<Result<_>>()?;
    let (mut g_r, mut g_b) = (0.0f64, 0.0f64);
    for v in models {
        let (a, b) = residual_sup_norms(prob, v, p)?;
        g_r = g_r.max(a);
        g_b = g_b.max(b);
    }
    let interior_family: Vec<_> = models
        .iter()
        .map(|v| move |x: &[f64]| prob.interior_residual::<f64, _>(v, x).map(|r| r.abs().powf(p)))
        .collect();
    let boundary_family: Vec<_> = models
        .iter()
        .map(|v| {
            move |x: &[f64]| {
                let r: f64 = prob.boundary_residual(v, x)?;
                Ok(prob.boundary_weight(x)? * r.abs().powf(p))
            }
        })
        .collect();
    let q_each = cfg.q_target.sqrt();
    let mut rows = Vec::with_capacity(m_list.len());
    let (mut held, mut total) = (0usize, 0usize);
    for &m in m_list {
        let gaps: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|t| -> Result<f64> {
                let key = derive_seed(seed, &[7, m as u64, t as u64]);
                let si = sample_iid(&prob.interior_region(), m, derive_seed(key, &[1]), SampleTarget::Interior)?;
                let sb = sample_iid(&prob.boundary_region(), m, derive_seed(key, &[2]), SampleTarget::Boundary)?;
                let mut sup = 0.0f64;
                for (v, j) in models.iter().zip(&reference) {
                    let jm = loss_discrete(prob, v, p, tau, &si, &sb)?.total;
                    sup = sup.max((jm - j).abs());
                }
                Ok(sup)
            })
            .collect::<Result<_>>()?;
        let rkey = derive_seed(seed, &[8, m as u64]);
        let ri = estimate_rademacher(
            &interior_family,
            &prob.interior_region(),
            SampleTarget::Interior,
            m,
            cfg.sign_trials,
            cfg.rademacher_trials,
            rkey,
        )?;
        let rb = estimate_rademacher(
            &boundary_family,
            &prob.boundary_region(),
            SampleTarget::Boundary,
            m,
            cfg.sign_trials,
            cfg.rademacher_trials,
            derive_seed(rkey, &[1]),
        )?;
        let delta_r = if g_r > 0.0 { delta_for_q(m, g_r, p, q_each) } else { 0.0 };
        let delta_b = if g_b > 0.0 { delta_for_q(m, g_b, p, q_each) } else { 0.0 };
        let rhs_rademacher = 2.0 * ri.estimate + 2.0 * tau * rb.estimate;
        let rhs = rhs_rademacher + delta_r / 2.0 + tau * delta_b / 2.0;
        let ok = gaps.iter().filter(|g| **g <= rhs).count();
        let ok_r = gaps.iter().filter(|g| **g <= rhs_rademacher).count();
        held += ok;
        total += trials;
        let (gap_mean, gap_stderr) = mean_stderr(&gaps);
        rows.push(GapRow {
            m,
            trials,
            gap_mean,
            gap_stderr,
            rademacher_interior: ri.estimate,
            rademacher_boundary: rb.estimate,
            delta_r,
            delta_b,
            rhs,
            rhs_rademacher,
            holds_fraction: ok as f64 / trials as f64,
            holds_fraction_rademacher: ok_r as f64 / trials as f64,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.m as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.gap_mean).collect();
    Ok(GapAudit {
        gap_slope: fit_loglog_slope(&xs, &ys).ok(),
        holds_fraction: held as f64 / total as f64,
        rows,
        g_r,
        g_b,
        q_target: cfg.q_target,
    })
}

/// Margin around the centers beyond which a unit Gaussian is below e^{-49}.
const RBF_MARGIN: f64 = 7.0;

/// A random member of `G_{n,m}` in one dimension: `n = min(⌊e^{m²}⌋, 2m + 2)`
/// centers starting at 0 with gaps drawn from `(1.05/m, 2/m)`.
pub fn random_rbf_member(m: usize, rng: &mut impl Rng) -> Result<ParamModel> {
    let mf = m as f64;
    let n = ((mf * mf).exp().floor() as usize).min(2 * m + 2).max(1);
    let mut centers = Vec::with_capacity(n);
    let mut c = 0.0;
    for k in 0..n {
        if k > 0 {
            c += rng.random_range(1.05..2.0) / mf;
        }
        centers.push(vec![c]);
    }
    let mut coeffs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    if coeffs.iter().all(|a| a.abs() < 1e-3) {
        coeffs[0] = 1.0;
    }
    ParamModel::rbf(RbfSpec::new(1, centers, mf)?, coeffs)
}

fn rbf_span(v: &ParamModel) -> (f64, f64) {
    match &v.kind {
        crate::models::ModelKind::GaussianRbf(s) => {
            let lo = s.centers.iter().map(|c| c[0]).fold(f64::INFINITY, f64::min);
            let hi = s.centers.iter().map(|c| c[0]).fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        }
        _ => (0.0, 0.0),
    }
}

/// `(‖v‖², ‖v'‖²)` over the real line for a one-dimensional RBF member.
pub fn rbf_l2_norms(v: &ParamModel) -> Result<(f64, f64)> {
    let (lo, hi) = rbf_span(v);
    let (a, b) = (lo - RBF_MARGIN, hi + RBF_MARGIN);
    let panels = ((b - a) * 2.0).ceil() as usize;
    let (x, w) = composite(a, b, 16, panels);
    let mut v2 = Vec::with_capacity(x.len());
    let mut d2 = Vec::with_capacity(x.len());
    for (xi, wi) in x.iter().zip(&w) {
        let j = v.jet(&[*xi])?;
        v2.push(wi * j.value * j.value);
        d2.push(wi * j.d1(0) * j.d1(0));
    }
    Ok((pairwise_sum(&v2), pairwise_sum(&d2)))
}

/// Trapezoid `‖v‖²_{Y_M}` with `n` nodes on `[a, b]`.
pub fn trapezoid_norm2(v: &ParamModel, a: f64, b: f64, n: usize) -> Result<f64> {
    let h = (b - a) / (n - 1) as f64;
    let mut terms = Vec::with_capacity(n);
    for i in 0..n {
        let x = if i + 1 == n { b } else { a + i as f64 * h };
        let w = if i == 0 || i + 1 == n { h / 2.0 } else { h };
        let val: f64 = v.value(&[x])?;
        terms.push(w * val * val);
    }
    Ok(pairwise_sum(&terms))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernsteinRow {
    pub m: usize,
    pub centers: usize,
    /// Largest `‖v'‖ / ‖v‖` over the sample.
    pub max_ratio: f64,
    /// `max_ratio / m`, the empirical Bernstein constant.
    pub constant: f64,
    pub interval: (f64, f64),
    /// Smallest trapezoid grid with `C M^{-β} m ≤ 3/4`, `C = constant · L^β`.
    pub grid_m: usize,
    /// Extremes of `‖v‖²_Y / ‖v‖²_{Y_M}` over fresh members at `grid_m`.
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// `4‖v‖²_{Y_M} ≥ ‖v‖²_Y ≥ (4/7)‖v‖²_{Y_M}` for every checked member.
    pub equivalence_holds: bool,
}

/// Empirical Bernstein constants of Gaussian RBF families and the implied
/// trapezoid grid sizes for the discrete-norm equivalence.
pub fn bernstein_probe(m_list: &[usize], samples_per_m: usize, seed: u64, beta: f64) -> Result<Vec<BernsteinRow>> {
    if samples_per_m == 0 || !(beta > 0.0) {
        return input("need at least one sample per level and beta > 0");
    }
    m_list
        .iter()
        .map(|&m| {
            if m == 0 {
                return input("m must be positive");
            }
            let mut rng = stream_rng(derive_seed(seed, &[m as u64]), 4);
            let members: Vec<ParamModel> =
                (0..samples_per_m).map(|_| random_rbf_member(m, &mut rng)).collect::<Result<_>>()?;
            let mut check: Vec<ParamModel> =
                (0..samples_per_m).map(|_| random_rbf_member(m, &mut rng)).collect::<Result<_>>()?;
            let mut max_ratio = 0.0f64;
            for v in &members {
                let (n0, n1) = rbf_l2_norms(v)?;
                max_ratio = max_ratio.max((n1 / n0).sqrt());
            }
            let span = members.iter().chain(&check).map(|v| rbf_span(v).1).fold(0.0, f64::max);
            let (a, b) = (-RBF_MARGIN, span + RBF_MARGIN);
            let len = b - a;
            let constant = max_ratio / m as f64;
            let grid_m = ((len * (4.0 * constant * m as f64 / 3.0).powf(1.0 / beta)).ceil() as usize).max(2);
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for v in check.drain(..) {
                let y = rbf_l2_norms(&v)?.0;
                let ym = trapezoid_norm2(&v, a, b, grid_m)?;
                lo = lo.min(y / ym);
                hi = hi.max(y / ym);
            }
            Ok(BernsteinRow {
                m,
                centers: members.iter().map(|v| v.param_count()).max().unwrap_or(0),
                max_ratio,
                constant,
                interval: (a, b),
                grid_m,
                ratio_min: lo,
                ratio_max: hi,
                equivalence_holds: lo >= 4.0 / 7.0 && hi <= 4.0,
            })
        })
        .collect()
}

/// Unit box of the given dimension as a sampling region.
pub fn unit_region(dim: usize) -> Region {
    Region::uniform(vec![BoxDomain::unit(dim)])
}
