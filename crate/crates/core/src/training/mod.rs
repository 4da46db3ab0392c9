//! Optimization of loss plans over model parameters, and the error bounds
//! and sampling diagnostics evaluated on the results.

mod bounds;
mod estimators;
mod optim;
mod report;

pub use bounds::{
    aposteriori_bound, aposteriori_bound_regularized, delta_for_q, discrete_bound, hp_bound, measure_masses,
    q_factor, regularization_constant, sandwich_factor, DiscreteBound, DiscreteBoundInput, HpBound, Provenance,
    StabilityConstant,
};
pub use estimators::{
    bernstein_probe, estimate_rademacher, loss_gap_audit, random_rbf_member, rbf_l2_norms, residual_sup_norms,
    trapezoid_norm2, unit_path_norm_family, unit_region, AuditConfig, BernsteinRow, GapAudit, GapRow,
    RademacherEstimate,
};
pub use optim::{minimize, Algorithm, OptimConfig, Parts, StopReason, Trace, TrajPoint, STOP_WINDOW};
pub use report::{assess, train, BoundEval, Diagnostics, RunReport, Seeds, REPORT_SCHEMA};

use crate::error::Result;

/// `discrete_bound` with `J^M`, `p` and `τ` taken from a finished run.
#[allow(clippy::too_many_arguments)]
pub fn discrete_bound_report(
    run: &RunReport,
    c1: f64,
    rademacher: (&RademacherEstimate, &RademacherEstimate),
    delta: f64,
    g_r: f64,
    g_b: f64,
) -> Result<DiscreteBound> {
    let spec = run
        .loss
        .as_ref()
        .ok_or_else(|| crate::Error::Input("report has no loss spec".into()))?;
    let j_m = run
        .final_total()
        .ok_or_else(|| crate::Error::Input("report has no final loss".into()))?;
    Ok(discrete_bound(&DiscreteBoundInput {
        j_m,
        c1,
        p: spec.p,
        tau: spec.tau,
        rademacher_interior: rademacher.0.estimate,
        rademacher_boundary: rademacher.1.estimate,
        delta,
        g_r,
        g_b,
        m_r: rademacher.0.m,
        m_b: rademacher.1.m,
    }))
}

/// `hp_bound` on the final loss of a finished run.
pub fn hp_bound_report(run: &RunReport, c1: f64, epsilon_proj: f64, delta_n: f64) -> Result<HpBound> {
    let j = run
        .final_total()
        .ok_or_else(|| crate::Error::Input("report has no final loss".into()))?;
    hp_bound(j, c1, epsilon_proj, delta_n)
}
