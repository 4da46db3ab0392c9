use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::bounds::{
    aposteriori_bound, aposteriori_bound_regularized, hp_bound, measure_masses, HpBound, StabilityConstant,
};
use super::optim::{minimize, OptimConfig, StopReason, TrajPoint};
use crate::error::{Error, Result};
use crate::losses::{
    build_basis, loss_continuous, loss_regularized, projection_deficit, LossBreakdown, LossForm, LossSpec, Partition,
};
use crate::models::{Checkpoint, ParamModel};
use crate::problems::{v_norm_distance, ProblemSpec};

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub model: Option<u64>,
    pub samples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEval {
    pub name: String,
    pub value: f64,
    pub c1: StabilityConstant,
    /// The loss value plugged into the bound.
    pub loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hp: Option<HpBound>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `J_τ` of the trained model by refined quadrature, same `p` and `τ`.
    pub continuous_loss: Option<f64>,
    pub continuous_converged: Option<bool>,
    /// `‖u_θ - u*‖_V` when the exact solution is known.
    pub v_error: Option<f64>,
    pub projection_deficit: Option<f64>,
    /// Error over bound; above 1 the bound was violated.
    pub bound_ratio: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: u32,
    pub problem: String,
    pub loss: Option<LossSpec>,
    pub model: String,
    pub param_count: usize,
    pub optim: Option<OptimConfig>,
    pub trajectory: Vec<TrajPoint>,
    /// Iteration whose parameters were kept.
    pub best_iteration: usize,
    pub final_loss: Option<LossBreakdown>,
    pub stop: Option<StopReason>,
    /// δ_n used by the stopping rule.
    pub slack: f64,
    pub checkpoint: Option<Checkpoint>,
    pub bounds: Vec<BoundEval>,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
    pub seeds: Seeds,
    pub wall_clock_s: f64,
}

impl RunReport {
    /// The trained model, restored from the checkpoint.
    pub fn model(&self) -> Result<ParamModel> {
        match &self.checkpoint {
            Some(c) => ParamModel::from_checkpoint(c),
            None => Err(Error::Input("report carries no checkpoint".into())),
        }
    }

    pub fn final_total(&self) -> Option<f64> {
        self.final_loss.as_ref().map(|b| b.total)
    }

    pub fn trajectory_csv(&self) -> String {
        let mut s = String::from("iteration,loss,residual_part,boundary_part,grad_norm\n");
        for t in &self.trajectory {
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{:e}\n",
                t.iteration, t.loss, t.residual_part, t.boundary_part, t.grad_norm
            ));
        }
        s
    }
}

/// Optimizes `spec` over the parameters of `model`.
pub fn train(prob: &ProblemSpec, spec: &LossSpec, model: &ParamModel, optim: &OptimConfig) -> Result<RunReport> {
    let warnings = spec.validate()?;
    optim.validate()?;
    let plan = spec.plan(prob, optim.seed)?;
    let start = Instant::now();
    let mut seen: Vec<LossBreakdown> = Vec::new();
    let outcome = minimize(
        |theta| {
            let (b, g) = plan.value_and_grad(model, theta)?;
            let parts = (b.total, b.interior, b.boundary);
            seen.push(b);
            Ok((parts, g))
        },
        model.theta.clone(),
        optim,
    );
    let mut report = RunReport {
        schema: REPORT_SCHEMA,
        problem: prob.name.clone(),
        loss: Some(spec.clone()),
        model: model.describe(),
        param_count: model.param_count(),
        optim: Some(optim.clone()),
        warnings,
        seeds: Seeds {
            model: model.seed,
            samples: optim.seed,
        },
        ..Default::default()
    };
    let (trace, failure) = match outcome {
        Ok(t) => (t, None),
        Err((t, k, why)) => (t, Some((k, why))),
    };
    report.slack = trace.slack;
    report.best_iteration = trace.best_iteration;
    report.stop = Some(trace.stop);
    report.trajectory = trace.points;
    let trained = model.with_theta(trace.theta);
    report.checkpoint = trained.to_checkpoint(serde_json::json!({ "problem": prob.name })).ok();
    report.wall_clock_s = start.elapsed().as_secs_f64();
    if let Some((iteration, reason)) = failure {
        return Err(Error::TrainingAborted {
            iteration,
            reason,
            report: Box::new(report),
        });
    }
    report.final_loss = seen.into_iter().nth(trace.best_iteration);
    Ok(report)
}

/// Fills `report.diagnostics` and `report.bounds` for the trained model:
/// the continuous loss, the V-norm error and the a posteriori bounds that
/// apply to the loss form.
pub fn assess(prob: &ProblemSpec, report: &mut RunReport, c1: &StabilityConstant) -> Result<()> {
    let spec = report.loss.clone().ok_or_else(|| Error::Input("report has no loss spec".into()))?;
    let model = report.model()?;
    let rule = spec.rule(prob.dim())?;
    let cont = loss_continuous(prob, &model, spec.p, spec.tau, &rule)?;
    report.diagnostics.continuous_loss = Some(cont.total);
    report.diagnostics.continuous_converged = cont.quadrature_certificate.as_ref().map(|c| c.converged);
    let bound = aposteriori_bound(cont.total, c1.value, spec.p);
    report.bounds.push(BoundEval {
        name: "aposteriori".into(),
        value: bound,
        c1: c1.clone(),
        loss: cont.total,
        hp: None,
    });
    match spec.form {
        LossForm::RegularizedRm => {
            let m = spec.m.unwrap_or_else(|| crate::losses::minimal_m(spec.p));
            let j = loss_regularized(prob, &model, spec.p, m, spec.epsilon, spec.tau, &rule)?.total;
            let masses = measure_masses(prob)?;
            report.bounds.push(BoundEval {
                name: "aposteriori_regularized".into(),
                value: aposteriori_bound_regularized(j, c1.value, spec.p, m, spec.epsilon, spec.tau, masses),
                c1: c1.clone(),
                loss: j,
                hp: None,
            });
        }
        LossForm::HpVrm | LossForm::PwconstWeak => {
            let pc = spec.partition.as_ref().ok_or_else(|| Error::Config("hp form without partition".into()))?;
            let part = Partition::uniform(&prob.domain, &pc.cells, pc.kind, pc.order)?;
            let basis = build_basis(&part)?;
            let deficit = projection_deficit(prob, &model, &basis, &rule)?;
            report.diagnostics.projection_deficit = Some(deficit);
            let j = report.final_total().unwrap_or(f64::NAN);
            let hp = hp_bound(j, c1.value, deficit, report.slack)?;
            report.bounds.push(BoundEval {
                name: "hp".into(),
                value: hp.value,
                c1: c1.clone(),
                loss: j,
                hp: Some(hp),
            });
        }
        LossForm::ContinuousRm | LossForm::DiscreteRm => {}
    }
    if let Some(exact) = &prob.exact {
        let err = v_norm_distance(prob, &model, exact)?;
        report.diagnostics.v_error = Some(err);
        report.diagnostics.bound_ratio = Some(if bound > 0.0 { err / bound } else { f64::INFINITY });
    }
    Ok(())
}
