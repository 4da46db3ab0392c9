use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::{ModelSection, RunSpec};
use super::runner::{execute_all, stability_constant, RunContext, RunOutcome};
use crate::error::{input, Result};
use crate::geometry::BoxDomain;
use crate::losses::{
    build_basis, loss_continuous, loss_discrete, loss_hp_vrm, loss_pwconst_weak, projection_deficit, BasisKind,
    LossForm, LossSpec, Partition, PartitionConfig,
};
use crate::models::{Activation, AnalyticFn};
use crate::problems::{norm_of, preset, EllipticCoeffs, NormKind, Operator, ProblemSpec};
use crate::quadrature::{boundary_atoms, grid_samples, QuadratureRule};
use crate::training::OptimConfig;

fn num(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

/// `-Δu = 0` on (0,1) with `u = 0` on the boundary.
pub fn counterexample_problem() -> Result<ProblemSpec> {
    let d = BoxDomain::unit(1);
    let op = Operator::Elliptic(EllipticCoeffs::laplacian(&d, 0.0)?);
    ProblemSpec::new(
        "counterexample",
        d,
        op,
        AnalyticFn::zero(1),
        AnalyticFn::zero(1),
        2.0,
        NormKind::L2,
        NormKind::L2,
        Some(AnalyticFn::zero(1)),
    )
}

/// `-sin(2π M x) / (2π M)²`, whose residual vanishes on the grid `i/M`.
pub fn adversary(m_r: usize) -> AnalyticFn {
    let k = 2.0 * PI * m_r as f64;
    AnalyticFn::new(format!("adversary({m_r})"), 1, move |x| x[0].scale(k).sin().scale(-1.0 / (k * k)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleRow {
    pub m_r: usize,
    pub discrete_loss: f64,
    pub continuous_loss: f64,
    pub gap: f64,
    /// `‖u‖_{L²}` by quadrature.
    pub l2_norm: f64,
    /// `(2 (2π M)⁴)^{-1/2}`.
    pub l2_norm_closed_form: f64,
}

pub const COUNTEREXAMPLE_HEADER: &str = "m_r,discrete_loss,continuous_loss,gap,l2_norm,l2_norm_closed_form";

pub fn counterexample_csv(rows: &[CounterexampleRow]) -> String {
    let mut s = format!("{COUNTEREXAMPLE_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:e},{:e},{:e},{:e},{:e}",
            r.m_r, r.discrete_loss, r.continuous_loss, r.gap, r.l2_norm, r.l2_norm_closed_form
        );
    }
    s
}

/// Discrete loss on the uniform grid against the continuous loss for the
/// adversary of each `M_r` (p = 2, τ = 1).
pub fn scenario_counterexample(m_r_list: &[usize]) -> Result<Vec<CounterexampleRow>> {
    let prob = counterexample_problem()?;
    let rule = QuadratureRule::uniform(16, 4, 1);
    let atoms = boundary_atoms(&prob.boundary_region())?;
    let mut rows = Vec::new();
    for &m in m_r_list {
        if m < 2 {
            return input(format!("counterexample needs M_r >= 2, got {m}"));
        }
        let u = adversary(m);
        let grid = grid_samples(&prob.domain, m)?;
        let discrete = loss_discrete(&prob, &u, 2.0, 1.0, &grid, &atoms)?.total;
        let continuous = loss_continuous(&prob, &u, 2.0, 1.0, &rule)?.total;
        let k = 2.0 * PI * m as f64;
        rows.push(CounterexampleRow {
            m_r: m,
            discrete_loss: discrete,
            continuous_loss: continuous,
            gap: (continuous - discrete).abs(),
            l2_norm: norm_of(&prob, &u, NormKind::L2)?,
            l2_norm_closed_form: (2.0 * k.powi(4)).sqrt().recip(),
        });
    }
    Ok(rows)
}

/// Training settings shared by the trained scenarios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSetup {
    pub optim: OptimConfig,
    pub tau: f64,
    pub activation: Activation,
    /// Hidden width where the scenario does not sweep it.
    pub width: usize,
    pub jobs: usize,
    /// Configured C₁; probed when absent.
    pub c1: Option<f64>,
}

impl Default for ScenarioSetup {
    fn default() -> Self {
        ScenarioSetup {
            optim: OptimConfig {
                step_size: 1e-2,
                max_iter: 2000,
                ..OptimConfig::default()
            },
            tau: 10.0,
            activation: Activation::Tanh,
            width: 16,
            jobs: 1,
            c1: None,
        }
    }
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    Some(if k % 2 == 1 { xs[k / 2] } else { 0.5 * (xs[k / 2 - 1] + xs[k / 2]) })
}

/// One (n, M) cell; `m_r = None` is the continuous-quadrature column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCell {
    pub n: usize,
    pub m_r: Option<usize>,
    pub errors: Vec<Option<f64>>,
    pub median: Option<f64>,
    pub failed: usize,
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub preset: String,
    pub seeds: Vec<u64>,
    pub cells: Vec<ConvergenceCell>,
    pub runs: Vec<RunOutcome>,
    /// Per n: medians nonincreasing along the M list.
    pub error_vs_m_nonincreasing: Vec<(usize, bool)>,
    /// Medians nonincreasing in n at the largest M.
    pub error_vs_n_nonincreasing: bool,
}

fn nonincreasing(xs: &[Option<f64>]) -> bool {
    xs.iter().all(|x| x.is_some()) && xs.windows(2).all(|w| w[1].unwrap() <= w[0].unwrap())
}

impl ConvergenceReport {
    pub fn cell(&self, n: usize, m_r: Option<usize>) -> Option<&ConvergenceCell> {
        self.cells.iter().find(|c| c.n == n && c.m_r == m_r)
    }

    pub fn cells_csv(&self) -> String {
        let mut s = String::from("n,m_r,median_error,ok,failed\n");
        for c in &self.cells {
            let m = c.m_r.map(|m| m.to_string()).unwrap_or_else(|| "inf".into());
            let ok = c.errors.len() - c.failed;
            let _ = writeln!(s, "{},{},{},{},{}", c.n, m, num(c.median), ok, c.failed);
        }
        s
    }

    pub fn runs_csv(&self) -> String {
        let mut s = String::from("n,m_r,seed,status,final_loss,continuous_loss,v_error,bound,message\n");
        for o in &self.runs {
            let r = o.report.as_ref();
            let m = if o.spec.m_b == Some(0) { "inf".into() } else { o.spec.m_r.to_string() };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                o.spec.n.unwrap_or(0),
                m,
                o.spec.seed,
                if o.ok() { "ok" } else { "failed" },
                num(r.and_then(|r| r.final_total())),
                num(r.and_then(|r| r.diagnostics.continuous_loss)),
                num(o.v_error()),
                num(r.and_then(|r| r.bounds.first()).map(|b| b.value)),
                o.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
            );
        }
        s
    }
}

/// Discrete RM over the (n, M_r) grid plus a continuous-loss column per n,
/// with per-cell median V-errors over `seeds`. Failed runs are kept.
pub fn scenario_convergence(
    preset_name: &str,
    n_list: &[usize],
    m_list: &[usize],
    seeds: &[u64],
    setup: &ScenarioSetup,
) -> Result<ConvergenceReport> {
    let prob = preset(preset_name)?;
    if prob.exact.is_none() {
        return input(format!("{preset_name} has no exact solution"));
    }
    if n_list.is_empty() || m_list.is_empty() || seeds.is_empty() {
        return input("convergence scenario needs nonempty n, M and seed lists");
    }
    let c1 = stability_constant(&prob, setup.c1)?;
    let model = ModelSection {
        hidden: vec![setup.width],
        activation: setup.activation,
    };
    let mut discrete = LossSpec::new(LossForm::DiscreteRm, 2.0, setup.tau);
    discrete.samples.m_b = None;
    let continuous = LossSpec::new(LossForm::ContinuousRm, 2.0, setup.tau);

    let mut runs = Vec::new();
    let mut cont_runs = Vec::new();
    for &n in n_list {
        for &m in m_list {
            for &seed in seeds {
                runs.push(RunSpec {
                    index: runs.len(),
                    n: Some(n),
                    m_r: m,
                    m_b: None,
                    tau: setup.tau,
                    p: 2.0,
                    epsilon: 0.0,
                    seed,
                });
            }
        }
        for &seed in seeds {
            // m_b = Some(0) marks the continuous column; the loss ignores samples
            cont_runs.push(RunSpec {
                index: cont_runs.len(),
                n: Some(n),
                m_r: 0,
                m_b: Some(0),
                tau: setup.tau,
                p: 2.0,
                epsilon: 0.0,
                seed,
            });
        }
    }
    let ctx = |loss| RunContext {
        prob: &prob,
        c1: &c1,
        model: &model,
        loss,
        optim: &setup.optim,
    };
    let mut outcomes = execute_all(&ctx(&discrete), &runs, setup.jobs)?;
    let cont = execute_all(&ctx(&continuous), &cont_runs, setup.jobs)?;
    outcomes.extend(cont.into_iter().map(|mut o| {
        o.spec.m_r = 0;
        o
    }));

    let mut cells = Vec::new();
    for &n in n_list {
        let cols = m_list.iter().map(|&m| Some(m)).chain(std::iter::once(None));
        for m in cols {
            let errors: Vec<Option<f64>> = outcomes
                .iter()
                .filter(|o| o.spec.n == Some(n) && (o.spec.m_b == Some(0)) == m.is_none())
                .filter(|o| m.is_none() || o.spec.m_r == m.unwrap())
                .map(|o| if o.ok() { o.v_error() } else { None })
                .collect();
            let failed = errors.iter().filter(|e| e.is_none()).count();
            cells.push(ConvergenceCell {
                n,
                m_r: m,
                median: median(errors.iter().flatten().copied().collect()),
                errors,
                failed,
            });
        }
    }
    let med = |n: usize, m: Option<usize>| cells.iter().find(|c| c.n == n && c.m_r == m).and_then(|c| c.median);
    let error_vs_m_nonincreasing = n_list
        .iter()
        .map(|&n| (n, nonincreasing(&m_list.iter().map(|&m| med(n, Some(m))).collect::<Vec<_>>())))
        .collect();
    let m_max = *m_list.iter().max().unwrap();
    let error_vs_n_nonincreasing = nonincreasing(&n_list.iter().map(|&n| med(n, Some(m_max))).collect::<Vec<_>>());
    Ok(ConvergenceReport {
        preset: preset_name.into(),
        seeds: seeds.to_vec(),
        cells,
        runs: outcomes,
        error_vs_m_nonincreasing,
        error_vs_n_nonincreasing,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HpRow {
    /// `strong`, `hp_legendre` or `pwconst`.
    pub form: String,
    pub k: Option<usize>,
    pub n: Option<usize>,
    pub status: String,
    pub final_loss: Option<f64>,
    pub v_error: Option<f64>,
    pub projection_deficit: Option<f64>,
    pub hp_bound: Option<f64>,
    /// Deficit of the residual of `u = 0` (the source term), independent of training.
    pub reference_deficit: Option<f64>,
    /// Loss of the exact solution under this form.
    pub exact_loss: f64,
    pub message: String,
}

pub const HP_HEADER: &str =
    "form,k,n,status,final_loss,v_error,projection_deficit,hp_bound,reference_deficit,exact_loss,message";

pub fn hp_csv(rows: &[HpRow]) -> String {
    let mut s = format!("{HP_HEADER}\n");
    let opt = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{:e},{}",
            r.form,
            opt(r.k),
            opt(r.n),
            r.status,
            num(r.final_loss),
            num(r.v_error),
            num(r.projection_deficit),
            num(r.hp_bound),
            num(r.reference_deficit),
            r.exact_loss,
            r.message.replace([',', '\n'], ";"),
        );
    }
    s
}

/// Strong-form RM against hp-VRM (Legendre, order `N` on `K` cells per axis)
/// and the piecewise-constant weak form on `K` cells, all from the same
/// initial model.
pub fn scenario_hp_vs_strong(
    preset_name: &str,
    k_list: &[usize],
    n_list: &[usize],
    seed: u64,
    setup: &ScenarioSetup,
) -> Result<Vec<HpRow>> {
    let prob = preset(preset_name)?;
    if prob.p != 2.0 {
        return input(format!("{preset_name} is not a p = 2 problem"));
    }
    let exact = prob
        .exact
        .clone()
        .ok_or_else(|| crate::Error::Input(format!("{preset_name} has no exact solution")))?;
    let d = prob.dim();
    let c1 = stability_constant(&prob, setup.c1)?;
    let model = ModelSection {
        hidden: vec![setup.width],
        activation: setup.activation,
    };
    let rule = QuadratureRule::uniform(16, 4, d);
    let zero = AnalyticFn::zero(d);

    let mut cases: Vec<(String, Option<usize>, Option<usize>, LossSpec)> = Vec::new();
    cases.push(("strong".into(), None, None, LossSpec::new(LossForm::ContinuousRm, 2.0, setup.tau)));
    for &k in k_list {
        let mut pw = LossSpec::new(LossForm::PwconstWeak, 2.0, setup.tau);
        pw.partition = Some(PartitionConfig {
            cells: vec![k; d],
            kind: BasisKind::Pwconst,
            order: 1,
            integrate_by_parts: false,
        });
        cases.push(("pwconst".into(), Some(k), Some(1), pw));
        for &n in n_list {
            let mut hp = LossSpec::new(LossForm::HpVrm, 2.0, setup.tau);
            hp.partition = Some(PartitionConfig {
                cells: vec![k; d],
                kind: BasisKind::Legendre,
                order: n,
                integrate_by_parts: false,
            });
            cases.push(("hp_legendre".into(), Some(k), Some(n), hp));
        }
    }

    let run = RunSpec {
        index: 0,
        n: None,
        m_r: 1,
        m_b: None,
        tau: setup.tau,
        p: 2.0,
        epsilon: 0.0,
        seed,
    };
    let mut rows = Vec::new();
    for (form, k, n, spec) in cases {
        let ctx = RunContext {
            prob: &prob,
            c1: &c1,
            model: &model,
            loss: &spec,
            optim: &setup.optim,
        };
        let o = ctx.execute(&run);
        let (exact_loss, reference_deficit) = match &spec.partition {
            None => (loss_continuous(&prob, &exact, 2.0, setup.tau, &rule)?.total, None),
            Some(pc) => {
                let part = Partition::uniform(&prob.domain, &pc.cells, pc.kind, pc.order)?;
                let basis = build_basis(&part)?;
                let j = if form == "pwconst" {
                    loss_pwconst_weak(&prob, &exact, setup.tau, &part, &rule, false)?.total
                } else {
                    loss_hp_vrm(&prob, &exact, setup.tau, &basis, &rule)?.total
                };
                (j, Some(projection_deficit(&prob, &zero, &basis, &rule)?))
            }
        };
        let r = o.report.as_ref();
        rows.push(HpRow {
            form,
            k,
            n,
            status: if o.ok() { "ok" } else { "failed" }.into(),
            final_loss: r.and_then(|r| r.final_total()),
            v_error: o.v_error(),
            projection_deficit: r.and_then(|r| r.diagnostics.projection_deficit),
            hp_bound: r.and_then(|r| r.bounds.iter().find(|b| b.name == "hp")).map(|b| b.value),
            reference_deficit,
            exact_loss,
            message: o.error.clone().unwrap_or_default(),
        });
    }
    Ok(rows)
}
