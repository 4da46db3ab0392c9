use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, ModelSection, OutputFormat, RunSpec};
use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::models::ParamModel;
use crate::problems::{preset, ProblemSpec};
use crate::quadrature::derive_seed;
use crate::training::{assess, train, OptimConfig, RunReport, StabilityConstant};

pub const SUMMARY_HEADER: &str = "key,status,n,m_r,m_b,tau,p,epsilon,seed,param_count,iterations,best_iteration,stop,\
final_loss,interior_loss,boundary_loss,continuous_loss,v_error,bound,c1,c1_source,bound_ratio,\
projection_deficit,hp_bound,message";

pub fn tool_version() -> String {
    format!("rm-lab {}", env!("CARGO_PKG_VERSION"))
}

/// Outcome of one grid point; failed runs keep whatever report survived.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub spec: RunSpec,
    pub report: Option<RunReport>,
    pub error: Option<String>,
}

impl RunOutcome {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn v_error(&self) -> Option<f64> {
        self.report.as_ref().and_then(|r| r.diagnostics.v_error)
    }
}

/// Shared inputs of every run of a sweep.
pub struct RunContext<'a> {
    pub prob: &'a ProblemSpec,
    pub c1: &'a StabilityConstant,
    pub model: &'a ModelSection,
    pub loss: &'a LossSpec,
    pub optim: &'a OptimConfig,
}

impl RunContext<'_> {
    pub fn loss_for(&self, run: &RunSpec) -> LossSpec {
        let mut spec = self.loss.clone();
        spec.samples.m_r = run.m_r;
        spec.samples.m_b = run.m_b;
        spec.tau = run.tau;
        spec.p = run.p;
        spec.epsilon = run.epsilon;
        spec
    }

    /// Trains and assesses one grid point. The model seed and the sample
    /// seed are separate streams of the run seed.
    pub fn execute(&self, run: &RunSpec) -> RunOutcome {
        let attempt = || -> Result<RunReport> {
            let arch = self.model.arch(self.prob.dim(), run.n)?;
            let model = ParamModel::mlp_init(arch, derive_seed(run.seed, &[10]))?;
            let spec = self.loss_for(run);
            let mut optim = self.optim.clone();
            optim.seed = derive_seed(run.seed, &[20]);
            let mut report = train(self.prob, &spec, &model, &optim)?;
            assess(self.prob, &mut report, self.c1)?;
            Ok(report)
        };
        match attempt() {
            Ok(r) => RunOutcome {
                spec: run.clone(),
                report: Some(r),
                error: None,
            },
            Err(Error::TrainingAborted { iteration, reason, report }) => RunOutcome {
                spec: run.clone(),
                report: Some(*report),
                error: Some(format!("training aborted at iteration {iteration}: {reason}")),
            },
            Err(e) => RunOutcome {
                spec: run.clone(),
                report: None,
                error: Some(e.to_string()),
            },
        }
    }
}

/// Runs `runs` on a pool of `jobs` workers; results come back in input order.
pub fn execute_all(ctx: &RunContext, runs: &[RunSpec], jobs: usize) -> Result<Vec<RunOutcome>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| runs.par_iter().map(|r| ctx.execute(r)).collect()))
}

pub fn stability_constant(prob: &ProblemSpec, configured: Option<f64>) -> Result<StabilityConstant> {
    match configured {
        Some(c) => StabilityConstant::configured(c),
        None => StabilityConstant::probed(prob),
    }
}

fn num(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One CSV line per outcome, in the given order. Wall-clock time is left out
/// so reruns compare byte for byte.
pub fn summary_csv(outcomes: &[RunOutcome]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for o in outcomes {
        let r = o.report.as_ref();
        let spec = &o.spec;
        let fl = r.and_then(|r| r.final_loss.as_ref());
        let bound = r.and_then(|r| r.bounds.iter().find(|b| b.name == "aposteriori"));
        let hp = r.and_then(|r| r.bounds.iter().find(|b| b.name == "hp"));
        let d = r.map(|r| &r.diagnostics);
        let cols = [
            spec.key(),
            if o.ok() { "ok" } else { "failed" }.to_string(),
            spec.n.map(|n| n.to_string()).unwrap_or_default(),
            spec.m_r.to_string(),
            spec.m_b.map(|n| n.to_string()).unwrap_or_default(),
            format!("{:e}", spec.tau),
            format!("{:e}", spec.p),
            format!("{:e}", spec.epsilon),
            spec.seed.to_string(),
            r.map(|r| r.param_count.to_string()).unwrap_or_default(),
            r.map(|r| r.trajectory.len().to_string()).unwrap_or_default(),
            r.map(|r| r.best_iteration.to_string()).unwrap_or_default(),
            r.and_then(|r| r.stop)
                .map(|s| format!("{s:?}").to_lowercase())
                .unwrap_or_default(),
            num(fl.map(|b| b.total)),
            num(fl.map(|b| b.interior)),
            num(fl.map(|b| b.boundary)),
            num(d.and_then(|d| d.continuous_loss)),
            num(d.and_then(|d| d.v_error)),
            num(bound.map(|b| b.value)),
            num(bound.map(|b| b.c1.value)),
            bound
                .map(|b| format!("{:?}", b.c1.provenance).to_lowercase())
                .unwrap_or_default(),
            num(d.and_then(|d| d.bound_ratio)),
            num(d.and_then(|d| d.projection_deficit)),
            num(hp.map(|b| b.value)),
            csv_field(o.error.as_deref().unwrap_or("")),
        ];
        s.push_str(&cols.join(","));
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    tool: String,
    config_sha256: String,
    problem: String,
    c1: StabilityConstant,
    runs: usize,
    failed: usize,
    files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub outcomes: Vec<RunOutcome>,
    pub summary: String,
}

impl SweepOutcome {
    pub fn failed(&self) -> usize {
        self.outcomes.iter().filter(|o| !o.ok()).count()
    }
}

/// Executes the sweep grid of `cfg` and writes the summary, per-run reports
/// and MANIFEST under `out_dir`. `config_text` is what gets hashed.
pub fn run_sweep(cfg: &ExperimentConfig, config_text: &str, out_dir: &Path, jobs: usize) -> Result<SweepOutcome> {
    cfg.validate()?;
    let prob = preset(&cfg.problem.preset)?;
    let c1 = stability_constant(&prob, cfg.problem.c1)?;
    let ctx = RunContext {
        prob: &prob,
        c1: &c1,
        model: &cfg.model,
        loss: &cfg.loss,
        optim: &cfg.optim,
    };
    let runs = cfg.runs();
    fs::create_dir_all(out_dir)?;
    let outcomes = execute_all(&ctx, &runs, jobs)?;

    let formats = &cfg.output.formats;
    let mut files = Vec::new();
    let mut write = |rel: String, body: &str| -> Result<()> {
        let path = out_dir.join(&rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, body)?;
        files.push(FileEntry {
            path: rel,
            sha256: sha256_hex(body.as_bytes()),
        });
        Ok(())
    };
    let summary = summary_csv(&outcomes);
    if formats.contains(&OutputFormat::Csv) {
        write("summary.csv".into(), &summary)?;
    }
    for o in &outcomes {
        let key = o.spec.key();
        if formats.contains(&OutputFormat::Json) {
            let mut doc = serde_json::json!({
                "run": o.spec,
                "status": if o.ok() { "ok" } else { "failed" },
                "error": o.error,
                "report": o.report,
            });
            if o.report.is_some() {
                doc["report"]["wall_clock_s"] = serde_json::Value::Null;
            }
            let mut body = serde_json::to_string_pretty(&doc)?;
            body.push('\n');
            write(format!("runs/{key}.json"), &body)?;
        }
        if formats.contains(&OutputFormat::Trajectory) {
            if let Some(r) = &o.report {
                write(format!("runs/{key}.trajectory.csv"), &r.trajectory_csv())?;
            }
        }
    }
    let manifest = Manifest {
        tool: tool_version(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        problem: prob.name.clone(),
        c1: c1.clone(),
        runs: outcomes.len(),
        failed: outcomes.iter().filter(|o| !o.ok()).count(),
        files,
    };
    let mut body = serde_json::to_string_pretty(&manifest)?;
    body.push('\n');
    fs::write(out_dir.join("MANIFEST.json"), body)?;
    Ok(SweepOutcome { outcomes, summary })
}

/// Per-run wall-clock times, for logging only.
pub fn timing_lines(outcomes: &[RunOutcome]) -> String {
    let mut s = String::new();
    for o in outcomes {
        let t = o.report.as_ref().map(|r| r.wall_clock_s).unwrap_or(0.0);
        let _ = writeln!(s, "{} {:.2}s {}", o.spec.key(), t, if o.ok() { "ok" } else { "failed" });
    }
    s
}
