use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::models::{Activation, MlpArch};
use crate::problems::preset;
use crate::training::OptimConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub preset: String,
    /// Configured C₁; probed from the preset's family when absent.
    #[serde(default)]
    pub c1: Option<f64>,
}

fn default_hidden() -> Vec<usize> {
    vec![16]
}

fn default_activation() -> Activation {
    Activation::Tanh
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            hidden: default_hidden(),
            activation: default_activation(),
        }
    }
}

impl ModelSection {
    /// `(dim, hidden.., 1)`, with every hidden width replaced by `n` if given.
    pub fn arch(&self, dim: usize, n: Option<usize>) -> Result<MlpArch> {
        let mut widths = vec![dim];
        widths.extend(self.hidden.iter().map(|&h| n.unwrap_or(h)));
        widths.push(1);
        MlpArch::new(widths, self.activation)
    }
}

/// Lists to sweep over; an empty list keeps the base value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub n: Vec<usize>,
    pub m_r: Vec<usize>,
    pub m_b: Vec<usize>,
    pub tau: Vec<f64>,
    pub p: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    Trajectory,
}

fn default_dir() -> String {
    "rm-lab-out".into()
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::Json]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_dir(),
            formats: default_formats(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    #[serde(default)]
    pub model: ModelSection,
    pub loss: LossSpec,
    #[serde(default)]
    pub optim: OptimConfig,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// One point of the sweep grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub index: usize,
    pub n: Option<usize>,
    pub m_r: usize,
    pub m_b: Option<usize>,
    pub tau: f64,
    pub p: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl RunSpec {
    pub fn key(&self) -> String {
        format!("run-{:04}", self.index)
    }
}

fn or_base<T: Clone>(list: &[T], base: T) -> Vec<T> {
    if list.is_empty() {
        vec![base]
    } else {
        list.to_vec()
    }
}

impl ExperimentConfig {
    /// Parses and validates a TOML document. Syntax and schema errors keep
    /// the parser's line and column.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let prob = preset(&self.problem.preset).map_err(|e| Error::Config(format!("problem.preset: {e}")))?;
        if let Some(c) = self.problem.c1 {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("problem.c1 must be positive, got {c}"));
            }
        }
        if self.model.hidden.is_empty() || self.model.hidden.contains(&0) {
            return bad("model.hidden needs at least one positive width".into());
        }
        self.loss.validate().map_err(|e| Error::Config(format!("loss: {e}")))?;
        self.optim.validate()?;
        let s = &self.sweep;
        if s.n.contains(&0) || s.m_r.contains(&0) || s.m_b.contains(&0) {
            return bad("sweep sizes must be positive".into());
        }
        if s.tau.iter().any(|t| !(*t > 0.0)) || s.p.iter().any(|p| !(*p >= 1.0)) {
            return bad("sweep needs tau > 0 and p >= 1".into());
        }
        if s.epsilon.iter().any(|e| !(*e >= 0.0)) {
            return bad("sweep epsilon must be nonnegative".into());
        }
        self.model.arch(prob.dim(), None)?;
        Ok(())
    }

    /// Cartesian grid in the order n, m_r, m_b, tau, p, epsilon, seed (last fastest).
    pub fn runs(&self) -> Vec<RunSpec> {
        let s = &self.sweep;
        let ns: Vec<Option<usize>> = if s.n.is_empty() { vec![None] } else { s.n.iter().map(|&n| Some(n)).collect() };
        let mbs: Vec<Option<usize>> = if s.m_b.is_empty() {
            vec![self.loss.samples.m_b]
        } else {
            s.m_b.iter().map(|&m| Some(m)).collect()
        };
        let mut out = Vec::new();
        for &n in &ns {
            for &m_r in &or_base(&s.m_r, self.loss.samples.m_r) {
                for &m_b in &mbs {
                    for &tau in &or_base(&s.tau, self.loss.tau) {
                        for &p in &or_base(&s.p, self.loss.p) {
                            for &epsilon in &or_base(&s.epsilon, self.loss.epsilon) {
                                for &seed in &or_base(&s.seeds, self.optim.seed) {
                                    out.push(RunSpec {
                                        index: out.len(),
                                        n,
                                        m_r,
                                        m_b,
                                        tau,
                                        p,
                                        epsilon,
                                        seed,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Replaces every seed by `seed` (the `RM_LAB_SEED` override).
    pub fn override_seed(&mut self, seed: u64) {
        self.optim.seed = seed;
        self.sweep.seeds = vec![seed];
    }
}
