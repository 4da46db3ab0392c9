//! Hypothesis families: feed-forward networks, Gaussian RBF networks and
//! closed-form functions.

mod mlp;
mod rbf;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Jet2, Scalar, MAX_DIM};
use crate::error::{input, Error, Result};

pub use mlp::{embed_arch, init_params, Activation, MlpArch};
pub use rbf::RbfSpec;

/// Anything that can be evaluated with second-order spatial jets over scalar
/// type `S`.
pub trait Evaluable<S: Scalar> {
    fn dim(&self) -> usize;
    fn jet(&self, x: &[f64]) -> Result<Jet2<S>>;

    fn value(&self, x: &[f64]) -> Result<S> {
        Ok(self.jet(x)?.value)
    }
}

pub(crate) fn check_arity(dim: usize, x: &[f64]) -> Result<()> {
    if x.len() != dim {
        return input(format!("point of dimension {} passed to a {dim}-dimensional function", x.len()));
    }
    Ok(())
}

type JetFn = dyn Fn(&[Jet2<f64>]) -> Jet2<f64> + Send + Sync;

/// A function given in closed form as a composition of jet operations on the
/// coordinate jets.
#[derive(Clone)]
pub struct AnalyticFn {
    pub label: String,
    dim: usize,
    f: Arc<JetFn>,
}

impl fmt::Debug for AnalyticFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AnalyticFn({}, d={})", self.label, self.dim)
    }
}

impl AnalyticFn {
    pub fn new<F>(label: impl Into<String>, dim: usize, f: F) -> Self
    where
        F: Fn(&[Jet2<f64>]) -> Jet2<f64> + Send + Sync + 'static,
    {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} unsupported");
        AnalyticFn {
            label: label.into(),
            dim,
            f: Arc::new(f),
        }
    }

    pub fn constant(label: impl Into<String>, dim: usize, c: f64) -> Self {
        AnalyticFn::new(label, dim, move |x| Jet2::constant(c, x[0].dim()))
    }

    pub fn zero(dim: usize) -> Self {
        AnalyticFn::constant("0", dim, 0.0)
    }

    pub fn eval(&self, x: &[f64]) -> Jet2<f64> {
        (self.f)(&Jet2::coordinates(x))
    }

    /// Applies the closed form to arbitrary input jets (for composition).
    pub fn call(&self, x: &[Jet2<f64>]) -> Jet2<f64> {
        (self.f)(x)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `c * self`.
    pub fn scaled(&self, c: f64) -> Self {
        let inner = self.f.clone();
        AnalyticFn {
            label: format!("{c}*({})", self.label),
            dim: self.dim,
            f: Arc::new(move |x| inner(x).scale(c)),
        }
    }

    /// `self - other`.
    pub fn minus(&self, other: &AnalyticFn) -> Self {
        let (a, b) = (self.f.clone(), other.f.clone());
        AnalyticFn {
            label: format!("({})-({})", self.label, other.label),
            dim: self.dim,
            f: Arc::new(move |x| a(x) - b(x)),
        }
    }
}

impl<S: Scalar> Evaluable<S> for AnalyticFn {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, x: &[f64]) -> Result<Jet2<S>> {
        check_arity(self.dim, x)?;
        Ok(self.eval(x).lift())
    }
}

#[derive(Clone, Debug)]
pub enum ModelKind {
    Mlp(MlpArch),
    GaussianRbf(RbfSpec),
    Analytic(AnalyticFn),
}

/// A parametric function with a flat parameter vector.
#[derive(Clone, Debug)]
pub struct ParamModel {
    pub kind: ModelKind,
    pub theta: Vec<f64>,
    pub seed: Option<u64>,
}

impl ParamModel {
    pub fn mlp(arch: MlpArch, theta: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if theta.len() != arch.param_count() {
            return input(format!(
                "theta has {} entries, architecture {:?} needs {}",
                theta.len(),
                arch.widths,
                arch.param_count()
            ));
        }
        Ok(ParamModel {
            kind: ModelKind::Mlp(arch),
            theta,
            seed: None,
        })
    }

    pub fn mlp_init(arch: MlpArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let theta = init_params(&arch, seed);
        Ok(ParamModel {
            kind: ModelKind::Mlp(arch),
            theta,
            seed: Some(seed),
        })
    }

    pub fn rbf(spec: RbfSpec, coefficients: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if coefficients.len() != spec.centers.len() {
            return input("one coefficient per RBF center required");
        }
        Ok(ParamModel {
            kind: ModelKind::GaussianRbf(spec),
            theta: coefficients,
            seed: None,
        })
    }

    pub fn analytic(f: AnalyticFn) -> Self {
        ParamModel {
            kind: ModelKind::Analytic(f),
            theta: Vec::new(),
            seed: None,
        }
    }

    pub fn spatial_dim(&self) -> usize {
        match &self.kind {
            ModelKind::Mlp(a) => a.widths[0],
            ModelKind::GaussianRbf(r) => r.dim,
            ModelKind::Analytic(f) => f.dim,
        }
    }

    pub fn param_count(&self) -> usize {
        self.theta.len()
    }

    /// Jet of the realization with parameters `theta` (which may be taped).
    pub fn eval_with<S: Scalar>(&self, theta: &[S], x: &[f64]) -> Result<Jet2<S>> {
        check_arity(self.spatial_dim(), x)?;
        match &self.kind {
            ModelKind::Mlp(arch) => Ok(arch.forward(theta, x)),
            ModelKind::GaussianRbf(spec) => Ok(spec.forward(theta, x)),
            ModelKind::Analytic(f) => Ok(f.eval(x).lift()),
        }
    }

    /// Value only, skipping derivative propagation.
    pub fn value_with<S: Scalar>(&self, theta: &[S], x: &[f64]) -> Result<S> {
        check_arity(self.spatial_dim(), x)?;
        match &self.kind {
            ModelKind::Mlp(arch) => Ok(arch.forward_value(theta, x)),
            ModelKind::GaussianRbf(spec) => Ok(spec.forward_value(theta, x)),
            ModelKind::Analytic(f) => Ok(S::cst(f.eval(x).value)),
        }
    }

    pub fn with_theta(&self, theta: Vec<f64>) -> Self {
        ParamModel {
            kind: self.kind.clone(),
            theta,
            seed: self.seed,
        }
    }

    pub fn bind<'a, S: Scalar>(&'a self, theta: &'a [S]) -> BoundModel<'a, S> {
        BoundModel { model: self, theta }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            ModelKind::Mlp(a) => a.describe(),
            ModelKind::GaussianRbf(r) => format!("gaussian_rbf(n={},m={})", r.centers.len(), r.m),
            ModelKind::Analytic(f) => format!("analytic({})", f.label),
        }
    }

    pub fn to_checkpoint(&self, metadata: serde_json::Value) -> Result<Checkpoint> {
        let (kind, arch) = match &self.kind {
            ModelKind::Mlp(a) => ("mlp", serde_json::to_value(a)?),
            ModelKind::GaussianRbf(r) => ("gaussian_rbf", serde_json::to_value(r)?),
            ModelKind::Analytic(_) => return input("analytic models have no checkpoint form"),
        };
        Ok(Checkpoint {
            kind: kind.to_string(),
            arch,
            theta: self.theta.iter().map(|t| format!("{t:e}")).collect(),
            seed: self.seed,
            metadata,
        })
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        let theta = c
            .theta
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Input(format!("bad theta entry {s:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let mut m = match c.kind.as_str() {
            "mlp" => ParamModel::mlp(serde_json::from_value(c.arch.clone())?, theta)?,
            "gaussian_rbf" => ParamModel::rbf(serde_json::from_value(c.arch.clone())?, theta)?,
            other => return input(format!("unknown checkpoint kind {other:?}")),
        };
        m.seed = c.seed;
        Ok(m)
    }
}

impl Evaluable<f64> for ParamModel {
    fn dim(&self) -> usize {
        self.spatial_dim()
    }

    fn jet(&self, x: &[f64]) -> Result<Jet2<f64>> {
        self.eval_with(&self.theta, x)
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.value_with(&self.theta, x)
    }
}

/// A model viewed at a particular (possibly taped) parameter vector.
pub struct BoundModel<'a, S> {
    pub model: &'a ParamModel,
    pub theta: &'a [S],
}

impl<S: Scalar> Evaluable<S> for BoundModel<'_, S> {
    fn dim(&self) -> usize {
        self.model.spatial_dim()
    }

    fn jet(&self, x: &[f64]) -> Result<Jet2<S>> {
        self.model.eval_with(self.theta, x)
    }

    fn value(&self, x: &[f64]) -> Result<S> {
        self.model.value_with(self.theta, x)
    }
}

/// JSON checkpoint. Parameters are written as shortest round-trip decimal
/// strings so reloading is exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub kind: String,
    pub arch: serde_json::Value,
    pub theta: Vec<String>,
    pub seed: Option<u64>,
    pub metadata: serde_json::Value,
}
