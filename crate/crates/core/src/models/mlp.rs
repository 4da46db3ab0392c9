use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ModelKind, ParamModel};
use crate::autodiff::{Jet2, Scalar, MAX_DIM};
use crate::error::{input, Result};
use crate::quadrature::stream_rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Sin,
    Softplus,
}

impl Activation {
    fn apply_scalar<S: Scalar>(self, z: S) -> S {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sin => z.sin(),
            Activation::Softplus => (S::cst(1.0) + z.exp()).ln(),
        }
    }

    fn apply<S: Scalar>(self, z: Jet2<S>) -> Jet2<S> {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sin => z.sin(),
            Activation::Softplus => z.softplus(),
        }
    }
}

/// Layer widths `(n_0, ..., n_L)`; parameters are stored layer by layer as a
/// row-major weight matrix followed by the bias vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArch {
    #[serde(rename = "layer_widths")]
    pub widths: Vec<usize>,
    pub activation: Activation,
}

impl MlpArch {
    pub fn new(widths: Vec<usize>, activation: Activation) -> Result<Self> {
        let a = MlpArch { widths, activation };
        a.validate()?;
        Ok(a)
    }

    /// `(d, n, 1)` with the given activation.
    pub fn shallow(dim: usize, n: usize, activation: Activation) -> Self {
        MlpArch {
            widths: vec![dim, n, 1],
            activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return input("an MLP needs at least one layer");
        }
        if self.widths.contains(&0) {
            return input("layer widths must be positive");
        }
        if self.widths[0] > MAX_DIM {
            return input(format!("input dimension {} exceeds {MAX_DIM}", self.widths[0]));
        }
        if *self.widths.last().unwrap() != 1 {
            return input("output width must be 1");
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// `self ⊂ big`: same input/output, depth no larger, every hidden width
    /// no larger than the corresponding one.
    pub fn is_nested_in(&self, big: &MlpArch) -> bool {
        self.widths[0] == big.widths[0]
            && self.depth() <= big.depth()
            && self.widths[1..self.depth()]
                .iter()
                .zip(&big.widths[1..big.depth()])
                .all(|(a, b)| a <= b)
    }

    pub fn describe(&self) -> String {
        let w: Vec<String> = self.widths.iter().map(|w| w.to_string()).collect();
        format!("mlp({};{:?})", w.join(","), self.activation).to_lowercase()
    }

    pub fn forward<S: Scalar>(&self, theta: &[S], x: &[f64]) -> Jet2<S> {
        let dim = x.len();
        let mut h: Vec<Jet2<S>> = Jet2::coordinates(x);
        let mut off = 0;
        let last = self.depth();
        for l in 1..=last {
            let (nin, nout) = (self.widths[l - 1], self.widths[l]);
            let bias = off + nin * nout;
            let mut next = Vec::with_capacity(nout);
            for i in 0..nout {
                let row = &theta[off + i * nin..off + (i + 1) * nin];
                let mut z = Jet2::constant(theta[bias + i], dim);
                for (hj, &w) in h.iter().zip(row) {
                    z = z + hj.scale(w);
                }
                next.push(if l < last { self.activation.apply(z) } else { z });
            }
            off = bias + nout;
            h = next;
        }
        h[0]
    }
}

impl MlpArch {
    /// Realization value without jets.
    pub fn forward_value<S: Scalar>(&self, theta: &[S], x: &[f64]) -> S {
        let mut h: Vec<S> = x.iter().map(|&v| S::cst(v)).collect();
        let mut off = 0;
        let last = self.depth();
        for l in 1..=last {
            let (nin, nout) = (self.widths[l - 1], self.widths[l]);
            let bias = off + nin * nout;
            let mut next = Vec::with_capacity(nout);
            for i in 0..nout {
                let row = &theta[off + i * nin..off + (i + 1) * nin];
                let mut z = theta[bias + i];
                for (&hj, &w) in h.iter().zip(row) {
                    z = z + hj * w;
                }
                next.push(if l < last { self.activation.apply_scalar(z) } else { z });
            }
            off = bias + nout;
            h = next;
        }
        h[0]
    }
}

/// Xavier-uniform weights, zero biases, deterministic in `seed`.
pub fn init_params(arch: &MlpArch, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 1);
    let mut theta = Vec::with_capacity(arch.param_count());
    for w in arch.widths.windows(2) {
        let (nin, nout) = (w[0], w[1]);
        let bound = (6.0 / (nin + nout) as f64).sqrt();
        for _ in 0..nin * nout {
            theta.push(rng.random_range(-bound..bound));
        }
        theta.extend(std::iter::repeat_n(0.0, nout));
    }
    theta
}

/// Zero-pads `small` into `big`. Only equal depths are supported: an exact
/// identity layer is not representable with these activations.
pub fn embed_arch(small: &ParamModel, big: &MlpArch) -> Result<ParamModel> {
    let ModelKind::Mlp(arch) = &small.kind else {
        return input("embed_arch applies to MLP models only");
    };
    big.validate()?;
    if !arch.is_nested_in(big) {
        return input(format!("{:?} is not nested in {:?}", arch.widths, big.widths));
    }
    if arch.activation != big.activation {
        return input("activations differ");
    }
    if arch.depth() != big.depth() {
        return input("embedding into a deeper architecture is not supported");
    }
    let mut theta = vec![0.0; big.param_count()];
    let (mut off_s, mut off_b) = (0, 0);
    for l in 1..arch.widths.len() {
        let (si, so) = (arch.widths[l - 1], arch.widths[l]);
        let (bi, bo) = (big.widths[l - 1], big.widths[l]);
        for i in 0..so {
            for j in 0..si {
                theta[off_b + i * bi + j] = small.theta[off_s + i * si + j];
            }
            theta[off_b + bi * bo + i] = small.theta[off_s + si * so + i];
        }
        off_s += si * so + so;
        off_b += bi * bo + bo;
    }
    let mut m = ParamModel::mlp(big.clone(), theta)?;
    m.seed = small.seed;
    Ok(m)
}
