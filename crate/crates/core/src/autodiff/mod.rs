//! Exact spatial derivatives (forward jets) nested inside a reverse-mode tape.

mod jet;
mod scalar;
mod tape;

pub use jet::{Jet2, Primitive, DEFAULT_ABS_KAPPA, MAX_DIM};
pub use scalar::Scalar;
pub use tape::{Tape, Var};

pub(crate) use tape::collect_gradient;

use crate::error::{Error, Result};

/// A scalar loss expressed once, evaluated either on plain floats or on a
/// tape.
pub trait LossBuilder {
    fn build<S: Scalar>(&self, theta: &[S]) -> S;
}

/// Loss value and its gradient with respect to `theta`.
///
/// The loss is evaluated twice, once on `f64` and once on a fresh tape; the
/// two forward values must agree exactly.
pub fn grad_params<L: LossBuilder + ?Sized>(builder: &L, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
    let forward = builder.build::<f64>(theta);
    let tape = Tape::new();
    let vars = tape.vars(theta);
    let out = builder.build(&vars);
    let taped = out.value();
    if !(taped == forward || (taped.is_nan() && forward.is_nan())) {
        return Err(Error::TapeDivergence { forward, taped });
    }
    if !taped.is_finite() {
        return Err(Error::Numeric {
            index: out.index().unwrap_or(0),
            reason: format!("non-finite loss {taped}"),
        });
    }
    let grad = tape.gradient(&out, &vars)?;
    Ok((taped, grad))
}
