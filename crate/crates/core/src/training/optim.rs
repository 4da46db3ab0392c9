use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Iterations over which the loss must improve by at least δ_n.
pub const STOP_WINDOW: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Adam,
    Gd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimConfig {
    pub algorithm: Algorithm,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub max_iter: usize,
    /// Absolute slack δ_n per architecture level. Empty means
    /// `slack_rel` times the first loss, halved per level.
    pub delta: Vec<f64>,
    pub slack_rel: f64,
    pub level: usize,
    /// Seed for the training sample draw.
    pub seed: u64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            algorithm: Algorithm::Adam,
            step_size: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_iter: 2000,
            delta: Vec::new(),
            slack_rel: 1e-6,
            level: 0,
            seed: 0,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad(format!("step size must be positive, got {}", self.step_size));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adam betas must lie in [0, 1)".into());
        }
        if !(self.eps > 0.0) {
            return bad("adam eps must be positive".into());
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if self.delta.iter().any(|d| !(*d >= 0.0)) || self.delta.windows(2).any(|w| w[1] > w[0]) {
            return bad("delta schedule must be nonnegative and nonincreasing".into());
        }
        if !(self.slack_rel >= 0.0) {
            return bad("slack_rel must be nonnegative".into());
        }
        Ok(())
    }

    /// δ_n for the configured level given the first recorded loss.
    pub fn slack(&self, first_loss: f64) -> f64 {
        match self.delta.len() {
            0 => self.slack_rel * first_loss * 0.5f64.powi(self.level as i32),
            n => self.delta[self.level.min(n - 1)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajPoint {
    pub iteration: usize,
    pub loss: f64,
    pub residual_part: f64,
    pub boundary_part: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIter,
    Slack,
    Aborted,
}

/// Objective value split as `(total, interior part, boundary part)`.
pub type Parts = (f64, f64, f64);

#[derive(Clone, Debug)]
pub struct Trace {
    pub points: Vec<TrajPoint>,
    /// Parameters of the lowest recorded loss.
    pub theta: Vec<f64>,
    pub best_iteration: usize,
    pub stop: StopReason,
    pub slack: f64,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

/// Runs the optimizer on `objective` and returns the best recorded iterate.
/// Stops once the best loss has improved by less than δ_n over the last
/// `STOP_WINDOW` iterations. On a failed or non-finite evaluation the trace
/// so far comes back together with the iteration and reason.
pub fn minimize<F>(
    mut objective: F,
    theta0: Vec<f64>,
    cfg: &OptimConfig,
) -> std::result::Result<Trace, (Trace, usize, String)>
where
    F: FnMut(&[f64]) -> Result<(Parts, Vec<f64>)>,
{
    let n = theta0.len();
    let mut theta = theta0.clone();
    let mut trace = Trace {
        points: Vec::new(),
        theta: theta0,
        best_iteration: 0,
        stop: StopReason::MaxIter,
        slack: 0.0,
    };
    // best loss after each iteration
    let mut best: Vec<f64> = Vec::with_capacity(cfg.max_iter);
    let mut adam = Adam {
        m: vec![0.0; n],
        v: vec![0.0; n],
        t: 0,
    };
    for k in 0..cfg.max_iter {
        let ((total, interior, boundary), g) = match objective(&theta) {
            Ok(r) => r,
            Err(e) => {
                trace.stop = StopReason::Aborted;
                return Err((trace, k, e.to_string()));
            }
        };
        let grad_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !total.is_finite() || !grad_norm.is_finite() {
            trace.stop = StopReason::Aborted;
            return Err((trace, k, format!("non-finite loss {total} or gradient norm {grad_norm}")));
        }
        trace.points.push(TrajPoint {
            iteration: k,
            loss: total,
            residual_part: interior,
            boundary_part: boundary,
            grad_norm,
        });
        if k == 0 {
            trace.slack = cfg.slack(total);
        }
        if k == 0 || total < best[k - 1] {
            trace.theta.clone_from(&theta);
            trace.best_iteration = k;
            best.push(total);
        } else {
            best.push(best[k - 1]);
        }
        if k >= STOP_WINDOW && best[k - STOP_WINDOW] - best[k] < trace.slack {
            trace.stop = StopReason::Slack;
            break;
        }
        if k + 1 == cfg.max_iter {
            break;
        }
        match cfg.algorithm {
            Algorithm::Gd => {
                for (t, gi) in theta.iter_mut().zip(&g) {
                    *t -= cfg.step_size * gi;
                }
            }
            Algorithm::Adam => {
                adam.t += 1;
                let c1 = 1.0 - cfg.beta1.powi(adam.t);
                let c2 = 1.0 - cfg.beta2.powi(adam.t);
                for i in 0..n {
                    adam.m[i] = cfg.beta1 * adam.m[i] + (1.0 - cfg.beta1) * g[i];
                    adam.v[i] = cfg.beta2 * adam.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                    let mh = adam.m[i] / c1;
                    let vh = adam.v[i] / c2;
                    theta[i] -= cfg.step_size * mh / (vh.sqrt() + cfg.eps);
                }
            }
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_checks() {
        assert!(OptimConfig::default().validate().is_ok());
        let bad = OptimConfig {
            step_size: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let up = OptimConfig {
            delta: vec![1e-6, 1e-5],
            ..Default::default()
        };
        assert!(up.validate().is_err());
        let lv = OptimConfig {
            level: 2,
            ..Default::default()
        };
        assert_eq!(lv.slack(8.0), 2e-6);
    }

    #[test]
    fn gd_on_a_parabola() {
        let cfg = OptimConfig {
            algorithm: Algorithm::Gd,
            step_size: 0.25,
            max_iter: 3,
            ..Default::default()
        };
        let tr = minimize(|t| Ok(((t[0] * t[0], t[0] * t[0], 0.0), vec![2.0 * t[0]])), vec![1.0], &cfg).unwrap();
        // x <- x/2 per step, no step after the last evaluation
        assert_eq!(tr.theta, vec![0.25]);
        assert_eq!(tr.points.len(), 3);
        assert_eq!(tr.points[2].loss, 0.0625);
    }

    #[test]
    fn nan_aborts_with_trace() {
        let cfg = OptimConfig::default();
        let r = minimize(
            |t| {
                let v = if t[0] < 1.0 { f64::NAN } else { t[0] };
                Ok(((v, v, 0.0), vec![1.0]))
            },
            vec![1.0],
            &cfg,
        );
        let (tr, k, _) = r.unwrap_err();
        assert_eq!((k, tr.points.len(), tr.stop), (1, 1, StopReason::Aborted));
    }
}
