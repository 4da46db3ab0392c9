//! A loss as a fixed reduction `F(r)` of residual rows `r_j(θ)`.
//!
//! Values are computed on `f64`; gradients replay each row on a small tape
//! seeded with `∂F/∂r_j`, so memory stays bounded by one row.

use std::ops::Range;

use rayon::prelude::*;

use super::{phi_regularizer, LossBreakdown, LossForm};
use crate::autodiff::{collect_gradient, Scalar, Tape};
use crate::error::{Error, Result};
use crate::models::{Evaluable, ParamModel};
use crate::problems::ProblemSpec;
use crate::quadrature::pairwise_sum;

/// Rows per gradient work unit. Fixed so the reduction order does not depend
/// on the thread count.
const GRAD_CHUNK: usize = 32;

/// Cell integral of the residual for the 1D elliptic operator after
/// integration by parts, times `|Ω_k|^{-1/2}`:
/// `∫f + a[u'] - b[u] - ∫cu`.
#[derive(Clone, Debug)]
pub(crate) struct WeakCell {
    pub lo: f64,
    pub hi: f64,
    pub f_int: f64,
    pub a: f64,
    pub b: f64,
    /// `(x_q, w_q c(x_q))`
    pub c_nodes: Vec<(f64, f64)>,
    pub scale: f64,
}

impl WeakCell {
    fn eval<S: Scalar, E: Evaluable<S> + ?Sized>(&self, u: &E) -> Result<S> {
        let jl = u.jet(&[self.lo])?;
        let jh = u.jet(&[self.hi])?;
        let mut acc = S::cst(self.f_int) + (jh.d1(0) - jl.d1(0)).scale(self.a) - (jh.value - jl.value).scale(self.b);
        for &(x, wc) in &self.c_nodes {
            if wc != 0.0 {
                acc = acc - u.value(&[x])?.scale(wc);
            }
        }
        Ok(acc.scale(self.scale))
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Term {
    /// `Σ w_j |r_j|^p`
    Power { rows: Range<usize>, w: Vec<f64>, p: f64 },
    /// `Σ w_j φ_{p,ε}(|r_j|)`
    Phi {
        rows: Range<usize>,
        w: Vec<f64>,
        p: f64,
        m: u32,
        eps: f64,
    },
    /// `Σ_i (Σ_j B_ij r_j)²`, `B` row-major with `rows.len()` columns.
    Quadratic { rows: Range<usize>, n: usize, b: Vec<f64> },
}

impl Term {
    fn rows(&self) -> Range<usize> {
        match self {
            Term::Power { rows, .. } | Term::Phi { rows, .. } | Term::Quadratic { rows, .. } => rows.clone(),
        }
    }

    /// Value, and `scale * ∂value/∂r` added into `adj`.
    fn reduce(&self, r: &[f64], scale: f64, adj: &mut [f64]) -> f64 {
        let rows = self.rows();
        let rs = &r[rows.clone()];
        match self {
            Term::Power { w, p, .. } => {
                let terms: Vec<f64> = rs.iter().zip(w).map(|(v, w)| w * v.abs().powf(*p)).collect();
                for (k, (v, w)) in rs.iter().zip(w).enumerate() {
                    let d = if *v == 0.0 { 0.0 } else { w * p * v.abs().powf(p - 1.0) * v.signum() };
                    adj[rows.start + k] += scale * d;
                }
                pairwise_sum(&terms)
            }
            Term::Phi { w, p, m, eps, .. } => {
                let mut terms = Vec::with_capacity(rs.len());
                for (k, (v, w)) in rs.iter().zip(w).enumerate() {
                    let (phi, dphi) = phi_regularizer(v.abs(), *p, *m, *eps);
                    terms.push(w * phi);
                    adj[rows.start + k] += scale * w * dphi * v.signum();
                }
                pairwise_sum(&terms)
            }
            Term::Quadratic { n, b, .. } => {
                let cols = rs.len();
                let mut total = Vec::with_capacity(*n);
                for i in 0..*n {
                    let row = &b[i * cols..(i + 1) * cols];
                    let prods: Vec<f64> = row.iter().zip(rs).map(|(b, v)| b * v).collect();
                    let c = pairwise_sum(&prods);
                    total.push(c * c);
                    for (k, bij) in row.iter().enumerate() {
                        adj[rows.start + k] += scale * 2.0 * c * bij;
                    }
                }
                pairwise_sum(&total)
            }
        }
    }
}

/// Residual rows of one loss together with their reduction.
#[derive(Clone, Debug)]
pub struct LossPlan {
    pub(crate) prob: ProblemSpec,
    pub(crate) form: LossForm,
    pub(crate) p: f64,
    pub(crate) tau: f64,
    pub(crate) interior: Vec<f64>,
    pub(crate) boundary: Vec<f64>,
    pub(crate) cells: Vec<WeakCell>,
    pub(crate) interior_terms: Vec<Term>,
    pub(crate) boundary_terms: Vec<Term>,
}

impl LossPlan {
    pub(crate) fn new(prob: &ProblemSpec, form: LossForm, p: f64, tau: f64) -> Self {
        LossPlan {
            prob: prob.clone(),
            form,
            p,
            tau,
            interior: Vec::new(),
            boundary: Vec::new(),
            cells: Vec::new(),
            interior_terms: Vec::new(),
            boundary_terms: Vec::new(),
        }
    }

    fn d(&self) -> usize {
        self.prob.dim()
    }

    fn n_interior(&self) -> usize {
        self.interior.len() / self.d()
    }

    fn n_boundary(&self) -> usize {
        self.boundary.len() / self.d()
    }

    /// Number of residual rows.
    pub fn rows(&self) -> usize {
        self.n_interior() + self.n_boundary() + self.cells.len()
    }

    /// Rows are ordered interior points, boundary points, cells.
    pub(crate) fn cell_rows(&self) -> Range<usize> {
        let s = self.n_interior() + self.n_boundary();
        s..s + self.cells.len()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn form(&self) -> LossForm {
        self.form
    }

    fn row<S: Scalar, E: Evaluable<S> + ?Sized>(&self, u: &E, j: usize) -> Result<S> {
        let d = self.d();
        let ni = self.n_interior();
        let nb = self.n_boundary();
        if j < ni {
            self.prob.interior_residual(u, &self.interior[j * d..(j + 1) * d])
        } else if j < ni + nb {
            let k = j - ni;
            self.prob.boundary_residual(u, &self.boundary[k * d..(k + 1) * d])
        } else {
            self.cells[j - ni - nb].eval(u)
        }
    }

    /// All residual rows in row order.
    pub fn residuals(&self, u: &(dyn Evaluable<f64> + Sync)) -> Result<Vec<f64>> {
        let r: Vec<f64> = (0..self.rows())
            .into_par_iter()
            .map(|j| self.row::<f64, _>(u, j))
            .collect::<Result<_>>()?;
        if let Some(j) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                index: j,
                reason: format!("non-finite residual {}", r[j]),
            });
        }
        Ok(r)
    }

    /// Breakdown and `∂total/∂r`.
    pub fn reduce(&self, r: &[f64]) -> (LossBreakdown, Vec<f64>) {
        let mut adj = vec![0.0; r.len()];
        let interior: Vec<f64> = self.interior_terms.iter().map(|t| t.reduce(r, 1.0, &mut adj)).collect();
        let boundary: Vec<f64> = self.boundary_terms.iter().map(|t| t.reduce(r, self.tau, &mut adj)).collect();
        let interior = pairwise_sum(&interior);
        let boundary = pairwise_sum(&boundary);
        (
            LossBreakdown {
                form: self.form,
                p: self.p,
                tau: self.tau,
                interior,
                boundary,
                total: interior + self.tau * boundary,
                quadrature_certificate: None,
            },
            adj,
        )
    }

    pub fn evaluate(&self, u: &(dyn Evaluable<f64> + Sync)) -> Result<LossBreakdown> {
        let r = self.residuals(u)?;
        Ok(self.reduce(&r).0)
    }

    /// Loss of `model` at `theta` and its gradient with respect to `theta`.
    pub fn value_and_grad(&self, model: &ParamModel, theta: &[f64]) -> Result<(LossBreakdown, Vec<f64>)> {
        let bound = model.bind::<f64>(theta);
        let r = self.residuals(&bound)?;
        let (breakdown, adj) = self.reduce(&r);
        let n = theta.len();
        let chunks: Vec<usize> = (0..self.rows()).step_by(GRAD_CHUNK).collect();
        let partial: Vec<Vec<f64>> = chunks
            .par_iter()
            .map(|&start| -> Result<Vec<f64>> {
                let mut g = vec![0.0; n];
                let mut tape = Tape::new();
                let mut buf = Vec::new();
                for j in start..(start + GRAD_CHUNK).min(self.rows()) {
                    if adj[j] == 0.0 {
                        continue;
                    }
                    {
                        let vars = tape.vars(theta);
                        let bm = model.bind(&vars);
                        let rj = self.row(&bm, j)?;
                        if rj.val() != r[j] {
                            return Err(Error::TapeDivergence {
                                forward: r[j],
                                taped: rj.val(),
                            });
                        }
                        tape.backward(&rj, adj[j], &mut buf);
                        for (gi, v) in g.iter_mut().zip(collect_gradient(&buf, &vars)?) {
                            *gi += v;
                        }
                    }
                    tape.clear();
                }
                Ok(g)
            })
            .collect::<Result<_>>()?;
        let mut grad = vec![0.0; n];
        for g in partial {
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        if let Some(i) = grad.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                index: i,
                reason: "non-finite gradient".into(),
            });
        }
        Ok((breakdown, grad))
    }
}
