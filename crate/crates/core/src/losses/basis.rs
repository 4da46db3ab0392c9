use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::geometry::BoxDomain;
use crate::quadrature::{legendre_and_derivative, pairwise_sum, QuadratureRule, MAX_ORDER};

/// Gram deviation above which basis construction fails.
pub const GRAM_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Legendre,
    Pwconst,
}

/// Axis-aligned cells tiling Ω, each with its own basis kind and order
/// (functions per axis for Legendre; pwconst always has one).
#[derive(Clone, Debug)]
pub struct Partition {
    pub domain: BoxDomain,
    pub cells: Vec<BoxDomain>,
    pub kinds: Vec<BasisKind>,
    pub orders: Vec<usize>,
}

impl Partition {
    pub fn new(domain: BoxDomain, cells: Vec<BoxDomain>, kinds: Vec<BasisKind>, orders: Vec<usize>) -> Result<Self> {
        let k = cells.len();
        if k == 0 || kinds.len() != k || orders.len() != k {
            return input("partition needs one kind and one order per cell");
        }
        let d = domain.dim();
        for (i, c) in cells.iter().enumerate() {
            if c.dim() != d || (0..d).any(|a| c.is_degenerate(a)) {
                return input(format!("cell {i} is not a full-dimensional box of Ω"));
            }
            if (0..d).any(|a| c.lo[a] < domain.lo[a] - 1e-12 || c.hi[a] > domain.hi[a] + 1e-12) {
                return input(format!("cell {i} leaves Ω"));
            }
            if kinds[i] == BasisKind::Legendre && !(1..=MAX_ORDER - 4).contains(&orders[i]) {
                return input(format!("cell {i}: Legendre order {} unsupported", orders[i]));
            }
        }
        for i in 0..k {
            for j in i + 1..k {
                let overlap: f64 = (0..d)
                    .map(|a| (cells[i].hi[a].min(cells[j].hi[a]) - cells[i].lo[a].max(cells[j].lo[a])).max(0.0))
                    .product();
                if overlap > 1e-12 {
                    return input(format!("cells {i} and {j} overlap"));
                }
            }
        }
        let total: f64 = cells.iter().map(|c| c.measure()).sum();
        if (total - domain.measure()).abs() > 1e-12 * domain.measure().max(1.0) {
            return input(format!("cells cover measure {total}, Ω has {}", domain.measure()));
        }
        Ok(Partition {
            domain,
            cells,
            kinds,
            orders,
        })
    }

    /// `cells[a]` equal cells along axis `a`, one kind and order throughout.
    pub fn uniform(domain: &BoxDomain, cells: &[usize], kind: BasisKind, order: usize) -> Result<Self> {
        if cells.len() != domain.dim() || cells.contains(&0) {
            return input("need a positive cell count per axis");
        }
        let boxes = domain.tile(cells);
        let n = boxes.len();
        let order = if kind == BasisKind::Pwconst { 1 } else { order };
        Partition::new(domain.clone(), boxes, vec![kind; n], vec![order; n])
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Cell containing `x` (first match on shared faces).
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        self.cells.iter().position(|c| c.contains(x, 1e-12))
    }
}

#[derive(Clone, Debug)]
struct CellBasis {
    cell: BoxDomain,
    kind: BasisKind,
    /// Per-axis degrees of each tensor-product function.
    degrees: Vec<Vec<usize>>,
}

/// L²(Ω_k)-orthonormal functions Φ_{k,i} on every cell.
#[derive(Clone, Debug)]
pub struct Basis {
    pub partition: Partition,
    cells: Vec<CellBasis>,
    /// Largest `|G - I|` entry found at construction, per cell.
    pub gram_deviation: Vec<f64>,
}

fn multi_indices(d: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|m| {
                (0..n).map(move |k| {
                    let mut m = m.clone();
                    m.push(k);
                    m
                })
            })
            .collect();
    }
    out
}

impl Basis {
    pub fn count(&self, k: usize) -> usize {
        self.cells[k].degrees.len()
    }

    pub fn total_count(&self) -> usize {
        self.cells.iter().map(|c| c.degrees.len()).sum()
    }

    /// `Φ_{k,i}(x)`; zero outside the (closed) cell.
    pub fn eval(&self, k: usize, i: usize, x: &[f64]) -> f64 {
        let c = &self.cells[k];
        if !c.cell.contains(x, 1e-12) {
            return 0.0;
        }
        match c.kind {
            BasisKind::Pwconst => c.cell.measure().powf(-0.5),
            BasisKind::Legendre => c.degrees[i]
                .iter()
                .enumerate()
                .map(|(a, &n)| {
                    let len = c.cell.len(a);
                    let t = 2.0 * (x[a] - c.cell.lo[a]) / len - 1.0;
                    ((2 * n + 1) as f64 / len).sqrt() * legendre_and_derivative(n, t.clamp(-1.0, 1.0)).0
                })
                .product(),
        }
    }

    /// Quadrature used on cell `k`: the reference rule with its order bumped
    /// by 4 and at least the basis order.
    pub fn cell_rule(&self, k: usize, rule: &QuadratureRule) -> QuadratureRule {
        let n = self.partition.orders[k];
        let order = (rule.order.max(n) + 4).min(MAX_ORDER);
        QuadratureRule::new(order, rule.panels.clone()).expect("valid bumped rule")
    }

    /// Gram matrix on cell `k`, row-major.
    pub fn gram(&self, k: usize, rule: &QuadratureRule) -> Vec<f64> {
        let n = self.count(k);
        let (coords, weights) = self.cell_rule(k, rule).nodes(&self.cells[k].cell);
        let d = self.partition.domain.dim();
        let vals: Vec<Vec<f64>> = (0..n)
            .map(|i| coords.chunks(d).map(|x| self.eval(k, i, x)).collect())
            .collect();
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let terms: Vec<f64> = (0..weights.len()).map(|q| weights[q] * vals[i][q] * vals[j][q]).collect();
                let v = pairwise_sum(&terms);
                g[i * n + j] = v;
                g[j * n + i] = v;
            }
        }
        g
    }

    /// `Σ_i c_{k,i} Φ_{k,i}(x)` on the first cell containing `x`.
    pub fn reconstruct(&self, coeffs: &[Vec<f64>], x: &[f64]) -> f64 {
        match self.partition.locate(x) {
            Some(k) => (0..self.count(k)).map(|i| coeffs[k][i] * self.eval(k, i, x)).sum(),
            None => 0.0,
        }
    }
}

pub fn build_basis(partition: &Partition) -> Result<Basis> {
    let d = partition.domain.dim();
    let cells: Vec<CellBasis> = partition
        .cells
        .iter()
        .zip(partition.kinds.iter().zip(&partition.orders))
        .map(|(c, (&kind, &n))| CellBasis {
            cell: c.clone(),
            kind,
            degrees: match kind {
                BasisKind::Pwconst => vec![vec![0; d]],
                BasisKind::Legendre => multi_indices(d, n),
            },
        })
        .collect();
    let mut basis = Basis {
        partition: partition.clone(),
        cells,
        gram_deviation: Vec::new(),
    };
    let rule = QuadratureRule::uniform(16, 1, d);
    for k in 0..basis.partition.len() {
        let n = basis.count(k);
        let g = basis.gram(k, &rule);
        let dev = (0..n * n)
            .map(|e| (g[e] - if e / n == e % n { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max);
        if !(dev <= GRAM_TOL) {
            return Err(Error::Basis { cell: k, deviation: dev });
        }
        basis.gram_deviation.push(dev);
    }
    Ok(basis)
}

/// `c_{k,i} = (r, Φ_{k,i})_{L²(Ω_k)}` by per-cell quadrature.
pub fn project(basis: &Basis, r: &dyn Fn(&[f64]) -> f64, rule: &QuadratureRule) -> Result<Vec<Vec<f64>>> {
    let d = basis.partition.domain.dim();
    let mut out = Vec::with_capacity(basis.partition.len());
    for k in 0..basis.partition.len() {
        let (coords, weights) = basis.cell_rule(k, rule).nodes(&basis.partition.cells[k]);
        let rv: Vec<f64> = coords.chunks(d).map(r).collect();
        if let Some(q) = rv.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                index: q,
                reason: format!("non-finite integrand on cell {k}"),
            });
        }
        let row = (0..basis.count(k))
            .map(|i| {
                let terms: Vec<f64> = coords
                    .chunks(d)
                    .zip(&weights)
                    .zip(&rv)
                    .map(|((x, w), v)| w * v * basis.eval(k, i, x))
                    .collect();
                pairwise_sum(&terms)
            })
            .collect();
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pwconst_half_interval() {
        let p = Partition::new(
            BoxDomain::unit(1),
            vec![BoxDomain::interval(0.0, 0.5), BoxDomain::interval(0.5, 1.0)],
            vec![BasisKind::Pwconst; 2],
            vec![1; 2],
        )
        .unwrap();
        let b = build_basis(&p).unwrap();
        assert!((b.eval(0, 0, &[0.2]) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(b.eval(0, 0, &[0.7]), 0.0);
    }

    #[test]
    fn legendre_pair_and_projection() {
        let p = Partition::uniform(&BoxDomain::unit(1), &[1], BasisKind::Legendre, 2).unwrap();
        let b = build_basis(&p).unwrap();
        assert!((b.eval(0, 1, &[0.8]) - 3f64.sqrt() * 0.6).abs() < 1e-14);
        assert!(b.gram_deviation[0] < 1e-14);
        let c = project(&b, &|x| x[0], &QuadratureRule::uniform(16, 4, 1)).unwrap();
        assert!((c[0][0] - 0.5).abs() < 1e-15);
        assert!((c[0][1] - 1.0 / (2.0 * 3f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn bad_partitions() {
        let d = BoxDomain::unit(1);
        let over = vec![BoxDomain::interval(0.0, 0.6), BoxDomain::interval(0.4, 1.0)];
        assert!(Partition::new(d.clone(), over, vec![BasisKind::Pwconst; 2], vec![1; 2]).is_err());
        let gap = vec![BoxDomain::interval(0.0, 0.4), BoxDomain::interval(0.5, 1.0)];
        assert!(Partition::new(d, gap, vec![BasisKind::Pwconst; 2], vec![1; 2]).is_err());
    }
}
