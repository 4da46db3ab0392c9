use std::sync::OnceLock;

/// Highest cached Gauss–Legendre order.
pub const MAX_ORDER: usize = 64;

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn compute(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussRule { nodes, weights }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
pub fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Cached rule of the given order (1..=MAX_ORDER).
pub fn gauss_legendre(n: usize) -> &'static GaussRule {
    static CACHE: OnceLock<Vec<GaussRule>> = OnceLock::new();
    assert!((1..=MAX_ORDER).contains(&n), "Gauss-Legendre order {n} unsupported");
    &CACHE.get_or_init(|| (1..=MAX_ORDER).map(compute).collect())[n - 1]
}

/// Composite rule on `[a, b]` with uniform panels; returns (nodes, weights).
pub fn composite(a: f64, b: f64, order: usize, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(order * panels);
    let mut ws = Vec::with_capacity(order * panels);
    for p in 0..panels {
        let lo = a + h * p as f64;
        for (t, w) in rule.nodes.iter().zip(&rule.weights) {
            xs.push(lo + 0.5 * h * (t + 1.0));
            ws.push(0.5 * h * w);
        }
    }
    (xs, ws)
}

/// Gauss–Legendre over explicit breakpoints.
pub fn over_breaks(breaks: &[f64], order: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = gauss_legendre(order);
    let mut xs = Vec::with_capacity(order * breaks.len());
    let mut ws = Vec::with_capacity(order * breaks.len());
    for win in breaks.windows(2) {
        let (lo, hi) = (win[0], win[1]);
        if hi <= lo {
            continue;
        }
        let h = hi - lo;
        for (t, w) in rule.nodes.iter().zip(&rule.weights) {
            xs.push(lo + 0.5 * h * (t + 1.0));
            ws.push(0.5 * h * w);
        }
    }
    (xs, ws)
}

/// Breakpoints on `[a, b]` refined geometrically (ratio 1/2) towards the
/// ends flagged in `toward_a` / `toward_b`, `levels` times.
pub fn graded_breaks(a: f64, b: f64, toward_a: bool, toward_b: bool, levels: usize) -> Vec<f64> {
    let len = b - a;
    let mut pts = vec![a, b];
    match (toward_a, toward_b) {
        (false, false) => {}
        (true, false) => {
            for k in 1..=levels {
                pts.push(a + len * 0.5f64.powi(k as i32));
            }
        }
        (false, true) => {
            for k in 1..=levels {
                pts.push(b - len * 0.5f64.powi(k as i32));
            }
        }
        (true, true) => {
            let mid = a + 0.5 * len;
            pts.push(mid);
            for k in 1..=levels {
                let d = 0.5 * len * 0.5f64.powi(k as i32);
                pts.push(a + d);
                pts.push(b - d);
            }
        }
    }
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_rule_integrates_cubic() {
        let (xs, ws) = composite(0.0, 1.0, 2, 1);
        let v: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x * x).sum();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn exactness_up_to_degree_2n_minus_1() {
        for n in [1usize, 3, 7, 12, 20, 40, 64] {
            let r = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let got: f64 = r
                    .nodes
                    .iter()
                    .zip(&r.weights)
                    .map(|(x, w)| w * x.powi(deg as i32))
                    .sum();
                let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((got - want).abs() < 1e-13, "n={n} deg={deg} got={got}");
            }
        }
    }

    #[test]
    fn graded_breaks_are_sorted_and_cover() {
        let b = graded_breaks(0.0, 1.0, true, true, 5);
        assert_eq!(b.first(), Some(&0.0));
        assert_eq!(b.last(), Some(&1.0));
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        assert!((b[1] - 1.0 / 64.0).abs() < 1e-15);
    }
}
