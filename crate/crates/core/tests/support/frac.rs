//! Independent fractional-Laplacian oracles: a Stirling-series gamma and
//! adaptive Gauss–Kronrod on the substituted integral.

use std::f64::consts::PI;

use rmlab::geometry::BoxDomain;
use rmlab::models::AnalyticFn;
use rmlab::problems::FractionalSpec;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let (f1, f2) = (f(c - h * XGK[i]), f(c + h * XGK[i]));
        k += WGK[i] * (f1 + f2);
        if i % 2 == 1 {
            g += WG[i / 2] * (f1 + f2);
        }
    }
    (k * h, ((k - g) * h).abs())
}

pub fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let (v, err) = gk15(f, a, b);
    if err <= tol || depth == 0 {
        return v;
    }
    let m = 0.5 * (a + b);
    adaptive(f, a, m, tol, depth - 1) + adaptive(f, m, b, tol, depth - 1)
}

fn ln_gamma_stirling(z: f64) -> f64 {
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + 1.0 / (12.0 * z) - 1.0 / (360.0 * z.powi(3))
        + 1.0 / (1260.0 * z.powi(5))
        - 1.0 / (1680.0 * z.powi(7))
        + 1.0 / (1188.0 * z.powi(9))
}

/// Γ(z) for non-integer z by upward recurrence into the Stirling regime.
pub fn gamma_oracle(z: f64) -> f64 {
    let mut shift = 1.0;
    let mut w = z;
    while w < 20.0 {
        shift *= w;
        w += 1.0;
    }
    ln_gamma_stirling(w).exp() / shift
}

pub fn c_oracle(alpha: f64) -> f64 {
    2f64.powf(alpha) * gamma_oracle((alpha + 1.0) / 2.0) / (PI.sqrt() * gamma_oracle(-alpha / 2.0).abs())
}

/// `∫_0^∞ (2u(x) - u(x+y) - u(x-y)) / y^{1+α} dy` for `u = (1-x²)_+^s`,
/// with `y = t^4` and the differences written through expm1/log1p.
pub fn frac_bump_oracle(alpha: f64, x: f64) -> f64 {
    let s = alpha / 2.0;
    let a = 1.0 - x * x;
    let diff = move |y: f64| -> f64 {
        let p1 = -y * (2.0 * x + y) / a;
        let p2 = y * (2.0 * x - y) / a;
        if (x + y).abs() < 1.0 && (x - y).abs() < 1.0 {
            // e^{a1} + e^{a2} - 2 = 2 (expm1(m) + 2 e^m sinh²(h/2)), m and h the half sum and half difference
            let m = 0.5 * s * (-2.0 * y * y / a + p1 * p2).ln_1p();
            let h = 0.5 * s * (p1.ln_1p() - p2.ln_1p());
            -2.0 * a.powf(s) * (m.exp_m1() + 2.0 * m.exp() * (0.5 * h).sinh().powi(2))
        } else {
            let mut total = 0.0;
            for (z, q) in [(x + y, p1), (x - y, p2)] {
                if z.abs() < 1.0 {
                    total -= a.powf(s) * (s * q.ln_1p()).exp_m1();
                } else {
                    total += a.powf(s);
                }
            }
            total
        }
    };
    let g = move |t: f64| -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let y = t.powi(4);
        4.0 * diff(y) * t.powi(3) / y.powf(1.0 + alpha)
    };
    let k1 = (1.0 - x.abs()).powf(0.25);
    let k2 = (1.0 + x.abs()).powf(0.25);
    let mut v = adaptive(&g, 0.0, k1, 1e-13, 40);
    if k2 > k1 {
        v += adaptive(&g, k1, k2, 1e-13, 40);
    }
    v + 2.0 * a.powf(s) * (1.0 + x.abs()).powf(-alpha) / alpha
}

/// Fractional operator on (-1, 1) with no advection and unit reaction.
pub fn spec(alpha: f64) -> FractionalSpec {
    FractionalSpec::new(
        &BoxDomain::interval(-1.0, 1.0),
        alpha,
        AnalyticFn::zero(1),
        AnalyticFn::constant("1", 1, 1.0),
        1.0,
    )
    .unwrap()
}

/// `(1 - x²)_+^s`.
pub fn bump(s: f64) -> AnalyticFn {
    AnalyticFn::new("bump", 1, move |x| {
        if x[0].value.abs() >= 1.0 {
            rmlab::autodiff::Jet2::constant(0.0, 1)
        } else {
            (x[0] * x[0]).scale(-1.0).shift(1.0).powf(s)
        }
    })
}
