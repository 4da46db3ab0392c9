//! Fractional Laplacian against the oracles in `support::frac`.

mod support;

use rmlab::problems::{apply_frac_lap, frac_constant, preset, FracStencil};
use support::frac::{adaptive, bump, c_oracle, frac_bump_oracle, spec};

#[test]
fn oracle_quadrature_is_exact_on_polynomials() {
    let v = adaptive(&|x: f64| x.powi(20), 0.0, 1.0, 1e-14, 20);
    assert!((v - 1.0 / 21.0).abs() < 1e-15);
}

#[test]
fn constant_matches_stirling_gamma() {
    for alpha in [1.1, 1.25, 1.5, 1.75, 1.9] {
        let a = frac_constant(alpha, 1);
        let b = c_oracle(alpha);
        assert!(((a - b) / b).abs() < 1e-12, "alpha {alpha}: {a} vs {b}");
    }
}

#[test]
fn bump_image_is_constant_and_matches_oracle() {
    for alpha in [1.25, 1.5, 1.75] {
        let s = spec(alpha);
        let u = bump(alpha / 2.0);
        let vals: Vec<f64> = (1..=21)
            .map(|i| {
                let x = -1.0 + 2.0 * i as f64 / 22.0;
                let st = FracStencil::new(&s, x).unwrap();
                st.apply::<f64, _>(&u).unwrap()
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / 21.0;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 20.0).sqrt();
        assert!(sd <= 1e-4 * mean, "alpha {alpha}: sd {sd} mean {mean}");
        let x = 0.3;
        let oracle = c_oracle(alpha) * frac_bump_oracle(alpha, x);
        let got: f64 = FracStencil::new(&s, x).unwrap().apply(&u).unwrap();
        assert!(((got - oracle) / oracle).abs() < 1e-6, "alpha {alpha}: {got} vs {oracle}");
    }
}

#[test]
fn even_input_even_output() {
    let s = spec(1.6);
    let u = bump(2.5);
    for x in [0.05, 0.33, 0.71, 0.97] {
        let a: f64 = apply_frac_lap(&s, &u, x).unwrap();
        let b: f64 = apply_frac_lap(&s, &u, -x).unwrap();
        assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0));
    }
}

#[test]
fn preset_exact_solution_is_consistent() {
    let p = preset("frac_adr_1d").unwrap();
    let (ri, rb) = p.manufactured_defect(200, 1).unwrap();
    assert!(ri < 1e-6 && rb < 1e-12, "{ri} {rb}");
}
