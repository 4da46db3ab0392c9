use std::f64::consts::PI;

use rmlab::geometry::BoxDomain;
use rmlab::losses::{
    build_basis, loss_continuous, loss_discrete, loss_hp_vrm, loss_pwconst_weak, loss_regularized, minimal_m,
    phi_regularizer, project, projection_deficit, BasisKind, LossForm, LossSpec, Partition, PartitionConfig,
};
use rmlab::models::{Activation, AnalyticFn, Evaluable, MlpArch, ParamModel};
use rmlab::problems::{preset, EllipticCoeffs, NormKind, Operator, ProblemSpec, PRESETS};
use rmlab::quadrature::{boundary_atoms, grid_samples, sample_iid, QuadratureRule, SampleTarget};

fn rule() -> QuadratureRule {
    QuadratureRule::uniform(16, 4, 1)
}

fn poisson_zero() -> ProblemSpec {
    let d = BoxDomain::unit(1);
    let op = Operator::Elliptic(EllipticCoeffs::laplacian(&d, 0.0).unwrap());
    ProblemSpec::new("zero", d, op, AnalyticFn::zero(1), AnalyticFn::zero(1), 2.0, NormKind::L2, NormKind::H2, None)
        .unwrap()
}

fn adversary(mr: usize) -> AnalyticFn {
    let k = 2.0 * PI * mr as f64;
    AnalyticFn::new("adversary", 1, move |x| x[0].scale(k).sin().scale(-1.0 / (k * k)))
}

fn random_models(n: usize, width: usize, dim: usize) -> Vec<ParamModel> {
    let arch = MlpArch::new(vec![dim, width, 1], Activation::Tanh).unwrap();
    (0..n).map(|s| ParamModel::mlp_init(arch.clone(), 100 + s as u64).unwrap()).collect()
}

#[test]
fn counterexample_losses() {
    let prob = poisson_zero();
    for mr in [4, 8, 16, 64] {
        let u = adversary(mr);
        let c = loss_continuous(&prob, &u, 2.0, 1.0, &rule()).unwrap();
        assert!((c.interior - 0.5).abs() < 1e-9, "{mr}: {}", c.interior);
        assert!(c.boundary < 1e-20 && (c.total - 0.5).abs() < 1e-9);
        assert!(c.quadrature_certificate.as_ref().unwrap().converged);
        let si = grid_samples(&prob.domain, mr).unwrap();
        let sb = boundary_atoms(&prob.boundary_region()).unwrap();
        let dl = loss_discrete(&prob, &u, 2.0, 1.0, &si, &sb).unwrap();
        assert!(dl.total <= 1e-12, "{mr}: {}", dl.total);
    }
}

#[test]
fn exact_solutions_have_zero_loss() {
    for name in PRESETS {
        let prob = preset(name).unwrap();
        let u = prob.exact.clone().unwrap();
        let r = QuadratureRule::uniform(16, 4, prob.dim());
        let c = loss_continuous(&prob, &u, 2.0, 1.0, &r).unwrap();
        assert!(c.total <= 1e-8, "{name}: {}", c.total);
        let si = sample_iid(&prob.interior_region(), 64, 3, SampleTarget::Interior).unwrap();
        let sb = sample_iid(&prob.boundary_region(), 16, 4, SampleTarget::Boundary).unwrap();
        let dl = loss_discrete(&prob, &u, 2.0, 10.0, &si, &sb).unwrap();
        if name != "frac_adr_1d" {
            assert!(dl.total <= 1e-12, "{name}: {}", dl.total);
        }
    }
}

#[test]
fn homogeneity_and_tau_monotonicity() {
    let prob = poisson_zero();
    let u = AnalyticFn::new("x(1-x)+x", 1, |x| x[0] * x[0].scale(-1.0).shift(2.0));
    for p in [1.0, 1.5, 2.0, 3.0] {
        let a = loss_continuous(&prob, &u, p, 1.0, &rule()).unwrap();
        let b = loss_continuous(&prob, &u.scaled(2.0), p, 1.0, &rule()).unwrap();
        assert!((b.total - 2f64.powf(p) * a.total).abs() < 1e-12 * b.total);
    }
    let mut last = 0.0;
    for tau in [0.5, 1.0, 2.0, 10.0] {
        let l = loss_continuous(&prob, &u, 2.0, tau, &rule()).unwrap();
        assert!(l.total >= last && l.boundary >= 0.0);
        last = l.total;
    }
}

#[test]
fn discrete_loss_approaches_continuous() {
    let prob = preset("poisson1d_sin").unwrap();
    let u = AnalyticFn::new("x^2", 1, |x| x[0] * x[0]);
    let reference = loss_continuous(&prob, &u, 2.0, 1.0, &rule()).unwrap();
    let sb = boundary_atoms(&prob.boundary_region()).unwrap();
    let trials = 128;
    let mut means = Vec::new();
    for e in 5..=12 {
        let m = 1usize << e;
        let mut acc = 0.0;
        for t in 0..trials {
            let si = sample_iid(&prob.interior_region(), m, (e * 1000 + t) as u64, SampleTarget::Interior).unwrap();
            let dl = loss_discrete(&prob, &u, 2.0, 1.0, &si, &sb).unwrap();
            // boundary part is exact with all atoms
            assert!((dl.boundary - reference.boundary).abs() < 1e-14);
            acc += (dl.total - reference.total).abs();
        }
        means.push(acc / trials as f64);
    }
    for w in means.windows(2) {
        assert!(w[1] < w[0], "{means:?}");
    }
}

#[test]
fn discrete_rejects_mismatched_samples() {
    let prob = poisson_zero();
    let u = AnalyticFn::zero(1);
    let sb = boundary_atoms(&prob.boundary_region()).unwrap();
    let wrong = sample_iid(&prob.boundary_region(), 4, 1, SampleTarget::Boundary).unwrap();
    assert!(loss_discrete(&prob, &u, 2.0, 1.0, &wrong, &sb).is_err());
    let two_d = grid_samples(&BoxDomain::unit(2), 3).unwrap();
    assert!(loss_discrete(&prob, &u, 2.0, 1.0, &two_d, &sb).is_err());
}

#[test]
fn basis_projection_examples() {
    let p = Partition::uniform(&BoxDomain::unit(1), &[1], BasisKind::Legendre, 2).unwrap();
    let b = build_basis(&p).unwrap();
    let e1 = project(&b, &|x| b.eval(0, 0, x), &rule()).unwrap();
    assert!((e1[0][0] - 1.0).abs() < 1e-14 && e1[0][1].abs() < 1e-14);

    let pc = Partition::uniform(&BoxDomain::unit(1), &[1], BasisKind::Pwconst, 1).unwrap();
    let bc = build_basis(&pc).unwrap();
    let c = project(&bc, &|x| 3f64.sqrt() * (2.0 * x[0] - 1.0), &rule()).unwrap();
    assert!(c[0][0].abs() < 1e-15);

    // idempotence on the reconstruction
    let p4 = Partition::uniform(&BoxDomain::unit(1), &[3], BasisKind::Legendre, 4).unwrap();
    let b4 = build_basis(&p4).unwrap();
    let f = |x: &[f64]| (3.0 * x[0]).exp();
    let c1 = project(&b4, &f, &rule()).unwrap();
    let c2 = project(&b4, &|x| b4.reconstruct(&c1, x), &rule()).unwrap();
    for (r1, r2) in c1.iter().zip(&c2) {
        for (a, b) in r1.iter().zip(r2) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn gram_and_parseval_in_two_dimensions() {
    let d = BoxDomain::unit(2);
    let p = Partition::uniform(&d, &[2, 3], BasisKind::Legendre, 5).unwrap();
    let b = build_basis(&p).unwrap();
    assert!(b.gram_deviation.iter().all(|&g| g <= 1e-10));
    assert_eq!(b.count(0), 25);
    let r = QuadratureRule::uniform(16, 2, 2);
    let f = |x: &[f64]| (x[0] + 2.0 * x[1]).sin();
    let c = project(&b, &f, &r).unwrap();
    let energy: f64 = c.iter().flatten().map(|v| v * v).sum();
    let pf = |x: &[f64]| b.reconstruct(&c, x).powi(2);
    let norm_p: f64 = p.cells.iter().map(|cell| r.integrate(cell, pf)).sum();
    assert!((energy - norm_p).abs() < 1e-10);
    let full: f64 = r.integrate(&d, |x| f(x).powi(2));
    assert!(energy <= full + 1e-12);
}

#[test]
fn bessel_for_random_models() {
    let prob = preset("poisson1d_sin").unwrap();
    let part = Partition::uniform(&prob.domain, &[3], BasisKind::Legendre, 3).unwrap();
    let basis = build_basis(&part).unwrap();
    for m in random_models(50, 6, 1) {
        let hp = loss_hp_vrm(&prob, &m, 1.0, &basis, &rule()).unwrap();
        let c = loss_continuous(&prob, &m, 2.0, 1.0, &rule()).unwrap();
        assert!(hp.interior <= c.interior + 1e-10);
        assert!(hp.total <= c.total + 1e-10);
        assert!((hp.boundary - c.boundary).abs() < 1e-12);
    }
}

#[test]
fn hp_monotone_in_order() {
    let prob = preset("poisson1d_sin").unwrap();
    // residual f - Au = pi^2 sin(pi x) - 4 pi^2 sin(2 pi x) + ...
    let u = AnalyticFn::new("sin(2pi x)+x^3", 1, |x| x[0].scale(2.0 * PI).sin() + x[0] * x[0] * x[0]);
    let full = loss_continuous(&prob, &u, 2.0, 1.0, &rule()).unwrap().interior;
    let mut last = 0.0;
    for n in 1..=12 {
        let part = Partition::uniform(&prob.domain, &[4], BasisKind::Legendre, n).unwrap();
        let basis = build_basis(&part).unwrap();
        let hp = loss_hp_vrm(&prob, &u, 1.0, &basis, &rule()).unwrap();
        assert!(hp.interior >= last - 1e-12, "n={n}");
        last = hp.interior;
        let deficit = projection_deficit(&prob, &u, &basis, &rule()).unwrap();
        assert!(deficit >= -1e-10);
        if n == 12 {
            assert!((full - hp.interior).abs() < 1e-6, "{full} {}", hp.interior);
            assert!(deficit < 1e-6);
        }
    }
}

#[test]
fn pwconst_weak_examples() {
    let prob = preset("poisson1d_sin").unwrap();
    let exact = prob.exact.clone().unwrap();
    let part = Partition::uniform(&prob.domain, &[5], BasisKind::Pwconst, 1).unwrap();
    for flag in [false, true] {
        let l = loss_pwconst_weak(&prob, &exact, 10.0, &part, &rule(), flag).unwrap();
        assert!(l.total < 1e-8);
    }
    let u = AnalyticFn::new("exp(x)cos(3x)", 1, |x| x[0].exp() * x[0].scale(3.0).cos());
    let a = loss_pwconst_weak(&prob, &u, 1.0, &part, &rule(), false).unwrap();
    let b = loss_pwconst_weak(&prob, &u, 1.0, &part, &rule(), true).unwrap();
    assert!((a.total - b.total).abs() < 1e-9 * a.total.max(1.0));

    let zero = poisson_zero();
    for k in [2, 4, 7] {
        let part = Partition::uniform(&zero.domain, &[k], BasisKind::Pwconst, 1).unwrap();
        let adv = adversary(k);
        let w = loss_pwconst_weak(&zero, &adv, 1.0, &part, &rule(), false).unwrap();
        assert!(w.interior < 1e-20, "{k}: {}", w.interior);
        let s = loss_continuous(&zero, &adv, 2.0, 1.0, &rule()).unwrap();
        assert!((s.interior - 0.5).abs() < 1e-9);
    }
    let adv_prob = preset("advreac1d_friedrichs").unwrap();
    assert!(loss_pwconst_weak(&adv_prob, &u, 1.0, &part, &rule(), true).is_err());
}

#[test]
fn regularizer_lemma_on_log_grid() {
    let grid: Vec<f64> = (0..1000).map(|i| 10f64.powf(-3.0 + 4.0 * i as f64 / 999.0)).collect();
    for p in [1.0, 1.5, 2.0] {
        let m = minimal_m(p);
        for eps in [0.1, 0.01, 1e-4] {
            for &x in &grid {
                let (phi, dphi) = phi_regularizer(x, p, m, eps);
                let xp = x.powf(p);
                let slack = 1e-12 * xp.max(1.0);
                assert!(phi <= xp + slack);
                assert!(xp <= phi + (2.0 * m as f64 - p) * eps * x.powf(p - 1.0) + slack);
                assert!(p * phi <= x * dphi + slack);
                assert!(x * dphi <= 2.0 * m as f64 * xp + slack);
            }
        }
    }
}

#[test]
fn regularized_loss_properties() {
    let prob = preset("poisson1d_sin").unwrap();
    let u = AnalyticFn::new("x(1-x)", 1, |x| x[0] * x[0].scale(-1.0).shift(1.0));
    let p = 1.5;
    let m = minimal_m(p);
    let c = loss_continuous(&prob, &u, p, 1.0, &rule()).unwrap();
    let r = loss_regularized(&prob, &u, p, m, 1e-8, 1.0, &rule()).unwrap();
    assert!((c.total - r.total).abs() <= 1e-6);
    assert_eq!(loss_regularized(&prob, &u, p, m, 0.0, 1.0, &rule()).unwrap(), c);
    let exact = prob.exact.clone().unwrap();
    assert!(loss_regularized(&prob, &exact, p, m, 0.1, 1.0, &rule()).unwrap().total < 1e-8);
    assert!(loss_regularized(&prob, &u, p, m + 1, 0.1, 1.0, &rule()).is_err());
}

fn fd_check(spec: &LossSpec, prob: &ProblemSpec, model: &ParamModel) {
    let plan = spec.plan(prob, 9).unwrap();
    let theta = model.theta.clone();
    let (b, g) = plan.value_and_grad(model, &theta).unwrap();
    assert_eq!(b, plan.evaluate(model).unwrap());
    let gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for i in 0..theta.len() {
        let h = 1e-6 * theta[i].abs().max(1.0);
        let mut tp = theta.clone();
        tp[i] += h;
        let mut tm = theta.clone();
        tm[i] -= h;
        let lp = plan.evaluate(&model.with_theta(tp)).unwrap().total;
        let lm = plan.evaluate(&model.with_theta(tm)).unwrap().total;
        let fd = (lp - lm) / (2.0 * h);
        let scale = g[i].abs().max(1e-3 * gmax);
        assert!((fd - g[i]).abs() <= 1e-5 * scale, "{:?} param {i}: fd {fd} vs {}", spec.form, g[i]);
    }
}

#[test]
fn plan_gradients_match_differences() {
    let prob = preset("poisson1d_sin").unwrap();
    let model = &random_models(1, 5, 1)[0];
    let mut d = LossSpec::new(LossForm::DiscreteRm, 2.0, 10.0);
    d.samples.m_r = 40;
    fd_check(&d, &prob, model);
    let mut d3 = d.clone();
    d3.p = 3.0;
    fd_check(&d3, &prob, model);
    fd_check(&LossSpec::new(LossForm::ContinuousRm, 2.0, 1.0), &prob, model);
    let mut r = LossSpec::new(LossForm::RegularizedRm, 1.5, 1.0);
    r.epsilon = 0.01;
    fd_check(&r, &prob, model);
    let mut hp = LossSpec::new(LossForm::HpVrm, 2.0, 1.0);
    hp.partition = Some(PartitionConfig {
        cells: vec![2],
        kind: BasisKind::Legendre,
        order: 3,
        integrate_by_parts: false,
    });
    fd_check(&hp, &prob, model);
    let mut w = LossSpec::new(LossForm::PwconstWeak, 2.0, 1.0);
    w.partition = Some(PartitionConfig {
        cells: vec![4],
        kind: BasisKind::Pwconst,
        order: 1,
        integrate_by_parts: true,
    });
    fd_check(&w, &prob, model);

    let adv = preset("advreac1d_friedrichs").unwrap();
    fd_check(&d, &adv, model);
    let st = preset("advreac_spacetime").unwrap();
    fd_check(&d, &st, &random_models(1, 4, 2)[0]);
    let frac = preset("frac_adr_1d").unwrap();
    let mut df = d.clone();
    df.samples.m_r = 6;
    fd_check(&df, &frac, model);
}

#[test]
fn analytic_model_evaluates_without_parameters() {
    let prob = preset("poisson1d_sin").unwrap();
    let m = ParamModel::analytic(prob.exact.clone().unwrap());
    let plan = LossSpec::new(LossForm::ContinuousRm, 2.0, 1.0).plan(&prob, 0).unwrap();
    let (b, g) = plan.value_and_grad(&m, &[]).unwrap();
    assert!(b.total < 1e-12 && g.is_empty());
    assert_eq!(Evaluable::<f64>::dim(&m), 1);
}
