//! Random primitive compositions and MLPs checked against central finite
//! differences.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rmlab::autodiff::{grad_params, Jet2, LossBuilder, Primitive, Scalar};
use rmlab::models::{Activation, MlpArch, ParamModel};
use rmlab::quadrature::stream_rng;

pub const DIM: usize = 2;

#[derive(Clone, Debug)]
pub enum Expr {
    X(usize),
    /// Index into the parameter vector.
    Param(usize),
    Fixed(f64),
    Op(Primitive, Vec<Expr>),
}

fn op(p: Primitive, args: Vec<Expr>) -> Expr {
    Expr::Op(p, args)
}

fn positive(e: Expr) -> Expr {
    op(Primitive::Add, vec![op(Primitive::Mul, vec![e.clone(), e]), Expr::Fixed(0.5)])
}

fn random_expr(rng: &mut ChaCha8Rng, depth: usize, n_params: &mut usize) -> Expr {
    if depth == 0 || rng.random_bool(0.2) {
        return if rng.random_bool(0.6) {
            Expr::X(rng.random_range(0..DIM))
        } else {
            *n_params += 1;
            Expr::Param(*n_params - 1)
        };
    }
    let mut sub = |rng: &mut ChaCha8Rng| random_expr(rng, depth - 1, n_params);
    match rng.random_range(0..12) {
        0 => op(Primitive::Add, vec![sub(rng), sub(rng)]),
        1 => op(Primitive::Sub, vec![sub(rng), sub(rng)]),
        2 => op(Primitive::Mul, vec![sub(rng), sub(rng)]),
        3 => {
            let a = sub(rng);
            let b = sub(rng);
            op(Primitive::Div, vec![a, positive(b)])
        }
        4 => {
            let e = rng.random_range(-1.5..2.5);
            op(Primitive::Pow, vec![positive(sub(rng)), Expr::Fixed(e)])
        }
        5 => {
            let a = sub(rng);
            let b = sub(rng);
            op(Primitive::Pow, vec![positive(a), op(Primitive::Tanh, vec![b])])
        }
        6 => op(Primitive::Exp, vec![op(Primitive::Tanh, vec![sub(rng)])]),
        7 => op(Primitive::Tanh, vec![sub(rng)]),
        8 => op(Primitive::Sin, vec![sub(rng)]),
        9 => op(Primitive::Cos, vec![sub(rng)]),
        10 => op(Primitive::Sqrt, vec![positive(sub(rng))]),
        _ => op(Primitive::AbsSmooth { kappa: 0.1 }, vec![sub(rng)]),
    }
}

/// A random composition over `DIM` inputs, its parameter values and an evaluation point.
pub fn random_case(seed: u64) -> (Expr, Vec<f64>, Vec<f64>) {
    let mut rng = stream_rng(seed, 7);
    let mut n = 0;
    let mut e = random_expr(&mut rng, 4, &mut n);
    if n == 0 {
        e = op(Primitive::Mul, vec![e, Expr::Param(0)]);
        n = 1;
    }
    let params = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = (0..DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
    (e, params, x)
}

pub fn eval<S: Scalar>(e: &Expr, params: &[S], x: &[f64]) -> Jet2<S> {
    match e {
        Expr::X(i) => Jet2::coordinates(x)[*i],
        Expr::Param(k) => Jet2::constant(params[*k], x.len()),
        Expr::Fixed(c) => Jet2::constant(S::cst(*c), x.len()),
        Expr::Op(p, args) => {
            let a: Vec<Jet2<S>> = args.iter().map(|a| eval(a, params, x)).collect();
            Jet2::apply(*p, &a).expect("guarded domain")
        }
    }
}

/// `|a - b| <= tol * max(1, |b|)`, where `b` is the finite-difference value.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// First derivatives by central differences of values, second derivatives
/// by central differences of the jet's first derivatives.
pub fn check_spatial(f: impl Fn(&[f64]) -> Jet2<f64>, x: &[f64], tol: f64) -> Result<(), String> {
    let h = 1e-4;
    let j = f(x);
    for i in 0..x.len() {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        let (jp, jm) = (f(&xp), f(&xm));
        let fd1 = (jp.value - jm.value) / (2.0 * h);
        if !close(j.d1(i), fd1, tol) {
            return Err(format!("d/dx{i}: jet {} vs fd {fd1} at {x:?}", j.d1(i)));
        }
        for k in 0..x.len() {
            let fd2 = (jp.d1(k) - jm.d1(k)) / (2.0 * h);
            if !close(j.d2(i, k), fd2, tol) {
                return Err(format!("d2/dx{i}dx{k}: jet {} vs fd {fd2} at {x:?}", j.d2(i, k)));
            }
        }
    }
    Ok(())
}

pub fn check_gradient(f: impl Fn(&[f64]) -> f64, theta: &[f64], grad: &[f64], tol: f64) -> Result<(), String> {
    let h = 1e-5;
    for i in 0..theta.len() {
        let mut tp = theta.to_vec();
        let mut tm = theta.to_vec();
        tp[i] += h;
        tm[i] -= h;
        let fd = (f(&tp) - f(&tm)) / (2.0 * h);
        if !close(grad[i], fd, tol) {
            return Err(format!("param {i}: tape {} vs fd {fd}", grad[i]));
        }
    }
    Ok(())
}

/// Scalar output mixing value and second derivatives, so that the tape
/// gradient runs through every jet component.
fn mix<S: Scalar>(j: &Jet2<S>) -> S {
    j.value + j.laplacian().scale(0.5) + j.d1(0).scale(0.25)
}

struct ExprLoss<'a> {
    e: &'a Expr,
    x: &'a [f64],
}

impl LossBuilder for ExprLoss<'_> {
    fn build<S: Scalar>(&self, theta: &[S]) -> S {
        mix(&eval(self.e, theta, self.x))
    }
}

pub fn check_composition(seed: u64) -> Result<(), String> {
    let (e, params, x) = random_case(seed);
    check_spatial(|y| eval(&e, &params, y), &x, 1e-6).map_err(|m| format!("composition {seed}: {m}"))?;
    let loss = ExprLoss { e: &e, x: &x };
    let (_, g) = grad_params(&loss, &params).map_err(|m| format!("composition {seed}: {m}"))?;
    check_gradient(|t| mix(&eval(&e, t, &x)), &params, &g, 1e-5).map_err(|m| format!("composition {seed}: {m}"))
}

pub fn random_mlp(seed: u64) -> (ParamModel, Vec<f64>) {
    let mut rng = stream_rng(seed, 8);
    let w = rng.random_range(3..9);
    let act = [Activation::Tanh, Activation::Sin, Activation::Softplus][rng.random_range(0..3)];
    let widths = if rng.random_bool(0.5) { vec![DIM, w, 1] } else { vec![DIM, w, w, 1] };
    let arch = MlpArch::new(widths, act).unwrap();
    let theta: Vec<f64> = (0..arch.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = (0..DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
    (ParamModel::mlp(arch, theta).unwrap(), x)
}

struct MlpLoss<'a> {
    model: &'a ParamModel,
    points: [[f64; DIM]; 3],
}

impl LossBuilder for MlpLoss<'_> {
    fn build<S: Scalar>(&self, theta: &[S]) -> S {
        let mut acc = S::cst(0.0);
        for x in &self.points {
            let u = self.model.eval_with(theta, x).unwrap();
            let r = u.laplacian() + u.value - S::cst(x[0].sin());
            acc = acc + r * r;
        }
        acc
    }
}

pub fn check_mlp(seed: u64) -> Result<(), String> {
    let (model, x) = random_mlp(seed);
    let theta = model.theta.clone();
    check_spatial(|y| model.eval_with(&theta, y).unwrap(), &x, 1e-6).map_err(|m| format!("mlp {seed}: {m}"))?;
    let loss = MlpLoss {
        model: &model,
        points: [[x[0], x[1]], [0.3, -0.2], [-0.7, 0.9]],
    };
    let (_, g) = grad_params(&loss, &theta).map_err(|m| format!("mlp {seed}: {m}"))?;
    check_gradient(|t| loss.build::<f64>(t), &theta, &g, 1e-5).map_err(|m| format!("mlp {seed}: {m}"))
}
