#![allow(dead_code)]

use proptest::prelude::*;

use isodelay::dubois_reymond::{dr_quantity, psi};
use isodelay::euler_lagrange::{el_residual, Regime};
use isodelay::expr::{bind_eval, parse, Ast, BinOp, Binding, Func, NamedConst};
use isodelay::noether::noether_quantity;
use isodelay::optimal_control::second_order_noether_quantity;
use isodelay::{AugmentedSetup, IsoperimetricProblem, Trajectory, TransformationGroup};

pub const VARS: [&str; 5] = ["t", "q", "qd", "q_tau", "qd_tau"];

pub fn arb_ast() -> impl Strategy<Value = Ast> {
    let leaf = prop_oneof![
        (0u32..100_000).prop_map(|k| Ast::Number(k as f64 / 1000.0)),
        prop::sample::select(VARS.to_vec()).prop_map(|v| Ast::Var(v.to_string())),
        prop::sample::select(vec![NamedConst::Pi, NamedConst::E]).prop_map(Ast::Const),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Ast::Neg(Box::new(a))),
            (
                prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div]),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, a, b)| Ast::Binary(op, Box::new(a), Box::new(b))),
            (inner.clone(), 0u32..4).prop_map(|(a, p)| Ast::Binary(
                BinOp::Pow,
                Box::new(a),
                Box::new(Ast::Number(p as f64))
            )),
            (prop::sample::select(Func::ALL.to_vec()), inner).prop_map(|(f, a)| Ast::Call(f, Box::new(a))),
        ]
    })
}

/// Independent evaluator over expression text. Returns the value together with
/// the sum of magnitudes of every intermediate result, a scale for rounding error.
pub struct Reference<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a [(&'a str, f64)],
    scale: f64,
}

impl Reference<'_> {
    pub fn eval(text: &str, vars: &[(&str, f64)]) -> (f64, f64) {
        let mut r = Reference { src: text.as_bytes(), pos: 0, vars, scale: 0.0 };
        let v = r.sum();
        assert_eq!(r.pos, r.src.len(), "trailing input in {text}");
        (v, r.scale)
    }

    fn peek(&mut self) -> Option<u8> {
        while self.src.get(self.pos) == Some(&b' ') {
            self.pos += 1;
        }
        self.src.get(self.pos).copied()
    }

    fn note(&mut self, v: f64) -> f64 {
        self.scale += v.abs();
        v
    }

    fn sum(&mut self) -> f64 {
        let mut acc = self.product();
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.product();
            acc = if c == b'+' { acc + rhs } else { acc - rhs };
            acc = self.note(acc);
        }
        acc
    }

    fn product(&mut self) -> f64 {
        let mut acc = self.signed();
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.signed();
            acc = if c == b'*' { acc * rhs } else { acc / rhs };
            acc = self.note(acc);
        }
        acc
    }

    fn signed(&mut self) -> f64 {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return -self.signed();
        }
        self.power()
    }

    fn power(&mut self) -> f64 {
        let base = self.atom();
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exponent = self.signed();
            return self.note(base.powf(exponent));
        }
        base
    }

    fn atom(&mut self) -> f64 {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let v = self.sum();
                assert_eq!(self.peek(), Some(b')'));
                self.pos += 1;
                v
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit() || *c == b'.') {
                    self.pos += 1;
                }
                std::str::from_utf8(&self.src[start..self.pos]).unwrap().parse().unwrap()
            }
            _ => {
                let start = self.pos;
                while self.src.get(self.pos).is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_') {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
                if self.peek() == Some(b'(') {
                    let x = self.atom();
                    let v = match name.as_str() {
                        "sin" => x.sin(),
                        "cos" => x.cos(),
                        "exp" => x.exp(),
                        "log" => x.ln(),
                        "sqrt" => x.sqrt(),
                        "abs" => x.abs(),
                        other => panic!("unknown function {other}"),
                    };
                    return self.note(v);
                }
                match name.as_str() {
                    "pi" => std::f64::consts::PI,
                    "e" => std::f64::consts::E,
                    _ => self.vars.iter().find(|(n, _)| *n == name).map(|(_, v)| *v).expect("bound variable"),
                }
            }
        }
    }
}

pub fn round_trip(ast: &Ast) -> Result<(), String> {
    let text = ast.to_string();
    match parse(&text) {
        Ok(back) if &back == ast => Ok(()),
        Ok(back) => Err(format!("{text} parsed back as {back}")),
        Err(e) => Err(format!("{text}: {e}")),
    }
}

/// `Ok(false)` when the reference value is unusable and the case is skipped.
pub fn evaluation_agrees(ast: &Ast, args: &[f64]) -> Result<bool, String> {
    let text = ast.to_string();
    let vars: Vec<(&str, f64)> = VARS.iter().copied().zip(args.iter().copied()).collect();
    let (expected, scale) = Reference::eval(&text, &vars);
    if !(expected.is_finite() && scale.is_finite() && scale < 1e12) {
        return Ok(false);
    }
    let binding = Binding::variational(1, 1);
    let mut slots = vec![0.0; binding.arity()];
    for (name, v) in &vars {
        slots[binding.resolve(name).map_err(|e| e.to_string())?] = *v;
    }
    let got = bind_eval(ast, &binding, &slots).map_err(|e| format!("{text}: {e}"))?;
    if (got - expected).abs() <= 1e-12 * (expected.abs() + scale) {
        Ok(true)
    } else {
        Err(format!("{text} gave {got} vs {expected}"))
    }
}

pub fn arb_args() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, VARS.len())
}

pub fn monomial_derivative(coeffs: &[f64], t: f64, order: usize) -> (f64, f64) {
    let mut value = 0.0;
    let mut scale = 0.0;
    for (k, c) in coeffs.iter().enumerate().skip(order) {
        let falling: f64 = (k - order + 1..=k).map(|x| x as f64).product();
        let term = c * falling * t.powi((k - order) as i32);
        value += term;
        scale += term.abs();
    }
    (value, scale)
}

pub fn number(x: f64) -> String {
    format!("({x:?})")
}

/// `a qd² + b qd qd_τ + c q² + d q q_τ + e t q` with constraint `q`.
pub fn first_order_problem(c: &[f64; 5], tau: f64) -> IsoperimetricProblem {
    let b = Binding::variational(1, 1);
    let text = format!(
        "{}*qd^2 + {}*qd*qd_tau + {}*q^2 + {}*q*q_tau + {}*t*q",
        number(c[0]),
        number(c[1]),
        number(c[2]),
        number(c[3]),
        number(c[4])
    );
    IsoperimetricProblem::new(1, 1, tau, 0.0, 1.0, b.integrand(&text).unwrap()).with_constraint(b.integrand("q").unwrap(), 0.0)
}

pub fn quintic(tau: f64, coeffs: Vec<f64>) -> Trajectory {
    Trajectory::polynomial(-tau, 1.0, 1, vec![coeffs]).unwrap()
}

pub fn arb_coeffs<const N: usize>() -> impl Strategy<Value = [f64; N]> {
    prop::array::uniform(-1.0f64..1.0)
}

#[derive(Clone, Debug)]
pub struct FirstOrderCase {
    pub c: [f64; 5],
    pub coeffs: [f64; 6],
    pub lambda: f64,
    pub t: f64,
    pub eta: [f64; 3],
    pub xi: [f64; 3],
    pub gauge: [f64; 2],
}

pub const FIRST_ORDER_DELAY: f64 = 0.4;

pub fn first_order_case() -> impl Strategy<Value = FirstOrderCase> {
    (
        arb_coeffs::<5>(),
        arb_coeffs::<6>(),
        -2.0f64..2.0,
        0.01f64..0.99,
        arb_coeffs::<3>(),
        arb_coeffs::<3>(),
        arb_coeffs::<2>(),
    )
        .prop_filter("away from the regime switch", |(.., t, _, _, _)| (t - (1.0 - FIRST_ORDER_DELAY)).abs() > 1e-3)
        .prop_map(|(c, coeffs, lambda, t, eta, xi, gauge)| FirstOrderCase { c, coeffs, lambda, t, eta, xi, gauge })
}

fn close(label: &str, got: f64, expected: f64, tol: f64) -> Result<(), String> {
    if (got - expected).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{label}: {got} vs {expected}"))
    }
}

/// Euler–Lagrange residual, momentum, energy and Noether quantity of a random
/// first-order problem against their hand-expanded forms, each within 1e−10.
pub fn check_first_order(case: &FirstOrderCase) -> Result<(), String> {
    let FirstOrderCase { c, coeffs, lambda, t, eta, xi, gauge } = case.clone();
    let tau = FIRST_ORDER_DELAY;
    let problem = first_order_problem(&c, tau);
    let traj = quintic(tau, coeffs.to_vec());
    let setup = AugmentedSetup::new(problem, vec![lambda]).map_err(|e| e.to_string())?;
    let q = |s: f64, k: usize| monomial_derivative(&coeffs, s, k).0;
    let first = t < 1.0 - tau;
    let advanced = if first { 1.0 } else { 0.0 };
    let [a, b, cq, d, e] = c;

    let dq = 2.0 * cq * q(t, 0) + d * q(t - tau, 0) + e * t - lambda + advanced * d * q(t + tau, 0);
    let momentum = 2.0 * a * q(t, 1) + b * q(t - tau, 1) + advanced * b * q(t + tau, 1);
    let momentum_rate = 2.0 * a * q(t, 2) + b * q(t - tau, 2) + advanced * b * q(t + tau, 2);
    let got = el_residual(&setup, &traj, t).map_err(|e| e.to_string())?[0];
    close("el residual", got, dq - momentum_rate, 1e-10)?;

    let regime = if first { Regime::First } else { Regime::Second };
    let psi1 = psi(&setup, &traj, 1, t, regime).map_err(|e| e.to_string())?[0];
    close("momentum", psi1, momentum, 1e-10)?;

    let f = a * q(t, 1).powi(2) + b * q(t, 1) * q(t - tau, 1) + cq * q(t, 0).powi(2)
        + d * q(t, 0) * q(t - tau, 0)
        + e * t * q(t, 0)
        - lambda * q(t, 0);
    let energy = f - momentum * q(t, 1);
    close("energy", dr_quantity(&setup, &traj, t, regime).map_err(|e| e.to_string())?, energy, 1e-10)?;

    // η = η0 + η1 t + η2 q, ξ = ξ0 + ξ1 t + ξ2 q, Φ = g0 t + g1 q
    let gen = Binding::generator(1);
    let affine = |k: [f64; 3]| gen.integrand(&format!("{} + {}*t + {}*q", number(k[0]), number(k[1]), number(k[2])));
    let group = TransformationGroup::new(
        affine(eta).map_err(|e| e.to_string())?,
        vec![affine(xi).map_err(|e| e.to_string())?],
        Binding::variational(1, 1)
            .integrand(&format!("{}*t + {}*q", number(gauge[0]), number(gauge[1])))
            .map_err(|e| e.to_string())?,
    );
    let at = |k: [f64; 3]| k[0] + k[1] * t + k[2] * q(t, 0);
    let phi = gauge[0] * t + gauge[1] * q(t, 0);
    let got = noether_quantity(&setup, &group, &traj, t, regime).map_err(|e| e.to_string())?;
    close("noether quantity", got, momentum * at(xi) + energy * at(eta) - phi, 1e-10)
}

#[derive(Clone, Debug)]
pub struct SecondOrderCase {
    pub coeffs: [f64; 6],
    pub t: f64,
    pub eta: f64,
    pub xi: [f64; 2],
}

pub fn second_order_case() -> impl Strategy<Value = SecondOrderCase> {
    (arb_coeffs::<6>(), 0.01f64..1.49, -2.0f64..2.0, arb_coeffs::<2>())
        .prop_filter("away from the regime switch", |(_, t, _, _)| (t - 1.0).abs() > 1e-3)
        .prop_map(|(coeffs, t, eta, xi)| SecondOrderCase { coeffs, t, eta, xi })
}

/// The second-order quantity with constant `η` and `ξ = ξ0 + ξ1 t` against the
/// general one with zero gauge, within 1e−8.
pub fn check_second_order(case: &SecondOrderCase) -> Result<(), String> {
    let SecondOrderCase { coeffs, t, eta, xi } = case.clone();
    let b = Binding::variational(2, 1);
    let integrand = |text: &str| b.integrand(text).map_err(|e| e.to_string());
    let problem = IsoperimetricProblem::new(2, 1, 0.5, 0.0, 1.5, integrand("qdd^2 + qd*qdd_tau + q*q_tau^2 + t*qd")?)
        .with_constraint(integrand("qd^2")?, 0.0);
    let traj = Trajectory::polynomial(-0.5, 1.5, 2, vec![coeffs.to_vec()]).map_err(|e| e.to_string())?;
    let regime = Regime::of(t, problem.switch_time());
    let setup = AugmentedSetup::new(problem, vec![0.7]).map_err(|e| e.to_string())?;
    let gen = Binding::generator(1);
    let group = TransformationGroup::new(
        gen.integrand(&number(eta)).map_err(|e| e.to_string())?,
        vec![gen.integrand(&format!("{} + {}*t", number(xi[0]), number(xi[1]))).map_err(|e| e.to_string())?],
        integrand("0")?,
    );
    let general = noether_quantity(&setup, &group, &traj, t, regime).map_err(|e| e.to_string())?;
    let special = second_order_noether_quantity(&setup, &traj, t, regime, eta, &[xi[0] + xi[1] * t], &[xi[1]])
        .map_err(|e| e.to_string())?;
    close("second-order quantity", special, general, 1e-8 * (1.0 + general.abs()))
}
