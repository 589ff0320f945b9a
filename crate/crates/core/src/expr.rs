//! A small arithmetic language for integrands, histories and generators.
//!
//! Precedence from loosest to tightest: `+ -`, `* /`, unary `-`, `^` (right
//! associative). Functions: `sin cos exp log sqrt abs`; constants `pi`, `e`.

use std::fmt;

use thiserror::Error;

use crate::calculus::Scalar;
use crate::problem::{Generic, Integrand};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {position}: expected {}", expected.join(" or "))]
    Syntax { position: usize, expected: Vec<String> },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("`{name}` asks for derivative order {order} but the problem has m = {max}")]
    DerivativeOrderTooHigh { name: String, order: usize, max: usize },
    #[error("evaluation left the real domain: {0}")]
    EvaluationDomain(String),
}

type Result<T> = std::result::Result<T, ExprError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 6] = [Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Sqrt, Func::Abs];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    fn apply<S: Scalar>(self, x: S) -> S {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Abs => x.abs(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NamedConst {
    Pi,
    E,
}

impl NamedConst {
    pub fn value(self) -> f64 {
        match self {
            NamedConst::Pi => std::f64::consts::PI,
            NamedConst::E => std::f64::consts::E,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Ast {
    Number(f64),
    Var(String),
    Const(NamedConst),
    Neg(Box<Ast>),
    Binary(BinOp, Box<Ast>, Box<Ast>),
    Call(Func, Box<Ast>),
}

impl Ast {
    /// Variable names in order of first appearance.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Ast::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Ast::Neg(a) | Ast::Call(_, a) => a.collect_vars(out),
            Ast::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Ast::Number(_) | Ast::Const(_) => {}
        }
    }

    /// The value of a literal, possibly negated.
    fn literal(&self) -> Option<f64> {
        match self {
            Ast::Number(x) => Some(*x),
            Ast::Neg(a) => a.literal().map(|x| -x),
            _ => None,
        }
    }
}

/// Fully parenthesized; parses back to the same tree.
impl fmt::Display for Ast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ast::Number(x) => write!(f, "{x}"),
            Ast::Var(v) => f.write_str(v),
            Ast::Const(NamedConst::Pi) => f.write_str("pi"),
            Ast::Const(NamedConst::E) => f.write_str("e"),
            Ast::Neg(a) => write!(f, "(-{a})"),
            Ast::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Ast::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T> {
        Err(ExprError::Syntax {
            position: self.pos,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn expr(&mut self) -> Result<Ast> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == b'+' { BinOp::Add } else { BinOp::Sub };
            lhs = Ast::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Ast> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == b'*' { BinOp::Mul } else { BinOp::Div };
            lhs = Ast::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Ast> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Ast::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Ast> {
        let base = self.primary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Ast::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Ast> {
        const OPERAND: &[&str] = &["number", "identifier", "'('", "'-'"];
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.fail(&["operator", "')'"]);
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            _ => self.fail(OPERAND),
        }
    }

    fn number(&mut self) -> Result<Ast> {
        let start = self.pos;
        let digits = |p: &mut Parser| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut count = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            return self.fail(&["digit"]);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                // not an exponent after all, e.g. "2e" is a syntax error below
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");
        match text.parse::<f64>() {
            Ok(v) => Ok(Ast::Number(v)),
            Err(_) => Err(ExprError::Syntax { position: start, expected: vec!["number".into()] }),
        }
    }

    fn identifier(&mut self) -> Result<Ast> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");
        if self.peek() == Some(b'(') {
            let Some(func) = Func::from_name(name) else {
                return Err(ExprError::Syntax {
                    position: start,
                    expected: Func::ALL.iter().map(|f| f.name().to_string()).collect(),
                });
            };
            self.pos += 1;
            let arg = self.expr()?;
            if self.peek() != Some(b')') {
                return self.fail(&["operator", "')'"]);
            }
            self.pos += 1;
            return Ok(Ast::Call(func, Box::new(arg)));
        }
        Ok(match name {
            "pi" => Ast::Const(NamedConst::Pi),
            "e" => Ast::Const(NamedConst::E),
            _ => Ast::Var(name.to_string()),
        })
    }
}

/// Parses an expression; errors carry the byte offset where parsing stopped.
pub fn parse(text: &str) -> Result<Ast> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let ast = p.expr()?;
    if p.peek().is_some() {
        return p.fail(&["operator", "end of input"]);
    }
    Ok(ast)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BindingKind {
    /// `[t, q..q^(m), q_τ..q^(m)_τ]`
    Variational { m: usize, n: usize },
    /// `[t]`
    Time,
    /// `[t, q]`
    Generator { n: usize },
    /// `[t, q, u, q_τ, u_τ]`
    Control { n: usize, mc: usize },
}

/// Maps variable names to argument slots.
///
/// Variational names are `t`, `d{j}q{i}` and `d{j}q{i}_tau`; for one component
/// `q`, `qd`, `qdd`, … and their `_tau` forms are accepted as well.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Binding {
    kind: BindingKind,
}

impl Binding {
    pub fn variational(m: usize, n: usize) -> Self {
        Binding { kind: BindingKind::Variational { m, n } }
    }

    pub fn time_only() -> Self {
        Binding { kind: BindingKind::Time }
    }

    /// Names `t`, `q{i}` (or `q` when `n = 1`).
    pub fn generator(n: usize) -> Self {
        Binding { kind: BindingKind::Generator { n } }
    }

    /// Names `t`, `q{i}`, `u{i}`, `q{i}_tau`, `u{i}_tau` (index optional when the block has one entry).
    pub fn control(n: usize, mc: usize) -> Self {
        Binding { kind: BindingKind::Control { n, mc } }
    }

    /// Number of argument slots.
    pub fn arity(&self) -> usize {
        match self.kind {
            BindingKind::Variational { m, n } => 1 + 2 * n * (m + 1),
            BindingKind::Time => 1,
            BindingKind::Generator { n } => 1 + n,
            BindingKind::Control { n, mc } => 1 + 2 * (n + mc),
        }
    }

    pub fn resolve(&self, name: &str) -> Result<usize> {
        if name == "t" {
            return Ok(0);
        }
        let unknown = || ExprError::UnknownVariable(name.to_string());
        let (stem, delayed) = match name.strip_suffix("_tau") {
            Some(s) => (s, true),
            None => (name, false),
        };
        match self.kind {
            BindingKind::Time => Err(unknown()),
            BindingKind::Variational { m, n } => {
                let (order, comp) = variational_name(stem, n).ok_or_else(unknown)?;
                if comp >= n {
                    return Err(unknown());
                }
                if order > m {
                    return Err(ExprError::DerivativeOrderTooHigh {
                        name: name.to_string(),
                        order,
                        max: m,
                    });
                }
                let base = if delayed { 1 + (m + 1) * n } else { 1 };
                Ok(base + order * n + comp)
            }
            BindingKind::Generator { n } => {
                if delayed {
                    return Err(unknown());
                }
                let comp = indexed(stem, "q", n).ok_or_else(unknown)?;
                Ok(1 + comp)
            }
            BindingKind::Control { n, mc } => {
                let (offset, comp) = if let Some(c) = indexed(stem, "q", n) {
                    (1, c)
                } else if let Some(c) = indexed(stem, "u", mc) {
                    (1 + n, c)
                } else {
                    return Err(unknown());
                };
                Ok(offset + comp + if delayed { n + mc } else { 0 })
            }
        }
    }

    /// Parses and binds `text` into an integrand over this binding's slots.
    pub fn integrand(&self, text: &str) -> Result<Integrand> {
        Ok(Integrand::new(self.compile(&parse(text)?)?))
    }

    pub fn compile(&self, ast: &Ast) -> Result<Compiled> {
        Ok(Compiled { root: lower(ast, self)?, arity: self.arity() })
    }
}

/// `d{j}q{i}` or the one-component sugar `q`, `qd`, `qdd`, …
fn variational_name(stem: &str, n: usize) -> Option<(usize, usize)> {
    if let Some(rest) = stem.strip_prefix('d') {
        let split = rest.find('q')?;
        let order = rest[..split].parse().ok()?;
        let comp = rest[split + 1..].parse().ok()?;
        return Some((order, comp));
    }
    let rest = stem.strip_prefix('q')?;
    if n == 1 && rest.bytes().all(|b| b == b'd') {
        return Some((rest.len(), 0));
    }
    None
}

/// `{prefix}{i}`, or bare `{prefix}` when the block has a single entry.
fn indexed(stem: &str, prefix: &str, width: usize) -> Option<usize> {
    let rest = stem.strip_prefix(prefix)?;
    if rest.is_empty() {
        return (width == 1).then_some(0);
    }
    let i: usize = rest.parse().ok()?;
    (i < width).then_some(i)
}

#[derive(Clone, Debug)]
enum Node {
    Num(f64),
    Slot(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    PowI(Box<Node>, i32),
    PowF(Box<Node>, f64),
    Call(Func, Box<Node>),
}

fn lower(ast: &Ast, binding: &Binding) -> Result<Node> {
    Ok(match ast {
        Ast::Number(x) => Node::Num(*x),
        Ast::Const(c) => Node::Num(c.value()),
        Ast::Var(v) => Node::Slot(binding.resolve(v)?),
        Ast::Neg(a) => Node::Neg(Box::new(lower(a, binding)?)),
        Ast::Call(f, a) => Node::Call(*f, Box::new(lower(a, binding)?)),
        Ast::Binary(BinOp::Pow, a, b) => {
            let base = Box::new(lower(a, binding)?);
            match b.literal() {
                Some(p) if p.fract() == 0.0 && p.abs() <= 64.0 => Node::PowI(base, p as i32),
                Some(p) => Node::PowF(base, p),
                None => Node::Bin(BinOp::Pow, base, Box::new(lower(b, binding)?)),
            }
        }
        Ast::Binary(op, a, b) => {
            Node::Bin(*op, Box::new(lower(a, binding)?), Box::new(lower(b, binding)?))
        }
    })
}

impl Node {
    fn eval<S: Scalar>(&self, x: &[S]) -> S {
        match self {
            Node::Num(v) => S::from_f64(*v),
            Node::Slot(i) => x[*i],
            Node::Neg(a) => -a.eval(x),
            Node::Bin(op, a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.pow(b),
                }
            }
            Node::PowI(a, p) => a.eval(x).powi(*p),
            Node::PowF(a, p) => a.eval(x).powf(*p),
            Node::Call(f, a) => f.apply(a.eval(x)),
        }
    }

    /// Plain evaluation that stops at the first non-finite intermediate.
    fn eval_checked(&self, x: &[f64]) -> Result<f64> {
        let v = match self {
            Node::Num(v) => *v,
            Node::Slot(i) => x[*i],
            Node::Neg(a) => -a.eval_checked(x)?,
            Node::Bin(op, a, b) => {
                let (a, b) = (a.eval_checked(x)?, b.eval_checked(x)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.pow(b),
                }
            }
            Node::PowI(a, p) => a.eval_checked(x)?.powi(*p),
            Node::PowF(a, p) => a.eval_checked(x)?.powf(*p),
            Node::Call(f, a) => f.apply(a.eval_checked(x)?),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::EvaluationDomain(format!("{} produced {v}", self.describe())))
        }
    }

    fn describe(&self) -> String {
        match self {
            Node::Num(_) | Node::Slot(_) => "operand".into(),
            Node::Neg(_) => "negation".into(),
            Node::Bin(op, ..) => format!("operator {}", op.symbol()),
            Node::PowI(..) | Node::PowF(..) => "operator ^".into(),
            Node::Call(f, _) => format!("{}()", f.name()),
        }
    }
}

/// An expression with every variable resolved to a slot.
#[derive(Clone, Debug)]
pub struct Compiled {
    root: Node,
    arity: usize,
}

impl Compiled {
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn eval_checked(&self, args: &[f64]) -> Result<f64> {
        self.root.eval_checked(args)
    }
}

impl Generic for Compiled {
    fn eval<S: Scalar>(&self, x: &[S]) -> S {
        self.root.eval(x)
    }
}

/// Evaluates `ast` with its variables looked up in `args` through `binding`.
pub fn bind_eval(ast: &Ast, binding: &Binding, args: &[f64]) -> Result<f64> {
    let compiled = binding.compile(ast)?;
    if args.len() < compiled.arity {
        return Err(ExprError::EvaluationDomain(format!(
            "{} arguments supplied, binding needs {}",
            args.len(),
            compiled.arity
        )));
    }
    compiled.eval_checked(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_power_of_variable() {
        let ast = parse("qd^2").unwrap();
        assert_eq!(
            ast,
            Ast::Binary(BinOp::Pow, Box::new(Ast::Var("qd".into())), Box::new(Ast::Number(2.0)))
        );
    }

    #[test]
    fn pretty_print_round_trips() {
        let ast = parse("(qdd + qdd_tau)^2").unwrap();
        assert_eq!(ast.to_string(), "((qdd + qdd_tau) ^ 2)");
        assert_eq!(parse(&ast.to_string()).unwrap(), ast);
    }

    #[test]
    fn syntax_error_offsets() {
        match parse("q@2") {
            Err(ExprError::Syntax { position, .. }) => assert_eq!(position, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("2t"), Err(ExprError::Syntax { position: 1, .. })));
        assert!(matches!(parse("foo(1)"), Err(ExprError::Syntax { position: 0, .. })));
        assert!(matches!(parse(""), Err(ExprError::Syntax { position: 0, .. })));
        assert!(matches!(parse("(1"), Err(ExprError::Syntax { position: 2, .. })));
    }

    #[test]
    fn precedence_and_associativity() {
        let b = Binding::time_only();
        let eval = |s: &str| bind_eval(&parse(s).unwrap(), &b, &[0.0]).unwrap();
        assert_eq!(eval("2^3^2"), 512.0);
        assert_eq!(eval("-2^2"), -4.0);
        assert_eq!(eval("2^-1"), 0.5);
        assert_eq!(eval("1 - 2 - 3"), -4.0);
        assert_eq!(eval("8 / 2 / 2"), 2.0);
        assert_eq!(eval("1 + 2 * 3"), 7.0);
        assert!((eval("cos(pi) + log(e)")).abs() < 1e-15);
        assert_eq!(eval("1.5e2"), 150.0);
    }

    #[test]
    fn variational_binding() {
        let b = Binding::variational(2, 1);
        let mut args = vec![0.0; 7];
        args[3] = -27.0;
        args[6] = 3.0;
        let v = bind_eval(&parse("(qdd + qdd_tau)^2").unwrap(), &b, &args).unwrap();
        assert!((v - 576.0).abs() < 1e-12);
        assert_eq!(b.resolve("d2q0_tau").unwrap(), 6);
        assert_eq!(b.resolve("qd").unwrap(), 2);
        assert!(matches!(
            bind_eval(&parse("d3q0").unwrap(), &b, &args),
            Err(ExprError::DerivativeOrderTooHigh { order: 3, max: 2, .. })
        ));
        assert!(matches!(b.resolve("x"), Err(ExprError::UnknownVariable(_))));
        let b = Binding::variational(1, 2);
        assert_eq!(b.resolve("d1q1").unwrap(), 4);
        assert!(b.resolve("q").is_err());
    }

    #[test]
    fn control_and_generator_bindings() {
        let b = Binding::control(1, 1);
        assert_eq!(b.resolve("u").unwrap(), 2);
        assert_eq!(b.resolve("q_tau").unwrap(), 3);
        assert_eq!(b.resolve("u_tau").unwrap(), 4);
        let b = Binding::control(2, 1);
        assert_eq!(b.resolve("q1_tau").unwrap(), 5);
        assert!(b.resolve("q").is_err());
        let g = Binding::generator(1);
        assert_eq!(g.resolve("q").unwrap(), 1);
    }

    #[test]
    fn domain_errors() {
        let b = Binding::time_only();
        for text in ["log(-1)", "1/0", "sqrt(0 - 1)"] {
            assert!(matches!(
                bind_eval(&parse(text).unwrap(), &b, &[0.0]),
                Err(ExprError::EvaluationDomain(_))
            ));
        }
    }

    #[test]
    fn compiled_integrand_differentiates() {
        let f = Binding::variational(1, 1).integrand("qd^2 + sin(t)").unwrap();
        let g = crate::calculus::partial(&f, crate::problem::ArgLayout::new(1, 1), 3, &[0.0, 0.0, 3.0, 0.0, 0.0])
            .unwrap();
        assert_eq!(g, vec![6.0]);
    }
}
