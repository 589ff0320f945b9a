//! Problem records, the augmented Lagrangian and functional evaluation.

mod file;
mod integrand;

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use file::ProblemFile;
pub use integrand::{Generic, Integrand};

use crate::along::Along;
use crate::calculus::{check_jet_len, total_derivative, try_integrate, Jet, StencilConfig};
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Shape of the flat integrand argument `[t, q, q', …, q^(m), q(t−τ), …, q^(m)(t−τ)]`.
///
/// Blocks are numbered from 1: block 1 is `t`, blocks `2..=m+2` are the current
/// derivatives and blocks `m+3..=2m+3` the delayed ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgLayout {
    pub m: usize,
    pub n: usize,
}

impl ArgLayout {
    pub fn new(m: usize, n: usize) -> Self {
        ArgLayout { m, n }
    }

    pub fn len(&self) -> usize {
        1 + 2 * self.n * (self.m + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn blocks(&self) -> usize {
        2 * self.m + 3
    }

    /// Flat slots of a block.
    pub fn block_range(&self, block: usize) -> Result<Range<usize>> {
        if block == 0 || block > self.blocks() {
            return Err(Error::BlockOutOfRange { block, max: self.blocks() });
        }
        if block == 1 {
            return Ok(0..1);
        }
        let start = 1 + (block - 2) * self.n;
        Ok(start..start + self.n)
    }

    /// Block holding `q^(order)(t)`.
    pub fn current(&self, order: usize) -> usize {
        2 + order
    }

    /// Block holding `q^(order)(t − τ)`.
    pub fn delayed(&self, order: usize) -> usize {
        self.m + 3 + order
    }

    /// Flat slot of component `comp` in `q^(order)(t)`, or of the delayed copy.
    pub fn slot(&self, order: usize, comp: usize, delayed: bool) -> usize {
        let base = if delayed { 1 + (self.m + 1) * self.n } else { 1 };
        base + order * self.n + comp
    }
}

/// Prescribed path on `[t1 − τ, t1]`, one scalar function of `[t]` per component.
#[derive(Clone, Debug)]
pub struct History {
    components: Vec<Integrand>,
    /// Component `i` stands for this derivative of `components[i]`.
    offsets: Vec<usize>,
}

struct Zero;

impl Generic for Zero {
    fn eval<S: crate::calculus::Scalar>(&self, _: &[S]) -> S {
        S::from_f64(0.0)
    }
}

impl History {
    pub fn new(components: Vec<Integrand>) -> Self {
        let offsets = vec![0; components.len()];
        History { components, offsets }
    }

    pub fn zero(n: usize) -> Self {
        History::new((0..n).map(|_| Integrand::new(Zero)).collect())
    }

    /// Component-wise closure of time.
    pub fn from_fns<F>(fns: Vec<F>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        History::new(
            fns.into_iter()
                .map(|f| Integrand::from_fn(move |x: &[f64]| f(x[0])))
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// History of the `k`-th derivative.
    pub fn derived(&self, k: usize) -> History {
        History {
            components: self.components.clone(),
            offsets: self.offsets.iter().map(|o| o + k).collect(),
        }
    }

    /// Components of `self` followed by those of `other`.
    pub fn stacked(&self, other: &History) -> History {
        History {
            components: self.components.iter().chain(&other.components).cloned().collect(),
            offsets: self.offsets.iter().chain(&other.offsets).copied().collect(),
        }
    }

    /// Taylor expansions about `t` with `len` coefficients.
    pub fn jets(&self, t: f64, len: usize) -> Result<Vec<Jet>> {
        self.components
            .iter()
            .zip(&self.offsets)
            .map(|(c, &offset)| component_jet(c, offset, t, len))
            .collect()
    }

    /// `order`-th derivative at `t`.
    pub fn derivative(&self, t: f64, order: usize) -> Result<Vec<f64>> {
        Ok(self
            .jets(t, order + 1)?
            .iter()
            .map(|j| j.derivative(order))
            .collect())
    }
}

fn component_jet(c: &Integrand, offset: usize, t: f64, len: usize) -> Result<Jet> {
    let total = len + offset;
    if c.is_differentiable() {
        check_jet_len(total)?;
        let jet = c.eval_jet(&[Jet::variable(t, total)]).expect("differentiable history");
        return Ok(jet.differentiate_n(offset).truncate(len));
    }
    if total > 3 {
        return Err(Error::ExpansionTooDeep { order: total - 1, max: 2 });
    }
    let cfg = StencilConfig::new(1e-4 * (1.0 + t.abs()), vec![]);
    let derivs = (0..total)
        .map(|order| Ok(total_derivative(|s| Ok(vec![c.eval(&[s])]), t, order, &cfg)?[0]))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Jet::from_derivatives(&derivs).differentiate_n(offset).truncate(len))
}

/// Delayed isoperimetric problem of order `m` in `n` components.
#[derive(Clone, Debug)]
pub struct IsoperimetricProblem {
    pub m: usize,
    pub n: usize,
    pub tau: f64,
    pub t1: f64,
    pub t2: f64,
    pub lagrangian: Integrand,
    pub constraints: Vec<Integrand>,
    pub levels: Vec<f64>,
    pub history: History,
    /// `q^(i)(t2)` for `i = 0..m`; `None` leaves that derivative free.
    pub terminal: Vec<Option<Vec<f64>>>,
}

impl IsoperimetricProblem {
    /// Unconstrained problem with zero history and free terminal data.
    pub fn new(m: usize, n: usize, tau: f64, t1: f64, t2: f64, lagrangian: Integrand) -> Self {
        IsoperimetricProblem {
            m,
            n,
            tau,
            t1,
            t2,
            lagrangian,
            constraints: Vec::new(),
            levels: Vec::new(),
            history: History::zero(n),
            terminal: vec![None; m],
        }
    }

    pub fn with_constraint(mut self, g: Integrand, level: f64) -> Self {
        self.constraints.push(g);
        self.levels.push(level);
        self
    }

    pub fn with_history(mut self, history: History) -> Self {
        self.history = history;
        self
    }

    /// Fixes `q^(order)(t2)`.
    pub fn with_terminal(mut self, order: usize, value: Vec<f64>) -> Self {
        if order >= self.terminal.len() {
            self.terminal.resize(order + 1, None);
        }
        self.terminal[order] = Some(value);
        self
    }

    pub fn k(&self) -> usize {
        self.constraints.len()
    }

    pub fn layout(&self) -> ArgLayout {
        ArgLayout::new(self.m, self.n)
    }

    /// `t2 − τ`, where the second regime starts.
    pub fn switch_time(&self) -> f64 {
        self.t2 - self.tau
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProblem(msg));
        if self.m == 0 || self.n == 0 {
            return bad("m and n must be positive".into());
        }
        if !(self.tau > 0.0) || !(self.t1 < self.t2) || !(self.tau < self.t2 - self.t1) {
            return bad(format!(
                "need 0 < tau < t2 - t1, got tau = {}, [t1, t2] = [{}, {}]",
                self.tau, self.t1, self.t2
            ));
        }
        if self.constraints.len() != self.levels.len() {
            return bad(format!(
                "{} constraint integrands but {} levels",
                self.constraints.len(),
                self.levels.len()
            ));
        }
        if self.history.dim() != self.n {
            return bad(format!("history has {} components, expected {}", self.history.dim(), self.n));
        }
        if self.terminal.len() > self.m {
            return bad(format!("terminal data for {} orders, at most m = {}", self.terminal.len(), self.m));
        }
        if let Some(v) = self.terminal.iter().flatten().find(|v| v.len() != self.n) {
            return bad(format!("terminal value {v:?} has the wrong dimension"));
        }
        Ok(())
    }

    /// Fails unless `traj` has dimension `n` and covers `[t1 − τ, t2]`.
    pub(crate) fn check_cover(&self, traj: &Trajectory) -> Result<()> {
        if traj.dim() != self.n {
            return Err(Error::InvalidTrajectory(format!(
                "trajectory has {} components, problem has {}",
                traj.dim(),
                self.n
            )));
        }
        let (lo, hi) = traj.domain();
        let slack = 1e-12 * (1.0 + self.t2.abs());
        for t in [self.t1 - self.tau, self.t2] {
            if t < lo - slack || t > hi + slack {
                return Err(Error::OutOfDomain { t, lo, hi });
            }
        }
        Ok(())
    }

    /// Points where integrands along `traj` may lose smoothness inside `[t1, t2]`.
    pub(crate) fn quadrature_breaks(&self, traj: &Trajectory) -> Vec<f64> {
        let mut out = vec![self.switch_time()];
        for b in traj.breakpoints() {
            out.push(b);
            out.push(b + self.tau);
        }
        out
    }

    /// Stencil walls: regime switch, window ends and every (shifted) breakpoint.
    pub(crate) fn stencil_for(&self, traj: &Trajectory) -> StencilConfig {
        let mut bounds = vec![self.t1, self.switch_time(), self.t2];
        for b in traj.breakpoints() {
            bounds.extend([b - self.tau, b, b + self.tau]);
        }
        StencilConfig::for_window(self.t1, self.t2, bounds)
    }

    pub(crate) fn along<'a>(&self, traj: &'a Trajectory) -> Along<'a> {
        Along::new(traj, self.layout(), self.tau, self.stencil_for(traj))
    }

    fn integral_of(&self, f: &Integrand, traj: &Trajectory) -> Result<f64> {
        self.check_cover(traj)?;
        let along = self.along(traj);
        try_integrate(
            |t| Ok::<f64, Error>(f.eval(&along.args(t)?)),
            self.t1,
            self.t2,
            &self.quadrature_breaks(traj),
        )
    }
}

/// A problem together with its multipliers and the cached `F = L − λ·g`.
#[derive(Clone, Debug)]
pub struct AugmentedSetup {
    problem: IsoperimetricProblem,
    lambda: Vec<f64>,
    augmented: Integrand,
}

impl AugmentedSetup {
    pub fn new(problem: IsoperimetricProblem, lambda: Vec<f64>) -> Result<Self> {
        if lambda.len() != problem.k() {
            return Err(Error::InvalidProblem(format!(
                "{} multipliers for {} constraints",
                lambda.len(),
                problem.k()
            )));
        }
        let augmented = build_augmented(&problem, &lambda);
        Ok(AugmentedSetup { problem, lambda, augmented })
    }

    pub fn problem(&self) -> &IsoperimetricProblem {
        &self.problem
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// `F = L − λ·g`.
    pub fn integrand(&self) -> &Integrand {
        &self.augmented
    }

    pub fn with_lambda(&self, lambda: Vec<f64>) -> Result<Self> {
        AugmentedSetup::new(self.problem.clone(), lambda)
    }

    /// Same problem with `F` replaced by another integrand (used for `g`-equations).
    pub(crate) fn with_integrand(&self, f: Integrand) -> Self {
        AugmentedSetup { problem: self.problem.clone(), lambda: self.lambda.clone(), augmented: f }
    }
}

fn build_augmented(problem: &IsoperimetricProblem, lambda: &[f64]) -> Integrand {
    if lambda.iter().all(|&l| l == 0.0) {
        return problem.lagrangian.clone();
    }
    let mut terms = vec![(1.0, problem.lagrangian.clone())];
    terms.extend(lambda.iter().zip(&problem.constraints).map(|(&l, g)| (-l, g.clone())));
    Integrand::linear_combination(terms)
}

/// `F = L − λ·g` for the setup's multipliers.
pub fn augmented_integrand(setup: &AugmentedSetup) -> Integrand {
    setup.integrand().clone()
}

/// `∫_{t1}^{t2} L[q]_τ(t) dt`.
pub fn functional_value(problem: &IsoperimetricProblem, traj: &Trajectory) -> Result<f64> {
    problem.integral_of(&problem.lagrangian, traj)
}

/// `∫_{t1}^{t2} g_j[q]_τ(t) dt` for every constraint.
pub fn constraint_values(problem: &IsoperimetricProblem, traj: &Trajectory) -> Result<Vec<f64>> {
    problem
        .constraints
        .iter()
        .map(|g| problem.integral_of(g, traj))
        .collect()
}

/// Constraint values minus the prescribed levels.
pub fn constraint_defect(problem: &IsoperimetricProblem, traj: &Trajectory) -> Result<Vec<f64>> {
    Ok(constraint_values(problem, traj)?
        .into_iter()
        .zip(&problem.levels)
        .map(|(v, l)| v - l)
        .collect())
}

/// Symmetry generators `η(t, q)`, `ξ(t, q)` and gauge term `Φ[q]_τ`.
///
/// `eta` and each `xi` component take `[t, q_0, …, q_{n−1}]`; `gauge` takes the
/// full argument layout.
#[derive(Clone, Debug)]
pub struct TransformationGroup {
    pub eta: Integrand,
    pub xi: Vec<Integrand>,
    pub gauge: Integrand,
}

impl TransformationGroup {
    pub fn new(eta: Integrand, xi: Vec<Integrand>, gauge: Integrand) -> Self {
        TransformationGroup { eta, xi, gauge }
    }

    /// `η ≡ 1`, `ξ ≡ 0`, `Φ ≡ 0`.
    pub fn time_translation(n: usize) -> Self {
        TransformationGroup::new(
            Integrand::constant(1.0),
            (0..n).map(|_| Integrand::zero()).collect(),
            Integrand::zero(),
        )
    }

    /// `η ≡ 0`, `ξ ≡ 0`, `Φ ≡ 0`.
    pub fn identity(n: usize) -> Self {
        TransformationGroup::new(
            Integrand::zero(),
            (0..n).map(|_| Integrand::zero()).collect(),
            Integrand::zero(),
        )
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }
}

/// Shape of control integrand arguments `[t, q, u, q(t−τ), u(t−τ)]`, optionally
/// followed by `p` and `λ` for the Hamiltonian.
///
/// Hamiltonian blocks are numbered 1..=7 as `t, q, u, q_τ, u_τ, p, λ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlLayout {
    pub n: usize,
    pub mc: usize,
}

impl ControlLayout {
    pub fn new(n: usize, mc: usize) -> Self {
        ControlLayout { n, mc }
    }

    /// Length without the costate and multiplier blocks.
    pub fn len(&self) -> usize {
        1 + 2 * (self.n + self.mc)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn hamiltonian_len(&self, k: usize) -> usize {
        self.len() + self.n + k
    }

    pub fn block_range(&self, block: usize, k: usize) -> Result<Range<usize>> {
        let (n, mc) = (self.n, self.mc);
        let widths = [1, n, mc, n, mc, n, k];
        if block == 0 || block > widths.len() {
            return Err(Error::BlockOutOfRange { block, max: widths.len() });
        }
        let start: usize = widths[..block - 1].iter().sum();
        Ok(start..start + widths[block - 1])
    }
}

/// Flat argument vector for Hamiltonian evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlArgs {
    pub t: f64,
    pub q: Vec<f64>,
    pub u: Vec<f64>,
    pub q_delayed: Vec<f64>,
    pub u_delayed: Vec<f64>,
    pub p: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl ControlArgs {
    /// `[t, q, u, q_τ, u_τ]`
    pub fn base(&self) -> Vec<f64> {
        let mut out = vec![self.t];
        out.extend(&self.q);
        out.extend(&self.u);
        out.extend(&self.q_delayed);
        out.extend(&self.u_delayed);
        out
    }

    /// `[t, q, u, q_τ, u_τ, p, λ]`
    pub fn flat(&self) -> Vec<f64> {
        let mut out = self.base();
        out.extend(&self.p);
        out.extend(&self.lambda);
        out
    }
}

/// What is imposed at `t2` for each state component.
#[derive(Clone, Debug, PartialEq)]
pub enum TerminalPolicy {
    FixedState(Vec<f64>),
    CostateZero,
    /// Per component: a fixed value, or `p_i(t2) = 0` when `None`.
    Mixed(Vec<Option<f64>>),
}

impl TerminalPolicy {
    pub fn per_component(&self, n: usize) -> Vec<Option<f64>> {
        match self {
            TerminalPolicy::FixedState(v) => v.iter().copied().map(Some).collect(),
            TerminalPolicy::CostateZero => vec![None; n],
            TerminalPolicy::Mixed(v) => v.clone(),
        }
    }
}

/// Delayed optimal-control problem `min ∫ L` subject to `q' = φ`.
#[derive(Clone, Debug)]
pub struct ControlProblem {
    pub n: usize,
    pub mc: usize,
    pub tau: f64,
    pub t1: f64,
    pub t2: f64,
    pub lagrangian: Integrand,
    /// `φ`, one integrand per state component.
    pub dynamics: Vec<Integrand>,
    pub constraints: Vec<Integrand>,
    pub levels: Vec<f64>,
    pub state_history: History,
    pub control_history: History,
    pub terminal: TerminalPolicy,
}

impl ControlProblem {
    pub fn new(
        n: usize,
        mc: usize,
        tau: f64,
        (t1, t2): (f64, f64),
        lagrangian: Integrand,
        dynamics: Vec<Integrand>,
    ) -> Self {
        ControlProblem {
            n,
            mc,
            tau,
            t1,
            t2,
            lagrangian,
            dynamics,
            constraints: Vec::new(),
            levels: Vec::new(),
            state_history: History::zero(n),
            control_history: History::zero(mc),
            terminal: TerminalPolicy::CostateZero,
        }
    }

    pub fn with_constraint(mut self, g: Integrand, level: f64) -> Self {
        self.constraints.push(g);
        self.levels.push(level);
        self
    }

    pub fn with_history(mut self, state: History, control: History) -> Self {
        self.state_history = state;
        self.control_history = control;
        self
    }

    pub fn with_terminal(mut self, policy: TerminalPolicy) -> Self {
        self.terminal = policy;
        self
    }

    pub fn k(&self) -> usize {
        self.constraints.len()
    }

    pub fn layout(&self) -> ControlLayout {
        ControlLayout::new(self.n, self.mc)
    }

    pub fn switch_time(&self) -> f64 {
        self.t2 - self.tau
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProblem(msg));
        if self.n == 0 {
            return bad("state dimension must be positive".into());
        }
        if !(self.tau > 0.0) || !(self.t1 < self.t2) || !(self.tau < self.t2 - self.t1) {
            return bad("need 0 < tau < t2 - t1".into());
        }
        if self.dynamics.len() != self.n {
            return bad(format!("{} dynamics components for n = {}", self.dynamics.len(), self.n));
        }
        if self.constraints.len() != self.levels.len() {
            return bad("constraint and level counts differ".into());
        }
        if self.state_history.dim() != self.n || self.control_history.dim() != self.mc {
            return bad("history dimensions do not match (n, mc)".into());
        }
        if self.terminal.per_component(self.n).len() != self.n {
            return bad("terminal policy has the wrong dimension".into());
        }
        Ok(())
    }
}
