//! Delayed optimal control: Hamiltonian, Pontryagin residuals, Hamiltonian
//! Noether quantity, the second-order corollary and order reduction.

use serde::{Deserialize, Serialize};

use crate::calculus::{partial_over, Scalar as _};
use crate::error::{Error, Result};
use crate::euler_lagrange::{check_window, stacked_jets, Regime};
use crate::problem::{
    AugmentedSetup, ControlArgs, ControlProblem, Integrand, IsoperimetricProblem,
    TerminalPolicy,
};
use crate::trajectory::{Side, Trajectory};

/// State on `[t1 − τ, t2]`, control on `[t1 − τ, t2]` and costate on `[t1, t2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PontryaginTriple {
    pub state: Trajectory,
    pub control: Trajectory,
    pub costate: Trajectory,
}

/// Generators `η(t, q, u)` and `ξ(t, q, u)` over `[t, q, u]`.
#[derive(Clone, Debug)]
pub struct ControlGroup {
    pub eta: Integrand,
    pub xi: Vec<Integrand>,
}

impl ControlGroup {
    pub fn time_translation(n: usize) -> Self {
        ControlGroup { eta: Integrand::constant(1.0), xi: (0..n).map(|_| Integrand::zero()).collect() }
    }
}

/// `L − λ·g + p·φ`.
pub fn hamiltonian(cp: &ControlProblem, args: &ControlArgs) -> f64 {
    let base = args.base();
    let mut h = cp.lagrangian.eval(&base);
    for (l, g) in args.lambda.iter().zip(&cp.constraints) {
        h -= l * g.eval(&base);
    }
    for (p, phi) in args.p.iter().zip(&cp.dynamics) {
        h += p * phi.eval(&base);
    }
    h
}

/// Gradient of `H` in one of its seven blocks `t, q, u, q_τ, u_τ, p, λ`.
pub fn hamiltonian_partial(cp: &ControlProblem, block: usize, args: &ControlArgs) -> Result<Vec<f64>> {
    let layout = cp.layout();
    let range = layout.block_range(block, cp.k())?;
    let base = args.base();
    match block {
        6 => return Ok(cp.dynamics.iter().map(|phi| phi.eval(&base)).collect()),
        7 => return Ok(cp.constraints.iter().map(|g| -g.eval(&base)).collect()),
        _ => {}
    }
    let mut out = partial_over(&cp.lagrangian, block, range.clone(), &base);
    for (l, g) in args.lambda.iter().zip(&cp.constraints) {
        for (o, d) in out.iter_mut().zip(partial_over(g, block, range.clone(), &base)) {
            *o -= l * d;
        }
    }
    for (p, phi) in args.p.iter().zip(&cp.dynamics) {
        for (o, d) in out.iter_mut().zip(partial_over(phi, block, range.clone(), &base)) {
            *o += p * d;
        }
    }
    Ok(out)
}

/// Residuals of the delayed Pontryagin system at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmpResiduals {
    /// `q' − ∂H/∂p`
    pub state: Vec<f64>,
    /// `p' + ∂H/∂q`, plus `∂H/∂q_τ` at `t + τ` in the first regime.
    pub costate: Vec<f64>,
    /// `∂H/∂u`, plus `∂H/∂u_τ` at `t + τ` in the first regime.
    pub stationarity: Vec<f64>,
}

impl PmpResiduals {
    pub fn sup(&self) -> f64 {
        self.state
            .iter()
            .chain(&self.costate)
            .chain(&self.stationarity)
            .fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }
}

/// `[t, q, u, q_τ, u_τ, p, λ]` read off a triple at `t`.
pub fn control_args(cp: &ControlProblem, triple: &PontryaginTriple, lambda: &[f64], t: f64) -> Result<ControlArgs> {
    control_args_side(cp, triple, lambda, t, Side::Right)
}

pub(crate) fn control_args_side(
    cp: &ControlProblem,
    triple: &PontryaginTriple,
    lambda: &[f64],
    t: f64,
    side: Side,
) -> Result<ControlArgs> {
    Ok(ControlArgs {
        t,
        q: triple.state.eval_side(t, 0, side)?,
        u: triple.control.eval_side(t, 0, side)?,
        q_delayed: triple.state.eval_side(t - cp.tau, 0, side)?,
        u_delayed: triple.control.eval_side(t - cp.tau, 0, side)?,
        p: triple.costate.eval_side(t, 0, side)?,
        lambda: lambda.to_vec(),
    })
}

/// `∂H/∂u(now) + ∂H/∂u_τ(advanced)`; `advanced` is `None` in the second regime.
pub fn stationarity(cp: &ControlProblem, now: &ControlArgs, advanced: Option<&ControlArgs>) -> Result<Vec<f64>> {
    let mut out = hamiltonian_partial(cp, 3, now)?;
    if let Some(adv) = advanced {
        for (o, v) in out.iter_mut().zip(hamiltonian_partial(cp, 5, adv)?) {
            *o += v;
        }
    }
    Ok(out)
}

/// `∂H/∂q(now) + ∂H/∂q_τ(advanced)`.
pub fn costate_drive(cp: &ControlProblem, now: &ControlArgs, advanced: Option<&ControlArgs>) -> Result<Vec<f64>> {
    let mut out = hamiltonian_partial(cp, 2, now)?;
    if let Some(adv) = advanced {
        for (o, v) in out.iter_mut().zip(hamiltonian_partial(cp, 4, adv)?) {
            *o += v;
        }
    }
    Ok(out)
}

/// State, costate and stationarity residuals at `t ∈ [t1, t2]`.
pub fn pmp_residuals(cp: &ControlProblem, triple: &PontryaginTriple, lambda: &[f64], t: f64) -> Result<PmpResiduals> {
    if !(t >= cp.t1 && t <= cp.t2) {
        return Err(Error::OutOfDomain { t, lo: cp.t1, hi: cp.t2 });
    }
    let now = control_args(cp, triple, lambda, t)?;
    let advanced = if t < cp.switch_time() {
        Some(control_args(cp, triple, lambda, t + cp.tau)?)
    } else {
        None
    };
    let qdot = triple.state.eval_side(t, 1, Default::default())?;
    let pdot = triple.costate.eval_side(t, 1, Default::default())?;
    let velocity = hamiltonian_partial(cp, 6, &now)?;
    let state = qdot.iter().zip(&velocity).map(|(a, b)| a - b).collect();
    let drive = costate_drive(cp, &now, advanced.as_ref())?;
    let costate = pdot.iter().zip(&drive).map(|(a, b)| a + b).collect();
    let stationarity = stationarity(cp, &now, advanced.as_ref())?;
    Ok(PmpResiduals { state, costate, stationarity })
}

/// `−p·ξ + H·η` at `t`.
pub fn hamiltonian_noether_quantity(
    cp: &ControlProblem,
    group: &ControlGroup,
    triple: &PontryaginTriple,
    lambda: &[f64],
    t: f64,
) -> Result<f64> {
    if !(t >= cp.t1 && t <= cp.t2) {
        return Err(Error::OutOfDomain { t, lo: cp.t1, hi: cp.t2 });
    }
    let args = control_args(cp, triple, lambda, t)?;
    let mut point = vec![t];
    point.extend(&args.q);
    point.extend(&args.u);
    let h = hamiltonian(cp, &args);
    let flux: f64 = args.p.iter().zip(&group.xi).map(|(p, xi)| p * xi.eval(&point)).sum();
    Ok(-flux + h * group.eta.eval(&point))
}

/// The second-order quantity with constant time generator `eta` and space
/// generator values `xi0 = ξ`, `xi1 = ξ'` at `t`.
#[allow(clippy::too_many_arguments)]
pub fn second_order_noether_quantity(
    setup: &AugmentedSetup,
    traj: &Trajectory,
    t: f64,
    regime: Regime,
    eta: f64,
    xi0: &[f64],
    xi1: &[f64],
) -> Result<f64> {
    let problem = setup.problem();
    if problem.m != 2 {
        return Err(Error::WrongOrder { expected: 2, got: problem.m });
    }
    check_window(problem, t)?;
    problem.check_cover(traj)?;
    let along = problem.along(traj);
    let velocity_part = stacked_jets(setup, &along, 1, t, regime, 1)?;
    let accel_part = stacked_jets(setup, &along, 2, t, regime, 2)?;
    let args = along.args(t)?;
    let qd = traj.eval_side(t, 1, along.side)?;
    let qdd = traj.eval_side(t, 2, along.side)?;
    let mut c = setup.integrand().eval(&args) * eta;
    for i in 0..problem.n {
        let momentum0 = velocity_part[i].value() - accel_part[i].derivative(1);
        let momentum1 = accel_part[i].value();
        c += momentum0 * (xi0[i] - qd[i] * eta) + momentum1 * (xi1[i] - qdd[i] * eta);
    }
    Ok(c)
}

fn velocity_dynamics(offset: usize, n: usize) -> Vec<Integrand> {
    (0..n).map(|i| Integrand::slot(offset + i)).collect()
}

/// Second-order problem as a control problem with state `(q, q')` and control `u = q''`.
///
/// The control argument vector `[t, (q, q'), u, (q, q')_τ, u_τ]` coincides
/// slot for slot with the variational one, so integrands carry over unchanged.
pub fn reduce_to_control(problem: &IsoperimetricProblem) -> Result<ControlProblem> {
    if problem.m != 2 {
        return Err(Error::WrongOrder { expected: 2, got: problem.m });
    }
    let n = problem.n;
    let mut dynamics = velocity_dynamics(1 + n, n);
    dynamics.extend(velocity_dynamics(1 + 2 * n, n));
    let fixed = |order: usize| -> Vec<Option<f64>> {
        match problem.terminal.get(order).cloned().flatten() {
            Some(v) => v.into_iter().map(Some).collect(),
            None => vec![None; n],
        }
    };
    let mut terminal = fixed(0);
    terminal.extend(fixed(1));
    let mut cp = ControlProblem::new(
        2 * n,
        n,
        problem.tau,
        (problem.t1, problem.t2),
        problem.lagrangian.clone(),
        dynamics,
    )
    .with_history(problem.history.stacked(&problem.history.derived(1)), problem.history.derived(2))
    .with_terminal(TerminalPolicy::Mixed(terminal));
    for (g, &l) in problem.constraints.iter().zip(&problem.levels) {
        cp = cp.with_constraint(g.clone(), l);
    }
    Ok(cp)
}

/// First-order problem as a control problem with `q' = u`.
pub fn first_order_as_control(problem: &IsoperimetricProblem) -> Result<ControlProblem> {
    if problem.m != 1 {
        return Err(Error::WrongOrder { expected: 1, got: problem.m });
    }
    let n = problem.n;
    let terminal = match problem.terminal.first().cloned().flatten() {
        Some(v) => TerminalPolicy::FixedState(v),
        None => TerminalPolicy::CostateZero,
    };
    let mut cp = ControlProblem::new(
        n,
        n,
        problem.tau,
        (problem.t1, problem.t2),
        problem.lagrangian.clone(),
        velocity_dynamics(1 + n, n),
    )
    .with_history(problem.history.clone(), problem.history.derived(1))
    .with_terminal(terminal);
    for (g, &l) in problem.constraints.iter().zip(&problem.levels) {
        cp = cp.with_constraint(g.clone(), l);
    }
    Ok(cp)
}

/// Costate of the reduced problem implied by a variational trajectory:
/// `p = −(ψ_1, ψ_2)` for `m = 2`, `p = −ψ_1` for `m = 1`.
pub fn costate_from_momenta(setup: &AugmentedSetup, traj: &Trajectory, t: f64, regime: Regime) -> Result<Vec<f64>> {
    let problem = setup.problem();
    let mut out = Vec::with_capacity(problem.m * problem.n);
    for j in 1..=problem.m {
        out.extend(crate::dubois_reymond::psi(setup, traj, j, t, regime)?.into_iter().map(|v| -v));
    }
    Ok(out)
}
