//! Named worked examples and their verification suites.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::euler_lagrange::{classify, Classification, Regime};
use crate::expr::Binding;
use crate::noether::{constancy_report, noether_quantity, ConstancyReport};
use crate::optimal_control::{hamiltonian_noether_quantity, pmp_residuals, ControlGroup, PontryaginTriple};
use crate::problem::{
    functional_value, AugmentedSetup, ControlProblem, History, IsoperimetricProblem, TerminalPolicy,
    TransformationGroup,
};
use crate::solver::{solve_el, solve_pmp, verify, CollocationScheme, InitialGuess};
use crate::trajectory::{Grid, Trajectory, KNOT_EXCLUSION};

pub const NAMES: [&str; 4] = ["example1", "classical-iso", "autonomous-lq", "lq-terminal"];

/// Costate level on the second regime of `lq-terminal`; `p = P(1.5 − t)` before it.
pub const LQ_TERMINAL_COSTATE: f64 = -48.0 / 31.0;

pub enum Example {
    Variational {
        problem: IsoperimetricProblem,
        /// Known extremal, or `None` when it is obtained by solving.
        trajectory: Option<Trajectory>,
        lambda: Vec<f64>,
    },
    Control { problem: ControlProblem },
}

pub fn summary(name: &str) -> Option<&'static str> {
    Some(match name {
        "example1" => "second-order, tau = 1 on [0, 2]: L = (qdd + qdd_tau)^2, g = (qd + qd_tau)^2, piecewise quartic",
        "classical-iso" => "first-order, tau = 0.5 on [0, 1]: L = qd^2, g = q, l = 1/6, history t(1 - t), q(1) = 0",
        "autonomous-lq" => "control, tau = 0.5 on [0, 1]: L = u^2, q' = q_tau + u, zero history, p(1) = 0",
        "lq-terminal" => "control, tau = 0.5 on [0, 1]: L = u^2, q' = q_tau + u, zero history, q(1) = 1",
        _ => return None,
    })
}

fn expr(binding: &Binding, text: &str) -> crate::problem::Integrand {
    binding.integrand(text).expect("registry expressions parse")
}

pub fn example1_problem() -> IsoperimetricProblem {
    let b = Binding::variational(2, 1);
    IsoperimetricProblem::new(2, 1, 1.0, 0.0, 2.0, expr(&b, "(qdd + qdd_tau)^2"))
        .with_constraint(expr(&b, "(qd + qd_tau)^2"), 249.6)
        .with_history(History::new(vec![expr(&Binding::time_only(), "-t^4")]))
        .with_terminal(0, vec![-14.0])
        .with_terminal(1, vec![-32.0])
}

pub fn classical_problem() -> IsoperimetricProblem {
    let b = Binding::variational(1, 1);
    IsoperimetricProblem::new(1, 1, 0.5, 0.0, 1.0, expr(&b, "qd^2"))
        .with_constraint(expr(&b, "q"), 1.0 / 6.0)
        .with_history(History::new(vec![expr(&Binding::time_only(), "t*(1 - t)")]))
        .with_terminal(0, vec![0.0])
}

pub fn delayed_lq(terminal: TerminalPolicy) -> ControlProblem {
    let b = Binding::control(1, 1);
    ControlProblem::new(1, 1, 0.5, (0.0, 1.0), expr(&b, "u^2"), vec![expr(&b, "q_tau + u")]).with_terminal(terminal)
}

pub fn example(name: &str) -> Result<Example> {
    Ok(match name {
        "example1" => Example::Variational {
            problem: example1_problem(),
            trajectory: Some(Trajectory::example1()),
            lambda: vec![0.0],
        },
        "classical-iso" => Example::Variational { problem: classical_problem(), trajectory: None, lambda: vec![4.0] },
        "autonomous-lq" => Example::Control { problem: delayed_lq(TerminalPolicy::CostateZero) },
        "lq-terminal" => Example::Control { problem: delayed_lq(TerminalPolicy::FixedState(vec![1.0])) },
        _ => return Err(Error::UnknownExample(name.to_string())),
    })
}

/// One line of a verification table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// Failing gated checks fail the suite; the others are reported only.
    pub gated: bool,
    pub passed: bool,
    pub note: String,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64, gated: bool) -> Check {
        Check { name: name.into(), value, threshold, gated, passed: value <= threshold, note: String::new() }
    }

    fn with_note(mut self, note: impl Into<String>) -> Check {
        self.note = note.into();
        self
    }
}

pub fn suite_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed || !c.gated)
}

/// Per-regime grids for constancy reports.
pub fn regime_grids(problem: &IsoperimetricProblem, traj: &Trajectory, points: usize) -> Result<Vec<(Option<Regime>, Vec<f64>)>> {
    let grid = Grid::regime_respecting(traj, problem.t1, problem.t2, problem.tau, points, 2 * problem.m)?;
    let (first, second) = grid.split_at(problem.switch_time());
    Ok(vec![(Some(Regime::First), first), (Some(Regime::Second), second)])
}

/// Constancy of the time-translation quantity `F − Σ ψ_j·q^(j)` per regime.
pub fn time_translation_constancy(setup: &AugmentedSetup, traj: &Trajectory, points: usize) -> Result<ConstancyReport> {
    let problem = setup.problem();
    let group = TransformationGroup::time_translation(problem.n);
    let grids = regime_grids(problem, traj, points)?;
    constancy_report(
        |t, regime| noether_quantity(setup, &group, traj, t, regime.unwrap_or(Regime::of(t, problem.switch_time()))),
        &grids,
    )
}

/// Sample grid for control problems, clear of `t1`, `t2 − τ` and `t2`.
pub fn control_grid(cp: &ControlProblem, points: usize) -> Result<Vec<f64>> {
    Ok(Grid::avoiding(cp.t1, cp.t2, points, KNOT_EXCLUSION, &[cp.t1, cp.switch_time(), cp.t2])?.times)
}

/// Constancy of `H` (time translation) over the whole window.
pub fn hamiltonian_constancy(cp: &ControlProblem, triple: &PontryaginTriple, lambda: &[f64], points: usize) -> Result<ConstancyReport> {
    let group = ControlGroup::time_translation(cp.n);
    constancy_report(
        |t, _| hamiltonian_noether_quantity(cp, &group, triple, lambda, t),
        &[(None, control_grid(cp, points)?)],
    )
}

pub fn pmp_residual_sup(cp: &ControlProblem, triple: &PontryaginTriple, lambda: &[f64], points: usize) -> Result<f64> {
    control_grid(cp, points)?
        .into_iter()
        .map(|t| pmp_residuals(cp, triple, lambda, t).map(|r| r.sup()))
        .try_fold(0.0, |acc: f64, r| r.map(|v| acc.max(v)))
}

/// Runs the named example's verification suite.
pub fn run_checks(name: &str, tol: f64) -> Result<Vec<Check>> {
    let points = crate::solver::VERIFY_POINTS;
    let mut checks = Vec::new();
    match (name, example(name)?) {
        ("example1", Example::Variational { problem, trajectory: Some(traj), lambda }) => {
            let report = verify(&problem, &traj, &lambda, tol)?;
            checks.push(Check::at_most("el residual sup", report.el_sup(), 1e-7, true));
            let end = |order| traj.eval(problem.t2, order).map(|v| v[0]);
            checks.push(Check::at_most("|q(2) + 14|", (end(0)? + 14.0).abs(), 1e-12, true));
            checks.push(Check::at_most("|qd(2) + 32|", (end(1)? + 32.0).abs(), 1e-12, true));
            let j = functional_value(&problem, &traj)?;
            checks.push(
                Check::at_most("|J - 672|", (j - 672.0).abs(), 1e-6, true).with_note(format!("J = {j}; 96 is not attainable")),
            );
            checks.push(
                Check::at_most("constraint defect", report.constraint_defect_sup, 1e-6, true)
                    .with_note("level l = 249.6; 9.6 is not attainable"),
            );
            let normal = classify(&problem, &traj, None)? == Classification::Normal;
            checks.push(Check {
                name: "classification".into(),
                value: if normal { 0.0 } else { 1.0 },
                threshold: 0.0,
                gated: true,
                passed: normal,
                note: "normal".into(),
            });
            let setup = AugmentedSetup::new(problem.clone(), lambda)?;
            let constancy = time_translation_constancy(&setup, &traj, points)?;
            checks.push(
                Check::at_most("dr constancy deviation", constancy.max_deviation(), tol, false)
                    .with_note(format!("hypothesis_violated = {}", report.hypothesis_violated)),
            );
            checks.push(
                Check::at_most("cdur residual sup", report.cdur_sup, tol, false)
                    .with_note(format!("hypothesis_violated = {}", report.hypothesis_violated)),
            );
        }
        ("classical-iso", Example::Variational { problem, lambda: expected, .. }) => {
            let sol = solve_el(&problem, &InitialGuess::default(), &CollocationScheme::default())?;
            checks.push(Check::at_most("|lambda - 4|", (sol.lambda[0] - expected[0]).abs(), 1e-5, true));
            let error = (0..=points)
                .map(|i| {
                    let t = i as f64 / points as f64;
                    sol.trajectory.eval(t, 0).map(|q| (q[0] - t * (1.0 - t)).abs())
                })
                .try_fold(0.0, |acc: f64, e| e.map(|v| acc.max(v)))?;
            checks.push(Check::at_most("sup |q - t(1 - t)|", error, 1e-5, true));
            let report = verify(&problem, &sol.trajectory, &sol.lambda, tol)?;
            checks.push(Check::at_most("el residual sup", report.el_sup(), tol, true));
            checks.push(Check::at_most("dr residual sup", report.dr_sup, 1e-6, true));
            let setup = AugmentedSetup::new(problem.clone(), sol.lambda.clone())?;
            let constancy = time_translation_constancy(&setup, &sol.trajectory, points)?;
            checks.push(Check::at_most("noether constancy deviation", constancy.max_deviation(), 1e-6, true));
        }
        ("autonomous-lq" | "lq-terminal", Example::Control { problem }) => {
            let sol = solve_pmp(&problem, &CollocationScheme::default())?;
            let residual = pmp_residual_sup(&problem, &sol.triple, &sol.lambda, points)?;
            checks.push(Check::at_most("pmp residual sup", residual, 1e-6, true));
            let oracle = |t: f64| {
                if name == "autonomous-lq" {
                    0.0
                } else if t >= problem.switch_time() {
                    LQ_TERMINAL_COSTATE
                } else {
                    LQ_TERMINAL_COSTATE * (1.5 - t)
                }
            };
            let costate_error = control_grid(&problem, points)?
                .into_iter()
                .map(|t| sol.triple.costate.eval(t, 0).map(|p| (p[0] - oracle(t)).abs()))
                .try_fold(0.0, |acc: f64, e| e.map(|v| acc.max(v)))?;
            checks.push(Check::at_most("costate vs method of steps", costate_error, 1e-6, true));
            let constancy = hamiltonian_constancy(&problem, &sol.triple, &sol.lambda, points)?;
            let gated = name == "autonomous-lq";
            let note = if gated { "" } else { "dH/dt = p q'(t - tau) on the second regime" };
            checks.push(Check::at_most("H constancy deviation", constancy.max_deviation(), 1e-5, gated).with_note(note));
        }
        _ => unreachable!("every registered name has a suite"),
    }
    Ok(checks)
}
