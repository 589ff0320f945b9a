//! Generalized momenta `ψ_j`, the auxiliary delay hypothesis and the
//! DuBois–Reymond quantity with its residual.

use crate::along::{dot, values, Along};
use crate::calculus::{Jet, Scalar as _};
use crate::error::{Error, Result};
use crate::euler_lagrange::{alternating_jets, check_window, Regime};
use crate::problem::AugmentedSetup;
use crate::trajectory::Trajectory;

fn check_j(setup: &AugmentedSetup, j: usize) -> Result<()> {
    let m = setup.problem().m;
    if j == 0 || j > m {
        return Err(Error::JOutOfRange { j, m });
    }
    Ok(())
}

/// `ψ_j(t)` in the given regime, `1 ≤ j ≤ m`.
pub fn psi(setup: &AugmentedSetup, traj: &Trajectory, j: usize, t: f64, regime: Regime) -> Result<Vec<f64>> {
    check_j(setup, j)?;
    let problem = setup.problem();
    check_window(problem, t)?;
    problem.check_cover(traj)?;
    let along = problem.along(traj);
    Ok(values(&alternating_jets(setup, &along, j, t, regime, 1)?))
}

/// `Σ_{j=0}^{m} ∂F/∂q^(j)(t−τ) evaluated at t+τ, dotted with q^(j+1)(t)`.
/// Zero wherever the delay hypothesis of the DuBois–Reymond and Noether results holds.
pub fn cdur_residual(setup: &AugmentedSetup, traj: &Trajectory, t: f64) -> Result<f64> {
    let problem = setup.problem();
    let (lo, hi) = (problem.t1 - problem.tau, problem.switch_time());
    if !(t >= lo && t <= hi) {
        return Err(Error::OutOfDomain { t, lo, hi });
    }
    problem.check_cover(traj)?;
    let along = problem.along(traj);
    let layout = problem.layout();
    let args = along.args(t + problem.tau)?;
    let mut acc = 0.0;
    for j in 0..=problem.m {
        let grad = crate::calculus::partial(setup.integrand(), layout, layout.delayed(j), &args)?;
        let rate = traj.eval_side(t, j + 1, along.side)?;
        acc += grad.iter().zip(&rate).map(|(a, b)| a * b).sum::<f64>();
    }
    Ok(acc)
}

/// All `ψ_1..ψ_m` expanded about `t` to `len` coefficients.
pub(crate) fn psi_jets(
    setup: &AugmentedSetup,
    along: &Along,
    t: f64,
    regime: Regime,
    len: usize,
) -> Result<Vec<Vec<Jet>>> {
    (1..=setup.problem().m)
        .map(|j| alternating_jets(setup, along, j, t, regime, len))
        .collect()
}

/// Expansion of `F − Σ_j ψ_j·q^(j)` about `t`.
pub(crate) fn dr_quantity_jet(
    setup: &AugmentedSetup,
    along: &Along,
    t: f64,
    regime: Regime,
    len: usize,
) -> Result<Jet> {
    let psis = psi_jets(setup, along, t, regime, len)?;
    let mut acc = along.value_jet(setup.integrand(), t, len)?;
    for (j, psi) in psis.iter().enumerate() {
        let rates = along.traj.state_jets(t, j + 1, len, along.side)?;
        acc = acc - dot(psi, &rates);
    }
    Ok(acc.truncate(len))
}

/// `F − Σ_{j=1}^{m} ψ_j·q^(j)` at `t`.
pub fn dr_quantity(setup: &AugmentedSetup, traj: &Trajectory, t: f64, regime: Regime) -> Result<f64> {
    let problem = setup.problem();
    check_window(problem, t)?;
    problem.check_cover(traj)?;
    let along = problem.along(traj);
    Ok(dr_quantity_jet(setup, &along, t, regime, 1)?.value())
}

/// `d/dt (F − Σ ψ_j·q^(j)) − ∂F/∂t` at `t`.
pub fn dr_residual(setup: &AugmentedSetup, traj: &Trajectory, t: f64, regime: Regime) -> Result<f64> {
    let problem = setup.problem();
    check_window(problem, t)?;
    problem.check_cover(traj)?;
    let along = problem.along(traj);
    let rate = dr_quantity_jet(setup, &along, t, regime, 2)?.derivative(1);
    let explicit = along.partial_jets(setup.integrand(), 1, t, 1)?[0].value();
    Ok(rate - explicit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::Scalar;
    use crate::problem::{Generic, Integrand, IsoperimetricProblem};

    struct Example;
    impl Generic for Example {
        fn eval<S: Scalar>(&self, x: &[S]) -> S {
            let s = x[3] + x[6];
            s * s
        }
    }

    fn example1() -> (AugmentedSetup, Trajectory) {
        let p = IsoperimetricProblem::new(2, 1, 1.0, 0.0, 2.0, Integrand::new(Example));
        (AugmentedSetup::new(p, vec![]).unwrap(), Trajectory::example1())
    }

    #[test]
    fn example1_psi_and_quantity() {
        let (s, q) = example1();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
        assert!(close(psi(&s, &q, 2, 1.5, Regime::Second).unwrap()[0], -48.0));
        assert!(close(psi(&s, &q, 1, 1.5, Regime::Second).unwrap()[0], 48.0));
        assert!(close(dr_quantity(&s, &q, 1.25, Regime::Second).unwrap(), 24.0));
        assert!(close(dr_quantity(&s, &q, 1.5, Regime::Second).unwrap(), -72.0));
        assert!(close(dr_residual(&s, &q, 1.5, Regime::Second).unwrap(), -576.0));
        assert!(close(cdur_residual(&s, &q, 0.5).unwrap(), -576.0));
        assert!(matches!(psi(&s, &q, 3, 1.5, Regime::Second), Err(Error::JOutOfRange { .. })));
        assert!(matches!(cdur_residual(&s, &q, 1.5), Err(Error::OutOfDomain { .. })));
    }

    struct Velocity;
    impl Generic for Velocity {
        fn eval<S: Scalar>(&self, x: &[S]) -> S {
            x[2] * x[2]
        }
    }

    #[test]
    fn classical_line() {
        let p = IsoperimetricProblem::new(1, 1, 0.5, 0.0, 1.0, Integrand::new(Velocity));
        let s = AugmentedSetup::new(p, vec![]).unwrap();
        let q = Trajectory::polynomial(-0.5, 1.0, 1, vec![vec![0.0, 1.0]]).unwrap();
        for (t, r) in [(0.2, Regime::First), (0.8, Regime::Second)] {
            assert_eq!(dr_quantity(&s, &q, t, r).unwrap(), -1.0);
            assert_eq!(dr_residual(&s, &q, t, r).unwrap(), 0.0);
        }
        assert_eq!(cdur_residual(&s, &q, 0.25).unwrap(), 0.0);
    }

    #[test]
    fn constant_integrand_has_no_momenta() {
        let p = IsoperimetricProblem::new(2, 1, 1.0, 0.0, 2.0, Integrand::constant(3.0));
        let s = AugmentedSetup::new(p, vec![]).unwrap();
        let q = Trajectory::example1();
        for j in 1..=2 {
            assert_eq!(psi(&s, &q, j, 0.5, Regime::First).unwrap(), vec![0.0]);
        }
    }
}
