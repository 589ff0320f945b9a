use crate::dubois_reymond::{cdur_residual, dr_quantity, dr_residual};
use crate::error::{Error, Result};
use crate::euler_lagrange::{classify, el_residual, Classification, Regime};
use crate::problem::{constraint_defect, AugmentedSetup, IsoperimetricProblem};
use crate::report::ResidualReport;
use crate::trajectory::{Grid, Trajectory};

/// Default number of grid points.
pub const VERIFY_POINTS: usize = 200;

/// [`verify_on`] with the default grid size.
pub fn verify(problem: &IsoperimetricProblem, traj: &Trajectory, lambda: &[f64], tol: f64) -> Result<ResidualReport> {
    verify_on(problem, traj, lambda, tol, VERIFY_POINTS)
}

/// Residuals of the necessary conditions on a `points`-sample grid that keeps
/// clear of the regime switch and the trajectory's rough knots.
pub fn verify_on(
    problem: &IsoperimetricProblem,
    traj: &Trajectory,
    lambda: &[f64],
    tol: f64,
    points: usize,
) -> Result<ResidualReport> {
    problem.validate()?;
    problem.check_cover(traj)?;
    if points == 0 {
        return Err(Error::EmptyGrid);
    }
    let setup = AugmentedSetup::new(problem.clone(), lambda.to_vec())?;
    let grid = Grid::regime_respecting(traj, problem.t1, problem.t2, problem.tau, points, 2 * problem.m)?;
    let switch = problem.switch_time();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut report = ResidualReport {
        grid: grid.times.clone(),
        regimes: Vec::with_capacity(points),
        el: Vec::with_capacity(points),
        dr_quantity: Vec::with_capacity(points),
        dr_residual: Vec::with_capacity(points),
        cdur: Vec::with_capacity(points),
        el_sup_first: 0.0,
        el_sup_second: 0.0,
        dr_sup: 0.0,
        cdur_sup: 0.0,
        constraint_defect: Vec::new(),
        constraint_defect_sup: 0.0,
        hypothesis_violated: false,
        abnormal: None,
    };
    for &t in &grid.times {
        let regime = Regime::of(t, switch);
        let el = el_residual(&setup, traj, t)?;
        let size = norm(&el);
        match regime {
            Regime::First => report.el_sup_first = report.el_sup_first.max(size),
            Regime::Second => report.el_sup_second = report.el_sup_second.max(size),
        }
        let dr = dr_residual(&setup, traj, t, regime)?;
        report.dr_sup = report.dr_sup.max(dr.abs());
        let cdur = if t <= switch { Some(cdur_residual(&setup, traj, t)?) } else { None };
        if let Some(c) = cdur {
            report.cdur_sup = report.cdur_sup.max(c.abs());
        }
        report.regimes.push(regime);
        report.el.push(el);
        report.dr_quantity.push(dr_quantity(&setup, traj, t, regime)?);
        report.dr_residual.push(dr);
        report.cdur.push(cdur);
    }
    report.constraint_defect = constraint_defect(problem, traj)?;
    report.constraint_defect_sup = norm(&report.constraint_defect);
    report.hypothesis_violated = report.cdur_sup > tol;
    if problem.k() > 0 {
        report.abnormal = Some(classify(problem, traj, None)? == Classification::Abnormal);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Binding;

    #[test]
    fn example1_report() {
        let b = Binding::variational(2, 1);
        let p = IsoperimetricProblem::new(2, 1, 1.0, 0.0, 2.0, b.integrand("(qdd + qdd_tau)^2").unwrap())
            .with_constraint(b.integrand("(qd + qd_tau)^2").unwrap(), 249.6)
            .with_history(crate::problem::History::new(vec![Binding::time_only().integrand("-t^4").unwrap()]));
        let r = verify(&p, &Trajectory::example1(), &[0.0], 1e-6).unwrap();
        assert_eq!(r.grid.len(), 200);
        assert!(r.el_sup() <= 1e-7);
        assert!(r.constraint_defect_sup <= 1e-6);
        assert!(r.hypothesis_violated && r.cdur_sup >= 500.0);
        assert_eq!(r.abnormal, Some(false));
        let csv = r.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 201);
        assert!(csv.starts_with("t,regime,el_0,dr_quantity,dr_residual,cdur\n"));
    }

    #[test]
    fn zero_path_has_zero_residual() {
        let b = Binding::variational(1, 1);
        let p = IsoperimetricProblem::new(1, 1, 0.5, 0.0, 1.0, b.integrand("qd^2").unwrap());
        let q = Trajectory::polynomial(-0.5, 1.0, 1, vec![vec![0.0]]).unwrap();
        let r = verify(&p, &q, &[], 1e-6).unwrap();
        assert_eq!(r.el_sup(), 0.0);
        assert!(!r.hypothesis_violated);
        assert_eq!(r.abnormal, None);
    }

    #[test]
    fn classical_oracle_solution() {
        let b = Binding::variational(1, 1);
        let p = IsoperimetricProblem::new(1, 1, 0.5, 0.0, 1.0, b.integrand("qd^2").unwrap())
            .with_constraint(b.integrand("q").unwrap(), 1.0 / 6.0)
            .with_history(crate::problem::History::new(vec![Binding::time_only().integrand("t*(1-t)").unwrap()]))
            .with_terminal(0, vec![0.0]);
        let q = Trajectory::polynomial(-0.5, 1.0, 1, vec![vec![0.0, 1.0, -1.0]]).unwrap();
        let r = verify(&p, &q, &[4.0], 1e-6).unwrap();
        assert!(r.el_sup() <= 1e-6 && r.dr_sup <= 1e-6 && r.cdur_sup <= 1e-6);
        assert!(r.constraint_defect_sup <= 1e-6);
        assert!(!r.hypothesis_violated);
        assert_eq!(r.abnormal, Some(false));
    }

    #[test]
    fn empty_grid_is_rejected() {
        let b = Binding::variational(1, 1);
        let p = IsoperimetricProblem::new(1, 1, 0.5, 0.0, 1.0, b.integrand("qd^2").unwrap());
        let q = Trajectory::polynomial(-0.5, 1.0, 1, vec![vec![0.0]]).unwrap();
        assert!(matches!(verify_on(&p, &q, &[], 1e-6, 0), Err(Error::EmptyGrid)));
    }
}
