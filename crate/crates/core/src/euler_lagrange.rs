//! Delayed Euler–Lagrange residuals in differential and integral form, and the
//! normal/abnormal classification.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::along::{add_into, values, Along};
use crate::calculus::{integrate, partial, Jet};
use crate::error::{Error, Result};
use crate::problem::{AugmentedSetup, IsoperimetricProblem};
use crate::trajectory::{Grid, Trajectory};

pub use crate::report::ResidualReport;

/// Which side of `t2 − τ` a time lies on. The switch itself belongs to `Second`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `t1 ≤ t < t2 − τ`, where advanced terms appear.
    First,
    /// `t2 − τ ≤ t ≤ t2`.
    Second,
}

impl Regime {
    pub fn of(t: f64, switch: f64) -> Regime {
        if t < switch {
            Regime::First
        } else {
            Regime::Second
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::First => "first",
            Regime::Second => "second",
        }
    }

    /// `[lo, hi]` of this regime within the problem window.
    pub fn interval(self, problem: &IsoperimetricProblem) -> (f64, f64) {
        match self {
            Regime::First => (problem.t1, problem.switch_time()),
            Regime::Second => (problem.switch_time(), problem.t2),
        }
    }
}

pub(crate) fn check_window(problem: &IsoperimetricProblem, t: f64) -> Result<()> {
    if !(t >= problem.t1 && t <= problem.t2) {
        return Err(Error::OutOfDomain { t, lo: problem.t1, hi: problem.t2 });
    }
    Ok(())
}

/// Time expansion of the stacked partial for derivative block `order`:
/// `∂F` in `q^(order)` at `t`, plus in the first regime the partial in the
/// delayed `q^(order)` evaluated at `t + τ`.
pub(crate) fn stacked_jets(
    setup: &AugmentedSetup,
    along: &Along,
    order: usize,
    t: f64,
    regime: Regime,
    len: usize,
) -> Result<Vec<Jet>> {
    let f = setup.integrand();
    let layout = along.layout;
    let mut out = along.partial_jets(f, layout.current(order), t, len)?;
    if regime == Regime::First {
        let advanced = along.partial_jets(f, layout.delayed(order), t + along.tau, len)?;
        add_into(&mut out, &advanced, 1.0);
    }
    Ok(out)
}

/// `Σ_{i=0}^{m−j} (−1)^i dⁱ/dtⁱ φ_{i+j}` expanded about `t` to `len` coefficients.
/// With `j = 0` this is the Euler–Lagrange expression; with `j ≥ 1` it is `ψ_j`.
pub(crate) fn alternating_jets(
    setup: &AugmentedSetup,
    along: &Along,
    j: usize,
    t: f64,
    regime: Regime,
    len: usize,
) -> Result<Vec<Jet>> {
    let m = setup.problem().m;
    let mut acc = vec![Jet::constant(0.0); setup.problem().n];
    for i in 0..=(m - j) {
        let phi = stacked_jets(setup, along, i + j, t, regime, len + i)?;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let derived: Vec<Jet> = phi.iter().map(|p| p.differentiate_n(i)).collect();
        add_into(&mut acc, &derived, sign);
    }
    Ok(acc)
}

/// Left-hand side of the differential Euler–Lagrange equation at `t`,
/// using the regime `t` falls in. Zero along extremals.
pub fn el_residual(setup: &AugmentedSetup, traj: &Trajectory, t: f64) -> Result<Vec<f64>> {
    let problem = setup.problem();
    check_window(problem, t)?;
    problem.check_cover(traj)?;
    let along = problem.along(traj);
    let regime = Regime::of(t, problem.switch_time());
    Ok(values(&alternating_jets(setup, &along, 0, t, regime, 1)?))
}

/// Sum of the magnitudes of the individual terms of [`el_residual`], a scale for tolerances.
pub(crate) fn el_term_scale(setup: &AugmentedSetup, traj: &Trajectory, t: f64) -> Result<f64> {
    let problem = setup.problem();
    let along = problem.along(traj);
    let regime = Regime::of(t, problem.switch_time());
    let mut scale = 0.0;
    for i in 0..=problem.m {
        let phi = stacked_jets(setup, &along, i, t, regime, 1 + i)?;
        scale += phi.iter().map(|p| p.derivative(i).powi(2)).sum::<f64>().sqrt();
    }
    Ok(scale)
}

fn stacked_value(
    setup: &AugmentedSetup,
    along: &Along,
    order: usize,
    s: f64,
    regime: Regime,
) -> Result<Vec<f64>> {
    let f = setup.integrand();
    let layout = along.layout;
    let mut out = partial(f, layout, layout.current(order), &along.args(s)?)?;
    if regime == Regime::First {
        let adv = partial(f, layout, layout.delayed(order), &along.args(s + along.tau)?)?;
        for (o, a) in out.iter_mut().zip(adv) {
            *o += a;
        }
    }
    Ok(out)
}

/// Integral form of the Euler–Lagrange equations at `t` in `regime`.
///
/// Term `i < m` is `(−1)^{m−i−1}` times the `(m−i)`-fold iterated integral of
/// the stacked partial from the regime's left end to `t`; the `i = m` term is
/// minus the bare stacked partial. Along extremals the result is a polynomial
/// of degree below `m`.
pub fn el_integral_lhs(
    setup: &AugmentedSetup,
    traj: &Trajectory,
    t: f64,
    regime: Regime,
) -> Result<Vec<f64>> {
    let problem = setup.problem();
    check_window(problem, t)?;
    problem.check_cover(traj)?;
    let along = problem.along(traj);
    let (m, n) = (problem.m, problem.n);
    let lower = regime.interval(problem).0;
    let mut breaks = problem.quadrature_breaks(traj);
    breaks.extend(traj.breakpoints().iter().map(|b| b - problem.tau));
    let (a, b) = if t >= lower { (lower, t) } else { (t, lower) };
    let orient = if t >= lower { 1.0 } else { -1.0 };

    let mut out = vec![0.0; n];
    for i in 0..m {
        let folds = m - i;
        let sign = if (m - i - 1) % 2 == 0 { 1.0 } else { -1.0 };
        let weight = |s: f64| (t - s).powi(folds as i32 - 1) / factorial(folds - 1);
        for (comp, o) in out.iter_mut().enumerate() {
            let mut failure = None;
            let v = integrate(
                |s| match stacked_value(setup, &along, i, s, regime) {
                    Ok(phi) => weight(s) * phi[comp],
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                },
                a,
                b,
                &breaks,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            *o += sign * orient * v;
        }
    }
    let top = stacked_value(setup, &along, m, t, regime)?;
    for (o, v) in out.iter_mut().zip(top) {
        *o -= v;
    }
    Ok(out)
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// Least-squares polynomial fit of degree `< m` to the integral form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialFit {
    /// Legendre coefficients on the regime interval, one list per component.
    pub coefficients: Vec<Vec<f64>>,
    /// Largest Euclidean norm of the fit residual over the samples.
    pub residual: f64,
}

/// Legendre polynomials `P_0..P_{degree}` at `x`.
pub(crate) fn legendre(x: f64, count: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(count);
    for k in 0..count {
        let v = match k {
            0 => 1.0,
            1 => x,
            _ => {
                let k = k as f64;
                ((2.0 * k - 1.0) * x * p[p.len() - 1] - (k - 1.0) * p[p.len() - 2]) / k
            }
        };
        p.push(v);
    }
    p
}

/// Fits a polynomial of degree `m − 1` to [`el_integral_lhs`] over `grid`.
pub fn el_integral_defect(
    setup: &AugmentedSetup,
    traj: &Trajectory,
    grid: &[f64],
    regime: Regime,
) -> Result<PolynomialFit> {
    let problem = setup.problem();
    let (m, n) = (problem.m, problem.n);
    if grid.len() < m + 1 {
        return Err(Error::DegenerateGrid { needed: m + 1, got: grid.len() });
    }
    let (a, b) = regime.interval(problem);
    let samples = grid
        .iter()
        .map(|&t| el_integral_lhs(setup, traj, t, regime))
        .collect::<Result<Vec<_>>>()?;
    let design = DMatrix::from_fn(grid.len(), m, |r, c| {
        legendre((2.0 * grid[r] - a - b) / (b - a), m)[c]
    });
    let svd = design.clone().svd(true, true);
    let mut coefficients = Vec::with_capacity(n);
    let mut misfit = vec![0.0; grid.len()];
    for comp in 0..n {
        let rhs = DVector::from_iterator(grid.len(), samples.iter().map(|s| s[comp]));
        let c = svd.solve(&rhs, 1e-14).expect("SVD with both factors");
        let fitted = &design * &c;
        for (r, mis) in misfit.iter_mut().enumerate() {
            *mis += (rhs[r] - fitted[r]).powi(2);
        }
        coefficients.push(c.iter().copied().collect());
    }
    let residual = misfit.into_iter().fold(0.0, |acc: f64, v| acc.max(v.sqrt()));
    Ok(PolynomialFit { coefficients, residual })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Normal,
    Abnormal,
}

/// Strength of the constraint Euler–Lagrange residual along a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResidual {
    /// Sup over the grid of `|EL_g|`; for several constraints, of the least
    /// residual unit-norm combination `Σ μ_j EL_{g_j}`.
    pub sup: f64,
    /// Sup of the summed term magnitudes, the scale for the default tolerance.
    pub scale: f64,
    pub combination: Vec<f64>,
}

/// Samples the constraint Euler–Lagrange residuals on a 100-point regime-respecting grid.
pub fn constraint_el_residual(problem: &IsoperimetricProblem, traj: &Trajectory) -> Result<ConstraintResidual> {
    let k = problem.k();
    if k == 0 {
        return Err(Error::NoConstraints);
    }
    let grid = Grid::regime_respecting(traj, problem.t1, problem.t2, problem.tau, 100, 2 * problem.m)?;
    let base = AugmentedSetup::new(problem.clone(), vec![0.0; k])?;
    let n = problem.n;
    let mut columns = DMatrix::zeros(grid.len() * n, k);
    let mut scale: f64 = 0.0;
    for (j, g) in problem.constraints.iter().enumerate() {
        let setup = base.with_integrand(g.clone());
        for (r, &t) in grid.times.iter().enumerate() {
            let res = el_residual(&setup, traj, t)?;
            for (c, v) in res.into_iter().enumerate() {
                columns[(r * n + c, j)] = v;
            }
            scale = scale.max(el_term_scale(&setup, traj, t)?);
        }
    }
    let combination: Vec<f64> = if k == 1 {
        vec![1.0]
    } else {
        let svd = columns.clone().svd(false, true);
        let vt = svd.v_t.expect("requested");
        let (idx, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, &s)| if s < best.1 { (i, s) } else { best });
        vt.row(idx).iter().copied().collect()
    };
    let mu = DVector::from_vec(combination.clone());
    let combined = &columns * mu;
    let sup = (0..grid.len())
        .map(|r| (0..n).map(|c| combined[r * n + c].powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    Ok(ConstraintResidual { sup, scale, combination })
}

/// Normal unless the constraint integrands themselves satisfy the
/// Euler–Lagrange equations along `traj` (up to `tol`, default
/// `1e−6·(1 + scale)`).
pub fn classify(problem: &IsoperimetricProblem, traj: &Trajectory, tol: Option<f64>) -> Result<Classification> {
    let r = constraint_el_residual(problem, traj)?;
    let tol = tol.unwrap_or(1e-6 * (1.0 + r.scale));
    Ok(if r.sup <= tol { Classification::Abnormal } else { Classification::Normal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Generic, Integrand};
    use crate::calculus::Scalar;

    struct Square(usize);
    impl Generic for Square {
        fn eval<S: Scalar>(&self, x: &[S]) -> S {
            x[self.0] * x[self.0]
        }
    }

    fn classical() -> (AugmentedSetup, Trajectory) {
        let p = IsoperimetricProblem::new(1, 1, 0.5, 0.0, 1.0, Integrand::new(Square(2)));
        let q = Trajectory::polynomial(-0.5, 1.0, 1, vec![vec![0.0, 1.0]]).unwrap();
        (AugmentedSetup::new(p, vec![]).unwrap(), q)
    }

    #[test]
    fn classical_line_is_extremal() {
        let (s, q) = classical();
        for t in [0.1, 0.3, 0.7, 0.9] {
            assert_eq!(el_residual(&s, &q, t).unwrap(), vec![0.0]);
        }
    }

    #[test]
    fn classical_integral_form_is_constant() {
        let (s, q) = classical();
        for t in [0.6, 0.8, 0.95] {
            let v = el_integral_lhs(&s, &q, t, Regime::Second).unwrap();
            assert!((v[0] + 2.0).abs() < 1e-12);
        }
        let fit = el_integral_defect(&s, &q, &[0.6, 0.7, 0.8], Regime::Second).unwrap();
        assert!((fit.coefficients[0][0] + 2.0).abs() < 1e-12);
        assert!(fit.residual <= 1e-9);
        assert!(matches!(
            el_integral_defect(&s, &q, &[0.6], Regime::Second),
            Err(Error::DegenerateGrid { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn zero_integrand_gives_zero() {
        let p = IsoperimetricProblem::new(2, 1, 1.0, 0.0, 2.0, Integrand::zero());
        let s = AugmentedSetup::new(p, vec![]).unwrap();
        let q = Trajectory::example1();
        assert_eq!(el_residual(&s, &q, 0.5).unwrap(), vec![0.0]);
        assert_eq!(el_integral_lhs(&s, &q, 1.5, Regime::Second).unwrap(), vec![0.0]);
        let fit = el_integral_defect(&s, &q, &[1.2, 1.4, 1.6], Regime::Second).unwrap();
        assert!(fit.coefficients[0].iter().all(|&c| c == 0.0));
    }

    #[test]
    fn regime_split() {
        assert_eq!(Regime::of(0.99, 1.0), Regime::First);
        assert_eq!(Regime::of(1.0, 1.0), Regime::Second);
    }

    #[test]
    fn no_constraints_cannot_be_classified() {
        let (s, q) = classical();
        assert!(matches!(classify(s.problem(), &q, None), Err(Error::NoConstraints)));
    }

    #[test]
    fn legendre_values() {
        let p = legendre(0.5, 4);
        assert_eq!(p[..3], [1.0, 0.5, -0.125]);
        assert!((p[3] + 0.4375).abs() < 1e-15);
    }
}
