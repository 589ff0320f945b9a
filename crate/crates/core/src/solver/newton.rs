//! Damped Newton iteration over a collocation system whose residual splits into
//! exact linear rows and nonlinear pieces with known unknown-group dependencies.

use nalgebra::{DMatrix, DVector};

use super::{CollocationScheme, SolveReport};
use crate::error::{Error, Result};

/// Largest acceptable 1-norm condition estimate.
pub(crate) const SINGULAR_CONDITION: f64 = 1e12;

pub(crate) struct PieceInfo {
    /// First residual row the piece adds into.
    pub row: usize,
    /// Unknown groups the piece depends on.
    pub deps: Vec<usize>,
}

pub(crate) trait System {
    fn unknowns(&self) -> usize;
    fn groups(&self) -> usize;
    fn group_of(&self, index: usize) -> usize;
    /// Linear rows `A x − b` occupying the first `A.nrows()` residual rows.
    fn linear(&self) -> (&DMatrix<f64>, &DVector<f64>);
    fn rows(&self) -> usize;
    fn pieces(&self) -> &[PieceInfo];
    /// Loads the full unknown vector.
    fn load(&mut self, x: &DVector<f64>);
    /// Sets one unknown without touching the others.
    fn set(&mut self, index: usize, value: f64);
    fn eval_piece(&self, piece: usize) -> Result<Vec<f64>>;
}

fn evaluate<S: System>(sys: &S) -> Result<(DVector<f64>, Vec<Vec<f64>>)> {
    let values = (0..sys.pieces().len())
        .map(|p| sys.eval_piece(p))
        .collect::<Result<Vec<_>>>()?;
    let mut nonlinear = DVector::zeros(sys.rows());
    for (info, v) in sys.pieces().iter().zip(&values) {
        for (i, x) in v.iter().enumerate() {
            nonlinear[info.row + i] += x;
        }
    }
    Ok((nonlinear, values))
}

fn residual<S: System>(sys: &S, x: &DVector<f64>) -> Result<(DVector<f64>, Vec<Vec<f64>>)> {
    let (mut r, values) = evaluate(sys)?;
    let (a, b) = sys.linear();
    let lin = a * x - b;
    for i in 0..lin.len() {
        r[i] += lin[i];
    }
    Ok((r, values))
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc: f64, x| if x.is_nan() { f64::INFINITY } else { acc.max(x.abs()) })
}

fn jacobian<S: System>(sys: &mut S, x: &DVector<f64>, base: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let (a, _) = sys.linear();
    let mut jac = DMatrix::zeros(sys.rows(), sys.unknowns());
    jac.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    let mut by_group: Vec<Vec<usize>> = vec![Vec::new(); sys.groups()];
    for (p, info) in sys.pieces().iter().enumerate() {
        for &g in &info.deps {
            by_group[g].push(p);
        }
    }
    for col in 0..sys.unknowns() {
        let affected = &by_group[sys.group_of(col)];
        if affected.is_empty() {
            continue;
        }
        let h = 1e-7 * (1.0 + x[col].abs());
        sys.set(col, x[col] + h);
        let step = (x[col] + h) - x[col];
        for &p in affected {
            let v = sys.eval_piece(p)?;
            let info = &sys.pieces()[p];
            for (i, (new, old)) in v.iter().zip(&base[p]).enumerate() {
                jac[(info.row + i, col)] += (new - old) / step;
            }
        }
        sys.set(col, x[col]);
    }
    Ok(jac)
}

/// Hager's estimate of `‖A‖₁‖A⁻¹‖₁`.
pub(crate) fn condition_estimate(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 1.0;
    }
    let lu = a.clone().lu();
    let lu_t = a.transpose().lu();
    let norm_a = (0..n).map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut estimate = 0.0;
    for _ in 0..5 {
        let Some(y) = lu.solve(&x) else { return f64::INFINITY };
        estimate = y.iter().map(|v| v.abs()).sum::<f64>();
        let signs = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let Some(z) = lu_t.solve(&signs) else { return f64::INFINITY };
        let (j, zmax) = z.iter().enumerate().fold((0, 0.0), |best, (i, v)| {
            if v.abs() > best.1 {
                (i, v.abs())
            } else {
                best
            }
        });
        if zmax <= z.dot(&x) {
            break;
        }
        x = DVector::zeros(n);
        x[j] = 1.0;
    }
    if !estimate.is_finite() {
        return f64::INFINITY;
    }
    norm_a * estimate
}

/// Least-norm correction making the linear rows hold exactly.
pub(crate) fn project<S: System>(sys: &S, x: &mut DVector<f64>) {
    let (a, b) = sys.linear();
    if a.nrows() == 0 {
        return;
    }
    let defect = a * &*x - b;
    let svd = a.clone().svd(true, true);
    if let Ok(dx) = svd.solve(&defect, 1e-13) {
        *x -= dx;
    }
}

/// Runs damped Newton from `x`. Returns the final iterate and its report; the
/// report's `converged` flag tells whether the tolerance was met.
pub(crate) fn newton<S: System>(
    sys: &mut S,
    mut x: DVector<f64>,
    scheme: &CollocationScheme,
    lambda_slots: std::ops::Range<usize>,
) -> Result<(DVector<f64>, SolveReport)> {
    if sys.rows() != sys.unknowns() {
        return Err(Error::InvalidProblem(format!(
            "collocation system has {} equations for {} unknowns",
            sys.rows(),
            sys.unknowns()
        )));
    }
    sys.load(&x);
    let (mut r, mut values) = residual(sys, &x)?;
    let mut norm = inf_norm(&r);
    let mut iterations = 0;
    let mut condition = f64::NAN;
    let report = |x: &DVector<f64>, converged, iterations, norm, condition| SolveReport {
        converged,
        iterations,
        final_residual: norm,
        lambda: lambda_slots.clone().map(|i| x[i]).collect(),
        condition,
    };
    while norm > scheme.tolerance && iterations < scheme.max_iterations {
        let jac = jacobian(sys, &x, &values)?;
        condition = condition_estimate(&jac);
        if condition > SINGULAR_CONDITION {
            return Err(Error::SingularJacobian { cond: condition });
        }
        let Some(step) = jac.lu().solve(&(-&r)) else {
            return Err(Error::SingularJacobian { cond: f64::INFINITY });
        };
        iterations += 1;
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha >= scheme.min_step {
            let trial = &x + &step * alpha;
            sys.load(&trial);
            if let Ok((tr, tv)) = residual(sys, &trial) {
                let tn = inf_norm(&tr);
                if tn < norm {
                    x = trial;
                    r = tr;
                    values = tv;
                    norm = tn;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            sys.load(&x);
            break;
        }
    }
    sys.load(&x);
    let converged = norm <= scheme.tolerance;
    Ok((x.clone(), report(&x, converged, iterations, norm, condition)))
}
