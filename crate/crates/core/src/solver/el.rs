//! Joint collocation solve for the trajectory and multipliers of a delayed
//! isoperimetric problem.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::newton::{newton, project, PieceInfo, System};
use super::{
    end_weight, fit_local, history_panel_count, history_panels, multistart_grid,
    trajectory_from, CollocationScheme, Mesh, SolveReport,
};
use crate::along::values;
use crate::calculus::gauss_legendre;
use crate::error::{Error, Result};
use crate::euler_lagrange::{alternating_jets, Regime};
use crate::problem::{AugmentedSetup, IsoperimetricProblem};
use crate::trajectory::{PolySegment, Side, Trajectory};

/// Starting point for [`solve_el`]; missing parts default to zero.
#[derive(Clone, Debug, Default)]
pub struct InitialGuess {
    pub trajectory: Option<Trajectory>,
    pub lambda: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElSolution {
    pub trajectory: Trajectory,
    pub lambda: Vec<f64>,
    pub report: SolveReport,
}

enum Kind {
    Collocation { t: f64, scale: f64 },
    /// Momentum continuity across a rough knot.
    Momenta { t: f64, left: Regime, right: Regime, scale: f64 },
    /// `ψ_{order+1}(t2) = 0` for a free terminal derivative.
    Natural { order: usize, scale: f64 },
    Constraint { a: f64, b: f64 },
}

struct ElSystem {
    setup: AugmentedSetup,
    mesh: Mesh,
    width: usize,
    history: usize,
    traj: Trajectory,
    x: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    rows: usize,
    infos: Vec<PieceInfo>,
    kinds: Vec<Kind>,
}

impl ElSystem {
    fn new(problem: &IsoperimetricProblem, scheme: &CollocationScheme) -> Result<Self> {
        let (n, m, k) = (problem.n, problem.m, problem.k());
        let (t1, t2, tau) = (problem.t1, problem.t2, problem.tau);
        let mesh = Mesh::new(t1, t2, tau, scheme.nodes);
        let segs = mesh.segments();
        let width = scheme.degree(m) + 1;
        let panels = history_panel_count(tau, &mesh);
        let mut segments = history_panels(&problem.history, t1 - tau, t1, panels, m)?;
        for s in 0..segs {
            segments.push(PolySegment::new(mesh.knots[s], mesh.knots[s + 1], vec![vec![0.0; width]; n])?);
        }
        let traj = trajectory_from(n, m, segments, false)?;
        let unknowns = segs * n * width + k;
        let col = |s: usize, c: usize, p: usize| (s * n + c) * width + p;

        // linear rows
        let mut lin: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
        let start = problem.history.jets(t1, m)?;
        let h0 = mesh.half(0);
        for r in 0..m {
            for c in 0..n {
                let entries = (0..width).map(|p| (col(0, c, p), end_weight(p, r, false))).collect();
                let value = start[c].derivative(r);
                lin.push((entries, value * h0.powi(r as i32)));
            }
        }
        for s in 1..segs {
            let orders = if mesh.rough[s] { m } else { 2 * m };
            let (hl, hr) = (mesh.half(s - 1), mesh.half(s));
            let hbar = 0.5 * (hl + hr);
            for r in 0..orders {
                let (wl, wr) = ((hbar / hl).powi(r as i32), (hbar / hr).powi(r as i32));
                for c in 0..n {
                    let mut entries: Vec<(usize, f64)> =
                        (0..width).map(|p| (col(s, c, p), end_weight(p, r, false) * wr)).collect();
                    entries.extend((0..width).map(|p| (col(s - 1, c, p), -end_weight(p, r, true) * wl)));
                    lin.push((entries, 0.0));
                }
            }
        }
        let last = segs - 1;
        let hl = mesh.half(last);
        for (r, value) in problem.terminal.iter().enumerate() {
            if let Some(v) = value {
                for c in 0..n {
                    let entries = (0..width).map(|p| (col(last, c, p), end_weight(p, r, true))).collect();
                    lin.push((entries, v[c] * hl.powi(r as i32)));
                }
            }
        }
        let mut a = DMatrix::zeros(lin.len(), unknowns);
        let mut b = DVector::zeros(lin.len());
        for (i, (entries, rhs)) in lin.iter().enumerate() {
            for &(j, v) in entries {
                a[(i, j)] += v;
            }
            b[i] = *rhs;
        }

        // nonlinear pieces
        let switch = problem.switch_time();
        let lambda_groups: Vec<usize> = (segs..segs + k).collect();
        let deps = |times: &[f64], with_lambda: bool| {
            let mut out = Vec::new();
            for &t in times {
                for side in [Side::Left, Side::Right] {
                    if let Some(s) = mesh.locate(t, side) {
                        out.push(s);
                    }
                }
            }
            if with_lambda {
                out.extend(&lambda_groups);
            }
            out.sort_unstable();
            out.dedup();
            out
        };
        let mut infos = Vec::new();
        let mut kinds = Vec::new();
        let mut row = lin.len();
        let (nodes, _) = gauss_legendre(scheme.collocation_points);
        for s in 0..segs {
            let (mid, half) = (mesh.mid(s), mesh.half(s));
            for x in &nodes {
                let t = mid + half * x;
                let mut times = vec![t, t - tau];
                if t < switch {
                    times.push(t + tau);
                }
                infos.push(PieceInfo { row, deps: deps(&times, k > 0) });
                kinds.push(Kind::Collocation { t, scale: half.powi(2 * m as i32) });
                row += n;
            }
        }
        for s in 1..segs {
            if !mesh.rough[s] {
                continue;
            }
            let t = mesh.knots[s];
            let left = Regime::of(t - 1e-9 * (1.0 + t.abs()), switch);
            let right = Regime::of(t, switch);
            let scale = 0.5 * (mesh.half(s - 1) + mesh.half(s));
            infos.push(PieceInfo { row, deps: deps(&[t, t - tau, t + tau], k > 0) });
            kinds.push(Kind::Momenta { t, left, right, scale });
            row += n * m;
        }
        for order in 0..m {
            if problem.terminal.get(order).is_some_and(Option::is_some) {
                continue;
            }
            infos.push(PieceInfo { row, deps: deps(&[t2, t2 - tau], k > 0) });
            kinds.push(Kind::Natural { order, scale: hl.powi((2 * m - order - 1) as i32) });
            row += n;
        }
        if k > 0 {
            let mut cuts = mesh.knots.clone();
            cuts.extend(mesh.knots.iter().map(|t| t + tau).filter(|t| *t < t2));
            cuts.sort_by(f64::total_cmp);
            cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + y.abs()));
            for w in cuts.windows(2) {
                let mid = 0.5 * (w[0] + w[1]);
                infos.push(PieceInfo { row, deps: deps(&[mid, mid - tau], false) });
                kinds.push(Kind::Constraint { a: w[0], b: w[1] });
            }
            row += k;
        }

        let setup = AugmentedSetup::new(problem.clone(), vec![0.0; k])?;
        Ok(ElSystem {
            setup,
            mesh,
            width,
            history: panels,
            traj,
            x: DVector::zeros(unknowns),
            a,
            b,
            rows: row,
            infos,
            kinds,
        })
    }

    fn problem(&self) -> &IsoperimetricProblem {
        self.setup.problem()
    }

    fn lambda_offset(&self) -> usize {
        self.mesh.segments() * self.problem().n * self.width
    }

    /// Unknown vector interpolating `guess` on every mesh segment.
    fn initial(&self, guess: &InitialGuess) -> Result<DVector<f64>> {
        let (n, k) = (self.problem().n, self.problem().k());
        let mut x = DVector::zeros(self.lambda_offset() + k);
        if let Some(traj) = &guess.trajectory {
            self.problem().check_cover(traj)?;
            for s in 0..self.mesh.segments() {
                for c in 0..n {
                    let local = fit_local(
                        |t| Ok(traj.eval_side(t, 0, Side::Right)?[c]),
                        self.mesh.knots[s],
                        self.mesh.knots[s + 1],
                        self.width,
                    )?;
                    let base = (s * n + c) * self.width;
                    x.rows_mut(base, self.width).copy_from_slice(&local);
                }
            }
        }
        if let Some(lambda) = &guess.lambda {
            if lambda.len() != k {
                return Err(Error::InvalidProblem(format!("{} multipliers given, problem has {k}", lambda.len())));
            }
            x.rows_mut(self.lambda_offset(), k).copy_from_slice(lambda);
        }
        project(self, &mut x);
        Ok(x)
    }

    fn solution(&self, report: SolveReport) -> Result<ElSolution> {
        let p = self.problem();
        let trajectory = trajectory_from(p.n, p.m, self.traj.segments().to_vec(), true)?;
        Ok(ElSolution { trajectory, lambda: self.setup.lambda().to_vec(), report })
    }

    fn momenta(&self, j: usize, t: f64, regime: Regime, side: Side) -> Result<Vec<f64>> {
        let along = self.problem().along(&self.traj).with_side(side);
        Ok(values(&alternating_jets(&self.setup, &along, j, t, regime, 1)?))
    }
}

impl System for ElSystem {
    fn unknowns(&self) -> usize {
        self.x.len()
    }

    fn groups(&self) -> usize {
        self.mesh.segments() + self.problem().k()
    }

    fn group_of(&self, index: usize) -> usize {
        let offset = self.lambda_offset();
        if index < offset {
            index / (self.problem().n * self.width)
        } else {
            self.mesh.segments() + index - offset
        }
    }

    fn linear(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.a, &self.b)
    }

    fn rows(&self) -> usize {
        self.rows
    }

    fn pieces(&self) -> &[PieceInfo] {
        &self.infos
    }

    fn load(&mut self, x: &DVector<f64>) {
        for i in 0..x.len() {
            if i < self.lambda_offset() {
                self.set(i, x[i]);
            }
        }
        self.x.copy_from(x);
        let offset = self.lambda_offset();
        let lambda: Vec<f64> = x.rows(offset, x.len() - offset).iter().copied().collect();
        if lambda.as_slice() != self.setup.lambda() {
            self.setup = self.setup.with_lambda(lambda).expect("multiplier count checked");
        }
    }

    fn set(&mut self, index: usize, value: f64) {
        self.x[index] = value;
        let offset = self.lambda_offset();
        if index >= offset {
            let mut lambda = self.setup.lambda().to_vec();
            lambda[index - offset] = value;
            self.setup = self.setup.with_lambda(lambda).expect("multiplier count checked");
            return;
        }
        let n = self.problem().n;
        let s = index / (n * self.width);
        let c = (index / self.width) % n;
        let p = index % self.width;
        let half = self.mesh.half(s);
        self.traj.segments_mut()[self.history + s].coeffs[c][p] = value / half.powi(p as i32);
    }

    fn eval_piece(&self, piece: usize) -> Result<Vec<f64>> {
        let problem = self.problem();
        match self.kinds[piece] {
            Kind::Collocation { t, scale } => {
                let regime = Regime::of(t, problem.switch_time());
                Ok(self.momenta(0, t, regime, Side::Right)?.iter().map(|v| v * scale).collect())
            }
            Kind::Momenta { t, left, right, scale } => {
                let mut out = Vec::with_capacity(problem.n * problem.m);
                for j in 1..=problem.m {
                    let w = scale.powi((2 * problem.m - j) as i32);
                    let l = self.momenta(j, t, left, Side::Left)?;
                    let r = self.momenta(j, t, right, Side::Right)?;
                    out.extend(l.iter().zip(&r).map(|(a, b)| (a - b) * w));
                }
                Ok(out)
            }
            Kind::Natural { order, scale } => Ok(self
                .momenta(order + 1, problem.t2, Regime::Second, Side::Left)?
                .iter()
                .map(|v| v * scale)
                .collect()),
            Kind::Constraint { a, b } => {
                let along = problem.along(&self.traj);
                let (nodes, weights) = gauss_legendre(crate::calculus::GAUSS_NODES);
                let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
                let mut out = vec![0.0; problem.k()];
                for (x, w) in nodes.iter().zip(&weights) {
                    let args = along.args(mid + half * x)?;
                    for (o, g) in out.iter_mut().zip(&problem.constraints) {
                        *o += w * half * g.eval(&args);
                    }
                }
                if a == problem.t1 {
                    for (o, l) in out.iter_mut().zip(&problem.levels) {
                        *o -= l;
                    }
                }
                Ok(out)
            }
        }
    }
}

/// One Newton run from `guess`; the solution is returned whether or not it converged.
pub fn solve_el_unchecked(
    problem: &IsoperimetricProblem,
    guess: &InitialGuess,
    scheme: &CollocationScheme,
) -> Result<ElSolution> {
    problem.validate()?;
    scheme.validate(problem.m)?;
    let mut sys = ElSystem::new(problem, scheme)?;
    let x0 = sys.initial(guess)?;
    let offset = sys.lambda_offset();
    let (_, report) = newton(&mut sys, x0, scheme, offset..offset + problem.k())?;
    sys.solution(report)
}

/// Solves the delayed Euler–Lagrange boundary-value problem jointly with the
/// isoperimetric constraints. Fails with [`Error::NonConvergence`] when neither
/// the given start nor the multiplier multi-start reaches the tolerance.
pub fn solve_el(problem: &IsoperimetricProblem, guess: &InitialGuess, scheme: &CollocationScheme) -> Result<ElSolution> {
    let first = solve_el_unchecked(problem, guess, scheme)?;
    if first.report.converged {
        return Ok(first);
    }
    if scheme.multistart {
        let tried = guess.lambda.clone().unwrap_or_else(|| vec![0.0; problem.k()]);
        for lambda in multistart_grid(problem.k()) {
            if lambda == tried {
                continue;
            }
            let start = InitialGuess { trajectory: guess.trajectory.clone(), lambda: Some(lambda) };
            if let Ok(sol) = solve_el_unchecked(problem, &start, scheme) {
                if sol.report.converged {
                    return Ok(sol);
                }
            }
        }
    }
    Err(Error::NonConvergence(Box::new(first.report)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Binding;
    use crate::problem::History;

    fn classical() -> IsoperimetricProblem {
        let b = Binding::variational(1, 1);
        IsoperimetricProblem::new(1, 1, 0.5, 0.0, 1.0, b.integrand("qd^2").unwrap())
            .with_constraint(b.integrand("q").unwrap(), 1.0 / 6.0)
            .with_history(History::new(vec![Binding::time_only().integrand("t*(1-t)").unwrap()]))
            .with_terminal(0, vec![0.0])
    }

    fn scheme(nodes: usize) -> CollocationScheme {
        CollocationScheme::default().with_nodes(nodes)
    }

    fn sup_error(traj: &Trajectory) -> f64 {
        (0..=200)
            .map(|i| {
                let t = i as f64 / 200.0;
                (traj.eval(t, 0).unwrap()[0] - t * (1.0 - t)).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn classical_isoperimetric_recovers_parabola() {
        let sol = solve_el(&classical(), &InitialGuess::default(), &scheme(16)).unwrap();
        assert!(sol.report.converged);
        assert!((sol.lambda[0] - 4.0).abs() < 1e-8, "{:?}", sol.lambda);
        assert!(sup_error(&sol.trajectory) < 1e-8);
    }

    #[test]
    fn starting_at_solution_needs_no_iterations() {
        let exact = Trajectory::polynomial(-0.5, 1.0, 1, vec![vec![0.0, 1.0, -1.0]]).unwrap();
        let guess = InitialGuess { trajectory: Some(exact), lambda: Some(vec![4.0]) };
        let sol = solve_el(&classical(), &guess, &scheme(8)).unwrap();
        assert!(sol.report.iterations <= 2);
        assert!((sol.lambda[0] - 4.0).abs() < 1e-8);
    }

    #[test]
    fn zero_iterations_is_nonconvergence() {
        let err = solve_el(&classical(), &InitialGuess::default(), &scheme(8).with_max_iterations(0)).unwrap_err();
        match err {
            Error::NonConvergence(r) => assert_eq!(r.iterations, 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn boundary_rows_hold_without_convergence() {
        let p = classical();
        let sol = solve_el_unchecked(&p, &InitialGuess::default(), &scheme(8).with_max_iterations(0)).unwrap();
        assert!(!sol.report.converged);
        assert!(sol.trajectory.eval(1.0, 0).unwrap()[0].abs() < 1e-10);
        assert!(sol.trajectory.eval(0.0, 0).unwrap()[0].abs() < 1e-10);
        assert!((sol.trajectory.eval(-0.25, 0).unwrap()[0] + 0.3125).abs() < 1e-10);
    }
}
