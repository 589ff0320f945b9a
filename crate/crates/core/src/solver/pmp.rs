//! Collocation solve of the delayed Pontryagin system for state, costate,
//! control and multipliers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::newton::{newton, project, PieceInfo, System};
use super::{
    end_weight, history_panel_count, history_panels, multistart_grid, trajectory_from, CollocationScheme, Mesh,
    SolveReport,
};
use crate::calculus::{gauss_legendre, GAUSS_NODES};
use crate::error::{Error, Result};
use crate::optimal_control::{control_args, control_args_side, pmp_residuals, stationarity, PontryaginTriple};
use crate::problem::ControlProblem;
use crate::trajectory::{PolySegment, Side};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmpSolution {
    pub triple: PontryaginTriple,
    pub lambda: Vec<f64>,
    pub report: SolveReport,
}

enum Kind {
    Collocation { t: f64, scale: f64 },
    /// Left-limit stationarity at a rough knot or at `t2`.
    Stationary { t: f64 },
    Constraint { a: f64, b: f64 },
}

/// Which of the three piecewise polynomials an unknown belongs to.
#[derive(Clone, Copy)]
enum Field {
    State,
    Costate,
    Control,
}

struct PmpSystem {
    cp: ControlProblem,
    mesh: Mesh,
    width: usize,
    history: usize,
    triple: PontryaginTriple,
    lambda: Vec<f64>,
    x: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    rows: usize,
    infos: Vec<PieceInfo>,
    kinds: Vec<Kind>,
}

impl PmpSystem {
    fn block(&self) -> usize {
        (2 * self.cp.n + self.cp.mc) * self.width
    }

    fn lambda_offset(&self) -> usize {
        self.mesh.segments() * self.block()
    }

    /// (segment, field, component, power) of a coefficient unknown.
    fn decode(&self, index: usize) -> (usize, Field, usize, usize) {
        let (n, w) = (self.cp.n, self.width);
        let s = index / self.block();
        let within = index % self.block();
        let (comp, p) = (within / w, within % w);
        if comp < n {
            (s, Field::State, comp, p)
        } else if comp < 2 * n {
            (s, Field::Costate, comp - n, p)
        } else {
            (s, Field::Control, comp - 2 * n, p)
        }
    }

    fn new(cp: &ControlProblem, scheme: &CollocationScheme) -> Result<Self> {
        let (n, mc, k) = (cp.n, cp.mc, cp.k());
        let (t1, t2, tau) = (cp.t1, cp.t2, cp.tau);
        let mesh = Mesh::new(t1, t2, tau, scheme.nodes);
        let segs = mesh.segments();
        let c = scheme.collocation_points;
        let width = c + 1;
        let block = (2 * n + mc) * width;
        let col = |s: usize, comp: usize, p: usize| s * block + comp * width + p;
        let panels = history_panel_count(tau, &mesh);
        let blank = |dim: usize| -> Result<Vec<PolySegment>> {
            (0..segs)
                .map(|s| PolySegment::new(mesh.knots[s], mesh.knots[s + 1], vec![vec![0.0; width]; dim]))
                .collect()
        };
        let mut state = history_panels(&cp.state_history, t1 - tau, t1, panels, 1)?;
        state.extend(blank(n)?);
        let mut control = history_panels(&cp.control_history, t1 - tau, t1, panels, 1)?;
        control.extend(blank(mc)?);
        let triple = PontryaginTriple {
            state: trajectory_from(n, 1, state, false)?,
            control: trajectory_from(mc, 0, control, false)?,
            costate: trajectory_from(n, 1, blank(n)?, false)?,
        };
        let unknowns = segs * block + k;

        let mut lin: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
        let start = cp.state_history.derivative(t1, 0)?;
        for i in 0..n {
            lin.push(((0..width).map(|p| (col(0, i, p), end_weight(p, 0, false))).collect(), start[i]));
        }
        for s in 1..segs {
            let comps = if mesh.rough[s] { 2 * n } else { 2 * n + mc };
            for comp in 0..comps {
                let mut entries: Vec<(usize, f64)> =
                    (0..width).map(|p| (col(s, comp, p), end_weight(p, 0, false))).collect();
                entries.extend((0..width).map(|p| (col(s - 1, comp, p), -end_weight(p, 0, true))));
                lin.push((entries, 0.0));
            }
        }
        let last = segs - 1;
        for (i, fixed) in cp.terminal.per_component(n).iter().enumerate() {
            let (comp, value) = match fixed {
                Some(v) => (i, *v),
                None => (n + i, 0.0),
            };
            lin.push(((0..width).map(|p| (col(last, comp, p), end_weight(p, 0, true))).collect(), value));
        }
        let mut a = DMatrix::zeros(lin.len(), unknowns);
        let mut b = DVector::zeros(lin.len());
        for (i, (entries, rhs)) in lin.iter().enumerate() {
            for &(j, v) in entries {
                a[(i, j)] += v;
            }
            b[i] = *rhs;
        }

        let switch = cp.switch_time();
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
        let equations = 2 * n + mc;
        let (nodes, _) = gauss_legendre(c);
        for s in 0..segs {
            let (mid, half) = (mesh.mid(s), mesh.half(s));
            for x in &nodes {
                let t = mid + half * x;
                let mut times = vec![t, t - tau];
                if t < switch {
                    times.push(t + tau);
                }
                infos.push(PieceInfo { row, deps: deps(&times, k > 0) });
                kinds.push(Kind::Collocation { t, scale: half });
                row += equations;
            }
        }
        let stationary = (1..segs).filter(|&s| mesh.rough[s]).map(|s| mesh.knots[s]).chain([t2]);
        for t in stationary.collect::<Vec<_>>() {
            infos.push(PieceInfo { row, deps: deps(&[t, t - tau, t + tau], k > 0) });
            kinds.push(Kind::Stationary { t });
            row += mc;
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

        Ok(PmpSystem {
            cp: cp.clone(),
            mesh,
            width,
            history: panels,
            triple,
            lambda: vec![0.0; k],
            x: DVector::zeros(unknowns),
            a,
            b,
            rows: row,
            infos,
            kinds,
        })
    }

    fn solution(&self, report: SolveReport) -> Result<PmpSolution> {
        let (n, mc) = (self.cp.n, self.cp.mc);
        let t = &self.triple;
        let triple = PontryaginTriple {
            state: trajectory_from(n, 1, t.state.segments().to_vec(), true)?,
            control: trajectory_from(mc, 0, t.control.segments().to_vec(), true)?,
            costate: trajectory_from(n, 1, t.costate.segments().to_vec(), true)?,
        };
        Ok(PmpSolution { triple, lambda: self.lambda.clone(), report })
    }
}

impl System for PmpSystem {
    fn unknowns(&self) -> usize {
        self.x.len()
    }

    fn groups(&self) -> usize {
        self.mesh.segments() + self.cp.k()
    }

    fn group_of(&self, index: usize) -> usize {
        let offset = self.lambda_offset();
        if index < offset {
            index / self.block()
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
            self.set(i, x[i]);
        }
    }

    fn set(&mut self, index: usize, value: f64) {
        self.x[index] = value;
        let offset = self.lambda_offset();
        if index >= offset {
            self.lambda[index - offset] = value;
            return;
        }
        let (s, field, comp, p) = self.decode(index);
        let coeff = value / self.mesh.half(s).powi(p as i32);
        let history = self.history;
        let seg = match field {
            Field::State => &mut self.triple.state.segments_mut()[history + s],
            Field::Control => &mut self.triple.control.segments_mut()[history + s],
            Field::Costate => &mut self.triple.costate.segments_mut()[s],
        };
        seg.coeffs[comp][p] = coeff;
    }

    fn eval_piece(&self, piece: usize) -> Result<Vec<f64>> {
        let cp = &self.cp;
        match self.kinds[piece] {
            Kind::Collocation { t, scale } => {
                let r = pmp_residuals(cp, &self.triple, &self.lambda, t)?;
                let mut out: Vec<f64> = r.state.iter().chain(&r.costate).map(|v| v * scale).collect();
                out.extend(r.stationarity);
                Ok(out)
            }
            Kind::Stationary { t } => {
                let now = control_args_side(cp, &self.triple, &self.lambda, t, Side::Left)?;
                let advanced = if t <= cp.switch_time() {
                    Some(control_args_side(cp, &self.triple, &self.lambda, t + cp.tau, Side::Left)?)
                } else {
                    None
                };
                stationarity(cp, &now, advanced.as_ref())
            }
            Kind::Constraint { a, b } => {
                let (nodes, weights) = gauss_legendre(GAUSS_NODES);
                let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
                let mut out = vec![0.0; cp.k()];
                for (x, w) in nodes.iter().zip(&weights) {
                    let args = control_args(cp, &self.triple, &self.lambda, mid + half * x)?.base();
                    for (o, g) in out.iter_mut().zip(&cp.constraints) {
                        *o += w * half * g.eval(&args);
                    }
                }
                if a == cp.t1 {
                    for (o, l) in out.iter_mut().zip(&cp.levels) {
                        *o -= l;
                    }
                }
                Ok(out)
            }
        }
    }
}

fn run(cp: &ControlProblem, lambda: &[f64], scheme: &CollocationScheme) -> Result<PmpSolution> {
    let mut sys = PmpSystem::new(cp, scheme)?;
    let mut x = DVector::zeros(sys.unknowns());
    let offset = sys.lambda_offset();
    x.rows_mut(offset, lambda.len()).copy_from_slice(lambda);
    project(&sys, &mut x);
    let (_, report) = newton(&mut sys, x, scheme, offset..offset + cp.k())?;
    sys.solution(report)
}

/// One Newton run from zero state, costate and control; returned whether or not it converged.
pub fn solve_pmp_unchecked(cp: &ControlProblem, scheme: &CollocationScheme) -> Result<PmpSolution> {
    cp.validate()?;
    scheme.validate(1)?;
    run(cp, &vec![0.0; cp.k()], scheme)
}

/// Solves the delayed Pontryagin system by collocation. The control may jump
/// at `t1` and at the delay-propagated knots, and is continuous elsewhere.
pub fn solve_pmp(cp: &ControlProblem, scheme: &CollocationScheme) -> Result<PmpSolution> {
    let first = solve_pmp_unchecked(cp, scheme)?;
    if first.report.converged {
        return Ok(first);
    }
    if scheme.multistart {
        for lambda in multistart_grid(cp.k()) {
            if lambda.iter().all(|l| *l == 0.0) {
                continue;
            }
            if let Ok(sol) = run(cp, &lambda, scheme) {
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
    use crate::optimal_control::{hamiltonian_noether_quantity, ControlGroup};
    use crate::problem::TerminalPolicy;

    fn lq(terminal: TerminalPolicy, delayed: bool) -> ControlProblem {
        let b = Binding::control(1, 1);
        let phi = if delayed { "q_tau + u" } else { "u" };
        ControlProblem::new(1, 1, 0.5, (0.0, 1.0), b.integrand("u^2").unwrap(), vec![b.integrand(phi).unwrap()])
            .with_terminal(terminal)
    }

    fn scheme() -> CollocationScheme {
        CollocationScheme::default().with_nodes(16)
    }

    #[test]
    fn classical_lq_has_constant_control() {
        let sol = solve_pmp(&lq(TerminalPolicy::FixedState(vec![1.0]), false), &scheme()).unwrap();
        for t in [0.1, 0.4, 0.9] {
            assert!((sol.triple.control.eval(t, 0).unwrap()[0] - 1.0).abs() < 1e-9);
            assert!((sol.triple.costate.eval(t, 0).unwrap()[0] + 2.0).abs() < 1e-9);
            assert!((sol.triple.state.eval(t, 0).unwrap()[0] - t).abs() < 1e-9);
        }
    }

    #[test]
    fn delayed_lq_matches_steps_oracle() {
        let cp = lq(TerminalPolicy::FixedState(vec![1.0]), true);
        let sol = solve_pmp(&cp, &scheme()).unwrap();
        // p = P on [0.5, 1] and p = P(1.5 − t) on [0, 0.5]; q(1) = 1 fixes P.
        let big_p = -1.548387096774194;
        for (t, want) in [(0.75, big_p), (0.25, big_p * 1.25), (0.0, big_p * 1.5)] {
            assert!((sol.triple.costate.eval(t, 0).unwrap()[0] - want).abs() < 1e-8, "t = {t}");
        }
        for i in 1..100 {
            let t = i as f64 / 100.0;
            assert!(pmp_residuals(&cp, &sol.triple, &[], t).unwrap().sup() < 1e-8);
        }
        let group = ControlGroup::time_translation(1);
        let h = |t| hamiltonian_noether_quantity(&cp, &group, &sol.triple, &[], t).unwrap();
        // energy is not conserved when the state delay is active in the second regime
        assert!((h(0.9) - h(0.6)).abs() > 1e-3);
    }

    #[test]
    fn zero_iterations_fail() {
        let cp = lq(TerminalPolicy::FixedState(vec![1.0]), false);
        let err = solve_pmp(&cp, &scheme().with_max_iterations(0)).unwrap_err();
        assert!(matches!(err, Error::NonConvergence(_)));
    }
}
