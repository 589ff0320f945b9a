//! Collocation solvers for the delayed Euler–Lagrange and Pontryagin systems.

mod el;
mod newton;
mod pmp;
mod verify;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use el::{solve_el, solve_el_unchecked, ElSolution, InitialGuess};
pub use pmp::{solve_pmp, solve_pmp_unchecked, PmpSolution};
pub use verify::{verify, verify_on, VERIFY_POINTS};

use crate::error::{Error, Result};
use crate::problem::History;
use crate::trajectory::{PolySegment, Side, Trajectory};

/// Outcome of a Newton solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    /// Scaled residual ∞-norm at the returned iterate.
    pub final_residual: f64,
    pub lambda: Vec<f64>,
    /// 1-norm condition estimate of the last Jacobian.
    pub condition: f64,
}

/// Mesh, basis and Newton settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollocationScheme {
    /// Uniform intervals per regime before delay-propagated knots are added.
    pub nodes: usize,
    /// Gauss points per segment.
    pub collocation_points: usize,
    pub max_iterations: usize,
    /// Bound on the scaled residual ∞-norm.
    pub tolerance: f64,
    /// Smallest damping factor tried before giving up.
    pub min_step: f64,
    /// Retry from a grid of multipliers when the first start fails.
    pub multistart: bool,
}

impl Default for CollocationScheme {
    fn default() -> Self {
        CollocationScheme {
            nodes: 64,
            collocation_points: 3,
            max_iterations: 50,
            tolerance: 1e-10,
            min_step: 1e-6,
            multistart: true,
        }
    }
}

impl CollocationScheme {
    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    /// Piecewise degree for an equation of order `2m`.
    pub fn degree(&self, m: usize) -> usize {
        2 * m + self.collocation_points - 1
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.nodes < m + 2 {
            return Err(Error::InvalidProblem(format!("need at least {} nodes per regime, got {}", m + 2, self.nodes)));
        }
        if self.collocation_points == 0 {
            return Err(Error::InvalidProblem("need at least one collocation point".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidProblem(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if !(self.min_step > 0.0 && self.min_step <= 1.0) {
            return Err(Error::InvalidProblem(format!("min_step must lie in (0, 1], got {}", self.min_step)));
        }
        Ok(())
    }
}

/// Knots of `[t1, t2]`: uniform in each regime, plus the points `t1 + jτ` and
/// `t2 − jτ` where delayed or advanced terms can make the solution rough.
pub(crate) struct Mesh {
    pub knots: Vec<f64>,
    /// Per knot: `true` for the delay-propagated ones (the switch included).
    pub rough: Vec<bool>,
}

impl Mesh {
    pub fn new(t1: f64, t2: f64, tau: f64, per_regime: usize) -> Mesh {
        let switch = t2 - tau;
        let eps = 1e-12 * (1.0 + t1.abs().max(t2.abs()));
        let mut rough = Vec::new();
        let mut j = 1.0;
        while t1 + j * tau < t2 - eps {
            rough.push(t1 + j * tau);
            j += 1.0;
        }
        let mut j = 1.0;
        while t2 - j * tau > t1 + eps {
            rough.push(t2 - j * tau);
            j += 1.0;
        }
        let spacing = ((switch - t1) / per_regime as f64).min((t2 - switch) / per_regime as f64);
        let mut knots = vec![t1, t2];
        for (lo, hi) in [(t1, switch), (switch, t2)] {
            for i in 1..per_regime {
                let t = lo + (hi - lo) * i as f64 / per_regime as f64;
                if rough.iter().all(|r| (r - t).abs() > 0.25 * spacing) {
                    knots.push(t);
                }
            }
        }
        knots.extend(&rough);
        knots.sort_by(f64::total_cmp);
        knots.dedup_by(|a, b| (*a - *b).abs() <= eps);
        let flags = knots
            .iter()
            .map(|t| rough.iter().any(|r| (r - t).abs() <= eps) && *t > t1 + eps && *t < t2 - eps)
            .collect();
        Mesh { knots, rough: flags }
    }

    pub fn segments(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn half(&self, s: usize) -> f64 {
        0.5 * (self.knots[s + 1] - self.knots[s])
    }

    pub fn mid(&self, s: usize) -> f64 {
        0.5 * (self.knots[s + 1] + self.knots[s])
    }

    /// Segment evaluating `t` with the given one-sided convention, `None` outside.
    pub fn locate(&self, t: f64, side: Side) -> Option<usize> {
        let (lo, hi) = (self.knots[0], *self.knots.last().unwrap());
        if !(t >= lo && t <= hi) {
            return None;
        }
        let last = self.segments() - 1;
        Some(match side {
            Side::Right => self.knots.partition_point(|k| *k <= t).saturating_sub(1).min(last),
            Side::Left => self.knots.partition_point(|k| *k < t).saturating_sub(1).min(last),
        })
    }
}

/// `k!/(k−r)!`
pub(crate) fn falling(k: usize, r: usize) -> f64 {
    if r > k {
        return 0.0;
    }
    ((k - r + 1)..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// `dʳ/dxʳ xᵏ` at `x = ±1`.
pub(crate) fn end_weight(k: usize, r: usize, right: bool) -> f64 {
    if r > k {
        return 0.0;
    }
    let sign = if right || (k - r) % 2 == 0 { 1.0 } else { -1.0 };
    falling(k, r) * sign
}

/// Coefficients in `x = (t − mid)/half` to coefficients in `t − mid`.
pub(crate) fn to_segment(local: &[f64], half: f64) -> Vec<f64> {
    local.iter().enumerate().map(|(k, c)| c / half.powi(k as i32)).collect()
}

/// Local coefficients interpolating `f` at Chebyshev points of `[a, b]`.
pub(crate) fn fit_local<F: Fn(f64) -> Result<f64>>(f: F, a: f64, b: f64, width: usize) -> Result<Vec<f64>> {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let xs: Vec<f64> = (0..width)
        .map(|j| (std::f64::consts::PI * (j as f64 + 0.5) / width as f64).cos())
        .collect();
    let vander = DMatrix::from_fn(width, width, |i, k| xs[i].powi(k as i32));
    let rhs = DVector::from_iterator(width, xs.iter().map(|x| f(mid + half * x)).collect::<Result<Vec<_>>>()?);
    vander
        .lu()
        .solve(&rhs)
        .map(|c| c.iter().copied().collect())
        .ok_or_else(|| Error::InvalidProblem("interpolation matrix is singular".into()))
}

/// Panels on `[t1 − τ, t1]` reproducing `history` and its first `order`
/// derivatives at every panel end (Hermite, degree `2·order + 1`).
pub(crate) fn history_panels(history: &History, lo: f64, hi: f64, panels: usize, order: usize) -> Result<Vec<PolySegment>> {
    let width = 2 * order + 2;
    let mut basis = DMatrix::zeros(width, width);
    for r in 0..=order {
        for k in 0..width {
            basis[(r, k)] = end_weight(k, r, false);
            basis[(order + 1 + r, k)] = end_weight(k, r, true);
        }
    }
    let lu = basis.lu();
    let n = history.dim();
    let ends: Vec<f64> = (0..=panels).map(|i| lo + (hi - lo) * i as f64 / panels as f64).collect();
    let derivs = ends
        .iter()
        .map(|&t| (0..=order).map(|r| history.derivative(t, r)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(panels);
    for p in 0..panels {
        let (a, b) = (ends[p], ends[p + 1]);
        let half = 0.5 * (b - a);
        let mut coeffs = Vec::with_capacity(n);
        for c in 0..n {
            let rhs = DVector::from_fn(width, |i, _| {
                let (r, at) = if i <= order { (i, &derivs[p]) } else { (i - order - 1, &derivs[p + 1]) };
                at[r][c] * half.powi(r as i32)
            });
            let local = lu
                .solve(&rhs)
                .ok_or_else(|| Error::InvalidProblem("Hermite system is singular".into()))?;
            coeffs.push(to_segment(local.as_slice(), half));
        }
        out.push(PolySegment::new(a, b, coeffs)?);
    }
    Ok(out)
}

/// Number of history panels matching the mesh spacing.
pub(crate) fn history_panel_count(tau: f64, mesh: &Mesh) -> usize {
    let spacing = (mesh.knots.last().unwrap() - mesh.knots[0]) / mesh.segments() as f64;
    ((tau / spacing).ceil() as usize).max(4)
}

/// Grid of multiplier starts tried after the first start fails.
pub(crate) fn multistart_grid(k: usize) -> Vec<Vec<f64>> {
    const VALUES: [f64; 5] = [-10.0, -1.0, 0.0, 1.0, 10.0];
    if k == 0 || k > 3 {
        return Vec::new();
    }
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                VALUES.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    out
}

pub(crate) fn trajectory_from(n: usize, m: usize, segments: Vec<PolySegment>, checked: bool) -> Result<Trajectory> {
    if checked {
        Trajectory::new(n, m, segments, Vec::new())
    } else {
        Ok(Trajectory::new_unchecked(n, m, segments, Vec::new()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Binding;

    #[test]
    fn mesh_has_switch_and_propagated_knots() {
        let mesh = Mesh::new(0.0, 1.0, 0.3, 8);
        for t in [0.3, 0.6, 0.7, 0.4, 0.1, 0.9] {
            let i = mesh.knots.iter().position(|k| (k - t).abs() < 1e-12).expect("knot present");
            assert!(mesh.rough[i]);
        }
        assert!(!mesh.rough[0] && !mesh.rough[mesh.knots.len() - 1]);
        assert!(mesh.knots.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn locate_respects_sides() {
        let mesh = Mesh::new(0.0, 1.0, 0.5, 4);
        let i = mesh.knots.iter().position(|k| *k == 0.5).unwrap();
        assert_eq!(mesh.locate(0.5, Side::Right), Some(i));
        assert_eq!(mesh.locate(0.5, Side::Left), Some(i - 1));
        assert_eq!(mesh.locate(0.0, Side::Left), Some(0));
        assert_eq!(mesh.locate(1.0, Side::Right), Some(mesh.segments() - 1));
        assert_eq!(mesh.locate(1.5, Side::Right), None);
    }

    #[test]
    fn hermite_panels_reproduce_cubic() {
        let h = History::new(vec![Binding::time_only().integrand("t^3 - 2*t").unwrap()]);
        let segs = history_panels(&h, -1.0, 0.0, 3, 1).unwrap();
        let traj = Trajectory::new(1, 1, segs, vec![]).unwrap();
        for t in [-0.9, -0.5, -0.1] {
            assert!((traj.eval(t, 0).unwrap()[0] - (t * t * t - 2.0 * t)).abs() < 1e-13);
            assert!((traj.eval(t, 1).unwrap()[0] - (3.0 * t * t - 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn multistart_grid_size() {
        assert_eq!(multistart_grid(1).len(), 5);
        assert_eq!(multistart_grid(2).len(), 25);
        assert!(multistart_grid(0).is_empty());
    }

    #[test]
    fn scheme_validation() {
        assert!(CollocationScheme::default().validate(1).is_ok());
        assert!(CollocationScheme::default().with_nodes(2).validate(1).is_err());
        assert!(CollocationScheme::default().with_tolerance(0.0).validate(1).is_err());
    }
}
