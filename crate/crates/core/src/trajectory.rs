//! Piecewise-polynomial paths on `[t1 − τ, t2]`.

use serde::{Deserialize, Serialize};

use crate::calculus::Jet;
use crate::error::{Error, Result};

const CONTIGUITY_TOL: f64 = 1e-12;
const CONTINUITY_TOL: f64 = 1e-9;
/// Default half-width of the neighbourhoods residual grids keep clear of.
pub const KNOT_EXCLUSION: f64 = 1e-2;

/// Which one-sided limit to take when a time falls exactly on a knot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Side {
    Left,
    #[default]
    Right,
}

/// One polynomial piece. Coefficients are in powers of `(t − mid)`, one list per component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolySegment {
    pub a: f64,
    pub b: f64,
    pub coeffs: Vec<Vec<f64>>,
}

impl PolySegment {
    pub fn new(a: f64, b: f64, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        let seg = PolySegment { a, b, coeffs };
        seg.check()?;
        Ok(seg)
    }

    /// Builds a segment from coefficients in powers of `t` (about the origin).
    pub fn from_monomials(a: f64, b: f64, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        let mid = 0.5 * (a + b);
        let shifted = coeffs.iter().map(|c| taylor_shift(c, mid)).collect();
        PolySegment::new(a, b, shifted)
    }

    fn check(&self) -> Result<()> {
        if !(self.a < self.b) || !self.a.is_finite() || !self.b.is_finite() {
            return Err(Error::InvalidTrajectory(format!(
                "segment bounds must satisfy a < b, got [{}, {}]",
                self.a, self.b
            )));
        }
        let Some(first) = self.coeffs.first() else {
            return Err(Error::InvalidTrajectory("segment has no components".into()));
        };
        if first.is_empty() || self.coeffs.iter().any(|c| c.len() != first.len()) {
            return Err(Error::InvalidTrajectory(
                "component coefficient lists must be nonempty and of equal length".into(),
            ));
        }
        if self.coeffs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidTrajectory("non-finite coefficient".into()));
        }
        Ok(())
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn degree(&self) -> usize {
        self.coeffs[0].len() - 1
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// Taylor coefficients of component `comp` about time `s`.
    pub(crate) fn taylor_at(&self, comp: usize, s: f64) -> Vec<f64> {
        taylor_shift(&self.coeffs[comp], s - self.mid())
    }

    /// `order`-th derivative of component `comp` at `t`; zero beyond the degree.
    pub fn derivative(&self, comp: usize, t: f64, order: usize) -> f64 {
        let c = &self.coeffs[comp];
        if order >= c.len() {
            return 0.0;
        }
        let x = t - self.mid();
        let mut acc = 0.0;
        for k in (order..c.len()).rev() {
            acc = acc * x + c[k] * falling(k, order);
        }
        acc
    }
}

/// `k!/(k−r)!`
fn falling(k: usize, r: usize) -> f64 {
    ((k - r + 1)..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// Re-expands `Σ c_k x^k` in powers of `(x − x0)`.
fn taylor_shift(c: &[f64], x0: f64) -> Vec<f64> {
    let mut d = c.to_vec();
    let n = d.len();
    for i in 0..n {
        for k in (i..n - 1).rev() {
            d[k] += x0 * d[k + 1];
        }
    }
    d
}

/// Serialized form of a trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct TrajectoryRecord {
    n: usize,
    m: usize,
    segments: Vec<PolySegment>,
    #[serde(default)]
    nonsmooth_knots: Vec<f64>,
}

/// Piecewise-polynomial vector path with declared smoothness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrajectoryRecord", into = "TrajectoryRecord")]
pub struct Trajectory {
    n: usize,
    m: usize,
    segments: Vec<PolySegment>,
    nonsmooth_knots: Vec<f64>,
}

impl TryFrom<TrajectoryRecord> for Trajectory {
    type Error = Error;
    fn try_from(r: TrajectoryRecord) -> Result<Self> {
        Trajectory::new(r.n, r.m, r.segments, r.nonsmooth_knots)
    }
}

impl From<Trajectory> for TrajectoryRecord {
    fn from(t: Trajectory) -> Self {
        TrajectoryRecord {
            n: t.n,
            m: t.m,
            segments: t.segments,
            nonsmooth_knots: t.nonsmooth_knots,
        }
    }
}

impl Trajectory {
    /// Builds and validates a trajectory.
    pub fn new(
        n: usize,
        m: usize,
        segments: Vec<PolySegment>,
        nonsmooth_knots: Vec<f64>,
    ) -> Result<Self> {
        let traj = Trajectory::new_unchecked(n, m, segments, nonsmooth_knots);
        traj.validate()?;
        Ok(traj)
    }

    pub(crate) fn new_unchecked(
        n: usize,
        m: usize,
        segments: Vec<PolySegment>,
        mut nonsmooth_knots: Vec<f64>,
    ) -> Self {
        nonsmooth_knots.sort_by(|a, b| a.total_cmp(b));
        nonsmooth_knots.dedup();
        Trajectory { n, m, segments, nonsmooth_knots }
    }

    /// Checks segment shape, contiguity and continuity at knots. Smoothness 0
    /// allows jumps everywhere.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidTrajectory("n must be positive".into()));
        }
        if self.segments.is_empty() {
            return Err(Error::InvalidTrajectory("no segments".into()));
        }
        for s in &self.segments {
            s.check()?;
            if s.dim() != self.n {
                return Err(Error::InvalidTrajectory(format!(
                    "segment on [{}, {}] has {} components, expected {}",
                    s.a,
                    s.b,
                    s.dim(),
                    self.n
                )));
            }
        }
        for w in self.segments.windows(2) {
            let (l, r) = (&w[0], &w[1]);
            if (l.b - r.a).abs() >= CONTIGUITY_TOL {
                return Err(Error::InvalidTrajectory(format!(
                    "segments [{}, {}] and [{}, {}] are not contiguous",
                    l.a, l.b, r.a, r.b
                )));
            }
            let knot = r.a;
            let orders = if self.is_declared_nonsmooth(knot) { self.m.min(1) } else { self.m };
            for comp in 0..self.n {
                for order in 0..orders {
                    let lv = l.derivative(comp, l.b, order);
                    let rv = r.derivative(comp, r.a, order);
                    if (lv - rv).abs() > CONTINUITY_TOL * (1.0 + lv.abs().max(rv.abs())) {
                        return Err(Error::InvalidTrajectory(format!(
                            "derivative {order} of component {comp} jumps at t = {knot} ({lv} vs {rv})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn is_declared_nonsmooth(&self, knot: f64) -> bool {
        self.nonsmooth_knots
            .iter()
            .any(|k| (k - knot).abs() < 1e-9 * (1.0 + knot.abs()))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn smoothness(&self) -> usize {
        self.m
    }

    pub fn segments(&self) -> &[PolySegment] {
        &self.segments
    }

    pub fn nonsmooth_knots(&self) -> &[f64] {
        &self.nonsmooth_knots
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.segments[0].a, self.segments[self.segments.len() - 1].b)
    }

    pub fn max_degree(&self) -> usize {
        self.segments.iter().map(PolySegment::degree).max().unwrap_or(0)
    }

    /// Sorted distinct segment boundaries, domain endpoints included.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.segments.iter().map(|s| s.a).collect();
        out.push(self.domain().1);
        out.dedup();
        out
    }

    /// Index of the segment that evaluates `t` under the given one-sided convention.
    pub(crate) fn locate(&self, t: f64, side: Side) -> Result<usize> {
        let (lo, hi) = self.domain();
        if !(t >= lo && t <= hi) {
            return Err(Error::OutOfDomain { t, lo, hi });
        }
        let last = self.segments.len() - 1;
        let idx = match side {
            Side::Right => {
                // last segment with a <= t
                let p = self.segments.partition_point(|s| s.a <= t);
                p.saturating_sub(1).min(last)
            }
            Side::Left => {
                // first segment with b >= t
                let p = self.segments.partition_point(|s| s.b < t);
                p.min(last)
            }
        };
        Ok(idx)
    }

    /// `order`-th derivative at `t` (right limit at knots, last segment at the end).
    pub fn eval(&self, t: f64, order: usize) -> Result<Vec<f64>> {
        let idx = self.locate(t, Side::Right)?;
        let seg = &self.segments[idx];
        if order > seg.degree() {
            return Err(Error::OrderTooHigh { order, degree: seg.degree() });
        }
        Ok((0..self.n).map(|c| seg.derivative(c, t, order)).collect())
    }

    /// `eval(t + shift, order)`.
    pub fn shifted_eval(&self, t: f64, order: usize, shift: f64) -> Result<Vec<f64>> {
        self.eval(t + shift, order)
    }

    /// Derivative of any order, zero beyond the active segment's degree.
    pub fn eval_side(&self, t: f64, order: usize, side: Side) -> Result<Vec<f64>> {
        let seg = &self.segments[self.locate(t, side)?];
        Ok((0..self.n).map(|c| seg.derivative(c, t, order)).collect())
    }

    /// Time expansions of `q^(deriv)` about `t`, `len` coefficients per component.
    pub fn state_jets(&self, t: f64, deriv: usize, len: usize, side: Side) -> Result<Vec<Jet>> {
        let seg = &self.segments[self.locate(t, side)?];
        Ok((0..self.n)
            .map(|c| {
                let d = seg.taylor_at(c, t);
                let coeffs: Vec<f64> = (0..len)
                    .map(|r| {
                        let k = deriv + r;
                        if k < d.len() {
                            d[k] * falling(k, deriv)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                Jet::from_coeffs(&coeffs)
            })
            .collect())
    }

    /// Interior knots where some derivative below `order` jumps, plus declared
    /// nonsmooth knots.
    pub fn rough_knots(&self, order: usize) -> Vec<f64> {
        let mut out = Vec::new();
        for w in self.segments.windows(2) {
            let (l, r) = (&w[0], &w[1]);
            let knot = r.a;
            let jumps = self.is_declared_nonsmooth(knot)
                || (0..self.n).any(|c| {
                    (0..order).any(|k| {
                        let lv = l.derivative(c, l.b, k);
                        let rv = r.derivative(c, r.a, k);
                        (lv - rv).abs() > 1e-6 * (1.0 + lv.abs().max(rv.abs()))
                    })
                });
            if jumps {
                out.push(knot);
            }
        }
        out
    }

    pub(crate) fn segments_mut(&mut self) -> &mut [PolySegment] {
        &mut self.segments
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// The worked second-order example: `−t⁴` on [−1,0], `t⁴` on [0,1], `−t⁴+2` on [1,2],
    /// smoothness order 2 with a declared corner at t = 1.
    pub fn example1() -> Self {
        let quartic = |sign: f64, c0: f64| vec![vec![c0, 0.0, 0.0, 0.0, sign]];
        let segments = vec![
            PolySegment::from_monomials(-1.0, 0.0, quartic(-1.0, 0.0)),
            PolySegment::from_monomials(0.0, 1.0, quartic(1.0, 0.0)),
            PolySegment::from_monomials(1.0, 2.0, quartic(-1.0, 2.0)),
        ]
        .into_iter()
        .collect::<Result<Vec<_>>>()
        .expect("static segments are well formed");
        Trajectory::new(1, 2, segments, vec![1.0]).expect("example trajectory is valid")
    }

    /// A single polynomial (monomial coefficients per component) on `[a, b]`.
    pub fn polynomial(a: f64, b: f64, m: usize, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        let n = coeffs.len();
        Trajectory::new(n, m, vec![PolySegment::from_monomials(a, b, coeffs)?], vec![])
    }
}

/// Ordered sample times kept clear of excluded points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub times: Vec<f64>,
    pub exclusion: f64,
}

impl Grid {
    /// `count` samples in `[lo, hi]`, at least `exclusion` away from every point in
    /// `excluded`, spread over the admissible sub-intervals in proportion to length.
    pub fn avoiding(lo: f64, hi: f64, count: usize, exclusion: f64, excluded: &[f64]) -> Result<Self> {
        if count == 0 || !(hi > lo) {
            return Err(Error::EmptyGrid);
        }
        let mut cuts: Vec<(f64, f64)> = excluded
            .iter()
            .map(|&x| (x - exclusion, x + exclusion))
            .collect();
        cuts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut pieces = Vec::new();
        let mut cursor = lo;
        for (a, b) in cuts {
            if a > cursor {
                pieces.push((cursor, a.min(hi)));
            }
            cursor = cursor.max(b);
            if cursor >= hi {
                break;
            }
        }
        if cursor < hi {
            pieces.push((cursor, hi));
        }
        pieces.retain(|(a, b)| b > a);
        let total: f64 = pieces.iter().map(|(a, b)| b - a).sum();
        if pieces.is_empty() || total <= 0.0 {
            return Err(Error::EmptyGrid);
        }
        // largest-remainder allocation of the sample budget
        let shares: Vec<f64> = pieces.iter().map(|(a, b)| (b - a) / total * count as f64).collect();
        let mut alloc: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
        let mut rest = count - alloc.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..pieces.len()).collect();
        order.sort_by(|&i, &j| {
            (shares[j] - shares[j].floor()).total_cmp(&(shares[i] - shares[i].floor()))
        });
        for &i in order.iter().cycle() {
            if rest == 0 {
                break;
            }
            alloc[i] += 1;
            rest -= 1;
        }
        let mut times = Vec::with_capacity(count);
        for ((a, b), k) in pieces.iter().zip(&alloc) {
            for i in 0..*k {
                times.push(a + (i as f64 + 0.5) * (b - a) / *k as f64);
            }
        }
        Ok(Grid { times, exclusion })
    }

    /// Residual grid on `[t1, t2]` avoiding the window ends, the regime switch
    /// `t2 − τ`, the start of the history, and the trajectory's rough knots.
    pub fn regime_respecting(
        traj: &Trajectory,
        t1: f64,
        t2: f64,
        tau: f64,
        count: usize,
        smooth_order: usize,
    ) -> Result<Self> {
        let mut excluded = vec![t1 - tau, t1, t2 - tau, t2];
        excluded.extend(traj.rough_knots(smooth_order));
        Grid::avoiding(t1, t2, count, KNOT_EXCLUSION, &excluded)
    }

    /// Splits the samples at `switch` into (before, at-or-after).
    pub fn split_at(&self, switch: f64) -> (Vec<f64>, Vec<f64>) {
        self.times.iter().partition(|&&t| t < switch)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}
