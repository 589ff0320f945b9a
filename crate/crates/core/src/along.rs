//! Evaluation of integrands and their partials along a trajectory, as plain
//! values or as Taylor expansions in time.

use crate::calculus::{check_jet_len, partial, total_derivative, Dual, Jet, Scalar, StencilConfig};
use crate::error::{Error, Result};
use crate::problem::{ArgLayout, Integrand};
use crate::trajectory::{Side, Trajectory};

pub(crate) struct Along<'a> {
    pub traj: &'a Trajectory,
    pub layout: ArgLayout,
    pub tau: f64,
    pub side: Side,
    /// Used only for integrands without forward-mode support.
    pub stencil: StencilConfig,
}

impl<'a> Along<'a> {
    pub fn new(traj: &'a Trajectory, layout: ArgLayout, tau: f64, stencil: StencilConfig) -> Self {
        Along { traj, layout, tau, side: Side::Right, stencil }
    }

    pub fn with_side(mut self, side: Side) -> Self {
        self.side = side;
        self
    }

    /// `[q]_τ(s)` as plain numbers.
    pub fn args(&self, s: f64) -> Result<Vec<f64>> {
        let m = self.layout.m;
        let mut out = Vec::with_capacity(self.layout.len());
        out.push(s);
        for at in [s, s - self.tau] {
            for d in 0..=m {
                out.extend(self.traj.eval_side(at, d, self.side)?);
            }
        }
        Ok(out)
    }

    /// `[q]_τ(s + dt)` expanded in `dt` with `len` coefficients.
    pub fn arg_jets(&self, s: f64, len: usize) -> Result<Vec<Jet>> {
        check_jet_len(len)?;
        let m = self.layout.m;
        let mut out = Vec::with_capacity(self.layout.len());
        out.push(Jet::variable(s, len));
        for at in [s, s - self.tau] {
            for d in 0..=m {
                out.extend(self.traj.state_jets(at, d, len, self.side)?);
            }
        }
        Ok(out)
    }

    /// Time expansion of `f([q]_τ(·))` about `s`.
    pub fn value_jet(&self, f: &Integrand, s: f64, len: usize) -> Result<Jet> {
        if f.is_differentiable() {
            let x = self.arg_jets(s, len)?;
            return Ok(f.eval_jet(&x).expect("differentiable integrand"));
        }
        self.stencil_jet(s, len, |u| Ok(f.eval(&self.args(u)?)))
    }

    /// Time expansions of the block partial `∂_block f([q]_τ(·))` about `s`.
    pub fn partial_jets(&self, f: &Integrand, block: usize, s: f64, len: usize) -> Result<Vec<Jet>> {
        let range = self.layout.block_range(block)?;
        if f.is_differentiable() && !f.has_analytic_partials() {
            let x = self.arg_jets(s, len)?;
            let mut duals: Vec<Dual<Jet>> = x.into_iter().map(Dual::constant).collect();
            let mut out = Vec::with_capacity(range.len());
            for slot in range {
                duals[slot].eps = Jet::constant(1.0);
                out.push(f.eval_dual_jet(&duals).expect("differentiable integrand").eps);
                duals[slot].eps = Jet::constant(0.0);
            }
            return Ok(out);
        }
        let width = range.len();
        let layout = self.layout;
        let per_time = |u: f64| -> Result<Vec<f64>> { partial(f, layout, block, &self.args(u)?) };
        self.stencil_jets(s, len, width, per_time)
    }

    /// Time expansion of a generator `g(t, q(t))`.
    pub fn generator_jet(&self, g: &Integrand, s: f64, len: usize) -> Result<Jet> {
        if g.is_differentiable() {
            check_jet_len(len)?;
            let mut x = vec![Jet::variable(s, len)];
            x.extend(self.traj.state_jets(s, 0, len, self.side)?);
            return Ok(g.eval_jet(&x).expect("differentiable generator"));
        }
        self.stencil_jet(s, len, |u| {
            let mut x = vec![u];
            x.extend(self.traj.eval_side(u, 0, self.side)?);
            Ok(g.eval(&x))
        })
    }

    fn stencil_jet<F: FnMut(f64) -> Result<f64>>(&self, s: f64, len: usize, mut f: F) -> Result<Jet> {
        let jets = self.stencil_jets(s, len, 1, |u| Ok(vec![f(u)?]))?;
        Ok(jets[0])
    }

    fn stencil_jets<F>(&self, s: f64, len: usize, width: usize, mut f: F) -> Result<Vec<Jet>>
    where
        F: FnMut(f64) -> Result<Vec<f64>>,
    {
        if len > 3 {
            return Err(Error::ExpansionTooDeep { order: len - 1, max: 2 });
        }
        let mut derivs = vec![Vec::with_capacity(len); width];
        for order in 0..len {
            let d = total_derivative(&mut f, s, order, &self.stencil)?;
            for (slot, v) in derivs.iter_mut().zip(d) {
                slot.push(v);
            }
        }
        Ok(derivs.iter().map(|d| Jet::from_derivatives(d)).collect())
    }
}

/// Sum of jets component-wise.
pub(crate) fn add_into(acc: &mut [Jet], v: &[Jet], w: f64) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a = *a + *b * w;
    }
}

pub(crate) fn dot(a: &[Jet], b: &[Jet]) -> Jet {
    a.iter().zip(b).fold(Jet::constant(0.0), |acc, (x, y)| acc + *x * *y)
}

pub(crate) fn values(v: &[Jet]) -> Vec<f64> {
    v.iter().map(Scalar::value).collect()
}
