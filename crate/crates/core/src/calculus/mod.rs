//! Differentiation and integration engine.

mod dual;
mod jet;
mod quadrature;
mod scalar;
mod stencil;

pub use dual::Dual;
pub use jet::{Jet, JET_CAPACITY};
pub use quadrature::{gauss_legendre, integrate, integrate_panel, panels, try_integrate, GAUSS_NODES};
pub use scalar::Scalar;
pub use stencil::{fornberg_weights, total_derivative, StencilConfig};

use std::ops::Range;

use crate::error::{Error, Result};
use crate::problem::{ArgLayout, Integrand};

/// Gradient of `f` with respect to one argument block (1-based: block 1 is `t`).
///
/// Uses the integrand's analytic partial when supplied, forward-mode dual numbers
/// when the integrand supports them, and central differences otherwise.
pub fn partial(f: &Integrand, layout: ArgLayout, block: usize, args: &[f64]) -> Result<Vec<f64>> {
    let range = layout.block_range(block)?;
    Ok(partial_over(f, block, range, args))
}

/// Gradient of `f` over the flat slots `range`; `block` names the range for
/// analytic partials.
pub fn partial_over(f: &Integrand, block: usize, range: Range<usize>, args: &[f64]) -> Vec<f64> {
    if let Some(p) = f.analytic_partial(block, args) {
        return p;
    }
    if f.is_differentiable() {
        let mut duals: Vec<Dual<f64>> = args.iter().map(|&a| Dual::constant(a)).collect();
        let mut out = Vec::with_capacity(range.len());
        for slot in range {
            duals[slot].eps = 1.0;
            out.push(f.eval_dual(&duals).map(|d| d.eps).unwrap_or(f64::NAN));
            duals[slot].eps = 0.0;
        }
        return out;
    }
    range
        .map(|slot| central_difference(|x| f.eval(x), args, slot))
        .collect()
}

/// Central difference in one slot with step `max(1e−6, 1e−6·|arg|)`.
pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, args: &[f64], slot: usize) -> f64 {
    let h = (1e-6 * args[slot].abs()).max(1e-6);
    let mut x = args.to_vec();
    x[slot] = args[slot] + h;
    let up = f(&x);
    x[slot] = args[slot] - h;
    let down = f(&x);
    (up - down) / (2.0 * h)
}

/// Derivative at zero of a one-parameter function, with an error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParameterDerivative {
    pub value: f64,
    pub error: f64,
}

/// Central differences at `h = 1e−3` and `5e−4` combined by Richardson extrapolation.
pub fn derivative_in_parameter<F: FnMut(f64) -> f64>(mut f: F) -> ParameterDerivative {
    let mut central = |h: f64| (f(h) - f(-h)) / (2.0 * h);
    let coarse = central(1e-3);
    let fine = central(5e-4);
    ParameterDerivative {
        value: (4.0 * fine - coarse) / 3.0,
        error: (fine - coarse).abs() / 3.0,
    }
}

/// Fallible variant of [`derivative_in_parameter`].
pub fn try_derivative_in_parameter<F: FnMut(f64) -> Result<f64>>(mut f: F) -> Result<ParameterDerivative> {
    let mut samples = [0.0; 4];
    for (slot, s) in samples.iter_mut().zip([1e-3, -1e-3, 5e-4, -5e-4]) {
        *slot = f(s)?;
    }
    let mut k = 0;
    Ok(derivative_in_parameter(|_| {
        let v = samples[k];
        k += 1;
        v
    }))
}

pub(crate) fn check_jet_len(len: usize) -> Result<()> {
    if len > JET_CAPACITY {
        return Err(Error::ExpansionTooDeep { order: len - 1, max: JET_CAPACITY - 1 });
    }
    Ok(())
}
