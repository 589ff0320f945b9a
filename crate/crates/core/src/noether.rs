//! Transformation groups: the `ρ` recursion, invariance checks, Noether
//! quantities and constancy reports.

use serde::{Deserialize, Serialize};

use crate::along::{dot, values, Along};
use crate::calculus::{
    derivative_in_parameter, integrate, partial, Jet, Scalar as _, StencilConfig,
};
use crate::dubois_reymond::{dr_quantity_jet, psi_jets};
use crate::error::{Error, Result};
use crate::euler_lagrange::{check_window, stacked_jets, Regime};
use crate::problem::{ArgLayout, AugmentedSetup, TransformationGroup};
use crate::trajectory::Trajectory;

/// `ρ⁰..ρ^upto` about `t`, each component expanded to `len` coefficients.
pub(crate) fn rho_jets(
    group: &TransformationGroup,
    along: &Along,
    upto: usize,
    t: f64,
    len: usize,
) -> Result<Vec<Vec<Jet>>> {
    let total = len + upto;
    let eta_rate = along.generator_jet(&group.eta, t, total)?.differentiate();
    let mut current = group
        .xi
        .iter()
        .map(|x| along.generator_jet(x, t, total))
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![current.iter().map(|j| j.truncate(len)).collect::<Vec<_>>()];
    for i in 1..=upto {
        let width = total - i;
        let rates = along.traj.state_jets(t, i, width, along.side)?;
        let eta_rate = eta_rate.truncate(width);
        current = current
            .iter()
            .zip(&rates)
            .map(|(r, q)| (r.differentiate() - *q * eta_rate).truncate(width))
            .collect();
        out.push(current.iter().map(|j| j.truncate(len)).collect());
    }
    Ok(out)
}

/// Evaluation context for generator-only quantities on a bare trajectory.
fn bare_along(traj: &Trajectory) -> Along<'_> {
    let (lo, hi) = traj.domain();
    Along::new(
        traj,
        ArgLayout::new(traj.smoothness(), traj.dim()),
        0.0,
        StencilConfig::for_window(lo, hi, traj.breakpoints()),
    )
}

/// `ρ^i(t)`: `ρ⁰ = ξ(t, q(t))`, `ρ^i = d/dt ρ^{i−1} − q^(i)(t)·η̇`.
pub fn rho(group: &TransformationGroup, traj: &Trajectory, i: usize, t: f64) -> Result<Vec<f64>> {
    let m = traj.smoothness();
    if i > m {
        return Err(Error::IOutOfRange { i, m });
    }
    check_group(group, traj.dim())?;
    let along = bare_along(traj);
    Ok(values(&rho_jets(group, &along, i, t, 1)?[i]))
}

fn check_group(group: &TransformationGroup, n: usize) -> Result<()> {
    if group.dim() != n {
        return Err(Error::InvalidProblem(format!(
            "group has {} space generators, state has {} components",
            group.dim(),
            n
        )));
    }
    Ok(())
}

/// `Σ_j ψ_j·ρ^{j−1} + (F − Σ_j ψ_j·q^(j))·η − Φ` at `t`.
pub fn noether_quantity(
    setup: &AugmentedSetup,
    group: &TransformationGroup,
    traj: &Trajectory,
    t: f64,
    regime: Regime,
) -> Result<f64> {
    let problem = setup.problem();
    check_window(problem, t)?;
    problem.check_cover(traj)?;
    check_group(group, problem.n)?;
    let along = problem.along(traj);
    let m = problem.m;
    let psis = psi_jets(setup, &along, t, regime, 1)?;
    let rhos = rho_jets(group, &along, m - 1, t, 1)?;
    let mut acc = 0.0;
    for (psi, rho) in psis.iter().zip(&rhos) {
        acc += dot(psi, rho).value();
    }
    let eta = along.generator_jet(&group.eta, t, 1)?.value();
    let base = dr_quantity_jet(setup, &along, t, regime, 1)?.value();
    let gauge = group.gauge.eval(&along.args(t)?);
    Ok(acc + base * eta - gauge)
}

/// Transformed derivatives `q̄, q̄', …, q̄^(m)` at original time `u` and the
/// transformed time with its rate, for group parameter `s`.
fn transformed(
    group: &TransformationGroup,
    along: &Along,
    u: f64,
    s: f64,
    active: bool,
) -> Result<(f64, f64, Vec<Vec<f64>>)> {
    let m = along.layout.m;
    let len = m + 1;
    let positions = along.traj.state_jets(u, 0, len, along.side)?;
    if !active {
        // the group acts trivially on the history
        let derivs = (0..=m)
            .map(|k| positions.iter().map(|j| j.derivative(k)).collect())
            .collect();
        return Ok((u, 1.0, derivs));
    }
    let eta = along.generator_jet(&group.eta, u, len)?;
    let time = Jet::variable(u, len) + eta * s;
    let rate = time.differentiate();
    if !(rate.value() > 0.0) {
        return Err(Error::TransformEscapesDomain { t: u });
    }
    let mut level = positions
        .iter()
        .zip(&group.xi)
        .map(|(q, xi)| Ok(*q + along.generator_jet(xi, u, len)? * s))
        .collect::<Result<Vec<Jet>>>()?;
    let mut derivs = vec![values(&level)];
    for k in 1..=m {
        let width = len - k;
        let r = rate.truncate(width);
        level = level.iter().map(|v| (v.differentiate() / r).truncate(width)).collect();
        derivs.push(values(&level));
    }
    Ok((time.value(), rate.value(), derivs))
}

/// `d/ds|₀` of the transformed action over the image of `[a, b]`, minus `∫_a^b Φ̇`.
///
/// The image integral is pulled back to `[a, b]` with the Jacobian `dt̄/dt`.
/// The group is taken to act trivially where the delayed time falls before `t1`.
pub fn invariance_defect(
    setup: &AugmentedSetup,
    group: &TransformationGroup,
    traj: &Trajectory,
    (a, b): (f64, f64),
) -> Result<f64> {
    let problem = setup.problem();
    check_window(problem, a)?;
    check_window(problem, b)?;
    problem.check_cover(traj)?;
    check_group(group, problem.n)?;
    let along = problem.along(traj);
    let f = setup.integrand();
    let breaks = problem.quadrature_breaks(traj);

    let point = |s: f64, t: f64| -> Result<f64> {
        let (time, rate, now) = transformed(group, &along, t, s, true)?;
        let delayed_at = t - problem.tau;
        let (_, _, before) = transformed(group, &along, delayed_at, s, delayed_at >= problem.t1)?;
        let mut args = Vec::with_capacity(problem.layout().len());
        args.push(time);
        args.extend(now.into_iter().flatten());
        args.extend(before.into_iter().flatten());
        let v = f.eval(&args) * rate;
        if !v.is_finite() {
            return Err(Error::TransformEscapesDomain { t });
        }
        Ok(v)
    };
    let mut failure = None;
    let mut action = |s: f64| {
        integrate(
            |t| match point(s, t) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            },
            a,
            b,
            &breaks,
        )
    };
    let variation = derivative_in_parameter(&mut action).value;
    if let Some(e) = failure {
        return Err(e);
    }
    let gauge = integrate_checked(
        |t| Ok(along.value_jet(&group.gauge, t, 2)?.derivative(1)),
        a,
        b,
        &breaks,
    )?;
    Ok(variation - gauge)
}

fn integrate_checked<F: FnMut(f64) -> Result<f64>>(mut f: F, a: f64, b: f64, breaks: &[f64]) -> Result<f64> {
    crate::calculus::try_integrate(&mut f, a, b, breaks)
}

/// The two regime integrals whose vanishing invariance implies, `(first, second)`.
pub fn necessary_condition_defect(
    setup: &AugmentedSetup,
    group: &TransformationGroup,
    traj: &Trajectory,
) -> Result<(f64, f64)> {
    let problem = setup.problem();
    problem.check_cover(traj)?;
    check_group(group, problem.n)?;
    let along = problem.along(traj);
    let f = setup.integrand();
    let layout = problem.layout();
    let m = problem.m;
    let mut breaks = problem.quadrature_breaks(traj);
    breaks.extend(traj.breakpoints().iter().map(|b| b - problem.tau));

    let density = |t: f64, regime: Regime| -> Result<f64> {
        let args = along.args(t)?;
        let gauge_rate = along.value_jet(&group.gauge, t, 2)?.derivative(1);
        let eta = along.generator_jet(&group.eta, t, 2)?;
        let explicit = partial(f, layout, 1, &args)?[0];
        let mut acc = -gauge_rate + explicit * eta.value() + f.eval(&args) * eta.derivative(1);
        let rhos = rho_jets(group, &along, m, t, 1)?;
        for (i, rho) in rhos.iter().enumerate() {
            let phi = stacked_jets(setup, &along, i, t, regime, 1)?;
            acc += dot(&phi, rho).value();
        }
        Ok(acc)
    };
    let switch = problem.switch_time();
    let first = integrate_checked(|t| density(t, Regime::First), problem.t1, switch, &breaks)?;
    let second = integrate_checked(|t| density(t, Regime::Second), switch, problem.t2, &breaks)?;
    Ok((first, second))
}

/// Spread of a quantity over one grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstancyBlock {
    /// `None` when the grid spans the whole window.
    pub regime: Option<Regime>,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub mean: f64,
    pub max_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstancyReport {
    pub blocks: Vec<ConstancyBlock>,
    /// Set by callers when the delay hypothesis fails along the trajectory.
    pub hypothesis_violated: bool,
}

impl ConstancyReport {
    pub fn max_deviation(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_deviation).fold(0.0, f64::max)
    }

    pub fn block(&self, regime: Option<Regime>) -> Option<&ConstancyBlock> {
        self.blocks.iter().find(|b| b.regime == regime)
    }
}

/// Mean and largest deviation from it of `quantity` over each grid.
pub fn constancy_report<F>(mut quantity: F, grids: &[(Option<Regime>, Vec<f64>)]) -> Result<ConstancyReport>
where
    F: FnMut(f64, Option<Regime>) -> Result<f64>,
{
    if grids.is_empty() || grids.iter().any(|(_, g)| g.is_empty()) {
        return Err(Error::EmptyGrid);
    }
    let mut blocks = Vec::with_capacity(grids.len());
    for (regime, times) in grids {
        let values = times
            .iter()
            .map(|&t| quantity(t, *regime))
            .collect::<Result<Vec<_>>>()?;
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let max_deviation = values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        blocks.push(ConstancyBlock { regime: *regime, times: times.clone(), values, mean, max_deviation });
    }
    Ok(ConstancyReport { blocks, hypothesis_violated: false })
}
