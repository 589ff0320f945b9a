use crate::error::{Error, Result};

/// Five-point finite-difference stencil settings.
#[derive(Clone, Debug, PartialEq)]
pub struct StencilConfig {
    pub h: f64,
    /// Times a stencil must not straddle (regime walls and breakpoints).
    pub bounds: Vec<f64>,
}

impl StencilConfig {
    pub fn new(h: f64, mut bounds: Vec<f64>) -> Self {
        bounds.sort_by(|a, b| a.total_cmp(b));
        bounds.dedup();
        StencilConfig { h, bounds }
    }

    /// Default step `(t2 − t1)·1e−4`.
    pub fn for_window(t1: f64, t2: f64, bounds: Vec<f64>) -> Self {
        StencilConfig::new((t2 - t1) * 1e-4, bounds)
    }

    /// Chooses the five sample offsets (in units of h) for a stencil at `t`,
    /// preferring the centred placement.
    fn placement(&self, t: f64) -> Option<i32> {
        let lo = self
            .bounds
            .iter()
            .copied()
            .filter(|&b| b <= t)
            .fold(f64::NEG_INFINITY, f64::max);
        let hi = self
            .bounds
            .iter()
            .copied()
            .filter(|&b| b > t)
            .fold(f64::INFINITY, f64::min);
        let slack = 1e-14 * (1.0 + t.abs());
        [-2, -1, -3, 0, -4].into_iter().find(|&s| {
            let first = t + s as f64 * self.h;
            let last = t + (s + 4) as f64 * self.h;
            first >= lo - slack && last < hi
        })
    }
}

/// Finite-difference weights for derivatives `0..=max_order` at `z` from samples at `x`
/// (Fornberg's recursion). Returns `w[k][j]`.
pub fn fornberg_weights(z: f64, x: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Time derivative of order ≤ 2 of a sampled vector function by a five-point stencil.
///
/// The stencil is centred when it fits between the surrounding bounds and
/// slides to a one-sided placement otherwise.
pub fn total_derivative<F>(mut f: F, t: f64, order: usize, cfg: &StencilConfig) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    if order == 0 {
        return f(t);
    }
    if order > 2 {
        return Err(Error::ExpansionTooDeep { order, max: 2 });
    }
    let start = cfg
        .placement(t)
        .ok_or(Error::StencilCrossesBreakpoint { t })?;
    let offsets: Vec<f64> = (0..5).map(|i| (start + i) as f64).collect();
    let w = fornberg_weights(0.0, &offsets, order);
    let scale = cfg.h.powi(order as i32);
    let mut acc: Option<Vec<f64>> = None;
    for (j, off) in offsets.iter().enumerate() {
        let v = f(t + off * cfg.h)?;
        let a = acc.get_or_insert_with(|| vec![0.0; v.len()]);
        for (ai, vi) in a.iter_mut().zip(&v) {
            *ai += w[order][j] * vi;
        }
    }
    Ok(acc
        .unwrap_or_default()
        .into_iter()
        .map(|x| x / scale)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_weights_match_textbook() {
        let w = fornberg_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 2);
        let d1 = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        let d2 = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
        for j in 0..5 {
            assert!((w[1][j] - d1[j]).abs() < 1e-14);
            assert!((w[2][j] - d2[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn simple_derivatives() {
        let cfg = StencilConfig::new(1e-3, vec![]);
        let d = total_derivative(|t| Ok(vec![t * t]), 3.0, 1, &cfg).unwrap();
        assert!((d[0] - 6.0).abs() < 1e-9);
        let d = total_derivative(|t| Ok(vec![t * t * t]), 2.0, 2, &cfg).unwrap();
        assert!((d[0] - 12.0).abs() < 1e-6);
    }

    #[test]
    fn one_sided_near_a_wall() {
        let cfg = StencilConfig::new(1e-3, vec![1.0]);
        // samples of a kinked function must stay on the left of the wall
        let f = |t: f64| Ok(vec![if t < 1.0 { t * t } else { 100.0 * t }]);
        let d = total_derivative(f, 1.0 - 1.5e-3, 1, &cfg).unwrap();
        assert!((d[0] - 2.0 * (1.0 - 1.5e-3)).abs() < 1e-8);
        let f = |t: f64| Ok(vec![if t < 1.0 { t * t } else { 100.0 * t }]);
        let d = total_derivative(f, 1.0, 1, &cfg).unwrap();
        assert!((d[0] - 100.0).abs() < 1e-8);
    }

    #[test]
    fn no_room_is_an_error() {
        let cfg = StencilConfig::new(1e-2, vec![0.0, 0.03]);
        let r = total_derivative(|t| Ok(vec![t]), 0.01, 1, &cfg);
        assert!(matches!(r, Err(Error::StencilCrossesBreakpoint { .. })));
    }
}
