use std::sync::OnceLock;

/// Nodes per Gauss–Legendre panel.
pub const GAUSS_NODES: usize = 8;

/// Minimum number of panels across the full integration window.
const MIN_PANELS: usize = 64;

/// Gauss–Legendre nodes and weights on [−1, 1], found by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // ascending order
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GAUSS_NODES))
}

/// Splits `[a, b]` into quadrature panels that never straddle a break and are
/// no wider than `(b − a)/64`.
pub fn panels(a: f64, b: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
    if !(b > a) {
        return Vec::new();
    }
    let tiny = 1e-13 * (1.0 + a.abs().max(b.abs()));
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > a + tiny && x < b - tiny)
        .collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup_by(|x, y| (*x - *y).abs() <= tiny);
    let max_width = (b - a) / MIN_PANELS as f64;
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let count = ((hi - lo) / max_width - 1e-9).ceil().max(1.0) as usize;
        let h = (hi - lo) / count as f64;
        for k in 0..count {
            let pa = lo + k as f64 * h;
            let pb = if k + 1 == count { hi } else { lo + (k + 1) as f64 * h };
            out.push((pa, pb));
        }
    }
    out
}

/// Gauss–Legendre rule on a single panel.
pub fn integrate_panel<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> f64 {
    let (nodes, weights) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Composite Gauss–Legendre integral of `f` over `[a, b]`, split at `breaks`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, breaks: &[f64]) -> f64 {
    panels(a, b, breaks)
        .into_iter()
        .map(|(pa, pb)| integrate_panel(&mut f, pa, pb))
        .sum()
}

/// Fallible variant of [`integrate`]; stops at the first error.
pub fn try_integrate<E, F: FnMut(f64) -> Result<f64, E>>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
) -> Result<f64, E> {
    let mut err = None;
    let v = integrate(
        |t| {
            if err.is_some() {
                return 0.0;
            }
            match f(t) {
                Ok(v) => v,
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            }
        },
        a,
        b,
        breaks,
    );
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}
