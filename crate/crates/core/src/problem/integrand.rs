use std::fmt;
use std::sync::Arc;

use crate::calculus::{Dual, Jet, Scalar};

/// A scalar function written once against [`Scalar`], so it can be evaluated
/// plainly, slot-differentiated and expanded in time.
///
/// ```
/// use isodelay::calculus::Scalar;
/// use isodelay::problem::{Generic, Integrand};
///
/// struct Square(usize);
/// impl Generic for Square {
///     fn eval<S: Scalar>(&self, x: &[S]) -> S {
///         x[self.0] * x[self.0]
///     }
/// }
/// let f = Integrand::new(Square(1));
/// assert_eq!(f.eval(&[0.0, 3.0]), 9.0);
/// ```
pub trait Generic: Send + Sync + 'static {
    fn eval<S: Scalar>(&self, x: &[S]) -> S;
}

trait Evaluate: Send + Sync {
    fn plain(&self, x: &[f64]) -> f64;
    fn dual(&self, x: &[Dual<f64>]) -> Option<Dual<f64>>;
    fn jet(&self, x: &[Jet]) -> Option<Jet>;
    fn dual_jet(&self, x: &[Dual<Jet>]) -> Option<Dual<Jet>>;
    fn differentiable(&self) -> bool;
}

struct Auto<G>(G);

impl<G: Generic> Evaluate for Auto<G> {
    fn plain(&self, x: &[f64]) -> f64 {
        self.0.eval(x)
    }
    fn dual(&self, x: &[Dual<f64>]) -> Option<Dual<f64>> {
        Some(self.0.eval(x))
    }
    fn jet(&self, x: &[Jet]) -> Option<Jet> {
        Some(self.0.eval(x))
    }
    fn dual_jet(&self, x: &[Dual<Jet>]) -> Option<Dual<Jet>> {
        Some(self.0.eval(x))
    }
    fn differentiable(&self) -> bool {
        true
    }
}

struct Plain<F>(F);

impl<F: Fn(&[f64]) -> f64 + Send + Sync> Evaluate for Plain<F> {
    fn plain(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
    fn dual(&self, _: &[Dual<f64>]) -> Option<Dual<f64>> {
        None
    }
    fn jet(&self, _: &[Jet]) -> Option<Jet> {
        None
    }
    fn dual_jet(&self, _: &[Dual<Jet>]) -> Option<Dual<Jet>> {
        None
    }
    fn differentiable(&self) -> bool {
        false
    }
}

struct Combination(Vec<(f64, Integrand)>);

impl Combination {
    fn fold<S: Scalar>(&self, eval: impl Fn(&Integrand) -> Option<S>) -> Option<S> {
        let mut acc = S::from_f64(0.0);
        for (w, f) in &self.0 {
            acc = acc + eval(f)? * *w;
        }
        Some(acc)
    }
}

impl Evaluate for Combination {
    fn plain(&self, x: &[f64]) -> f64 {
        self.0.iter().map(|(w, f)| w * f.eval(x)).sum()
    }
    fn dual(&self, x: &[Dual<f64>]) -> Option<Dual<f64>> {
        self.fold(|f| f.eval_dual(x))
    }
    fn jet(&self, x: &[Jet]) -> Option<Jet> {
        self.fold(|f| f.eval_jet(x))
    }
    fn dual_jet(&self, x: &[Dual<Jet>]) -> Option<Dual<Jet>> {
        self.fold(|f| f.eval_dual_jet(x))
    }
    fn differentiable(&self) -> bool {
        self.0.iter().all(|(_, f)| f.is_differentiable())
    }
}

type PartialFn = dyn Fn(usize, &[f64]) -> Vec<f64> + Send + Sync;

/// Scalar function of a flat argument vector, with optional analytic block partials.
#[derive(Clone)]
pub struct Integrand {
    inner: Arc<dyn Evaluate>,
    partials: Option<Arc<PartialFn>>,
}

impl fmt::Debug for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Integrand")
            .field("differentiable", &self.is_differentiable())
            .field("analytic_partials", &self.partials.is_some())
            .finish()
    }
}

struct Constant(f64);

impl Generic for Constant {
    fn eval<S: Scalar>(&self, _: &[S]) -> S {
        S::from_f64(self.0)
    }
}

struct Slot(usize);

impl Generic for Slot {
    fn eval<S: Scalar>(&self, x: &[S]) -> S {
        x[self.0]
    }
}

impl Integrand {
    pub fn new<G: Generic>(g: G) -> Self {
        Integrand { inner: Arc::new(Auto(g)), partials: None }
    }

    /// Wraps a plain closure. Derivatives then fall back to finite differences.
    pub fn from_fn<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Integrand { inner: Arc::new(Plain(f)), partials: None }
    }

    /// Attaches an analytic block partial `(block, args) ↦ gradient`.
    pub fn with_partials<P>(mut self, p: P) -> Self
    where
        P: Fn(usize, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.partials = Some(Arc::new(p));
        self
    }

    pub fn constant(c: f64) -> Self {
        Integrand::new(Constant(c))
    }

    pub fn zero() -> Self {
        Integrand::constant(0.0)
    }

    /// Projection onto one flat argument slot (0-based).
    pub fn slot(index: usize) -> Self {
        Integrand::new(Slot(index))
    }

    /// `Σ w_i f_i`; analytic partials compose when every term has them.
    pub fn linear_combination(terms: Vec<(f64, Integrand)>) -> Self {
        let partials = if terms.iter().all(|(_, f)| f.partials.is_some()) && !terms.is_empty() {
            let parts: Vec<(f64, Arc<PartialFn>)> = terms
                .iter()
                .map(|(w, f)| (*w, f.partials.clone().expect("checked above")))
                .collect();
            Some(Arc::new(move |block: usize, x: &[f64]| {
                let mut acc: Vec<f64> = Vec::new();
                for (w, p) in &parts {
                    let g = p(block, x);
                    if acc.is_empty() {
                        acc = vec![0.0; g.len()];
                    }
                    for (a, v) in acc.iter_mut().zip(g) {
                        *a += w * v;
                    }
                }
                acc
            }) as Arc<PartialFn>)
        } else {
            None
        };
        Integrand { inner: Arc::new(Combination(terms)), partials }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.inner.plain(x)
    }

    pub fn eval_dual(&self, x: &[Dual<f64>]) -> Option<Dual<f64>> {
        self.inner.dual(x)
    }

    pub fn eval_jet(&self, x: &[Jet]) -> Option<Jet> {
        self.inner.jet(x)
    }

    pub fn eval_dual_jet(&self, x: &[Dual<Jet>]) -> Option<Dual<Jet>> {
        self.inner.dual_jet(x)
    }

    /// Whether forward-mode evaluation is available.
    pub fn is_differentiable(&self) -> bool {
        self.inner.differentiable()
    }

    pub fn analytic_partial(&self, block: usize, x: &[f64]) -> Option<Vec<f64>> {
        self.partials.as_ref().map(|p| p(block, x))
    }

    pub fn has_analytic_partials(&self) -> bool {
        self.partials.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combination_is_linear() {
        let f = Integrand::linear_combination(vec![
            (1.0, Integrand::constant(1.0)),
            (-2.0, Integrand::constant(3.0)),
        ]);
        assert_eq!(f.eval(&[0.0]), -5.0);
        assert!(f.is_differentiable());
        let plain = Integrand::from_fn(|x| x[0]);
        assert!(!Integrand::linear_combination(vec![(1.0, plain)]).is_differentiable());
    }

    #[test]
    fn slot_projection_differentiates() {
        let f = Integrand::slot(1);
        let d = f
            .eval_dual(&[Dual::constant(2.0), Dual::variable(5.0)])
            .unwrap();
        assert_eq!((d.re, d.eps), (5.0, 1.0));
    }
}
