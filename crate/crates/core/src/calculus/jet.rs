use std::ops::{Add, Div, Mul, Neg, Sub};

use super::scalar::Scalar;

/// Maximum number of Taylor coefficients a jet carries.
pub const JET_CAPACITY: usize = 8;

/// Truncated Taylor expansion `Σ c_k·dt^k` of a function of time about a point.
///
/// `len` counts the meaningful coefficients. Constants have `len == 1` and are
/// exact, so mixing them with longer jets does not lose information.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    c: [f64; JET_CAPACITY],
    len: usize,
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; JET_CAPACITY];
        c[0] = v;
        Jet { c, len: 1 }
    }

    /// The identity map `t ↦ t` expanded at `v` with `len` coefficients.
    pub fn variable(v: f64, len: usize) -> Self {
        let mut j = Jet::constant(v);
        if len > 1 {
            j.c[1] = 1.0;
            j.len = len.min(JET_CAPACITY);
        }
        j
    }

    /// Builds a jet from Taylor coefficients; extra entries beyond capacity are dropped.
    pub fn from_coeffs(coeffs: &[f64]) -> Self {
        let mut c = [0.0; JET_CAPACITY];
        let len = coeffs.len().clamp(1, JET_CAPACITY);
        c[..len.min(coeffs.len())].copy_from_slice(&coeffs[..len.min(coeffs.len())]);
        Jet { c, len }
    }

    /// Builds a jet from derivative values `f, f', f'', …`.
    pub fn from_derivatives(derivs: &[f64]) -> Self {
        let mut fact = 1.0;
        let coeffs: Vec<f64> = derivs
            .iter()
            .enumerate()
            .map(|(k, d)| {
                if k > 0 {
                    fact *= k as f64;
                }
                d / fact
            })
            .collect();
        Jet::from_coeffs(&coeffs)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coeff(&self, k: usize) -> f64 {
        if k < self.len {
            self.c[k]
        } else {
            0.0
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c[..self.len]
    }

    /// The `k`-th time derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> f64 {
        let mut f = 1.0;
        for i in 2..=k {
            f *= i as f64;
        }
        self.coeff(k) * f
    }

    /// Expansion of the time derivative; loses one coefficient.
    pub fn differentiate(&self) -> Jet {
        if self.len <= 1 {
            return Jet::constant(0.0);
        }
        let mut c = [0.0; JET_CAPACITY];
        for k in 0..self.len - 1 {
            c[k] = (k + 1) as f64 * self.c[k + 1];
        }
        Jet { c, len: self.len - 1 }
    }

    /// Applies `differentiate` `k` times.
    pub fn differentiate_n(&self, k: usize) -> Jet {
        (0..k).fold(*self, |j, _| j.differentiate())
    }

    pub fn truncate(&self, len: usize) -> Jet {
        let len = len.clamp(1, self.len);
        let mut c = [0.0; JET_CAPACITY];
        c[..len].copy_from_slice(&self.c[..len]);
        Jet { c, len }
    }

    fn zeros(len: usize) -> Jet {
        Jet { c: [0.0; JET_CAPACITY], len }
    }

    fn sin_cos(self) -> (Jet, Jet) {
        let mut s = Jet::zeros(self.len);
        let mut co = Jet::zeros(self.len);
        s.c[0] = self.c[0].sin();
        co.c[0] = self.c[0].cos();
        for k in 1..self.len {
            let mut ss = 0.0;
            let mut cc = 0.0;
            for j in 1..=k {
                let w = j as f64 * self.c[j];
                ss += w * co.c[k - j];
                cc += w * s.c[k - j];
            }
            s.c[k] = ss / k as f64;
            co.c[k] = -cc / k as f64;
        }
        (s, co)
    }

    fn leading_sign(&self) -> f64 {
        for k in 0..self.len {
            if self.c[k] != 0.0 {
                return self.c[k].signum();
            }
        }
        1.0
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut r = Jet::zeros(self.len.max(o.len));
        for k in 0..r.len {
            r.c[k] = self.c[k] + o.c[k];
        }
        r
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        let mut r = Jet::zeros(self.len.max(o.len));
        for k in 0..r.len {
            r.c[k] = self.c[k] - o.c[k];
        }
        r
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut r = Jet::zeros(self.len.max(o.len));
        for k in 0..r.len {
            let mut acc = 0.0;
            for j in 0..=k {
                acc += self.c[j] * o.c[k - j];
            }
            r.c[k] = acc;
        }
        r
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let mut r = Jet::zeros(self.len.max(o.len));
        for k in 0..r.len {
            let mut acc = self.c[k];
            for j in 1..=k {
                acc -= o.c[j] * r.c[k - j];
            }
            r.c[k] = acc / o.c[0];
        }
        r
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        let mut r = self;
        for k in 0..r.len {
            r.c[k] = -r.c[k];
        }
        r
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, o: f64) -> Jet {
        self.c[0] += o;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, o: f64) -> Jet {
        self.c[0] -= o;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, o: f64) -> Jet {
        for k in 0..self.len {
            self.c[k] *= o;
        }
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(mut self, o: f64) -> Jet {
        for k in 0..self.len {
            self.c[k] /= o;
        }
        self
    }
}

impl Scalar for Jet {
    fn from_f64(v: f64) -> Self {
        Jet::constant(v)
    }

    fn value(&self) -> f64 {
        self.c[0]
    }

    fn sin(self) -> Self {
        self.sin_cos().0
    }

    fn cos(self) -> Self {
        self.sin_cos().1
    }

    fn exp(self) -> Self {
        let mut e = Jet::zeros(self.len);
        e.c[0] = self.c[0].exp();
        for k in 1..self.len {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * self.c[j] * e.c[k - j];
            }
            e.c[k] = acc / k as f64;
        }
        e
    }

    fn ln(self) -> Self {
        let mut l = Jet::zeros(self.len);
        l.c[0] = self.c[0].ln();
        for k in 1..self.len {
            let mut acc = 0.0;
            for j in 1..k {
                acc += j as f64 * l.c[j] * self.c[k - j];
            }
            l.c[k] = (self.c[k] - acc / k as f64) / self.c[0];
        }
        l
    }

    fn sqrt(self) -> Self {
        let mut r = Jet::zeros(self.len);
        r.c[0] = self.c[0].sqrt();
        for k in 1..self.len {
            let mut acc = self.c[k];
            for j in 1..k {
                acc -= r.c[j] * r.c[k - j];
            }
            r.c[k] = acc / (2.0 * r.c[0]);
        }
        r
    }

    fn abs(self) -> Self {
        self * self.leading_sign()
    }

    fn powi(self, n: i32) -> Self {
        if n < 0 {
            return Jet::constant(1.0) / self.powi(-n);
        }
        let mut base = self;
        let mut acc = Jet::constant(1.0);
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            e >>= 1;
            if e > 0 {
                base = base * base;
            }
        }
        acc
    }

    fn powf(self, p: f64) -> Self {
        let mut r = Jet::zeros(self.len);
        r.c[0] = self.c[0].powf(p);
        for k in 1..self.len {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += ((p + 1.0) * j as f64 - k as f64) * self.c[j] * r.c[k - j];
            }
            r.c[k] = acc / (k as f64 * self.c[0]);
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn polynomial_derivatives_are_exact() {
        // t^4 at t = 1.5
        let t = Jet::variable(1.5, 6);
        let y = t.powi(4);
        assert!(close(y.derivative(0), 5.0625, 1e-15));
        assert!(close(y.derivative(1), 13.5, 1e-15));
        assert!(close(y.derivative(2), 27.0, 1e-15));
        assert!(close(y.derivative(3), 36.0, 1e-15));
        assert!(close(y.derivative(4), 24.0, 1e-15));
        assert_eq!(y.derivative(5), 0.0);
    }

    #[test]
    fn transcendental_recurrences() {
        let t = Jet::variable(0.3, 5);
        let s = t.sin();
        let c = t.cos();
        // d^k sin = sin(t + kπ/2)
        for k in 0..5 {
            let want = (0.3 + k as f64 * std::f64::consts::FRAC_PI_2).sin();
            assert!(close(s.derivative(k), want, 1e-13), "sin {k}");
            let want = (0.3 + k as f64 * std::f64::consts::FRAC_PI_2).cos();
            assert!(close(c.derivative(k), want, 1e-13), "cos {k}");
        }
        let e = (t * 2.0).exp();
        for k in 0..5 {
            assert!(close(e.derivative(k), 2f64.powi(k as i32) * 0.6f64.exp(), 1e-13));
        }
        let l = (t + 1.0).ln();
        // d/dt ln(1+t) = 1/(1+t), d2 = -1/(1+t)^2, d3 = 2/(1+t)^3
        assert!(close(l.derivative(1), 1.0 / 1.3, 1e-14));
        assert!(close(l.derivative(2), -1.0 / 1.69, 1e-14));
        assert!(close(l.derivative(3), 2.0 / 1.3f64.powi(3), 1e-13));
        let r = (t + 1.0).sqrt();
        assert!(close(r.derivative(2), -0.25 * 1.3f64.powf(-1.5), 1e-13));
        let p = (t + 1.0).powf(2.5);
        assert!(close(p.derivative(3), 2.5 * 1.5 * 0.5 * 1.3f64.powf(-0.5), 1e-13));
    }

    #[test]
    fn division_inverts_multiplication() {
        let t = Jet::variable(0.8, 6);
        let a = t.sin() + 2.0;
        let b = t * t + 1.0;
        let q = (a * b) / b;
        for k in 0..6 {
            assert!(close(q.coeff(k), a.coeff(k), 1e-13));
        }
    }

    #[test]
    fn differentiate_shifts_coefficients() {
        let j = Jet::from_derivatives(&[1.0, 2.0, 6.0, 24.0]);
        let d = j.differentiate();
        assert_eq!(d.len(), 3);
        assert!(close(d.derivative(0), 2.0, 1e-15));
        assert!(close(d.derivative(1), 6.0, 1e-15));
        assert!(close(d.derivative(2), 24.0, 1e-15));
    }
}
