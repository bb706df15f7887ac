//! Truncated Taylor series in the spatial displacement.
//!
//! A [`Jet`] of order `N` stores `f(x0 + h) = sum_k c_k h^k` for `k <= N`.
//! Closed-form wavefunctions are built from jet arithmetic, so every
//! x-derivative they report is exact up to rounding.

use num_complex::Complex64 as C64;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    c: Vec<C64>,
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * j as f64)
}

impl Jet {
    pub fn constant(value: C64, order: usize) -> Self {
        let mut c = vec![C64::new(0.0, 0.0); order + 1];
        c[0] = value;
        Jet { c }
    }

    pub fn real(value: f64, order: usize) -> Self {
        Self::constant(C64::new(value, 0.0), order)
    }

    /// The independent variable `x0 + h`.
    pub fn variable(x0: f64, order: usize) -> Self {
        let mut j = Self::real(x0, order);
        if order >= 1 {
            j.c[1] = C64::new(1.0, 0.0);
        }
        j
    }

    pub fn from_coeffs(c: Vec<C64>) -> Self {
        assert!(!c.is_empty(), "jet needs at least one coefficient");
        Jet { c }
    }

    /// Builds a jet from derivative values `f, f', f'', ...`.
    pub fn from_derivatives(d: &[C64]) -> Self {
        Jet::from_coeffs(d.iter().enumerate().map(|(k, v)| v / factorial(k)).collect())
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.c
    }

    pub fn value(&self) -> C64 {
        self.c[0]
    }

    /// `k`-th derivative with respect to x at the expansion point.
    pub fn derivative(&self, k: usize) -> C64 {
        self.c[k] * factorial(k)
    }

    pub fn derivatives(&self) -> Vec<C64> {
        (0..self.c.len()).map(|k| self.derivative(k)).collect()
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let n = (order + 1).min(self.c.len());
        Jet { c: self.c[..n].to_vec() }
    }

    /// Jet of `f'(x0 + h)`, one order shorter.
    pub fn differentiate(&self) -> Jet {
        if self.c.len() == 1 {
            return Jet::constant(C64::new(0.0, 0.0), 0);
        }
        Jet { c: (1..self.c.len()).map(|k| self.c[k] * k as f64).collect() }
    }

    /// Same function in the stretched variable `s = h / step`.
    pub fn rescale(&self, step: f64) -> Jet {
        let mut p = 1.0;
        let c = self
            .c
            .iter()
            .map(|v| {
                let out = v * p;
                p *= step;
                out
            })
            .collect();
        Jet { c }
    }

    pub fn conj(&self) -> Jet {
        Jet { c: self.c.iter().map(|v| v.conj()).collect() }
    }

    pub fn scale(&self, s: C64) -> Jet {
        Jet { c: self.c.iter().map(|v| v * s).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn exp(&self) -> Jet {
        let n = self.c.len();
        let mut g = vec![C64::new(0.0, 0.0); n];
        g[0] = self.c[0].exp();
        for k in 1..n {
            let mut acc = C64::new(0.0, 0.0);
            for j in 1..=k {
                acc += self.c[j] * g[k - j] * j as f64;
            }
            g[k] = acc / k as f64;
        }
        Jet { c: g }
    }

    /// Principal-branch logarithm.
    pub fn ln(&self) -> Jet {
        let n = self.c.len();
        let f0 = self.c[0];
        let mut g = vec![C64::new(0.0, 0.0); n];
        g[0] = f0.ln();
        for k in 1..n {
            let mut acc = C64::new(0.0, 0.0);
            for j in 1..k {
                acc += g[j] * self.c[k - j] * j as f64;
            }
            g[k] = (self.c[k] - acc / k as f64) / f0;
        }
        Jet { c: g }
    }

    /// `self^p` on the principal branch of the logarithm.
    pub fn powc(&self, p: C64) -> Jet {
        (self.ln() * p).exp()
    }

    pub fn recip(&self) -> Jet {
        Jet::real(1.0, self.order()) / self
    }
}

fn binary<F: Fn(usize) -> C64>(n: usize, f: F) -> Jet {
    Jet { c: (0..n).map(f).collect() }
}

impl Add<&Jet> for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        binary(self.c.len().min(rhs.c.len()), |k| self.c[k] + rhs.c[k])
    }
}

impl Sub<&Jet> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        binary(self.c.len().min(rhs.c.len()), |k| self.c[k] - rhs.c[k])
    }
}

impl Mul<&Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let n = self.c.len().min(rhs.c.len());
        binary(n, |k| (0..=k).map(|j| self.c[j] * rhs.c[k - j]).sum())
    }
}

impl Div<&Jet> for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        let n = self.c.len().min(rhs.c.len());
        let mut q = vec![C64::new(0.0, 0.0); n];
        for k in 0..n {
            let mut acc = self.c[k];
            for j in 1..=k {
                acc -= rhs.c[j] * q[k - j];
            }
            q[k] = acc / rhs.c[0];
        }
        Jet { c: q }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet { c: self.c.iter().map(|v| -v).collect() }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        -&self
    }
}

impl Mul<C64> for &Jet {
    type Output = Jet;
    fn mul(self, s: C64) -> Jet {
        self.scale(s)
    }
}

impl Mul<C64> for Jet {
    type Output = Jet;
    fn mul(self, s: C64) -> Jet {
        self.scale(s)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, s: f64) -> Jet {
        self.scale(C64::new(s, 0.0))
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, s: f64) -> Jet {
        self.scale(C64::new(s, 0.0))
    }
}

impl Add<C64> for Jet {
    type Output = Jet;
    fn add(mut self, s: C64) -> Jet {
        self.c[0] += s;
        self
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, s: f64) -> Jet {
        self.c[0] += s;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, s: f64) -> Jet {
        self.c[0] -= s;
        self
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, s: f64) -> Jet {
        self.clone() + s
    }
}

impl Sub<f64> for &Jet {
    type Output = Jet;
    fn sub(self, s: f64) -> Jet {
        self.clone() - s
    }
}
