//! Hermite and Laguerre polynomials on complex arguments, and the Wronskian
//! combinations `J_n` and `K_n` of consecutive polynomials.
//!
//! Everything is evaluated by forward three-term recurrence. Indices below
//! zero are taken as the zero polynomial.

use num_complex::Complex64 as C64;

use crate::jet::Jet;

/// Above this magnitude a recurrence value is flagged as near overflow.
pub const OVERFLOW_GUARD: f64 = 1e280;

/// Largest supported polynomial degree.
pub const MAX_DEGREE: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolyEval {
    pub value: C64,
    /// first derivative with respect to the argument
    pub d1: C64,
    /// second derivative with respect to the argument
    pub d2: C64,
    pub overflow: bool,
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

/// `H_0..=H_n` at `z` (physicists' convention).
pub fn hermite_table(n: usize, z: C64) -> Vec<C64> {
    let mut h = Vec::with_capacity(n + 1);
    h.push(one());
    if n >= 1 {
        h.push(z * 2.0);
    }
    for k in 1..n {
        let next = z * 2.0 * h[k] - h[k - 1] * (2.0 * k as f64);
        h.push(next);
    }
    h
}

fn at(table: &[C64], k: isize) -> C64 {
    if k < 0 {
        zero()
    } else {
        table[k as usize]
    }
}

pub fn hermite(n: usize, z: C64) -> PolyEval {
    assert!(n <= MAX_DEGREE, "Hermite degree {n} exceeds {MAX_DEGREE}");
    let h = hermite_table(n, z);
    let n_i = n as isize;
    let value = h[n];
    let d1 = at(&h, n_i - 1) * (2.0 * n as f64);
    let d2 = at(&h, n_i - 2) * (4.0 * n as f64 * (n as f64 - 1.0));
    PolyEval { value, d1, d2, overflow: h.iter().any(|v| v.norm() > OVERFLOW_GUARD) }
}

/// `(H_{n-1}/H_n, H_{n-2}/H_n)` from the ratio form of the recurrence, free of
/// overflow for large `|z|`.
pub fn hermite_ratios(n: usize, z: C64) -> (C64, C64) {
    // r_k = H_{k-1} / H_k
    let mut r_prev = zero(); // r_{k-1}
    let mut r = zero(); // r_0 = H_{-1}/H_0 = 0
    for k in 0..n {
        // H_{k+1}/H_k = 2z - 2k r_k
        let up = z * 2.0 - r * (2.0 * k as f64);
        if up.norm() == 0.0 {
            // an intermediate H_k vanishes (odd k at z = 0); the table is
            // bounded there
            let h = hermite_table(n, z);
            return (at(&h, n as isize - 1) / h[n], at(&h, n as isize - 2) / h[n]);
        }
        r_prev = r;
        r = one() / up;
    }
    (r, r * r_prev)
}

/// `L_0^a..=L_n^a` at `y`.
pub fn laguerre_table(n: usize, alpha: f64, y: C64) -> Vec<C64> {
    let mut l = Vec::with_capacity(n + 1);
    l.push(one());
    if n >= 1 {
        l.push(-y + 1.0 + alpha);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((-y + (2.0 * kf + 1.0 + alpha)) * l[k] - l[k - 1] * (kf + alpha)) / (kf + 1.0);
        l.push(next);
    }
    l
}

/// Generalized Laguerre polynomial with derivatives
/// `(L_n^a)' = -L_{n-1}^{a+1}`, `(L_n^a)'' = L_{n-2}^{a+2}`.
pub fn laguerre(n: usize, alpha: f64, y: C64) -> PolyEval {
    assert!(n <= MAX_DEGREE, "Laguerre degree {n} exceeds {MAX_DEGREE}");
    let l = laguerre_table(n, alpha, y);
    let value = l[n];
    let d1 = if n >= 1 { -laguerre_table(n - 1, alpha + 1.0, y)[n - 1] } else { zero() };
    let d2 = if n >= 2 { laguerre_table(n - 2, alpha + 2.0, y)[n - 2] } else { zero() };
    PolyEval { value, d1, d2, overflow: l.iter().any(|v| v.norm() > OVERFLOW_GUARD) }
}

/// `L_{n-1}^a / L_n^a` from the ratio form of the recurrence.
pub fn laguerre_ratio(n: usize, alpha: f64, y: C64) -> C64 {
    let mut s = zero(); // s_k = L_{k-1}/L_k
    for k in 0..n {
        let kf = k as f64;
        let up = ((-y + (2.0 * kf + 1.0 + alpha)) - s * (kf + alpha)) / (kf + 1.0);
        s = one() / up;
    }
    s
}

/// `H_0..=H_n` evaluated on a jet argument.
pub fn hermite_jets(n: usize, z: &Jet) -> Vec<Jet> {
    let order = z.order();
    let mut h = Vec::with_capacity(n + 1);
    h.push(Jet::real(1.0, order));
    if n >= 1 {
        h.push(z * 2.0);
    }
    for k in 1..n {
        let next = &(z * &h[k]) * 2.0 - &h[k - 1] * (2.0 * k as f64);
        h.push(next);
    }
    h
}

/// `L_0^a..=L_n^a` evaluated on a jet argument.
pub fn laguerre_jets(n: usize, alpha: f64, y: &Jet) -> Vec<Jet> {
    let order = y.order();
    let mut l = Vec::with_capacity(n + 1);
    l.push(Jet::real(1.0, order));
    if n >= 1 {
        l.push(-y + (1.0 + alpha));
    }
    for k in 1..n {
        let kf = k as f64;
        let lin = -y + (2.0 * kf + 1.0 + alpha);
        let next = (&lin * &l[k] - &l[k - 1] * (kf + alpha)) * (1.0 / (kf + 1.0));
        l.push(next);
    }
    l
}

/// `J_n(w) = H_n H'_{n+1} - H_{n+1} H'_n` via `J_n = 2 H_n^2 + 2n J_{n-1}`,
/// `J_0 = 2`.
pub fn j_n(n: usize, w: f64) -> f64 {
    let h = hermite_table(n, C64::new(w, 0.0));
    let mut j = 2.0;
    for k in 1..=n {
        j = 2.0 * h[k].re * h[k].re + 2.0 * k as f64 * j;
    }
    j
}

/// `J_n` straight from its Wronskian definition.
pub fn j_n_wronskian(n: usize, w: f64) -> f64 {
    let a = hermite(n, C64::new(w, 0.0));
    let b = hermite(n + 1, C64::new(w, 0.0));
    (a.value * b.d1 - b.value * a.d1).re
}

/// Recursion for `J_n` carried out on jets, giving its w-derivatives.
pub fn j_n_jet(n: usize, w: &Jet) -> Jet {
    let h = hermite_jets(n, w);
    let mut j = Jet::real(2.0, w.order());
    for (k, hk) in h.iter().enumerate().skip(1) {
        j = &(hk * hk) * 2.0 + &j * (2.0 * k as f64);
    }
    j
}

/// `K_n(y) = L_n L'_{n+1} - L_{n+1} L'_n` via
/// `K_n = -(L_n)^2/(n+1) + (n+a)/(n+1) K_{n-1}`, `K_0 = -1`.
pub fn k_n(n: usize, alpha: f64, y: f64) -> f64 {
    let l = laguerre_table(n, alpha, C64::new(y, 0.0));
    let mut k = -1.0;
    for (m, lm) in l.iter().enumerate().skip(1) {
        let mf = m as f64;
        k = -lm.re * lm.re / (mf + 1.0) + (mf + alpha) / (mf + 1.0) * k;
    }
    k
}

/// `K_n` straight from its Wronskian definition.
pub fn k_n_wronskian(n: usize, alpha: f64, y: f64) -> f64 {
    let a = laguerre(n, alpha, C64::new(y, 0.0));
    let b = laguerre(n + 1, alpha, C64::new(y, 0.0));
    (a.value * b.d1 - b.value * a.d1).re
}

/// Recursion for `K_n` carried out on jets.
pub fn k_n_jet(n: usize, alpha: f64, y: &Jet) -> Jet {
    let l = laguerre_jets(n, alpha, y);
    let mut k = Jet::real(-1.0, y.order());
    for (m, lm) in l.iter().enumerate().skip(1) {
        let mf = m as f64;
        k = &(lm * lm) * (-1.0 / (mf + 1.0)) + &k * ((mf + alpha) / (mf + 1.0));
    }
    k
}

/// `ln Gamma(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}
