//! Quadrature rules: adaptive Gauss-Kronrod in time, composite Simpson in space.

use num_complex::Complex64 as C64;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// 15-point Kronrod estimate and its difference from the embedded 7-point
/// Gauss rule.
pub fn gauss_kronrod15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, (kronrod - gauss).abs() * h.abs())
}

/// Adaptive bisection on GK15 panels until the error estimate per panel
/// meets `abs_tol + rel_tol * |panel|`.
pub fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, rel: f64, depth: u32) -> f64 {
        let (v, err) = gauss_kronrod15(f, a, b);
        if err <= tol.max(rel * v.abs()) || depth >= 40 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, rel, depth + 1) + rec(f, m, b, 0.5 * tol, rel, depth + 1)
    }
    if a == b {
        return 0.0;
    }
    rec(f, a, b, abs_tol, rel_tol, 0)
}

/// Running integral `int_{t0}^t f` tabulated on a node grid; evaluation
/// between nodes adds one GK15 panel, so the result is smooth in `t` inside
/// each node interval.
#[derive(Clone, Debug)]
pub struct CumulativeIntegral {
    nodes: Vec<f64>,
    values: Vec<f64>,
    t0: f64,
}

impl CumulativeIntegral {
    pub fn build(f: &dyn Fn(f64) -> f64, nodes: Vec<f64>, t0: f64, tol: f64) -> Self {
        assert!(nodes.len() >= 2 && nodes.windows(2).all(|w| w[1] > w[0]));
        // anchor: integral from t0 to nodes[k0]
        let k0 = nearest(&nodes, t0);
        let mut values = vec![0.0; nodes.len()];
        values[k0] = adaptive(f, t0, nodes[k0], tol, 0.0);
        for k in k0 + 1..nodes.len() {
            values[k] = values[k - 1] + adaptive(f, nodes[k - 1], nodes[k], tol, 0.0);
        }
        for k in (0..k0).rev() {
            values[k] = values[k + 1] - adaptive(f, nodes[k], nodes[k + 1], tol, 0.0);
        }
        CumulativeIntegral { nodes, values, t0 }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn eval(&self, f: &dyn Fn(f64) -> f64, t: f64) -> f64 {
        let k = left_index(&self.nodes, t);
        let base = self.nodes[k];
        if t == base {
            return self.values[k];
        }
        self.values[k] + gauss_kronrod15(f, base, t).0
    }
}

fn nearest(nodes: &[f64], t: f64) -> usize {
    let k = left_index(nodes, t);
    if k + 1 < nodes.len() && (nodes[k + 1] - t).abs() < (t - nodes[k]).abs() {
        k + 1
    } else {
        k
    }
}

/// Index of the node interval containing `t`, clamped to the table.
pub fn left_index(nodes: &[f64], t: f64) -> usize {
    let p = nodes.partition_point(|&n| n <= t);
    p.saturating_sub(1).min(nodes.len() - 2)
}

/// Composite Simpson weights for `n >= 3` uniformly spaced samples; an even
/// count closes with a 3/8 panel.
pub fn simpson_weights(n: usize, dx: f64) -> Vec<f64> {
    assert!(n >= 3, "Simpson needs at least three samples");
    let mut w = vec![0.0; n];
    let simpson_end = if n % 2 == 1 { n - 1 } else { n - 4 };
    let mut i = 0;
    while i < simpson_end {
        w[i] += dx / 3.0;
        w[i + 1] += 4.0 * dx / 3.0;
        w[i + 2] += dx / 3.0;
        i += 2;
    }
    if n % 2 == 0 {
        let s = simpson_end;
        w[s] += 3.0 * dx / 8.0;
        w[s + 1] += 9.0 * dx / 8.0;
        w[s + 2] += 9.0 * dx / 8.0;
        w[s + 3] += 3.0 * dx / 8.0;
    }
    w
}

pub fn simpson_complex(values: &[C64], dx: f64) -> C64 {
    simpson_weights(values.len(), dx).iter().zip(values).map(|(w, v)| v * *w).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk15_integrates_smooth_functions() {
        let (v, _) = gauss_kronrod15(&|x: f64| x.cos(), 0.0, 1.0);
        assert!((v - 1f64.sin()).abs() < 1e-15);
        let v = adaptive(&|x: f64| (-x * x).exp(), -8.0, 8.0, 1e-14, 0.0);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn cumulative_integral_is_consistent() {
        let f = |t: f64| t.cos();
        let nodes: Vec<f64> = (0..=64).map(|k| k as f64 * 0.1).collect();
        let c = CumulativeIntegral::build(&f, nodes, 0.0, 1e-14);
        for &t in &[0.0, 0.05, 1.234, 3.3, 6.4] {
            assert!((c.eval(&f, t) - t.sin()).abs() < 1e-13, "t={t}");
        }
        let c = CumulativeIntegral::build(&f, (0..=64).map(|k| k as f64 * 0.1).collect(), 2.0, 1e-14);
        assert!((c.eval(&f, 0.3) - (0.3f64.sin() - 2f64.sin())).abs() < 1e-13);
    }

    #[test]
    fn simpson_handles_odd_and_even_counts() {
        for n in [257usize, 2048] {
            let dx = 2.0 / (n - 1) as f64;
            // both rules are exact for cubics
            let v: Vec<C64> = (0..n)
                .map(|i| -1.0 + i as f64 * dx)
                .map(|x| C64::new(x.powi(3) + x * x, 0.0))
                .collect();
            assert!((simpson_complex(&v, dx).re - 2.0 / 3.0).abs() < 1e-13, "n={n}");
        }
    }
}
