//! Independent numerical checks: Schrodinger residuals, inner products,
//! Rayleigh quotients, zero scans, a Crank-Nicolson propagator and tracking
//! of the moving potential feature.

use serde::Serialize;

use crate::darboux::{OperatorSlice, SchrodingerOperator};
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::quadrature::{gauss_kronrod15, simpson_weights};
use crate::states::{check_order, Domain, WaveFunction, WaveSlice};
use crate::C64;

pub const MIN_POINTS: usize = 257;
/// `|W| / (|W| + sqrt(hbar) |W'|)` below this counts as a zero.
pub const ZERO_RATIO: f64 = 1e-6;
/// Edge density relative to the peak above which coverage is flagged.
pub const TAIL_WARNING: f64 = 1e-14;
const GRADED_PANELS: usize = 128;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    pub t_samples: Vec<f64>,
    pub half_line: bool,
    /// natural length `sqrt(hbar)`; sets the half-line cutoff and the
    /// zero-scan scale
    pub length: f64,
    /// time scale of the scenario; the residual uses `dt = 1e-5 * time_scale`
    pub time_scale: f64,
}

impl Grid {
    pub fn uniform(x_min: f64, x_max: f64, n_points: usize, hbar: f64) -> Result<Self> {
        if n_points < MIN_POINTS {
            return Err(Error::Grid(format!("{n_points} points, need at least {MIN_POINTS}")));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::Grid(format!("empty range [{x_min}, {x_max}]")));
        }
        if !(hbar > 0.0) {
            return Err(Error::Grid(format!("hbar must be positive, got {hbar}")));
        }
        Ok(Grid {
            x_min,
            x_max,
            n_points,
            t_samples: vec![0.0],
            half_line: false,
            length: hbar.sqrt(),
            time_scale: std::f64::consts::TAU,
        })
    }

    /// `|x| <= half_width`
    pub fn symmetric(half_width: f64, n_points: usize, hbar: f64) -> Result<Self> {
        Self::uniform(-half_width, half_width, n_points, hbar)
    }

    /// `(eps0, x_max]` with `eps0 = 1e-6 sqrt(hbar)`.
    pub fn half_line(x_max: f64, n_points: usize, hbar: f64) -> Result<Self> {
        let eps0 = 1e-6 * hbar.max(0.0).sqrt();
        let mut g = Self::uniform(eps0, x_max, n_points, hbar)?;
        g.half_line = true;
        Ok(g)
    }

    pub fn for_domain(domain: Domain, extent: f64, n_points: usize, hbar: f64) -> Result<Self> {
        match domain {
            Domain::Line => Self::symmetric(extent, n_points, hbar),
            Domain::HalfLine => Self::half_line(extent, n_points, hbar),
        }
    }

    pub fn with_times(mut self, times: Vec<f64>) -> Self {
        self.t_samples = times;
        self
    }

    pub fn with_time_scale(mut self, t: f64) -> Self {
        self.time_scale = t;
        self
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.x_min + self.x_max)
    }

    /// Same range with at least `min_points` points.
    pub fn refined(&self, min_points: usize) -> Result<Self> {
        let mut g = self.clone();
        if g.n_points < min_points {
            // keep an odd count so a symmetric grid contains the origin
            g.n_points = min_points | 1;
        }
        Ok(g)
    }

    pub fn domain(&self) -> Domain {
        if self.half_line {
            Domain::HalfLine
        } else {
            Domain::Line
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualAtTime {
    pub t: f64,
    pub relative_l2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    pub relative_l2: f64,
    /// `max |r|` over `max(|H psi|, |i hbar psi_t|)`
    pub sup_residual: f64,
    pub sup_location: (f64, f64),
    pub per_t: Vec<ResidualAtTime>,
}

/// Pointwise `i hbar psi_t - H psi` together with both terms.
pub fn residual_samples(op: &SchrodingerOperator, psi: &dyn WaveFunction, t: f64, xs: &[f64], dt: f64) -> Result<Vec<[C64; 3]>> {
    check_order(psi, 2)?;
    let os = op.slice(t)?;
    let hbar = op.hbar();
    let here = psi.at(t)?;
    let shifted: Vec<Box<dyn WaveSlice + '_>> =
        [-2.0, -1.0, 1.0, 2.0].iter().map(|k| psi.at(t + k * dt)).collect::<Result<_>>()?;
    let point = |&x: &f64| -> Result<[C64; 3]> {
        let f: Vec<C64> = shifted.iter().map(|s| Ok(s.taylor(x, 0)?.value())).collect::<Result<_>>()?;
        let psi_t = (f[0] - f[1] * 8.0 + f[2] * 8.0 - f[3]) / (12.0 * dt);
        let lhs = C64::new(0.0, hbar) * psi_t;
        let h = os.apply(x, &here.taylor(x, 2)?)?;
        Ok([lhs - h, lhs, h])
    };
    crate::par::map(xs, point).into_iter().collect()
}

/// Relative L2 residual of the Schrodinger equation over the grid points and
/// `grid.t_samples`, with `d/dt` by a fourth-order central difference.
pub fn schrodinger_residual(op: &SchrodingerOperator, psi: &dyn WaveFunction, grid: &Grid) -> Result<ResidualReport> {
    let xs = grid.points();
    let dt = 1e-5 * grid.time_scale;
    let (mut r2, mut l2, mut h2) = (0.0, 0.0, 0.0);
    let (mut sup_r, mut sup_lhs, mut sup_h) = (0.0f64, 0.0f64, 0.0f64);
    let mut sup_location = (grid.t_samples.first().copied().unwrap_or(0.0), xs[0]);
    let mut per_t = Vec::with_capacity(grid.t_samples.len());
    for &t in &grid.t_samples {
        let samples = residual_samples(op, psi, t, &xs, dt)?;
        let (mut rt, mut lt, mut ht) = (0.0, 0.0, 0.0);
        for (s, &x) in samples.iter().zip(&xs) {
            let [r, lhs, h] = *s;
            if !(r.norm().is_finite()) {
                return Err(Error::NonFinite { t, x });
            }
            rt += r.norm_sqr();
            lt += lhs.norm_sqr();
            ht += h.norm_sqr();
            if r.norm() > sup_r {
                sup_r = r.norm();
                sup_location = (t, x);
            }
            sup_lhs = sup_lhs.max(lhs.norm());
            sup_h = sup_h.max(h.norm());
        }
        per_t.push(ResidualAtTime { t, relative_l2: relative(rt, lt, ht) });
        r2 += rt;
        l2 += lt;
        h2 += ht;
    }
    let denom = sup_lhs.max(sup_h);
    Ok(ResidualReport {
        relative_l2: relative(r2, l2, h2),
        sup_residual: if denom > 0.0 { sup_r / denom } else { sup_r },
        sup_location,
        per_t,
    })
}

fn relative(r2: f64, l2: f64, h2: f64) -> f64 {
    let d = l2.max(h2).sqrt();
    if d > 0.0 {
        r2.sqrt() / d
    } else {
        r2.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InnerProduct {
    pub value: C64,
    /// boundary integrand relative to its peak
    pub edge_ratio: f64,
    pub tail_warning: bool,
    /// half line only: the integrand behaves like `x^p` at the cutoff with
    /// `p <= -1`
    pub divergent: bool,
    pub origin_exponent: Option<f64>,
}

/// `int conj(a) b` over the grid range at time `t`. On the half line the
/// range `[eps0, sqrt(hbar)]` uses geometric GK15 panels and `[0, eps0]` a
/// power-law estimate.
pub fn norm_and_overlap(a: &dyn WaveFunction, b: &dyn WaveFunction, grid: &Grid, t: f64) -> Result<InnerProduct> {
    let sa = a.at(t)?;
    let sb = b.at(t)?;
    let jets = |x: f64, order: usize| -> Result<(Jet, Jet)> { Ok((sa.taylor(x, order)?, sb.taylor(x, order)?)) };
    let f = |x: f64| -> Result<C64> {
        let (ja, jb) = jets(x, 0)?;
        Ok(ja.value().conj() * jb.value())
    };
    let exponent = |x: f64| -> Result<f64> {
        let (ja, jb) = jets(x, 1)?;
        let pa = x * (ja.derivative(1) / ja.value()).re;
        let pb = x * (jb.derivative(1) / jb.value()).re;
        Ok(pa + pb)
    };
    integrate(grid, &f, &exponent)
}

pub fn norm(psi: &dyn WaveFunction, grid: &Grid, t: f64) -> Result<InnerProduct> {
    norm_and_overlap(psi, psi, grid, t)
}

fn integrate(
    grid: &Grid,
    f: &(dyn Fn(f64) -> Result<C64> + Sync),
    exponent: &dyn Fn(f64) -> Result<f64>,
) -> Result<InnerProduct> {
    if !grid.half_line {
        let xs = grid.points();
        let vals: Vec<C64> = crate::par::map(&xs, |&x| f(x)).into_iter().collect::<Result<_>>()?;
        let w = simpson_weights(xs.len(), grid.dx());
        let value = vals.iter().zip(&w).map(|(v, w)| v * *w).sum();
        let peak = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let edge = vals[0].norm().max(vals[vals.len() - 1].norm());
        let edge_ratio = if peak > 0.0 { edge / peak } else { 0.0 };
        return Ok(InnerProduct { value, edge_ratio, tail_warning: edge_ratio > TAIL_WARNING, divergent: false, origin_exponent: None });
    }
    let eps0 = grid.x_min;
    let knee = grid.length.min(grid.x_max);
    let p = exponent(eps0)?;
    let f0 = f(eps0)?;
    let divergent = p <= -1.0 || !p.is_finite();
    let mut value = if divergent { C64::new(f64::INFINITY, 0.0) } else { f0 * (eps0 / (p + 1.0)) };
    let mut peak = f0.norm();
    if knee > eps0 {
        let ratio = (knee / eps0).powf(1.0 / GRADED_PANELS as f64);
        let edges: Vec<f64> = (0..=GRADED_PANELS).map(|i| if i == GRADED_PANELS { knee } else { eps0 * ratio.powi(i as i32) }).collect();
        let panels: Vec<(f64, f64)> = edges.windows(2).map(|w| (w[0], w[1])).collect();
        let parts = crate::par::map(&panels, |&(lo, hi)| -> Result<(C64, f64)> {
            let err = std::cell::Cell::new(None);
            let pk = std::cell::Cell::new(0.0f64);
            let part = |which: u8| {
                gauss_kronrod15(
                    &|x| match f(x) {
                        Ok(v) => {
                            pk.set(pk.get().max(v.norm()));
                            if which == 0 {
                                v.re
                            } else {
                                v.im
                            }
                        }
                        Err(e) => {
                            err.set(Some(e));
                            f64::NAN
                        }
                    },
                    lo,
                    hi,
                )
                .0
            };
            let v = C64::new(part(0), part(1));
            match err.take() {
                Some(e) => Err(e),
                None => Ok((v, pk.get())),
            }
        });
        for part in parts {
            let (v, pk) = part?;
            value += v;
            peak = peak.max(pk);
        }
    }
    let mut edge = 0.0;
    if grid.x_max > knee {
        let n = (((grid.x_max - knee) / grid.dx()).ceil() as usize).max(MIN_POINTS);
        let dx = (grid.x_max - knee) / (n - 1) as f64;
        let xs: Vec<f64> = (0..n).map(|i| if i + 1 == n { grid.x_max } else { knee + i as f64 * dx }).collect();
        let vals: Vec<C64> = crate::par::map(&xs, |&x| f(x)).into_iter().collect::<Result<_>>()?;
        let w = simpson_weights(n, dx);
        value += vals.iter().zip(&w).map(|(v, w)| v * *w).sum::<C64>();
        peak = vals.iter().map(|v| v.norm()).fold(peak, f64::max);
        edge = vals[n - 1].norm();
    }
    let edge_ratio = if peak > 0.0 { edge / peak } else { 0.0 };
    Ok(InnerProduct { value, edge_ratio, tail_warning: edge_ratio > TAIL_WARNING, divergent, origin_exponent: Some(p) })
}

/// `Re <psi|H psi> / <psi|psi>` at time `t`.
pub fn rayleigh_quotient(op: &SchrodingerOperator, psi: &dyn WaveFunction, grid: &Grid, t: f64) -> Result<f64> {
    check_order(psi, 2)?;
    let os = op.slice(t)?;
    let s = psi.at(t)?;
    let num = |x: f64| -> Result<C64> {
        let j = s.taylor(x, 2)?;
        Ok(j.value().conj() * os.apply(x, &j)?)
    };
    let exponent = |x: f64| -> Result<f64> {
        let j = s.taylor(x, 1)?;
        Ok(2.0 * x * (j.derivative(1) / j.value()).re)
    };
    let top = integrate(grid, &num, &exponent)?.value;
    let bottom = norm(psi, grid, t)?.value.re;
    if !(bottom.abs() > 1e-300) {
        return Err(Error::DegenerateState { norm: bottom });
    }
    Ok(top.re / bottom)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZeroScan {
    /// smallest `|f| / (|f| + L |f'|)`
    pub min_ratio: f64,
    pub ratio_location: f64,
    /// `|f|` at that location
    pub value: f64,
    /// smallest `|f|` and where it occurs
    pub min_abs: f64,
    pub min_abs_location: f64,
}

impl ZeroScan {
    pub fn is_zero(&self) -> bool {
        !(self.min_ratio >= ZERO_RATIO)
    }
}

/// Scans `|f| / (|f| + L |f'|)` on the grid and refines local minima by
/// golden-section search. `L = sqrt(hbar)`, capped at `x` on the half line
/// so that power-law vanishing at the origin is not mistaken for a zero.
/// The ratio is scale free and equals 1 at stationary points.
pub fn scan_zeros(f: &(dyn Fn(f64) -> Result<Jet> + Sync), grid: &Grid) -> Result<ZeroScan> {
    let ratio = |x: f64| -> Result<(f64, f64)> {
        let j = f(x)?;
        let v = j.value().norm();
        let d = j.derivative(1).norm();
        let length = if grid.half_line { grid.length.min(x) } else { grid.length };
        let r = if v == 0.0 { 0.0 } else { v / (v + length * d) };
        if !r.is_finite() {
            return Err(Error::NonFinite { t: f64::NAN, x });
        }
        Ok((r, v))
    };
    let xs = grid.points();
    let vals: Vec<(f64, f64)> = crate::par::map(&xs, |&x| ratio(x)).into_iter().collect::<Result<_>>()?;
    let mut best = ZeroScan {
        min_ratio: f64::INFINITY,
        ratio_location: xs[0],
        value: f64::NAN,
        min_abs: f64::INFINITY,
        min_abs_location: xs[0],
    };
    let mut lowest = 0;
    for (i, &(r, v)) in vals.iter().enumerate() {
        if r < best.min_ratio {
            best.min_ratio = r;
            best.ratio_location = xs[i];
            best.value = v;
        }
        if v < vals[lowest].1 {
            lowest = i;
        }
    }
    for i in 1..xs.len() - 1 {
        let r = vals[i].0;
        if r <= vals[i - 1].0 && r <= vals[i + 1].0 && r < 0.1 && r > 0.0 {
            let (x, r) = golden_min(&|x| ratio(x).map(|p| p.0).unwrap_or(f64::INFINITY), xs[i - 1], xs[i + 1]);
            if r < best.min_ratio {
                best.min_ratio = r;
                best.ratio_location = x;
                best.value = ratio(x)?.1;
            }
        }
    }
    best.min_abs = vals[lowest].1;
    best.min_abs_location = xs[lowest];
    if lowest > 0 && lowest + 1 < xs.len() {
        let (x, v) = golden_min(&|x| ratio(x).map(|p| p.1).unwrap_or(f64::INFINITY), xs[lowest - 1], xs[lowest + 1]);
        if v < best.min_abs {
            best.min_abs = v;
            best.min_abs_location = x;
        }
    }
    Ok(best)
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Zero scan of a wave function at time `t`.
pub fn zero_free_scan(wave: &dyn WaveFunction, grid: &Grid, t: f64) -> Result<ZeroScan> {
    check_order(wave, 1)?;
    let s = wave.at(t)?;
    scan_zeros(&|x| s.taylor(x, 1), grid)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CnOptions {
    /// edge density relative to the peak that aborts the run
    pub leak_threshold: f64,
}

impl Default for CnOptions {
    fn default() -> Self {
        CnOptions { leak_threshold: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CnOutcome {
    #[serde(skip)]
    pub psi: Vec<C64>,
    /// max over steps of `| ||psi|| / ||psi_0|| - 1 |`
    pub norm_drift: f64,
    pub max_edge_ratio: f64,
}

/// Tridiagonal discretization of `H` on the interior grid points.
struct Tridiagonal {
    diag: Vec<C64>,
    /// `upper[j]` couples interior points `j` and `j + 1`
    upper: Vec<C64>,
}

fn discretize(os: &OperatorSlice<'_>, xs: &[f64], dx: f64) -> Result<Tridiagonal> {
    let kin = os.hbar * os.hbar / (2.0 * os.mass * dx * dx);
    let inner = &xs[1..xs.len() - 1];
    let diag = inner.iter().map(|&x| Ok(C64::new(2.0 * kin + os.potential(x)?, 0.0))).collect::<Result<Vec<_>>>()?;
    let upper = inner
        .windows(2)
        .map(|w| C64::new(-kin, -os.hbar * (os.r(w[0]) + os.r(w[1])) / (2.0 * dx)))
        .collect();
    Ok(Tridiagonal { diag, upper })
}

/// Solves `(1 + s H) y = rhs` for Hermitian tridiagonal `H` by the Thomas
/// algorithm.
fn thomas(h: &Tridiagonal, s: C64, rhs: &[C64]) -> Vec<C64> {
    let n = rhs.len();
    let one = C64::new(1.0, 0.0);
    let b: Vec<C64> = h.diag.iter().map(|d| one + s * d).collect();
    let up: Vec<C64> = h.upper.iter().map(|u| s * u).collect();
    let lo: Vec<C64> = h.upper.iter().map(|u| s * u.conj()).collect();
    let mut cp = vec![C64::new(0.0, 0.0); n];
    let mut dp = vec![C64::new(0.0, 0.0); n];
    cp[0] = if n > 1 { up[0] / b[0] } else { C64::new(0.0, 0.0) };
    dp[0] = rhs[0] / b[0];
    for i in 1..n {
        let m = b[i] - lo[i - 1] * cp[i - 1];
        if i < n - 1 {
            cp[i] = up[i] / m;
        }
        dp[i] = (rhs[i] - lo[i - 1] * dp[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        let next = dp[i + 1];
        dp[i] -= cp[i] * next;
    }
    dp
}

fn apply_tridiagonal(h: &Tridiagonal, s: C64, v: &[C64]) -> Vec<C64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let mut acc = h.diag[i] * v[i];
            if i + 1 < n {
                acc += h.upper[i] * v[i + 1];
            }
            if i > 0 {
                acc += h.upper[i - 1].conj() * v[i - 1];
            }
            v[i] + s * acc
        })
        .collect()
}

fn l2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Crank-Nicolson propagation with Dirichlet ends and coefficients frozen at
/// each step midpoint. The observer sees the full grid state after each step.
pub fn propagate_cn(
    op: &SchrodingerOperator,
    psi0: &[C64],
    grid: &Grid,
    t_span: (f64, f64),
    n_steps: usize,
    opts: &CnOptions,
    observer: &mut dyn FnMut(usize, f64, &[C64]),
) -> Result<CnOutcome> {
    let xs = grid.points();
    if psi0.len() != xs.len() {
        return Err(Error::Grid(format!("{} samples for {} grid points", psi0.len(), xs.len())));
    }
    if n_steps == 0 {
        return Err(Error::Grid("at least one time step is required".into()));
    }
    let dx = grid.dx();
    let hbar = op.hbar();
    let dt = (t_span.1 - t_span.0) / n_steps as f64;
    let s = C64::new(0.0, dt / (2.0 * hbar));
    let mut inner: Vec<C64> = psi0[1..psi0.len() - 1].to_vec();
    let n0 = l2(&inner);
    if !(n0 > 0.0) {
        return Err(Error::DegenerateState { norm: n0 });
    }
    let mut drift = 0.0f64;
    let mut max_edge = 0.0f64;
    let mut full = vec![C64::new(0.0, 0.0); xs.len()];
    for step in 0..n_steps {
        let t_mid = t_span.0 + (step as f64 + 0.5) * dt;
        let h = discretize(&op.slice(t_mid)?, &xs, dx)?;
        let rhs = apply_tridiagonal(&h, -s, &inner);
        inner = thomas(&h, s, &rhs);
        if inner.iter().any(|z| !z.is_finite()) {
            return Err(Error::Integration { t: t_mid, reason: format!("non-finite Crank-Nicolson state at step {step}") });
        }
        let nrm = l2(&inner);
        drift = drift.max((nrm / n0 - 1.0).abs());
        let peak = inner.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        let edge = inner[0].norm_sqr().max(inner[inner.len() - 1].norm_sqr()) / peak;
        max_edge = max_edge.max(edge);
        let t = t_span.0 + (step + 1) as f64 * dt;
        if edge > opts.leak_threshold {
            return Err(Error::BoundaryLeak { t, edge });
        }
        full[1..xs.len() - 1].copy_from_slice(&inner);
        observer(step + 1, t, &full);
    }
    full[1..xs.len() - 1].copy_from_slice(&inner);
    Ok(CnOutcome { psi: full, norm_drift: drift, max_edge_ratio: max_edge })
}

/// Samples of a wave function on the grid at time `t`.
pub fn sample(psi: &dyn WaveFunction, grid: &Grid, t: f64) -> Result<Vec<C64>> {
    let s = psi.at(t)?;
    crate::par::map(&grid.points(), |&x| Ok(s.taylor(x, 0)?.value())).into_iter().collect()
}

/// `||a - b|| / ||b||` in the discrete l2 sense.
pub fn relative_l2_deviation(a: &[C64], b: &[C64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    diff / l2(b)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExtremumSample {
    pub t: f64,
    pub x: f64,
    /// `dV(t, x) - dV(t, x_max)` at the extremum
    pub depth: f64,
}

/// Location of the largest `|dV(t, x) - dV(t, x_max)|` on the grid with
/// parabolic sub-grid refinement.
pub fn track_delta_v_extremum(
    delta_v: &(dyn Fn(f64, f64) -> Result<f64> + Sync),
    grid: &Grid,
    times: &[f64],
    hbar: f64,
) -> Result<Vec<ExtremumSample>> {
    let xs = grid.points();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let vals: Vec<f64> = crate::par::map(&xs, |&x| delta_v(t, x)).into_iter().collect::<Result<_>>()?;
        let reference = vals[vals.len() - 1];
        let dev: Vec<f64> = vals.iter().map(|v| (v - reference).abs()).collect();
        let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if hi - lo < 1e-12 * hbar {
            return Err(Error::FlatPotential { t, range: hi - lo });
        }
        let i = (0..dev.len()).max_by(|&a, &b| dev[a].total_cmp(&dev[b])).unwrap_or(0);
        let mut x = xs[i];
        if i > 0 && i + 1 < xs.len() {
            let (a, b, c) = (dev[i - 1], dev[i], dev[i + 1]);
            let den = a - 2.0 * b + c;
            if den != 0.0 {
                x += 0.5 * grid.dx() * (a - c) / den;
            }
        }
        out.push(ExtremumSample { t, x, depth: vals[i] - reference });
    }
    Ok(out)
}

/// Full width at half depth of the central feature of `dV(t, .)`, measured
/// relative to `asymptote`, by linear interpolation between grid points.
pub fn feature_width(delta_v: &(dyn Fn(f64) -> Result<f64> + Sync), grid: &Grid, asymptote: f64) -> Result<f64> {
    let xs = grid.points();
    let dev: Vec<f64> = crate::par::map(&xs, |&x| delta_v(x).map(|v| (v - asymptote).abs())).into_iter().collect::<Result<_>>()?;
    let i = (0..dev.len()).max_by(|&a, &b| dev[a].total_cmp(&dev[b])).unwrap_or(0);
    let half = 0.5 * dev[i];
    if !(half > 0.0) {
        return Err(Error::FlatPotential { t: f64::NAN, range: 0.0 });
    }
    let crossing = |j: usize, k: usize| xs[j] + (xs[k] - xs[j]) * (dev[j] - half) / (dev[j] - dev[k]);
    let mut left = None;
    for j in (0..i).rev() {
        if dev[j] < half {
            left = Some(crossing(j + 1, j));
            break;
        }
    }
    let mut right = None;
    for j in i + 1..dev.len() {
        if dev[j] < half {
            right = Some(crossing(j - 1, j));
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) => Ok(r - l),
        _ => Err(Error::Grid("feature extends past the grid".into())),
    }
}

#[cfg(test)]
mod tests;
