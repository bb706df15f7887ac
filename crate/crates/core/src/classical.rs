//! Classical solutions of `d/dt(M x') + M w^2 x = F` and the derived basis
//! quantities `rho`, `Omega`, `delta`, `tau` that parameterize every
//! closed-form wavefunction.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::{left_index, CumulativeIntegral};
use crate::states::PhaseTracker;
use crate::system::ClassicalEom;

/// A real classical path with its velocity.
pub trait Trajectory: Send + Sync {
    /// `(x(t), x'(t))`
    fn state(&self, t: f64) -> (f64, f64);
}

/// `x = A cos(w t) + B sin(w t)`: exact for constant mass and frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Harmonic {
    pub cos_amp: f64,
    pub sin_amp: f64,
    pub omega: f64,
}

impl Trajectory for Harmonic {
    fn state(&self, t: f64) -> (f64, f64) {
        let (s, c) = (self.omega * t).sin_cos();
        (
            self.cos_amp * c + self.sin_amp * s,
            self.omega * (self.sin_amp * c - self.cos_amp * s),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rtol: 1e-10, atol: 1e-12 }
    }
}

// Dormand-Prince 5(4)
const C: [f64; 6] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0];
const A: [[f64; 5]; 6] = [
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

type State = [f64; 2];

/// State is `(x, p = M x')`.
fn rhs(eom: &dyn ClassicalEom, forced: bool, t: f64, y: &State) -> State {
    let m = eom.mass(t).value;
    let f = if forced { eom.force(t) } else { 0.0 };
    [y[1] / m, -eom.stiffness(t) * y[0] + f]
}

/// One DP5 step; returns the fifth-order solution and the embedded error.
fn dp_step(eom: &dyn ClassicalEom, forced: bool, t: f64, y: &State, h: f64) -> (State, State) {
    let mut k = [[0.0; 2]; 7];
    for s in 0..6 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            ys[0] += h * A[s][j] * kj[0];
            ys[1] += h * A[s][j] * kj[1];
        }
        k[s] = rhs(eom, forced, t + C[s] * h, &ys);
    }
    let mut y5 = *y;
    for j in 0..6 {
        y5[0] += h * B5[j] * k[j][0];
        y5[1] += h * B5[j] * k[j][1];
    }
    k[6] = rhs(eom, forced, t + h, &y5);
    let mut err = [0.0; 2];
    for j in 0..7 {
        let e = B5[j] - B4[j];
        err[0] += h * e * k[j][0];
        err[1] += h * e * k[j][1];
    }
    (y5, err)
}

/// Numerically integrated path with dense output.
///
/// Between accepted nodes the solution is one fresh DP5 step of the exact
/// length from the node on the side of the initial time, which reproduces
/// the next node bit for bit and is smooth inside each interval.
#[derive(Clone)]
pub struct IntegratedTrajectory {
    eom: Arc<dyn ClassicalEom>,
    forced: bool,
    t_init: f64,
    times: Vec<f64>,
    states: Vec<State>,
}

impl std::fmt::Debug for IntegratedTrajectory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IntegratedTrajectory")
            .field("t_init", &self.t_init)
            .field("nodes", &self.times.len())
            .finish()
    }
}

fn integrate_leg(
    eom: &dyn ClassicalEom,
    forced: bool,
    t0: f64,
    y0: State,
    t_end: f64,
    tol: Tolerance,
) -> Result<Vec<(f64, State)>> {
    let mut out = vec![(t0, y0)];
    if t_end == t0 {
        return Ok(out);
    }
    let dir = (t_end - t0).signum();
    let span = (t_end - t0).abs();
    let mut h = dir * (span * 1e-3).min(0.01);
    let (mut t, mut y) = (t0, y0);
    let mut steps = 0usize;
    while (t_end - t) * dir > 0.0 {
        if (t + h - t_end) * dir > 0.0 {
            h = t_end - t;
        }
        let (y_new, err) = dp_step(eom, forced, t, &y, h);
        let mut e2 = 0.0;
        for i in 0..2 {
            let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
            e2 += (err[i] / sc).powi(2);
        }
        let e = (e2 / 2.0).sqrt();
        if !e.is_finite() || !y_new.iter().all(|v| v.is_finite()) {
            return Err(Error::Integration { t, reason: "non-finite state".into() });
        }
        if e <= 1.0 {
            t = if (t + h - t_end) * dir >= 0.0 { t_end } else { t + h };
            y = y_new;
            out.push((t, y));
        }
        let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h.abs() < 1e-14 * (1.0 + t.abs()) {
            return Err(Error::Integration { t, reason: "step size underflow".into() });
        }
        steps += 1;
        if steps > 5_000_000 {
            return Err(Error::Integration { t, reason: "step budget exhausted".into() });
        }
    }
    Ok(out)
}

impl IntegratedTrajectory {
    pub fn nodes(&self) -> &[f64] {
        &self.times
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.times[0], self.times[self.times.len() - 1])
    }

    fn raw_state(&self, t: f64) -> State {
        let k = left_index(&self.times, t);
        let (tl, tr) = (self.times[k], self.times[k + 1]);
        // step away from the node nearest the initial time
        let (base, y) = if tl >= self.t_init { (tl, self.states[k]) } else { (tr, self.states[k + 1]) };
        if t == base {
            return y;
        }
        dp_step(self.eom.as_ref(), self.forced, base, &y, t - base).0
    }
}

impl Trajectory for IntegratedTrajectory {
    fn state(&self, t: f64) -> (f64, f64) {
        let y = self.raw_state(t);
        (y[0], y[1] / self.eom.mass(t).value)
    }
}

/// Integrates the classical equation of motion from `(x0, xdot0)` at
/// `span.0` over `span` (padded by `pad` on both sides).
pub fn solve_eom(
    eom: Arc<dyn ClassicalEom>,
    x0: f64,
    xdot0: f64,
    span: (f64, f64),
    forced: bool,
    tol: Tolerance,
) -> Result<IntegratedTrajectory> {
    solve_eom_padded(eom, x0, xdot0, span, forced, tol, 0.0)
}

pub fn solve_eom_padded(
    eom: Arc<dyn ClassicalEom>,
    x0: f64,
    xdot0: f64,
    span: (f64, f64),
    forced: bool,
    tol: Tolerance,
    pad: f64,
) -> Result<IntegratedTrajectory> {
    if !(span.1 > span.0) {
        return Err(Error::Config(format!("empty time span {span:?}")));
    }
    let t0 = span.0;
    let m0 = eom.mass(t0).value;
    if !(m0 > 0.0) {
        return Err(Error::Integration { t: t0, reason: format!("mass {m0} is not positive") });
    }
    let y0 = [x0, m0 * xdot0];
    let back = integrate_leg(eom.as_ref(), forced, t0, y0, t0 - pad, tol)?;
    let fwd = integrate_leg(eom.as_ref(), forced, t0, y0, span.1 + pad, tol)?;
    let mut nodes: Vec<(f64, State)> = back.into_iter().skip(1).rev().collect();
    nodes.extend(fwd);
    if nodes.len() < 2 {
        return Err(Error::Integration { t: t0, reason: "no steps taken".into() });
    }
    let (times, states) = nodes.into_iter().unzip();
    Ok(IntegratedTrajectory { eom, forced, t_init: t0, times, states })
}

/// Everything a closed-form wavefunction needs from the classical basis at one
/// instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisSnapshot {
    pub t: f64,
    pub u: f64,
    pub udot: f64,
    pub v: f64,
    pub vdot: f64,
    pub rho: f64,
    pub rho_dot: f64,
    pub xp: f64,
    pub xp_dot: f64,
    pub omega: f64,
    pub mass: f64,
    /// `int_{t0}^t (M w^2 xp^2 - M xp'^2)/2`
    pub delta: f64,
    /// `int_{t0}^t f`
    pub f_integral: f64,
    /// continuous `arg(u + i v)`
    pub phase: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisOptions {
    /// absolute tolerance of the `delta` and `tau` quadratures
    pub quad_tol: f64,
    /// maximum spacing of the phase / quadrature node grid
    pub node_spacing: f64,
    /// nodes extend this far beyond the span for finite-difference stencils
    pub pad: f64,
}

impl Default for BasisOptions {
    fn default() -> Self {
        BasisOptions { quad_tol: 1e-13, node_spacing: 0.01, pad: 0.05 }
    }
}

/// Two homogeneous solutions `u, v` and a particular solution `xp` of the
/// classical equation, with the derived `rho`, `Omega`, `delta`, `tau`.
#[derive(Clone)]
pub struct ClassicalBasis {
    eom: Arc<dyn ClassicalEom>,
    u: Arc<dyn Trajectory>,
    v: Arc<dyn Trajectory>,
    xp: Arc<dyn Trajectory>,
    omega: f64,
    drift: f64,
    t0: f64,
    span: (f64, f64),
    delta: CumulativeIntegral,
    tau: CumulativeIntegral,
    f_int: CumulativeIntegral,
    phase: PhaseTracker,
}

impl std::fmt::Debug for ClassicalBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClassicalBasis")
            .field("omega", &self.omega)
            .field("drift", &self.drift)
            .field("span", &self.span)
            .finish()
    }
}

const OMEGA_SAMPLES: usize = 1025;
pub const DEGENERATE_OMEGA: f64 = 1e-12;
pub const MAX_OMEGA_DRIFT: f64 = 1e-6;

fn instantaneous_omega(eom: &dyn ClassicalEom, u: &dyn Trajectory, v: &dyn Trajectory, t: f64) -> f64 {
    let (uu, ud) = u.state(t);
    let (vv, vd) = v.state(t);
    eom.mass(t).value * (vd * uu - ud * vv)
}

fn samples(span: (f64, f64), n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| span.0 + (span.1 - span.0) * i as f64 / (n - 1) as f64)
}

/// Builds the basis; `Omega` is the average of `M (v' u - u' v)` over the span.
pub fn make_basis(
    eom: Arc<dyn ClassicalEom>,
    u: Arc<dyn Trajectory>,
    v: Arc<dyn Trajectory>,
    xp: Arc<dyn Trajectory>,
    span: (f64, f64),
    opts: BasisOptions,
) -> Result<ClassicalBasis> {
    if !(span.1 > span.0) {
        return Err(Error::Config(format!("empty time span {span:?}")));
    }
    let values: Vec<f64> = samples(span, OMEGA_SAMPLES)
        .map(|t| instantaneous_omega(eom.as_ref(), u.as_ref(), v.as_ref(), t))
        .collect();
    let omega = values.iter().sum::<f64>() / values.len() as f64;
    if !(omega.abs() >= DEGENERATE_OMEGA) {
        return Err(Error::DegenerateBasis { omega });
    }
    let drift = values.iter().map(|w| ((w - omega) / omega).abs()).fold(0.0, f64::max);
    if !(drift <= MAX_OMEGA_DRIFT) {
        return Err(Error::IllConditionedBasis { drift });
    }
    let t0 = span.0;
    let lo = span.0 - opts.pad;
    let hi = span.1 + opts.pad;
    let n = (((hi - lo) / opts.node_spacing).ceil() as usize).max(8);
    let nodes: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();

    let (delta, tau, f_int, phase) = {
        let delta_f = delta_integrand(eom.as_ref(), xp.as_ref());
        let tau_f = tau_integrand(eom.as_ref(), u.as_ref(), v.as_ref(), omega);
        let f_f = |t: f64| eom.energy_offset(t);
        (
            CumulativeIntegral::build(&delta_f, nodes.clone(), t0, opts.quad_tol),
            CumulativeIntegral::build(&tau_f, nodes.clone(), t0, opts.quad_tol),
            CumulativeIntegral::build(&f_f, nodes.clone(), t0, opts.quad_tol),
            PhaseTracker::anchored(u.as_ref(), v.as_ref(), nodes, Some(t0)),
        )
    };
    Ok(ClassicalBasis { eom, u, v, xp, omega, drift, t0, span, delta, tau, f_int, phase })
}

fn delta_integrand<'a>(eom: &'a dyn ClassicalEom, xp: &'a dyn Trajectory) -> impl Fn(f64) -> f64 + 'a {
    move |t| {
        let (x, xd) = xp.state(t);
        0.5 * eom.stiffness(t) * x * x - 0.5 * eom.mass(t).value * xd * xd
    }
}

fn tau_integrand<'a>(
    eom: &'a dyn ClassicalEom,
    u: &'a dyn Trajectory,
    v: &'a dyn Trajectory,
    omega: f64,
) -> impl Fn(f64) -> f64 + 'a {
    move |t| {
        let (uu, _) = u.state(t);
        let (vv, _) = v.state(t);
        omega / (eom.mass(t).value * (uu * uu + vv * vv))
    }
}

/// Zero particular solution (no driving).
#[derive(Clone, Copy, Debug)]
pub struct Rest;

impl Trajectory for Rest {
    fn state(&self, _t: f64) -> (f64, f64) {
        (0.0, 0.0)
    }
}

impl ClassicalBasis {
    /// Analytic basis `u = cos wt`, `v = c sin wt`, `xp = d cos wt` for
    /// constant mass and frequency without driving.
    pub fn harmonic(eom: Arc<dyn ClassicalEom>, c: f64, d: f64, span: (f64, f64)) -> Result<Self> {
        let m0 = eom.mass(span.0).value;
        let k0 = eom.stiffness(span.0);
        for t in samples(span, 257) {
            let m = eom.mass(t);
            let k = eom.stiffness(t);
            if (m.value - m0).abs() > 1e-14 * m0.abs()
                || m.rate != 0.0
                || (k - k0).abs() > 1e-14 * k0.abs()
                || eom.force(t) != 0.0
            {
                return Err(Error::Config(
                    "analytic basis presets need constant mass and frequency and no external force".into(),
                ));
            }
        }
        if !(m0 > 0.0 && k0 > 0.0) {
            return Err(Error::Config("analytic basis presets need positive mass and frequency".into()));
        }
        let w = (k0 / m0).sqrt();
        make_basis(
            eom,
            Arc::new(Harmonic { cos_amp: 1.0, sin_amp: 0.0, omega: w }),
            Arc::new(Harmonic { cos_amp: 0.0, sin_amp: c, omega: w }),
            Arc::new(Harmonic { cos_amp: d, sin_amp: 0.0, omega: w }),
            span,
            BasisOptions::default(),
        )
    }

    /// Numerically integrated basis from initial conditions `(x, x')` at the
    /// span start.
    pub fn integrated(
        eom: Arc<dyn ClassicalEom>,
        u0: (f64, f64),
        v0: (f64, f64),
        xp0: (f64, f64),
        span: (f64, f64),
        tol: Tolerance,
    ) -> Result<Self> {
        let opts = BasisOptions::default();
        let pad = opts.pad + 1e-3;
        let u = solve_eom_padded(eom.clone(), u0.0, u0.1, span, false, tol, pad)?;
        let v = solve_eom_padded(eom.clone(), v0.0, v0.1, span, false, tol, pad)?;
        let xp = solve_eom_padded(eom.clone(), xp0.0, xp0.1, span, true, tol, pad)?;
        make_basis(eom, Arc::new(u), Arc::new(v), Arc::new(xp), span, opts)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Relative Omega drift measured at construction.
    pub fn construction_drift(&self) -> f64 {
        self.drift
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn span(&self) -> (f64, f64) {
        self.span
    }

    pub fn eom(&self) -> &Arc<dyn ClassicalEom> {
        &self.eom
    }

    pub fn phase_tracker(&self) -> &PhaseTracker {
        &self.phase
    }

    pub fn u(&self, t: f64) -> (f64, f64) {
        self.u.state(t)
    }

    pub fn v(&self, t: f64) -> (f64, f64) {
        self.v.state(t)
    }

    pub fn xp(&self, t: f64) -> (f64, f64) {
        self.xp.state(t)
    }

    pub fn rho(&self, t: f64) -> f64 {
        let (u, _) = self.u.state(t);
        let (v, _) = self.v.state(t);
        u.hypot(v)
    }

    pub fn delta(&self, t: f64) -> f64 {
        let f = delta_integrand(self.eom.as_ref(), self.xp.as_ref());
        self.delta.eval(&f, t)
    }

    /// `tau(t) = int_{t0}^t Omega / (M rho^2)`
    pub fn tau(&self, t: f64) -> f64 {
        let f = tau_integrand(self.eom.as_ref(), self.u.as_ref(), self.v.as_ref(), self.omega);
        self.tau.eval(&f, t)
    }

    pub fn snapshot(&self, t: f64) -> BasisSnapshot {
        let (u, udot) = self.u.state(t);
        let (v, vdot) = self.v.state(t);
        let (xp, xp_dot) = self.xp.state(t);
        let rho = u.hypot(v);
        let f = |s: f64| self.eom.energy_offset(s);
        BasisSnapshot {
            t,
            u,
            udot,
            v,
            vdot,
            rho,
            rho_dot: (u * udot + v * vdot) / rho,
            xp,
            xp_dot,
            omega: self.omega,
            mass: self.eom.mass(t).value,
            delta: self.delta(t),
            f_integral: self.f_int.eval(&f, t),
            phase: self.phase.phase(u, v, t),
        }
    }
}

/// Maximum relative deviation of `M (v' u - u' v)` from `Omega` over `span`.
pub fn omega_drift(basis: &ClassicalBasis, span: (f64, f64)) -> f64 {
    samples(span, 2001)
        .map(|t| {
            let w = instantaneous_omega(basis.eom.as_ref(), basis.u.as_ref(), basis.v.as_ref(), t);
            ((w - basis.omega) / basis.omega).abs()
        })
        .fold(0.0, f64::max)
}

/// The untilded basis for physical states and the tilded one for auxiliaries.
#[derive(Clone, Debug)]
pub struct BasisPair {
    pub untilded: Arc<ClassicalBasis>,
    pub tilded: Arc<ClassicalBasis>,
}

impl BasisPair {
    pub fn new(untilded: Arc<ClassicalBasis>, tilded: Arc<ClassicalBasis>) -> Result<Self> {
        if untilded.span != tilded.span {
            return Err(Error::Config("basis pair must share the time span".into()));
        }
        Ok(BasisPair { untilded, tilded })
    }

    pub fn same(basis: Arc<ClassicalBasis>) -> Self {
        BasisPair { untilded: basis.clone(), tilded: basis }
    }

    pub fn is_shared(&self) -> bool {
        Arc::ptr_eq(&self.untilded, &self.tilded)
    }
}
