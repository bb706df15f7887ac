//! Closed-form wavefunctions and auxiliary solutions.
//!
//! Every evaluator hands out a per-time [`WaveSlice`] whose x-dependence is
//! evaluated as a [`Jet`], so x-derivatives of any order are analytic.
//! Powers of the unit phasor `(u + i v)/rho` are taken through the continuous
//! angle from [`PhaseTracker`].

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use crate::classical::{BasisSnapshot, ClassicalBasis, Trajectory};
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::specfun::{hermite_jets, laguerre_jets, ln_gamma};
use crate::system::{InverseSquareSystemSpec, QuadraticSystemSpec};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Physical,
    Auxiliary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Line,
    /// `x > 0`
    HalfLine,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct WaveInfo {
    pub label: String,
    pub family: Family,
    pub domain: Domain,
    pub index: i64,
    pub hbar: f64,
}

/// A wavefunction frozen at one instant.
pub trait WaveSlice: Send + Sync {
    /// Taylor jet of the function around `x` up to `order`.
    fn taylor(&self, x: f64, order: usize) -> Result<Jet>;
}

/// A solution (or candidate solution) of a time-dependent Schrodinger
/// equation.
pub trait WaveFunction: Send + Sync {
    fn info(&self) -> &WaveInfo;

    fn at(&self, t: f64) -> Result<Box<dyn WaveSlice + '_>>;

    /// Highest x-derivative the evaluator can supply.
    fn max_order(&self) -> usize {
        usize::MAX
    }

    /// The value and its x-derivatives up to `order`.
    fn eval(&self, t: f64, x: f64, order: usize) -> Result<Vec<C64>> {
        check_order(self, order)?;
        Ok(self.at(t)?.taylor(x, order)?.derivatives())
    }

    fn value(&self, t: f64, x: f64) -> Result<C64> {
        Ok(self.at(t)?.taylor(x, 0)?.value())
    }
}

pub fn check_order<W: WaveFunction + ?Sized>(w: &W, order: usize) -> Result<()> {
    if order > w.max_order() {
        return Err(Error::Capability { requested: order, available: w.max_order() });
    }
    Ok(())
}

pub type SharedWave = Arc<dyn WaveFunction>;

/// Continuous branch of `arg(u + i v)` tabulated on a time grid.
///
/// `[(u - i v)/rho]^s` is `exp(-i s phi)` and `[(u + i v)/rho]^s` is
/// `exp(i s phi)`. The angle is principal at the grid node nearest the
/// anchor time and unwrapped outwards from there.
#[derive(Clone, Debug)]
pub struct PhaseTracker {
    nodes: Vec<f64>,
    angles: Vec<f64>,
}

impl PhaseTracker {
    pub fn new(u: &dyn Trajectory, v: &dyn Trajectory, nodes: Vec<f64>) -> Self {
        Self::anchored(u, v, nodes, None)
    }

    pub fn anchored(u: &dyn Trajectory, v: &dyn Trajectory, nodes: Vec<f64>, t0: Option<f64>) -> Self {
        assert!(nodes.len() >= 2);
        let raw: Vec<f64> = nodes.iter().map(|&t| v.state(t).0.atan2(u.state(t).0)).collect();
        let anchor = match t0 {
            Some(t) => {
                let k = crate::quadrature::left_index(&nodes, t);
                if (nodes[k + 1] - t).abs() < (t - nodes[k]).abs() {
                    k + 1
                } else {
                    k
                }
            }
            None => 0,
        };
        let mut angles = raw.clone();
        for k in anchor + 1..nodes.len() {
            angles[k] = unwrap_near(raw[k], angles[k - 1]);
        }
        for k in (0..anchor).rev() {
            angles[k] = unwrap_near(raw[k], angles[k + 1]);
        }
        PhaseTracker { nodes, angles }
    }

    /// Continuous angle at `t` given `u(t)` and `v(t)`.
    pub fn phase(&self, u: f64, v: f64, t: f64) -> f64 {
        let k = crate::quadrature::left_index(&self.nodes, t);
        let k = if (self.nodes[k + 1] - t).abs() < (t - self.nodes[k]).abs() { k + 1 } else { k };
        unwrap_near(v.atan2(u), self.angles[k])
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }
}

fn unwrap_near(raw: f64, reference: f64) -> f64 {
    raw + 2.0 * PI * ((reference - raw) / (2.0 * PI)).round()
}

/// `amp * exp(q (x-c)^2 + q2 x^2 + q1 x) * H_n(s (x-c))`
struct GaussHermite {
    amp: C64,
    center: f64,
    q: C64,
    q2: C64,
    q1: C64,
    s: C64,
    n: usize,
}

impl WaveSlice for GaussHermite {
    fn taylor(&self, x: f64, order: usize) -> Result<Jet> {
        let xj = Jet::variable(x, order);
        let d = &xj - &Jet::real(self.center, order);
        let expo = &(&d * &d) * self.q + &(&xj * &xj) * self.q2 + &xj * self.q1;
        let h = hermite_jets(self.n, &(&d * self.s));
        Ok((expo.exp() * &h[self.n]).scale(self.amp))
    }
}

/// `amp * (k x^2)^p * exp(q x^2) * L_n^alpha(sign k x^2)` on `x > 0`
struct GaussLaguerre {
    amp: C64,
    k: f64,
    p: f64,
    q: C64,
    sign: f64,
    n: usize,
    alpha: f64,
}

impl WaveSlice for GaussLaguerre {
    fn taylor(&self, x: f64, order: usize) -> Result<Jet> {
        if !(x > 0.0) {
            return Err(Error::HalfLine { x });
        }
        let xj = Jet::variable(x, order);
        let x2 = &xj * &xj;
        let power = xj.powc(C64::new(2.0 * self.p, 0.0));
        let l = laguerre_jets(self.n, self.alpha, &(&x2 * (self.sign * self.k)));
        let amp = self.amp * self.k.powf(self.p);
        Ok((power * (&x2 * self.q).exp() * &l[self.n]).scale(amp))
    }
}

fn ln_hermite_norm(n: usize) -> f64 {
    // ln sqrt(2^n n!)
    0.5 * (n as f64 * std::f64::consts::LN_2 + ln_gamma(n as f64 + 1.0))
}

/// Unit-mass, unit-frequency oscillator in its own time `tau`.
#[derive(Clone, Debug)]
pub struct SimpleOscillatorState {
    info: WaveInfo,
    n: usize,
}

/// Normalized eigenstate `psi_n^s(tau, x)`.
pub fn psi_simple(n: usize, hbar: f64) -> Result<SimpleOscillatorState> {
    check_hbar(hbar)?;
    Ok(SimpleOscillatorState {
        info: WaveInfo { label: format!("psi_s[{n}]"), family: Family::Physical, domain: Domain::Line, index: n as i64, hbar },
        n,
    })
}

/// Growing auxiliary solution `v_n^s`; zero-free only for even `n`.
pub fn aux_simple(n: usize, hbar: f64) -> Result<SimpleOscillatorState> {
    if n % 2 == 1 {
        return Err(Error::InvalidIndex(format!("auxiliary index {n} must be even; odd orders vanish at x = 0")));
    }
    aux_simple_unchecked(n, hbar)
}

/// [`aux_simple`] without the parity check.
pub fn aux_simple_unchecked(n: usize, hbar: f64) -> Result<SimpleOscillatorState> {
    check_hbar(hbar)?;
    Ok(SimpleOscillatorState {
        info: WaveInfo { label: format!("v_s[{n}]"), family: Family::Auxiliary, domain: Domain::Line, index: n as i64, hbar },
        n,
    })
}

fn check_hbar(hbar: f64) -> Result<()> {
    if !(hbar > 0.0 && hbar.is_finite()) {
        return Err(Error::Config(format!("hbar must be positive, got {hbar}")));
    }
    Ok(())
}

impl WaveFunction for SimpleOscillatorState {
    fn info(&self) -> &WaveInfo {
        &self.info
    }

    fn at(&self, tau: f64) -> Result<Box<dyn WaveSlice + '_>> {
        let hbar = self.info.hbar;
        let e = (self.n as f64 + 0.5) * tau;
        let slice = match self.info.family {
            Family::Physical => GaussHermite {
                amp: C64::from_polar((-ln_hermite_norm(self.n) - 0.25 * (PI * hbar).ln()).exp(), -e),
                center: 0.0,
                q: C64::new(-0.5 / hbar, 0.0),
                q2: C64::new(0.0, 0.0),
                q1: C64::new(0.0, 0.0),
                s: C64::new(hbar.sqrt().recip(), 0.0),
                n: self.n,
            },
            Family::Auxiliary => GaussHermite {
                amp: C64::from_polar(1.0, e),
                center: 0.0,
                q: C64::new(0.5 / hbar, 0.0),
                q2: C64::new(0.0, 0.0),
                q1: C64::new(0.0, 0.0),
                s: C64::new(0.0, hbar.sqrt().recip()),
                n: self.n,
            },
        };
        Ok(Box::new(slice))
    }
}

/// Wavefunctions of the generalized quadratic system.
#[derive(Clone)]
pub struct QuadraticState {
    info: WaveInfo,
    n: usize,
    spec: Arc<QuadraticSystemSpec>,
    basis: Arc<ClassicalBasis>,
}

impl std::fmt::Debug for QuadraticState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QuadraticState").field("info", &self.info).finish()
    }
}

/// Normalized `psi_m^Q` built on the basis `{u, v, xp}`; needs `Omega > 0`.
pub fn psi_quadratic(m: usize, spec: Arc<QuadraticSystemSpec>, basis: Arc<ClassicalBasis>) -> Result<QuadraticState> {
    if !(basis.omega() > 0.0) {
        return Err(Error::DegenerateBasis { omega: basis.omega() });
    }
    check_hbar(spec.hbar)?;
    Ok(QuadraticState {
        info: WaveInfo { label: format!("psi_Q[{m}]"), family: Family::Physical, domain: Domain::Line, index: m as i64, hbar: spec.hbar },
        n: m,
        spec,
        basis,
    })
}

/// Auxiliary `v_n^Q` built on the (tilded) basis; `n` must be even.
pub fn aux_quadratic(n: usize, spec: Arc<QuadraticSystemSpec>, basis: Arc<ClassicalBasis>) -> Result<QuadraticState> {
    if n % 2 == 1 {
        return Err(Error::InvalidIndex(format!("auxiliary index {n} must be even")));
    }
    aux_quadratic_unchecked(n, spec, basis)
}

/// [`aux_quadratic`] without the parity check; odd orders have a zero.
pub fn aux_quadratic_unchecked(n: usize, spec: Arc<QuadraticSystemSpec>, basis: Arc<ClassicalBasis>) -> Result<QuadraticState> {
    if !(basis.omega() > 0.0) {
        return Err(Error::DegenerateBasis { omega: basis.omega() });
    }
    check_hbar(spec.hbar)?;
    Ok(QuadraticState {
        info: WaveInfo { label: format!("v_Q[{n}]"), family: Family::Auxiliary, domain: Domain::Line, index: n as i64, hbar: spec.hbar },
        n,
        spec,
        basis,
    })
}

impl QuadraticState {
    pub fn basis(&self) -> &Arc<ClassicalBasis> {
        &self.basis
    }

    pub fn spec(&self) -> &Arc<QuadraticSystemSpec> {
        &self.spec
    }

    pub fn quantum_number(&self) -> usize {
        self.n
    }
}

impl WaveFunction for QuadraticState {
    fn info(&self) -> &WaveInfo {
        &self.info
    }

    fn at(&self, t: f64) -> Result<Box<dyn WaveSlice + '_>> {
        let q = self.spec.coefficients(t)?;
        let s: BasisSnapshot = self.basis.snapshot(t);
        let hbar = self.spec.hbar;
        let om = s.omega;
        let nn = self.n as f64 + 0.5;
        let gauge = (s.delta + s.f_integral) / hbar;
        let breathing = q.mass * s.rho_dot / s.rho;
        let q2 = C64::new(0.0, q.mass * q.a / hbar);
        let q1 = C64::new(0.0, (q.mass * s.xp_dot + q.b) / hbar);
        let scale = (om / hbar).sqrt() / s.rho;
        let slice = match self.info.family {
            Family::Physical => {
                let ln_mod = -ln_hermite_norm(self.n) + 0.25 * (om / (PI * hbar)).ln() - 0.5 * s.rho.ln();
                GaussHermite {
                    amp: C64::from_polar(ln_mod.exp(), gauge - nn * s.phase),
                    center: s.xp,
                    q: C64::new(-om / (s.rho * s.rho), breathing) / (2.0 * hbar),
                    q2,
                    q1,
                    s: C64::new(scale, 0.0),
                    n: self.n,
                }
            }
            Family::Auxiliary => GaussHermite {
                amp: C64::from_polar((om.sqrt() / s.rho).sqrt(), gauge + nn * s.phase),
                center: s.xp,
                q: C64::new(om / (s.rho * s.rho), breathing) / (2.0 * hbar),
                q2,
                q1,
                s: C64::new(0.0, scale),
                n: self.n,
            },
        };
        Ok(Box::new(slice))
    }
}

/// Wavefunctions of the inverse-square system on the half line.
#[derive(Clone)]
pub struct InverseSquareState {
    info: WaveInfo,
    n: usize,
    spec: Arc<InverseSquareSystemSpec>,
    basis: Arc<ClassicalBasis>,
    omega0: Option<f64>,
}

impl std::fmt::Debug for InverseSquareState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InverseSquareState").field("info", &self.info).field("omega0", &self.omega0).finish()
    }
}

/// Normalized `psi_n^in`; square-integrable for `alpha > -1`.
pub fn psi_inverse_square(n: usize, spec: Arc<InverseSquareSystemSpec>, basis: Arc<ClassicalBasis>) -> Result<InverseSquareState> {
    check_inverse_square(&spec, &basis)?;
    Ok(InverseSquareState {
        info: WaveInfo {
            label: format!("psi_in[{n}]"),
            family: Family::Physical,
            domain: Domain::HalfLine,
            index: n as i64,
            hbar: spec.hbar,
        },
        n,
        spec,
        basis,
        omega0: None,
    })
}

/// Auxiliary `v_n^in`, zero-free on the half line. `omega0` replaces the
/// basis Omega in the Gaussian and Laguerre argument; anything other than the
/// basis value no longer solves the Schrodinger equation.
pub fn aux_inverse_square(
    n: usize,
    spec: Arc<InverseSquareSystemSpec>,
    basis: Arc<ClassicalBasis>,
    omega0: Option<f64>,
) -> Result<InverseSquareState> {
    check_inverse_square(&spec, &basis)?;
    if let Some(w) = omega0 {
        if !(w > 0.0) {
            return Err(Error::Config(format!("omega0 must be positive, got {w}")));
        }
    }
    Ok(InverseSquareState {
        info: WaveInfo {
            label: format!("v_in[{n}]"),
            family: Family::Auxiliary,
            domain: Domain::HalfLine,
            index: n as i64,
            hbar: spec.hbar,
        },
        n,
        spec,
        basis,
        omega0,
    })
}

fn check_inverse_square(spec: &InverseSquareSystemSpec, basis: &ClassicalBasis) -> Result<()> {
    if !(spec.alpha() > -1.0) {
        return Err(Error::InvalidCoupling(format!("alpha = {} must exceed -1", spec.alpha())));
    }
    if !(basis.omega() > 0.0) {
        return Err(Error::DegenerateBasis { omega: basis.omega() });
    }
    check_hbar(spec.hbar)
}

impl InverseSquareState {
    pub fn basis(&self) -> &Arc<ClassicalBasis> {
        &self.basis
    }

    pub fn spec(&self) -> &Arc<InverseSquareSystemSpec> {
        &self.spec
    }

    pub fn quantum_number(&self) -> usize {
        self.n
    }
}

impl WaveFunction for InverseSquareState {
    fn info(&self) -> &WaveInfo {
        &self.info
    }

    fn at(&self, t: f64) -> Result<Box<dyn WaveSlice + '_>> {
        let (m, a, _) = self.spec.coefficients(t)?;
        let s = self.basis.snapshot(t);
        let hbar = self.spec.hbar;
        let alpha = self.spec.alpha();
        let nn = 2.0 * self.n as f64 + alpha + 1.0;
        let rho2 = s.rho * s.rho;
        let breathing = m * s.rho_dot / s.rho + 2.0 * m * a;
        let p = (2.0 * alpha + 1.0) / 4.0;
        let slice = match self.info.family {
            Family::Physical => {
                let k = s.omega / (hbar * rho2);
                let ln_mod = 0.25 * (4.0 * k).ln()
                    + 0.5 * (ln_gamma(self.n as f64 + 1.0) - ln_gamma(self.n as f64 + alpha + 1.0));
                GaussLaguerre {
                    amp: C64::from_polar(ln_mod.exp(), -nn * s.phase),
                    k,
                    p,
                    q: C64::new(-s.omega / rho2, breathing) / (2.0 * hbar),
                    sign: 1.0,
                    n: self.n,
                    alpha,
                }
            }
            Family::Auxiliary => {
                let om0 = self.omega0.unwrap_or(s.omega);
                GaussLaguerre {
                    amp: C64::from_polar(s.rho.sqrt().recip(), nn * s.phase),
                    k: om0 / (hbar * rho2),
                    p,
                    q: C64::new(om0 / rho2, breathing) / (2.0 * hbar),
                    sign: -1.0,
                    n: self.n,
                    alpha,
                }
            }
        };
        Ok(Box::new(slice))
    }
}

/// Linear combination of wavefunctions sharing a domain.
pub struct SumWave {
    info: WaveInfo,
    terms: Vec<(C64, SharedWave)>,
}

impl SumWave {
    pub fn new(label: impl Into<String>, terms: Vec<(C64, SharedWave)>) -> Result<Self> {
        let first = terms.first().ok_or_else(|| Error::Config("empty superposition".into()))?;
        let domain = first.1.info().domain;
        let hbar = first.1.info().hbar;
        if terms.iter().any(|(_, w)| w.info().domain != domain) {
            return Err(Error::Config("superposed states must share a domain".into()));
        }
        let family = if terms.iter().all(|(_, w)| w.info().family == Family::Physical) {
            Family::Physical
        } else {
            Family::Auxiliary
        };
        Ok(SumWave { info: WaveInfo { label: label.into(), family, domain, index: -1, hbar }, terms })
    }
}

struct SumSlice<'a> {
    parts: Vec<(C64, Box<dyn WaveSlice + 'a>)>,
}

impl WaveSlice for SumSlice<'_> {
    fn taylor(&self, x: f64, order: usize) -> Result<Jet> {
        let mut acc = Jet::real(0.0, order);
        for (c, s) in &self.parts {
            acc = acc + s.taylor(x, order)?.scale(*c);
        }
        Ok(acc)
    }
}

impl WaveFunction for SumWave {
    fn info(&self) -> &WaveInfo {
        &self.info
    }

    fn max_order(&self) -> usize {
        self.terms.iter().map(|(_, w)| w.max_order()).min().unwrap_or(0)
    }

    fn at(&self, t: f64) -> Result<Box<dyn WaveSlice + '_>> {
        let parts = self.terms.iter().map(|(c, w)| Ok((*c, w.at(t)?))).collect::<Result<Vec<_>>>()?;
        Ok(Box::new(SumSlice { parts }))
    }
}

pub type DerivativeFn = dyn Fn(f64, f64, usize) -> Vec<C64> + Send + Sync;

/// User-supplied function returning `[f, f', ..., f^(order)]` at `(t, x)`.
pub struct ClosureWave {
    info: WaveInfo,
    f: Arc<DerivativeFn>,
    max_order: usize,
}

impl ClosureWave {
    pub fn new(info: WaveInfo, max_order: usize, f: Arc<DerivativeFn>) -> Self {
        ClosureWave { info, f, max_order }
    }
}

struct ClosureSlice<'a> {
    t: f64,
    w: &'a ClosureWave,
}

impl WaveSlice for ClosureSlice<'_> {
    fn taylor(&self, x: f64, order: usize) -> Result<Jet> {
        check_order(self.w, order)?;
        let d = (self.w.f)(self.t, x, order);
        if d.len() != order + 1 {
            return Err(Error::Capability { requested: order, available: d.len().saturating_sub(1) });
        }
        Ok(Jet::from_derivatives(&d))
    }
}

impl WaveFunction for ClosureWave {
    fn info(&self) -> &WaveInfo {
        &self.info
    }

    fn max_order(&self) -> usize {
        self.max_order
    }

    fn at(&self, t: f64) -> Result<Box<dyn WaveSlice + '_>> {
        Ok(Box::new(ClosureSlice { t, w: self }))
    }
}

/// Writes `t,x,re,im,abs2` rows for every `(t, x)` pair.
pub fn write_csv<W: Write>(out: &mut W, wave: &dyn WaveFunction, times: &[f64], xs: &[f64]) -> Result<()> {
    let io = |e: std::io::Error| Error::Config(format!("write failed: {e}"));
    writeln!(out, "t,x,re,im,abs2").map_err(io)?;
    for &t in times {
        let slice = wave.at(t)?;
        for &x in xs {
            let v = slice.taylor(x, 0)?.value();
            writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", t, x, v.re, v.im, v.norm_sqr()).map_err(io)?;
        }
    }
    Ok(())
}
