//! Physical systems: time-dependent coefficient profiles and the two model
//! Hamiltonians (generalized harmonic oscillator and inverse-square system).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value and time derivative of a profile at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub value: f64,
    pub rate: f64,
}

/// Serialized form of a profile, as it appears in scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileDef {
    Constant {
        value: f64,
    },
    /// `offset + amplitude * cos(omega * t + phase)`
    Cosine {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    /// Coefficients in ascending powers of t.
    Polynomial {
        coefficients: Vec<f64>,
    },
    Tabulated {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

/// Natural cubic spline; derivative is the exact derivative of the interpolant.
#[derive(Clone, Debug, PartialEq)]
struct Spline {
    t: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    fn new(t: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = t.len();
        if n < 3 || y.len() != n {
            return Err(Error::InvalidProfile(
                "tabulated profile needs >= 3 times and matching values".into(),
            ));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) || t.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile(
                "tabulated times must be finite and strictly increasing".into(),
            ));
        }
        // second derivatives with natural end conditions (Thomas sweep)
        let mut m = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = t[i] - t[i - 1];
            let h1 = t[i + 1] - t[i];
            let rhs = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            let diag = 2.0 * (h0 + h1) - h0 * c[i - 1];
            c[i] = h1 / diag;
            d[i] = (rhs - h0 * d[i - 1]) / diag;
        }
        for i in (1..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }
        Ok(Spline { t, y, m })
    }

    fn sample(&self, t: f64) -> Sample {
        let n = self.t.len();
        let i = match self.t.partition_point(|&ti| ti <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let (t0, t1) = (self.t[i], self.t[i + 1]);
        let h = t1 - t0;
        let a = (t1 - t) / h;
        let b = (t - t0) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let value = a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let rate = (self.y[i + 1] - self.y[i]) / h
            + (-(3.0 * a * a - 1.0) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        Sample { value, rate }
    }
}

/// An evaluable real function of time with its first derivative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileDef", into = "ProfileDef")]
pub struct CoefficientProfile {
    def: ProfileDef,
    spline: Option<Spline>,
}

impl TryFrom<ProfileDef> for CoefficientProfile {
    type Error = Error;

    fn try_from(def: ProfileDef) -> Result<Self> {
        let spline = match &def {
            ProfileDef::Constant { value } => {
                check_finite(&[*value])?;
                None
            }
            ProfileDef::Cosine { amplitude, omega, phase, offset } => {
                check_finite(&[*amplitude, *omega, *phase, *offset])?;
                None
            }
            ProfileDef::Polynomial { coefficients } => {
                check_finite(coefficients)?;
                None
            }
            ProfileDef::Tabulated { times, values } => {
                Some(Spline::new(times.clone(), values.clone())?)
            }
        };
        Ok(CoefficientProfile { def, spline })
    }
}

impl From<CoefficientProfile> for ProfileDef {
    fn from(p: CoefficientProfile) -> ProfileDef {
        p.def
    }
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidProfile("non-finite profile parameter".into()))
    }
}

impl CoefficientProfile {
    pub fn constant(value: f64) -> Self {
        Self::try_from(ProfileDef::Constant { value }).expect("finite constant")
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn cosine(amplitude: f64, omega: f64, phase: f64, offset: f64) -> Self {
        Self::try_from(ProfileDef::Cosine { amplitude, omega, phase, offset })
            .expect("finite cosine parameters")
    }

    pub fn polynomial(coefficients: Vec<f64>) -> Self {
        Self::try_from(ProfileDef::Polynomial { coefficients }).expect("finite coefficients")
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::try_from(ProfileDef::Tabulated { times, values })
    }

    pub fn def(&self) -> &ProfileDef {
        &self.def
    }

    /// Domain of definition; unbounded for analytic kinds.
    pub fn domain(&self) -> (f64, f64) {
        match &self.spline {
            Some(s) => (s.t[0], s.t[s.t.len() - 1]),
            None => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Checked evaluation: fails outside the domain.
    pub fn sample(&self, t: f64) -> Result<Sample> {
        let (start, end) = self.domain();
        if !(t >= start && t <= end) {
            return Err(Error::Domain { t, start, end });
        }
        Ok(self.sample_unchecked(t))
    }

    /// Evaluation without a domain check; tabulated profiles extrapolate the
    /// end cubic.
    pub fn sample_unchecked(&self, t: f64) -> Sample {
        match (&self.def, &self.spline) {
            (_, Some(s)) => s.sample(t),
            (ProfileDef::Constant { value }, _) => Sample { value: *value, rate: 0.0 },
            (ProfileDef::Cosine { amplitude, omega, phase, offset }, _) => {
                let arg = omega * t + phase;
                Sample {
                    value: offset + amplitude * arg.cos(),
                    rate: -amplitude * omega * arg.sin(),
                }
            }
            (ProfileDef::Polynomial { coefficients }, _) => {
                let mut value = 0.0;
                let mut rate = 0.0;
                for c in coefficients.iter().rev() {
                    rate = rate * t + value;
                    value = value * t + c;
                }
                Sample { value, rate }
            }
            (ProfileDef::Tabulated { .. }, None) => unreachable!("spline built at construction"),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.sample_unchecked(t).value
    }

    /// `Some(v)` when the profile is constant in time.
    pub fn as_constant(&self) -> Option<f64> {
        match &self.def {
            ProfileDef::Constant { value } => Some(*value),
            ProfileDef::Cosine { amplitude, omega, phase, offset } => {
                if *amplitude == 0.0 {
                    Some(*offset)
                } else if *omega == 0.0 {
                    Some(offset + amplitude * phase.cos())
                } else {
                    None
                }
            }
            ProfileDef::Polynomial { coefficients } => {
                if coefficients.iter().skip(1).all(|c| *c == 0.0) {
                    Some(coefficients.first().copied().unwrap_or(0.0))
                } else {
                    None
                }
            }
            ProfileDef::Tabulated { .. } => None,
        }
    }
}

/// Coefficients of the classical equation `d/dt(M x') + M w^2 x = F`.
pub trait ClassicalEom: Send + Sync {
    fn mass(&self, t: f64) -> Sample;
    /// `M(t) w(t)^2`
    fn stiffness(&self, t: f64) -> f64;
    fn force(&self, t: f64) -> f64 {
        let _ = t;
        0.0
    }
    /// Time-only energy offset `f(t)` entering the Hamiltonian as `-f`.
    fn energy_offset(&self, t: f64) -> f64 {
        let _ = t;
        0.0
    }
    fn hbar(&self) -> f64;
}

fn default_hbar() -> f64 {
    1.0
}

/// Generalized harmonic oscillator with time-dependent mass, frequency,
/// momentum-linear terms and driving.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSystemSpec {
    pub mass: CoefficientProfile,
    /// Frequency `w(t)`.
    pub omega: CoefficientProfile,
    #[serde(default = "CoefficientProfile::zero")]
    pub a: CoefficientProfile,
    #[serde(default = "CoefficientProfile::zero")]
    pub b: CoefficientProfile,
    /// External force `F(t)`.
    #[serde(default = "CoefficientProfile::zero")]
    pub force: CoefficientProfile,
    /// Energy offset `f(t)`.
    #[serde(default = "CoefficientProfile::zero")]
    pub f: CoefficientProfile,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
}

/// Hamiltonian coefficients at a fixed time:
/// `H = p^2/2M - a(xp+px) + M c x^2/2 - (b/M) p + d x + offset`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticCoefficients {
    pub mass: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub offset: f64,
}

impl QuadraticCoefficients {
    pub fn potential(&self, x: f64) -> f64 {
        0.5 * self.mass * self.c * x * x + self.d * x + self.offset
    }

    /// `R(x) = -a x - b / 2M`
    pub fn r_slope(&self) -> f64 {
        -self.a
    }

    pub fn r_intercept(&self) -> f64 {
        -self.b / (2.0 * self.mass)
    }
}

impl QuadraticSystemSpec {
    /// Unit-mass, unit-frequency oscillator with no extra terms.
    pub fn simple(hbar: f64) -> Self {
        QuadraticSystemSpec {
            mass: CoefficientProfile::constant(1.0),
            omega: CoefficientProfile::constant(1.0),
            a: CoefficientProfile::zero(),
            b: CoefficientProfile::zero(),
            force: CoefficientProfile::zero(),
            f: CoefficientProfile::zero(),
            hbar,
        }
    }

    pub fn validate(&self, span: (f64, f64)) -> Result<()> {
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(Error::Config(format!("hbar must be positive, got {}", self.hbar)));
        }
        check_positive_mass(&self.mass, span)
    }

    fn profiles(&self) -> [&CoefficientProfile; 6] {
        [&self.mass, &self.omega, &self.a, &self.b, &self.force, &self.f]
    }

    /// All coefficients at `t`, with a domain check on every profile.
    pub fn coefficients(&self, t: f64) -> Result<QuadraticCoefficients> {
        for p in self.profiles() {
            p.sample(t)?;
        }
        Ok(self.coefficients_unchecked(t))
    }

    pub fn coefficients_unchecked(&self, t: f64) -> QuadraticCoefficients {
        let m = self.mass.sample_unchecked(t);
        let w = self.omega.value(t);
        let a = self.a.sample_unchecked(t);
        let b = self.b.sample_unchecked(t);
        let force = self.force.value(t);
        let c = w * w + 4.0 * a.value * a.value - 2.0 * a.rate - 2.0 * m.rate / m.value * a.value;
        let d = 2.0 * a.value * b.value - b.rate - force;
        QuadraticCoefficients {
            mass: m.value,
            a: a.value,
            b: b.value,
            c,
            d,
            offset: b.value * b.value / (2.0 * m.value) - self.f.value(t),
        }
    }

    /// The pair `(c(t), d(t))`.
    pub fn derived_coefficients(&self, t: f64) -> Result<(f64, f64)> {
        let q = self.coefficients(t)?;
        Ok((q.c, q.d))
    }

    /// Position-dependent part `M c x^2/2 + d x + b^2/2M - f` of the
    /// Hamiltonian; the momentum terms live in [`QuadraticCoefficients`].
    pub fn potential(&self, t: f64, x: f64) -> Result<f64> {
        Ok(self.coefficients(t)?.potential(x))
    }
}

impl ClassicalEom for QuadraticSystemSpec {
    fn mass(&self, t: f64) -> Sample {
        self.mass.sample_unchecked(t)
    }
    fn stiffness(&self, t: f64) -> f64 {
        let w = self.omega.value(t);
        self.mass.value(t) * w * w
    }
    fn force(&self, t: f64) -> f64 {
        self.force.value(t)
    }
    fn energy_offset(&self, t: f64) -> f64 {
        self.f.value(t)
    }
    fn hbar(&self) -> f64 {
        self.hbar
    }
}

fn check_positive_mass(mass: &CoefficientProfile, span: (f64, f64)) -> Result<()> {
    let n = 2048;
    for i in 0..=n {
        let t = span.0 + (span.1 - span.0) * i as f64 / n as f64;
        let m = mass.sample(t)?;
        if !(m.value > 0.0) {
            return Err(Error::InvalidProfile(format!("mass must be positive, M({t}) = {}", m.value)));
        }
    }
    Ok(())
}

/// `alpha = sqrt(2 g / hbar^2 + 1/4)`, the non-negative root of
/// `g = (alpha^2 - 1/4) hbar^2 / 2`.
pub fn alpha_from_g(g: f64, hbar: f64) -> Result<f64> {
    if !(hbar > 0.0) {
        return Err(Error::InvalidCoupling(format!("hbar must be positive, got {hbar}")));
    }
    let radicand = 2.0 * g / (hbar * hbar) + 0.25;
    if !(radicand >= 0.0) {
        return Err(Error::InvalidCoupling(format!(
            "2g/hbar^2 + 1/4 = {radicand} is negative"
        )));
    }
    Ok(radicand.sqrt())
}

/// Inverse of [`alpha_from_g`].
pub fn g_from_alpha(alpha: f64, hbar: f64) -> f64 {
    0.5 * (alpha * alpha - 0.25) * hbar * hbar
}

/// Quadratic system with an inverse-square interaction on `x > 0`:
/// `H = p^2/2M - a(xp+px) + M c x^2/2 + g/(M x^2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InverseSquareDef", into = "InverseSquareDef")]
pub struct InverseSquareSystemSpec {
    pub mass: CoefficientProfile,
    pub a: CoefficientProfile,
    pub c: CoefficientProfile,
    pub g: f64,
    pub hbar: f64,
    alpha: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseSquareDef {
    pub mass: CoefficientProfile,
    #[serde(default = "CoefficientProfile::zero")]
    pub a: CoefficientProfile,
    pub c: CoefficientProfile,
    pub g: f64,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
}

impl TryFrom<InverseSquareDef> for InverseSquareSystemSpec {
    type Error = Error;
    fn try_from(d: InverseSquareDef) -> Result<Self> {
        InverseSquareSystemSpec::new(d.mass, d.a, d.c, d.g, d.hbar)
    }
}

impl From<InverseSquareSystemSpec> for InverseSquareDef {
    fn from(s: InverseSquareSystemSpec) -> Self {
        InverseSquareDef { mass: s.mass, a: s.a, c: s.c, g: s.g, hbar: s.hbar }
    }
}

impl InverseSquareSystemSpec {
    pub fn new(
        mass: CoefficientProfile,
        a: CoefficientProfile,
        c: CoefficientProfile,
        g: f64,
        hbar: f64,
    ) -> Result<Self> {
        let alpha = alpha_from_g(g, hbar)?;
        if !(alpha > 0.0) {
            return Err(Error::InvalidCoupling(format!(
                "alpha = {alpha} must be positive for square-integrable transformed states"
            )));
        }
        Ok(InverseSquareSystemSpec { mass, a, c, g, hbar, alpha })
    }

    /// Builds the system from the exponent directly. Both signs of `alpha`
    /// give the same coupling; `-1 < alpha <= 0` selects the less regular
    /// branch, whose one-fold transformed states are not normalizable.
    pub fn from_alpha(
        mass: CoefficientProfile,
        a: CoefficientProfile,
        c: CoefficientProfile,
        alpha: f64,
        hbar: f64,
    ) -> Result<Self> {
        if !(alpha > -1.0) || !(hbar > 0.0) {
            return Err(Error::InvalidCoupling(format!("alpha = {alpha} must exceed -1")));
        }
        let g = g_from_alpha(alpha, hbar);
        Ok(InverseSquareSystemSpec { mass, a, c, g, hbar, alpha })
    }

    /// Unit mass, `c = 1`, `a = 0`, coupling chosen from `alpha`.
    pub fn simple(alpha: f64, hbar: f64) -> Result<Self> {
        Self::new(
            CoefficientProfile::constant(1.0),
            CoefficientProfile::zero(),
            CoefficientProfile::constant(1.0),
            g_from_alpha(alpha, hbar),
            hbar,
        )
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn validate(&self, span: (f64, f64)) -> Result<()> {
        check_positive_mass(&self.mass, span)
    }

    /// `(M, a, c)` at `t`.
    pub fn coefficients(&self, t: f64) -> Result<(f64, f64, f64)> {
        let m = self.mass.sample(t)?;
        let a = self.a.sample(t)?;
        let c = self.c.sample(t)?;
        Ok((m.value, a.value, c.value))
    }

    pub fn potential(&self, t: f64, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::HalfLine { x });
        }
        let (m, _, c) = self.coefficients(t)?;
        Ok(0.5 * m * c * x * x + self.g / (m * x * x))
    }

    /// `w^2 = c - 4a^2 + 2 a' + 2 (M'/M) a`, the frequency of the classical
    /// equation shared with the quadratic system.
    pub fn omega_squared(&self, t: f64) -> f64 {
        let m = self.mass.sample_unchecked(t);
        let a = self.a.sample_unchecked(t);
        self.c.value(t) - 4.0 * a.value * a.value + 2.0 * a.rate + 2.0 * m.rate / m.value * a.value
    }
}

impl ClassicalEom for InverseSquareSystemSpec {
    fn mass(&self, t: f64) -> Sample {
        self.mass.sample_unchecked(t)
    }
    fn stiffness(&self, t: f64) -> f64 {
        self.mass.value(t) * self.omega_squared(t)
    }
    fn hbar(&self) -> f64 {
        self.hbar
    }
}
