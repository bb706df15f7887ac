//! Generalized Darboux transformation of
//! `-i hbar d/dt - hbar^2/2M d^2/dx^2 - i hbar (2R d/dx + R') + V`.
//!
//! The generic engine builds Wronskians of jets, so `W_k` and all its
//! x-derivatives are exact up to rounding. The transformed Hamiltonian is
//! `H + dV` with `dV = -(hbar^2/2M) d^2/dx^2 ln |W_k|^2`, provided
//! `2k R' + (hbar/M) Im d^2/dx^2 ln W_k` does not depend on x; its value is
//! then `d/dt ln alpha_k`.

use std::sync::Arc;

use crate::classical::{BasisPair, BasisSnapshot, ClassicalBasis};
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::quadrature::CumulativeIntegral;
use crate::specfun::{hermite_jets, hermite_ratios, j_n_jet, k_n_jet, laguerre, laguerre_jets};
use crate::states::{
    aux_inverse_square, aux_quadratic, aux_simple, check_order, psi_inverse_square, psi_quadratic, psi_simple, Domain,
    Family, SharedWave, WaveFunction, WaveInfo, WaveSlice,
};
use crate::system::{InverseSquareSystemSpec, QuadraticCoefficients, QuadraticSystemSpec};
use crate::verify::{scan_zeros, Grid};
use crate::C64;

/// The untransformed Hamiltonian family.
#[derive(Clone, Debug)]
pub enum Model {
    Quadratic(Arc<QuadraticSystemSpec>),
    InverseSquare(Arc<InverseSquareSystemSpec>),
}

/// Extra x-dependent potential added to a model Hamiltonian.
pub trait PotentialCorrection: Send + Sync {
    fn label(&self) -> String;
    fn slice(&self, t: f64) -> Result<Box<dyn CorrectionSlice + '_>>;
}

pub trait CorrectionSlice: Send + Sync {
    fn delta_v(&self, x: f64) -> Result<f64>;
}

#[derive(Clone)]
pub struct SchrodingerOperator {
    model: Model,
    correction: Option<Arc<dyn PotentialCorrection>>,
}

impl std::fmt::Debug for SchrodingerOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SchrodingerOperator")
            .field("model", &self.model)
            .field("correction", &self.correction.as_ref().map(|c| c.label()))
            .finish()
    }
}

#[derive(Clone, Copy, Debug)]
enum BasePotential {
    Quadratic(QuadraticCoefficients),
    InverseSquare { mass: f64, c: f64, g: f64 },
}

/// The operator coefficients frozen at one time.
pub struct OperatorSlice<'a> {
    pub t: f64,
    pub mass: f64,
    pub hbar: f64,
    /// `R(x) = r_slope x + r_intercept`
    pub r_slope: f64,
    pub r_intercept: f64,
    base: BasePotential,
    correction: Option<Box<dyn CorrectionSlice + 'a>>,
}

impl OperatorSlice<'_> {
    pub fn r(&self, x: f64) -> f64 {
        self.r_slope * x + self.r_intercept
    }

    pub fn r_prime(&self) -> f64 {
        self.r_slope
    }

    pub fn base_potential(&self, x: f64) -> Result<f64> {
        match self.base {
            BasePotential::Quadratic(q) => Ok(q.potential(x)),
            BasePotential::InverseSquare { mass, c, g } => {
                if !(x > 0.0) {
                    return Err(Error::HalfLine { x });
                }
                Ok(0.5 * mass * c * x * x + g / (mass * x * x))
            }
        }
    }

    pub fn delta_v(&self, x: f64) -> Result<f64> {
        match &self.correction {
            Some(c) => c.delta_v(x),
            None => Ok(0.0),
        }
    }

    pub fn potential(&self, x: f64) -> Result<f64> {
        Ok(self.base_potential(x)? + self.delta_v(x)?)
    }

    /// `H psi` at `x` from a jet of order >= 2.
    pub fn apply(&self, x: f64, psi: &Jet) -> Result<C64> {
        if psi.order() < 2 {
            return Err(Error::Capability { requested: 2, available: psi.order() });
        }
        let (f, d1, d2) = (psi.derivative(0), psi.derivative(1), psi.derivative(2));
        let kinetic = d2 * (-self.hbar * self.hbar / (2.0 * self.mass));
        let drift = C64::new(0.0, -self.hbar) * (d1 * (2.0 * self.r(x)) + f * self.r_prime());
        Ok(kinetic + drift + f * self.potential(x)?)
    }
}

impl SchrodingerOperator {
    pub fn quadratic(spec: Arc<QuadraticSystemSpec>) -> Self {
        SchrodingerOperator { model: Model::Quadratic(spec), correction: None }
    }

    pub fn inverse_square(spec: Arc<InverseSquareSystemSpec>) -> Self {
        SchrodingerOperator { model: Model::InverseSquare(spec), correction: None }
    }

    /// `p^2/2 + x^2/2` in its own time.
    pub fn simple(hbar: f64) -> Self {
        Self::quadratic(Arc::new(QuadraticSystemSpec::simple(hbar)))
    }

    pub fn with_correction(&self, correction: Arc<dyn PotentialCorrection>) -> Self {
        SchrodingerOperator { model: self.model.clone(), correction: Some(correction) }
    }

    pub fn without_correction(&self) -> Self {
        SchrodingerOperator { model: self.model.clone(), correction: None }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn correction(&self) -> Option<&Arc<dyn PotentialCorrection>> {
        self.correction.as_ref()
    }

    pub fn hbar(&self) -> f64 {
        match &self.model {
            Model::Quadratic(s) => s.hbar,
            Model::InverseSquare(s) => s.hbar,
        }
    }

    pub fn domain(&self) -> Domain {
        match self.model {
            Model::Quadratic(_) => Domain::Line,
            Model::InverseSquare(_) => Domain::HalfLine,
        }
    }

    pub fn slice(&self, t: f64) -> Result<OperatorSlice<'_>> {
        let correction = match &self.correction {
            Some(c) => Some(c.slice(t)?),
            None => None,
        };
        Ok(match &self.model {
            Model::Quadratic(s) => {
                let q = s.coefficients(t)?;
                OperatorSlice {
                    t,
                    mass: q.mass,
                    hbar: s.hbar,
                    r_slope: q.r_slope(),
                    r_intercept: q.r_intercept(),
                    base: BasePotential::Quadratic(q),
                    correction,
                }
            }
            Model::InverseSquare(s) => {
                let (mass, a, c) = s.coefficients(t)?;
                OperatorSlice {
                    t,
                    mass,
                    hbar: s.hbar,
                    r_slope: -a,
                    r_intercept: 0.0,
                    base: BasePotential::InverseSquare { mass, c, g: s.g },
                    correction,
                }
            }
        })
    }
}

/// Determinant of a small matrix of jets: LU with partial pivoting on the
/// values, falling back to cofactor expansion when a pivot value vanishes.
fn det_jets(mut a: Vec<Vec<Jet>>) -> Jet {
    let n = a.len();
    let order = a[0][0].order();
    let mut det = Jet::real(1.0, order);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].value().norm().total_cmp(&a[j][col].value().norm()))
            .unwrap_or(col);
        if a[piv][col].value().norm() == 0.0 {
            let rest: Vec<Vec<Jet>> = a[col..].iter().map(|r| r[col..].to_vec()).collect();
            return det * laplace(&rest);
        }
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        det = &det * &a[col][col];
        for r in col + 1..n {
            let f = &a[r][col] / &a[col][col];
            for c in col + 1..n {
                let upd = &a[r][c] - &(&f * &a[col][c]);
                a[r][c] = upd;
            }
        }
    }
    det
}

fn laplace(a: &[Vec<Jet>]) -> Jet {
    let n = a.len();
    if n == 1 {
        return a[0][0].clone();
    }
    let order = a[0][0].order();
    let mut acc = Jet::real(0.0, order);
    for j in 0..n {
        let minor: Vec<Vec<Jet>> =
            a[1..].iter().map(|r| r.iter().enumerate().filter(|&(c, _)| c != j).map(|(_, v)| v.clone()).collect()).collect();
        let term = &a[0][j] * &laplace(&minor);
        acc = if j % 2 == 0 { acc + term } else { acc - term };
    }
    acc
}

/// Wronskian of the given column jets, returned as a jet of order `order`.
/// Each column must carry order `>= columns.len() - 1 + order`.
pub fn wronskian_of_jets(columns: &[Jet], order: usize) -> Result<Jet> {
    Ok(wronskian_conditioned(columns, order)?.0)
}

/// Wronskian together with a condition number: the Hadamard bound of the
/// normalized columns over the computed value. Relative rounding error in
/// the result is at most a modest multiple of `condition * EPSILON`.
pub fn wronskian_conditioned(columns: &[Jet], order: usize) -> Result<(Jet, f64)> {
    let k = columns.len();
    if k == 0 {
        return Ok((Jet::real(1.0, order), 1.0));
    }
    let need = k - 1 + order;
    if let Some(c) = columns.iter().find(|c| c.order() < need) {
        return Err(Error::Capability { requested: need, available: c.order() });
    }
    // work in a stretched variable so that the columns vary by O(1) over one
    // unit; near a power-law origin this keeps every coefficient of x^p at
    // the same magnitude
    let step = columns
        .iter()
        .map(|c| {
            let c0 = c.value().norm();
            c.coeffs()[..k].iter().enumerate().skip(1).fold(f64::INFINITY, |m, (j, cj)| {
                let cj = cj.norm();
                if cj > 0.0 && c0 > 0.0 { m.min((c0 / cj).powf(1.0 / j as f64)) } else { m }
            })
        })
        .fold(0.0, f64::max)
        .min(1.0);
    let step = if step > 0.0 { step } else { 1.0 };
    let mut scales = Vec::with_capacity(k);
    let mut scaled = Vec::with_capacity(k);
    for col in columns {
        let col = col.rescale(step);
        let s = col.coeffs()[..k].iter().map(|z| z.norm()).fold(0.0, f64::max);
        let s = if s > 0.0 && s.is_finite() { s } else { 1.0 };
        scales.push(s);
        scaled.push(col.scale(C64::new(1.0 / s, 0.0)));
    }
    let w = if scaled.iter().any(|c| c.value().norm() > 0.0) {
        reduce(&scaled, order)
    } else {
        let mut rows: Vec<Vec<Jet>> = vec![Vec::with_capacity(k); k];
        for col in &scaled {
            let mut d = col.clone();
            for row in rows.iter_mut() {
                row.push(d.truncate(order));
                d = d.differentiate();
            }
        }
        det_jets(rows)
    };
    let hadamard = (k as f64).powf(0.5 * k as f64);
    let condition = hadamard / w.value().norm();
    let scale: f64 = scales.iter().product();
    let jacobian = step.powi(-((k * (k - 1) / 2) as i32));
    Ok((w.rescale(1.0 / step).scale(C64::new(scale * jacobian, 0.0)), condition))
}

/// `W(u_1..u_k) = g^k W((u_j/g)')` with `g` a column moved to the front.
/// A common factor of all columns, such as a power of x at the origin
/// of the half line, then cancels exactly instead of through subtraction.
fn reduce(cols: &[Jet], order: usize) -> Jet {
    let k = cols.len();
    if k == 1 {
        return cols[0].truncate(order);
    }
    // pivot on the column farthest from a zero relative to its own slope,
    // so a column that merely rounds away from an exact node is never g
    let ratio = |c: &Jet| {
        let top = c.coeffs().iter().map(|z| z.norm()).fold(0.0, f64::max);
        if top > 0.0 { c.value().norm() / top } else { 0.0 }
    };
    let p = (0..k).max_by(|&i, &j| ratio(&cols[i]).total_cmp(&ratio(&cols[j]))).unwrap_or(0);
    let g = &cols[p];
    let rest: Vec<Jet> = cols.iter().enumerate().filter(|&(j, _)| j != p).map(|(_, c)| (c / g).differentiate()).collect();
    let inner = reduce(&rest, order);
    let gt = g.truncate(order);
    let mut acc = inner;
    for _ in 0..k {
        acc = &acc * &gt;
    }
    if p % 2 == 1 {
        -acc
    } else {
        acc
    }
}

fn slices_at<'a>(waves: &'a [SharedWave], t: f64) -> Result<Vec<Box<dyn WaveSlice + 'a>>> {
    waves.iter().map(|w| w.at(t)).collect()
}

fn column_jets(slices: &[Box<dyn WaveSlice + '_>], x: f64, order: usize) -> Result<Vec<Jet>> {
    slices.iter().map(|s| s.taylor(x, order)).collect()
}

fn check_capability(waves: &[SharedWave], order: usize) -> Result<()> {
    waves.iter().try_for_each(|w| check_order(w.as_ref(), order))
}

/// `W_k(u_1..u_k)` at `(t, x)`.
pub fn wronskian(aux: &[SharedWave], t: f64, x: f64) -> Result<C64> {
    let k = aux.len();
    check_capability(aux, k.saturating_sub(1))?;
    let slices = slices_at(aux, t)?;
    let cols = column_jets(&slices, x, k.saturating_sub(1))?;
    Ok(wronskian_of_jets(&cols, 0)?.value())
}

/// `W_{k,psi}`: the Wronskian with `psi` appended as the last column.
pub fn wronskian_aug(aux: &[SharedWave], psi: &SharedWave, t: f64, x: f64) -> Result<C64> {
    let mut all = aux.to_vec();
    all.push(psi.clone());
    wronskian(&all, t, x)
}

/// How `d/dx` of a Wronskian is obtained in [`crum_residual`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CrumDerivative {
    /// Determinant with the last row replaced by the next derivative.
    Exact,
    /// Fourth-order central difference of determinant values with step `h`.
    FiniteDifference(f64),
}

/// Relative defect of `W_{k,psi} W_{k-1} = W_k (W_{k-1,psi})' - W_{k-1,psi} W_k'`.
///
/// With exact derivative rows this is the Desnanot-Jacobi identity and holds
/// for any column data; the finite-difference mode also probes whether the
/// columns are smooth.
pub fn crum_residual(aux: &[SharedWave], psi: &SharedWave, t: f64, x: f64, mode: CrumDerivative) -> Result<f64> {
    let k = aux.len();
    if k < 2 {
        return Err(Error::Config("Crum's identity needs at least two auxiliary functions".into()));
    }
    let mut with_psi = aux.to_vec();
    with_psi.push(psi.clone());
    let mut prev_psi = aux[..k - 1].to_vec();
    prev_psi.push(psi.clone());
    let w_k_psi = wronskian(&with_psi, t, x)?;
    let w_km1 = wronskian(&aux[..k - 1], t, x)?;
    let (w_k, dw_k, w_km1_psi, dw_km1_psi) = match mode {
        CrumDerivative::Exact => {
            check_capability(&with_psi, k)?;
            let slices = slices_at(aux, t)?;
            let wk = wronskian_of_jets(&column_jets(&slices, x, k)?, 1)?;
            let slices = slices_at(&prev_psi, t)?;
            let wp = wronskian_of_jets(&column_jets(&slices, x, k)?, 1)?;
            (wk.value(), wk.derivative(1), wp.value(), wp.derivative(1))
        }
        CrumDerivative::FiniteDifference(h) => {
            let fd = |set: &[SharedWave]| -> Result<C64> {
                let f = |s: f64| wronskian(set, t, x + s);
                Ok((f(-2.0 * h)? - f(-h)? * 8.0 + f(h)? * 8.0 - f(2.0 * h)?) / (12.0 * h))
            };
            (wronskian(aux, t, x)?, fd(aux)?, wronskian(&prev_psi, t, x)?, fd(&prev_psi)?)
        }
    };
    let rhs_a = w_k * dw_km1_psi;
    let rhs_b = w_km1_psi * dw_k;
    let lhs = w_k_psi * w_km1;
    let scale = lhs.norm() + rhs_a.norm() + rhs_b.norm();
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok((lhs - (rhs_a - rhs_b)).norm() / scale)
}

/// Everything a transform needs to know about where it will be used.
#[derive(Clone, Debug)]
pub struct TransformOptions {
    pub grid: Grid,
    /// times at which zero-freeness and x-constancy are checked
    pub check_times: Vec<f64>,
    /// `alpha_k(span.0) = 1`
    pub span: (f64, f64),
    pub node_spacing: f64,
    pub quad_tol: f64,
    /// relative x-spread of the Hermiticity right-hand side above which the
    /// transform is rejected
    pub hermiticity_tol: f64,
}

impl TransformOptions {
    pub fn new(grid: Grid, span: (f64, f64)) -> Self {
        let n = 9;
        let check_times = (0..n).map(|i| span.0 + (span.1 - span.0) * i as f64 / (n - 1) as f64).collect();
        TransformOptions { grid, check_times, span, node_spacing: 0.05, quad_tol: 1e-12, hermiticity_tol: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct TransformDiagnostics {
    pub order: usize,
    /// max over check times and grid points of `|rhs - median|`, less its
    /// rounding bound, over `max(1, |median|)`
    pub hermiticity_spread: f64,
    /// smallest `|W| / (|W| + sqrt(hbar) |W'|)` met while scanning
    pub min_zero_ratio: f64,
    pub min_zero_location: (f64, f64),
    pub x_ref: f64,
}

/// Result of a k-fold transformation with a Hermitizable auxiliary set.
pub struct TransformResult {
    op: SchrodingerOperator,
    aux: Vec<SharedWave>,
    ln_alpha: CumulativeIntegral,
    diagnostics: TransformDiagnostics,
}

impl std::fmt::Debug for TransformResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransformResult").field("diagnostics", &self.diagnostics).finish()
    }
}

/// `2k R' + (hbar/M) Im d^2/dx^2 ln W_k` at one time.
fn hermiticity_rhs_at(op: &OperatorSlice<'_>, slices: &[Box<dyn WaveSlice + '_>], x: f64) -> Result<f64> {
    Ok(hermiticity_sample(op, slices, x)?.0)
}

/// The right-hand side together with a rounding bound for it: `Im` of
/// `W''/W - (W'/W)^2` inherits an absolute error of order
/// `eps (|W''/W| + |W'/W|^2)`, which is large where `W` vanishes like a power.
fn hermiticity_sample(op: &OperatorSlice<'_>, slices: &[Box<dyn WaveSlice + '_>], x: f64) -> Result<(f64, f64)> {
    let k = slices.len();
    let (w, condition) = wronskian_conditioned(&column_jets(slices, x, k + 1)?, 2)?;
    let (d1, d2) = (w.derivative(1) / w.value(), w.derivative(2) / w.value());
    let scale = op.hbar / op.mass;
    let rhs = 2.0 * k as f64 * op.r_prime() + scale * w.ln().derivative(2).im;
    let noise = 64.0 * f64::EPSILON * condition.max(1.0) * scale * (d2.norm() + d1.norm_sqr());
    Ok((rhs, noise))
}

fn delta_v_at(mass: f64, hbar: f64, slices: &[Box<dyn WaveSlice + '_>], x: f64) -> Result<f64> {
    let k = slices.len();
    let w = wronskian_of_jets(&column_jets(slices, x, k + 1)?, 2)?;
    Ok(-hbar * hbar / mass * w.ln().derivative(2).re)
}

/// Checks that `W_k` has no zero and that the Hermiticity condition admits a
/// purely time-dependent `alpha_k`, then integrates `ln alpha_k`.
pub fn transform(op: &SchrodingerOperator, aux: Vec<SharedWave>, opts: &TransformOptions) -> Result<TransformResult> {
    let k = aux.len();
    if k == 0 {
        return Err(Error::Config("transform needs at least one auxiliary function".into()));
    }
    check_capability(&aux, k + 1)?;
    let op = op.without_correction();
    let xs = opts.grid.points();
    let x_ref = opts.grid.midpoint();
    let scan_grid = opts.grid.refined(2048)?;
    let mut spread = 0.0f64;
    let mut min_ratio = f64::INFINITY;
    let mut min_loc = (opts.span.0, x_ref);
    for &t in &opts.check_times {
        let slices = slices_at(&aux, t)?;
        let scan = scan_zeros(&|x| wronskian_of_jets(&column_jets(&slices, x, k)?, 1), &scan_grid)?;
        if scan.min_ratio < min_ratio {
            min_ratio = scan.min_ratio;
            min_loc = (t, scan.ratio_location);
        }
        if scan.is_zero() {
            return Err(Error::ZeroCrossing { t, x: scan.ratio_location });
        }
        let os = op.slice(t)?;
        let samples = crate::par::map(&xs, |&x| hermiticity_sample(&os, &slices, x));
        let samples = samples.into_iter().collect::<Result<Vec<(f64, f64)>>>()?;
        let mut sorted: Vec<f64> = samples.iter().map(|s| s.0).collect();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let worst = samples.iter().map(|&(r, noise)| ((r - median).abs() - noise).max(0.0)).fold(0.0, f64::max);
        let s = worst / median.abs().max(1.0);
        spread = spread.max(if s.is_finite() { s } else { f64::INFINITY });
    }
    if !(spread <= opts.hermiticity_tol) {
        return Err(Error::NonHermitizable { spread });
    }
    let pad = 0.05 * (opts.span.1 - opts.span.0) + 0.01;
    let (lo, hi) = (opts.span.0 - pad, opts.span.1 + pad);
    let n = (((hi - lo) / opts.node_spacing).ceil() as usize).max(4);
    let nodes: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let ln_alpha = {
        let integrand = rhs_integrand(&op, &aux, x_ref);
        CumulativeIntegral::build(&integrand, nodes, opts.span.0, opts.quad_tol)
    };
    Ok(TransformResult {
        op,
        aux,
        ln_alpha,
        diagnostics: TransformDiagnostics {
            order: k,
            hermiticity_spread: spread,
            min_zero_ratio: min_ratio,
            min_zero_location: min_loc,
            x_ref,
        },
    })
}

fn rhs_integrand<'a>(op: &'a SchrodingerOperator, aux: &'a [SharedWave], x: f64) -> impl Fn(f64) -> f64 + 'a {
    move |t| {
        let eval = || -> Result<f64> {
            let os = op.slice(t)?;
            let slices = slices_at(aux, t)?;
            hermiticity_rhs_at(&os, &slices, x)
        };
        eval().unwrap_or(f64::NAN)
    }
}

impl TransformResult {
    pub fn order(&self) -> usize {
        self.aux.len()
    }

    pub fn aux(&self) -> &[SharedWave] {
        &self.aux
    }

    pub fn base_operator(&self) -> &SchrodingerOperator {
        &self.op
    }

    pub fn diagnostics(&self) -> &TransformDiagnostics {
        &self.diagnostics
    }

    pub fn ln_alpha(&self, t: f64) -> f64 {
        let f = rhs_integrand(&self.op, &self.aux, self.diagnostics.x_ref);
        self.ln_alpha.eval(&f, t)
    }

    /// `alpha_k(t)`, normalized to 1 at the span start.
    pub fn alpha(&self, t: f64) -> f64 {
        self.ln_alpha(t).exp()
    }

    pub fn hermiticity_rhs(&self, t: f64, x: f64) -> Result<f64> {
        let os = self.op.slice(t)?;
        let slices = slices_at(&self.aux, t)?;
        hermiticity_rhs_at(&os, &slices, x)
    }

    pub fn wronskian(&self, t: f64, x: f64) -> Result<C64> {
        wronskian(&self.aux, t, x)
    }

    pub fn delta_v(&self, t: f64, x: f64) -> Result<f64> {
        self.slice(t)?.delta_v(x)
    }

    /// `H + dV`
    pub fn transformed_operator(self: &Arc<Self>) -> SchrodingerOperator {
        self.op.with_correction(self.clone())
    }

    /// `alpha_k W_{k,psi} / W_k`
    pub fn transformed_state(self: &Arc<Self>, psi: SharedWave) -> TransformedState {
        let base = psi.info();
        let info = WaveInfo {
            label: format!("T{}[{}]", self.order(), base.label),
            family: base.family,
            domain: base.domain,
            index: base.index,
            hbar: base.hbar,
        };
        TransformedState { result: self.clone(), psi, info }
    }

    /// `1 / (alpha_1 conj(u_1))`, the extra solution of a one-fold transform.
    pub fn partner_state(self: &Arc<Self>) -> Result<PartnerState> {
        if self.order() != 1 {
            return Err(Error::Config("the partner state exists for one-fold transforms only".into()));
        }
        let base = self.aux[0].info();
        let info = WaveInfo {
            label: format!("1/conj({})", base.label),
            family: Family::Physical,
            domain: base.domain,
            index: -base.index,
            hbar: base.hbar,
        };
        Ok(PartnerState { result: self.clone(), info })
    }
}

struct EngineSlice<'a> {
    mass: f64,
    hbar: f64,
    slices: Vec<Box<dyn WaveSlice + 'a>>,
}

impl CorrectionSlice for EngineSlice<'_> {
    fn delta_v(&self, x: f64) -> Result<f64> {
        delta_v_at(self.mass, self.hbar, &self.slices, x)
    }
}

impl TransformResult {
    fn slice(&self, t: f64) -> Result<EngineSlice<'_>> {
        let os = self.op.slice(t)?;
        Ok(EngineSlice { mass: os.mass, hbar: os.hbar, slices: slices_at(&self.aux, t)? })
    }
}

impl PotentialCorrection for TransformResult {
    fn label(&self) -> String {
        let names: Vec<&str> = self.aux.iter().map(|w| w.info().label.as_str()).collect();
        format!("darboux[{}]", names.join(","))
    }

    fn slice(&self, t: f64) -> Result<Box<dyn CorrectionSlice + '_>> {
        Ok(Box::new(TransformResult::slice(self, t)?))
    }
}

pub struct TransformedState {
    result: Arc<TransformResult>,
    psi: SharedWave,
    info: WaveInfo,
}

struct TransformedSlice<'a> {
    alpha: f64,
    aux: Vec<Box<dyn WaveSlice + 'a>>,
    psi: Box<dyn WaveSlice + 'a>,
}

impl WaveSlice for TransformedSlice<'_> {
    fn taylor(&self, x: f64, order: usize) -> Result<Jet> {
        let k = self.aux.len();
        let mut cols = column_jets(&self.aux, x, k + order)?;
        let w = wronskian_of_jets(&cols, order)?;
        cols.push(self.psi.taylor(x, k + order)?);
        let wp = wronskian_of_jets(&cols, order)?;
        Ok((wp / w).scale(C64::new(self.alpha, 0.0)))
    }
}

impl WaveFunction for TransformedState {
    fn info(&self) -> &WaveInfo {
        &self.info
    }

    fn max_order(&self) -> usize {
        let k = self.result.order();
        self.result.aux.iter().chain(std::iter::once(&self.psi)).map(|w| w.max_order()).min().unwrap_or(0).saturating_sub(k)
    }

    fn at(&self, t: f64) -> Result<Box<dyn WaveSlice + '_>> {
        Ok(Box::new(TransformedSlice {
            alpha: self.result.alpha(t),
            aux: slices_at(&self.result.aux, t)?,
            psi: self.psi.at(t)?,
        }))
    }
}

pub struct PartnerState {
    result: Arc<TransformResult>,
    info: WaveInfo,
}

struct PartnerSlice<'a> {
    alpha: f64,
    aux: Box<dyn WaveSlice + 'a>,
}

impl WaveSlice for PartnerSlice<'_> {
    fn taylor(&self, x: f64, order: usize) -> Result<Jet> {
        Ok(self.aux.taylor(x, order)?.conj().recip().scale(C64::new(1.0 / self.alpha, 0.0)))
    }
}

impl WaveFunction for PartnerState {
    fn info(&self) -> &WaveInfo {
        &self.info
    }

    fn at(&self, t: f64) -> Result<Box<dyn WaveSlice + '_>> {
        Ok(Box::new(PartnerSlice { alpha: self.result.alpha(t), aux: self.result.aux[0].at(t)? }))
    }
}

/// `4n [(n-1) H_{n-2}(z)/H_n(z) - n (H_{n-1}(z)/H_n(z))^2]`, real for even
/// `n` and imaginary `z`.
pub fn h1_nq_bracket(n: usize, z: C64) -> C64 {
    if n == 0 {
        return C64::new(0.0, 0.0);
    }
    let (r1, r2) = hermite_ratios(n, z);
    let nf = n as f64;
    (r2 * (nf - 1.0) - r1 * r1 * nf) * (4.0 * nf)
}

/// Closed-form potential corrections of the model transforms.
#[derive(Clone, Debug)]
pub enum ClosedForm {
    /// one-fold with `v_n^Q` on the given (tilded) basis
    OneFoldQuadratic { n: usize, spec: Arc<QuadraticSystemSpec>, basis: Arc<ClassicalBasis> },
    /// two-fold with `psi_n^Q, psi_{n+1}^Q`
    TwoFoldQuadratic { n: usize, spec: Arc<QuadraticSystemSpec>, basis: Arc<ClassicalBasis> },
    /// one-fold with `v_n^in`
    OneFoldInverse { n: usize, spec: Arc<InverseSquareSystemSpec>, basis: Arc<ClassicalBasis> },
    /// two-fold with `psi_n^in, psi_{n+1}^in`
    TwoFoldInverse { n: usize, spec: Arc<InverseSquareSystemSpec>, basis: Arc<ClassicalBasis> },
}

impl ClosedForm {
    pub fn operator(&self) -> SchrodingerOperator {
        let base = match self {
            ClosedForm::OneFoldQuadratic { spec, .. } | ClosedForm::TwoFoldQuadratic { spec, .. } => {
                SchrodingerOperator::quadratic(spec.clone())
            }
            ClosedForm::OneFoldInverse { spec, .. } | ClosedForm::TwoFoldInverse { spec, .. } => {
                SchrodingerOperator::inverse_square(spec.clone())
            }
        };
        base.with_correction(Arc::new(self.clone()))
    }

    /// The auxiliary set whose generic transform this closed form reproduces.
    pub fn auxiliaries(&self) -> Result<Vec<SharedWave>> {
        Ok(match self {
            ClosedForm::OneFoldQuadratic { n, spec, basis } => {
                vec![Arc::new(aux_quadratic(*n, spec.clone(), basis.clone())?)]
            }
            ClosedForm::TwoFoldQuadratic { n, spec, basis } => vec![
                Arc::new(psi_quadratic(*n, spec.clone(), basis.clone())?),
                Arc::new(psi_quadratic(n + 1, spec.clone(), basis.clone())?),
            ],
            ClosedForm::OneFoldInverse { n, spec, basis } => {
                vec![Arc::new(aux_inverse_square(*n, spec.clone(), basis.clone(), None)?)]
            }
            ClosedForm::TwoFoldInverse { n, spec, basis } => vec![
                Arc::new(psi_inverse_square(*n, spec.clone(), basis.clone())?),
                Arc::new(psi_inverse_square(n + 1, spec.clone(), basis.clone())?),
            ],
        })
    }

    fn basis(&self) -> &Arc<ClassicalBasis> {
        match self {
            ClosedForm::OneFoldQuadratic { basis, .. }
            | ClosedForm::TwoFoldQuadratic { basis, .. }
            | ClosedForm::OneFoldInverse { basis, .. }
            | ClosedForm::TwoFoldInverse { basis, .. } => basis,
        }
    }

    /// The asymptotic constant shift `dV(|x| -> inf)` at time `t`, excluding
    /// decaying `1/x^2` terms.
    pub fn asymptote(&self, t: f64) -> Result<f64> {
        let s = self.basis().snapshot(t);
        let (mass, hbar) = self.mass_hbar(t)?;
        let unit = hbar * s.omega / (mass * s.rho * s.rho);
        Ok(match self {
            ClosedForm::OneFoldQuadratic { .. } | ClosedForm::OneFoldInverse { .. } => -unit,
            ClosedForm::TwoFoldQuadratic { .. } | ClosedForm::TwoFoldInverse { .. } => 2.0 * unit,
        })
    }

    fn mass_hbar(&self, t: f64) -> Result<(f64, f64)> {
        match self {
            ClosedForm::OneFoldQuadratic { spec, .. } | ClosedForm::TwoFoldQuadratic { spec, .. } => {
                Ok((spec.coefficients(t)?.mass, spec.hbar))
            }
            ClosedForm::OneFoldInverse { spec, .. } | ClosedForm::TwoFoldInverse { spec, .. } => {
                Ok((spec.coefficients(t)?.0, spec.hbar))
            }
        }
    }
}

struct ClosedFormSlice<'a> {
    form: &'a ClosedForm,
    s: BasisSnapshot,
    mass: f64,
    hbar: f64,
}

impl CorrectionSlice for ClosedFormSlice<'_> {
    fn delta_v(&self, x: f64) -> Result<f64> {
        let (s, m, hbar) = (&self.s, self.mass, self.hbar);
        let unit = hbar * s.omega / (m * s.rho * s.rho);
        let kappa = (s.omega / hbar).sqrt() / s.rho;
        match self.form {
            ClosedForm::OneFoldQuadratic { n, .. } => {
                let z = C64::new(0.0, kappa * (x - s.xp));
                Ok(-unit + unit * h1_nq_bracket(*n, z).re)
            }
            ClosedForm::TwoFoldQuadratic { n, .. } => {
                let w = (Jet::variable(x, 2) - s.xp) * kappa;
                let lj = j_n_jet(*n, &w).ln();
                Ok(2.0 * unit - hbar * hbar / m * lj.derivative(2).re)
            }
            ClosedForm::OneFoldInverse { n, spec, .. } => {
                if !(x > 0.0) {
                    return Err(Error::HalfLine { x });
                }
                let alpha = spec.alpha();
                let k = s.omega / (hbar * s.rho * s.rho);
                let y = k * x * x;
                // g(x) = L_n^a(-k x^2)
                let l = laguerre(*n, alpha, C64::new(-y, 0.0));
                let (g, dl, d2l) = (l.value.re, l.d1.re, l.d2.re);
                let g1 = -2.0 * k * x * dl;
                let g2 = -2.0 * k * dl + 4.0 * k * k * x * x * d2l;
                let log2 = g2 / g - (g1 / g).powi(2);
                let second = -(2.0 * alpha + 1.0) / (x * x) + 2.0 * k + 2.0 * log2;
                Ok(-hbar * hbar / (2.0 * m) * second)
            }
            ClosedForm::TwoFoldInverse { n, spec, .. } => {
                if !(x > 0.0) {
                    return Err(Error::HalfLine { x });
                }
                let alpha = spec.alpha();
                let k = s.omega / (hbar * s.rho * s.rho);
                let xj = Jet::variable(x, 2);
                let y = &xj * &xj * k;
                let lk = (-k_n_jet(*n, alpha, &y)).ln();
                Ok(2.0 * hbar * hbar * (alpha + 1.0) / (m * x * x) + 2.0 * unit
                    - hbar * hbar / m * lk.derivative(2).re)
            }
        }
    }
}

impl PotentialCorrection for ClosedForm {
    fn label(&self) -> String {
        match self {
            ClosedForm::OneFoldQuadratic { n, .. } => format!("H1Q[{n}]"),
            ClosedForm::TwoFoldQuadratic { n, .. } => format!("H2Q[{n}]"),
            ClosedForm::OneFoldInverse { n, .. } => format!("H1in[{n}]"),
            ClosedForm::TwoFoldInverse { n, .. } => format!("H2in[{n}]"),
        }
    }

    fn slice(&self, t: f64) -> Result<Box<dyn CorrectionSlice + '_>> {
        let (mass, hbar) = self.mass_hbar(t)?;
        Ok(Box::new(ClosedFormSlice { form: self, s: self.basis().snapshot(t), mass, hbar }))
    }
}

fn closed_delta_v(form: ClosedForm, t: f64, x: f64) -> Result<f64> {
    form.slice(t)?.delta_v(x)
}

/// One-fold quadratic correction `dV` seeded by `v_n^Q` on `basis`.
pub fn h1_nq_delta_v(n: usize, spec: Arc<QuadraticSystemSpec>, basis: Arc<ClassicalBasis>, t: f64, x: f64) -> Result<f64> {
    if n % 2 == 1 {
        return Err(Error::InvalidIndex(format!("auxiliary index {n} must be even")));
    }
    closed_delta_v(ClosedForm::OneFoldQuadratic { n, spec, basis }, t, x)
}

/// Two-fold quadratic correction seeded by `psi_n^Q, psi_{n+1}^Q`.
pub fn h2_nq_delta_v(n: usize, spec: Arc<QuadraticSystemSpec>, basis: Arc<ClassicalBasis>, t: f64, x: f64) -> Result<f64> {
    closed_delta_v(ClosedForm::TwoFoldQuadratic { n, spec, basis }, t, x)
}

/// One-fold inverse-square correction seeded by `v_n^in`.
pub fn h1_nin_delta_v(n: usize, spec: Arc<InverseSquareSystemSpec>, basis: Arc<ClassicalBasis>, t: f64, x: f64) -> Result<f64> {
    closed_delta_v(ClosedForm::OneFoldInverse { n, spec, basis }, t, x)
}

/// Two-fold inverse-square correction seeded by `psi_n^in, psi_{n+1}^in`.
pub fn h2_in_delta_v(n: usize, spec: Arc<InverseSquareSystemSpec>, basis: Arc<ClassicalBasis>, t: f64, x: f64) -> Result<f64> {
    closed_delta_v(ClosedForm::TwoFoldInverse { n, spec, basis }, t, x)
}

/// `-hbar - hbar^2 d^2/dx^2 ln H_n(i x / sqrt(hbar))` for the unit oscillator.
pub fn h1_ns_delta_v(n: usize, hbar: f64, x: f64) -> f64 {
    let z = Jet::variable(x, 2).scale(C64::new(0.0, 1.0 / hbar.sqrt()));
    let h = hermite_jets(n, &z);
    -hbar - hbar * hbar * h[n].ln().derivative(2).re
}

/// `W_2` of `psi_n^Q, psi_{n+1}^Q` in closed form.
pub fn w2_quadratic_closed(n: usize, spec: &QuadraticSystemSpec, basis: &ClassicalBasis, t: f64, x: f64) -> Result<C64> {
    let psi0 = psi_quadratic(0, Arc::new(spec.clone()), Arc::new(basis.clone()))?.value(t, x)?;
    let s = basis.snapshot(t);
    let hbar = spec.hbar;
    let w = (s.omega / hbar).sqrt() * (x - s.xp) / s.rho;
    let nf = n as f64;
    let ln_pref = -(nf * std::f64::consts::LN_2 + crate::specfun::ln_gamma(nf + 1.0)) - 0.5 * (2.0 * (nf + 1.0)).ln();
    let phase = C64::from_polar(1.0, -(2.0 * nf + 1.0) * s.phase);
    Ok(phase * psi0 * psi0 * (ln_pref.exp() / s.rho * (s.omega / hbar).sqrt() * crate::specfun::j_n(n, w)))
}

/// `W_2` of `psi_n^in, psi_{n+1}^in` in closed form with `(n+a)! = Gamma(n+a+1)`.
pub fn w2_inverse_closed(n: usize, spec: &InverseSquareSystemSpec, basis: &ClassicalBasis, t: f64, x: f64) -> Result<C64> {
    let alpha = spec.alpha();
    let psi0 = psi_inverse_square(0, Arc::new(spec.clone()), Arc::new(basis.clone()))?.value(t, x)?;
    let s = basis.snapshot(t);
    let nf = n as f64;
    let y = s.omega * x * x / (spec.hbar * s.rho * s.rho);
    let ln_pref = std::f64::consts::LN_2 + crate::specfun::ln_gamma(nf + 1.0) - crate::specfun::ln_gamma(nf + alpha + 1.0)
        + 0.5 * ((nf + 1.0) / (nf + 1.0 + alpha)).ln();
    let phase = C64::from_polar(1.0, -(4.0 * nf + 2.0) * s.phase);
    let lin = s.omega * x / (spec.hbar * s.rho * s.rho);
    Ok(phase * psi0 * psi0 * (ln_pref.exp() * lin * crate::specfun::k_n(n, alpha, y)))
}

/// Which closed-form `alpha_k` applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlphaForm {
    /// `rho` of the basis carrying the auxiliary function
    OneFold,
    /// `rho^2`
    TwoFold,
}

pub fn alpha_closed_form(form: AlphaForm, basis: &ClassicalBasis, t: f64) -> f64 {
    let rho = basis.rho(t);
    match form {
        AlphaForm::OneFold => rho,
        AlphaForm::TwoFold => rho * rho,
    }
}

/// Max over `times` of `|d/dt ln alpha_closed - rhs(t, x_ref)|`, with the
/// time derivative from a fourth-order central difference of step `dt`.
pub fn alpha_closed_form_defect(
    result: &TransformResult,
    form: AlphaForm,
    basis: &ClassicalBasis,
    times: &[f64],
    dt: f64,
) -> Result<f64> {
    let x = result.diagnostics.x_ref;
    let la = |t: f64| alpha_closed_form(form, basis, t).ln();
    let mut worst = 0.0f64;
    for &t in times {
        let fd = (la(t - 2.0 * dt) - 8.0 * la(t - dt) + 8.0 * la(t + dt) - la(t + 2.0 * dt)) / (12.0 * dt);
        worst = worst.max((fd - result.hermiticity_rhs(t, x)?).abs());
    }
    Ok(worst)
}

/// Closed-form solutions of the one-fold transformed quadratic system.
pub struct QuadraticTransformed {
    info: WaveInfo,
    kind: QuadKind,
    n: usize,
    spec: Arc<QuadraticSystemSpec>,
    pair: BasisPair,
}

enum QuadKind {
    General { psi: SharedWave, prev: Option<SharedWave> },
    SameBasis { psi: SharedWave, next: SharedWave },
    Partner { aux: SharedWave },
}

/// `psi_m^{nQ}` for `m >= 0`, or the extra state for `m = -n < 0`. Distinct
/// bases use the general formula; a shared basis uses the ladder form.
pub fn transformed_state_quadratic(
    m: i64,
    n: usize,
    spec: Arc<QuadraticSystemSpec>,
    pair: BasisPair,
) -> Result<QuadraticTransformed> {
    if pair.is_shared() {
        quadratic_transformed(m, n, spec, pair, true)
    } else {
        quadratic_transformed(m, n, spec, pair, false)
    }
}

/// `1 / (rho~ conj(v_n^Q))`, the extra state; for `n = 0` it is not reachable
/// through a negative index.
pub fn partner_state_quadratic(n: usize, spec: Arc<QuadraticSystemSpec>, pair: BasisPair) -> Result<QuadraticTransformed> {
    let mut st = quadratic_transformed(0, n, spec.clone(), pair.clone(), false)?;
    st.kind = QuadKind::Partner { aux: Arc::new(aux_quadratic(n, spec, pair.tilded.clone())?) };
    st.info.label = format!("psi_Q[-{n}; n={n}]");
    st.info.index = -(n as i64);
    Ok(st)
}

/// The general-basis formula, even when both bases coincide.
pub fn transformed_state_quadratic_general(
    m: i64,
    n: usize,
    spec: Arc<QuadraticSystemSpec>,
    pair: BasisPair,
) -> Result<QuadraticTransformed> {
    quadratic_transformed(m, n, spec, pair, false)
}

fn quadratic_transformed(m: i64, n: usize, spec: Arc<QuadraticSystemSpec>, pair: BasisPair, ladder: bool) -> Result<QuadraticTransformed> {
    if n % 2 == 1 {
        return Err(Error::InvalidIndex(format!("auxiliary index {n} must be even")));
    }
    let mk = |j: usize| -> Result<SharedWave> { Ok(Arc::new(psi_quadratic(j, spec.clone(), pair.untilded.clone())?)) };
    let kind = if m >= 0 {
        let mu = m as usize;
        if ladder {
            QuadKind::SameBasis { psi: mk(mu)?, next: mk(mu + 1)? }
        } else {
            QuadKind::General { psi: mk(mu)?, prev: if mu > 0 { Some(mk(mu - 1)?) } else { None } }
        }
    } else if m == -(n as i64) {
        QuadKind::Partner { aux: Arc::new(aux_quadratic(n, spec.clone(), pair.tilded.clone())?) }
    } else {
        return Err(Error::InvalidIndex(format!("state index {m} must be >= 0 or equal -{n}")));
    };
    Ok(QuadraticTransformed {
        info: WaveInfo { label: format!("psi_Q[{m}; n={n}]"), family: Family::Physical, domain: Domain::Line, index: m, hbar: spec.hbar },
        kind,
        n,
        spec,
        pair,
    })
}

/// `H_{n-1}(z)/H_n(z)` as a jet in x, zero for `n = 0`.
fn hermite_ratio_jet(n: usize, z: &Jet) -> Jet {
    if n == 0 {
        return Jet::real(0.0, z.order());
    }
    let h = hermite_jets(n, z);
    &h[n - 1] / &h[n]
}

struct QuadTransformedSlice<'a> {
    owner: &'a QuadraticTransformed,
    s: BasisSnapshot,
    st: BasisSnapshot,
    mass: f64,
    a: Option<Box<dyn WaveSlice + 'a>>,
    b: Option<Box<dyn WaveSlice + 'a>>,
}

impl WaveSlice for QuadTransformedSlice<'_> {
    fn taylor(&self, x: f64, order: usize) -> Result<Jet> {
        let hbar = self.owner.spec.hbar;
        let n = self.owner.n;
        let nf = n as f64;
        let (s, st) = (&self.s, &self.st);
        let i = C64::new(0.0, 1.0);
        let xj = Jet::variable(x, order);
        match &self.owner.kind {
            QuadKind::General { psi, .. } => {
                let m = psi.info().index as f64;
                let pm = self.a.as_ref().expect("psi slice").taylor(x, order)?;
                let kappa = (s.omega / hbar).sqrt() / s.rho;
                let kappa_t = (st.omega / hbar).sqrt() / st.rho;
                let lin = Jet::constant(i * (self.mass * (s.xp_dot - st.xp_dot) / hbar), order)
                    + (&xj - s.xp).scale(C64::new(-s.omega / (s.rho * s.rho), self.mass * s.rho_dot / s.rho) / hbar)
                    - (&xj - st.xp).scale(C64::new(st.omega / (st.rho * st.rho), self.mass * st.rho_dot / st.rho) / hbar);
                let z = (&xj - st.xp).scale(i * kappa_t);
                let ratio = hermite_ratio_jet(n, &z);
                let mut acc = &pm * &lin - (&pm * &ratio).scale(i * (2.0 * nf * kappa_t));
                if let Some(prev) = &self.b {
                    let pp = prev.taylor(x, order)?;
                    acc = acc + pp.scale(C64::from_polar((2.0 * m).sqrt() * kappa, -s.phase));
                }
                Ok(acc.scale(C64::new(st.rho, 0.0)))
            }
            QuadKind::SameBasis { psi, .. } => {
                let m = psi.info().index as f64;
                let pm = self.a.as_ref().expect("psi slice").taylor(x, order)?;
                let pn = self.b.as_ref().expect("next slice").taylor(x, order)?;
                let w = (&xj - s.xp).scale(C64::new((s.omega / hbar).sqrt() / s.rho, 0.0));
                let ratio = hermite_ratio_jet(n, &w.scale(i));
                let acc = pn.scale(C64::from_polar((m + 1.0).sqrt(), s.phase))
                    + (&ratio * &pm).scale(i * (2f64.sqrt() * nf));
                Ok(acc.scale(C64::new(-(2.0 * s.omega / hbar).sqrt(), 0.0)))
            }
            QuadKind::Partner { .. } => {
                let v = self.a.as_ref().expect("aux slice").taylor(x, order)?;
                Ok(v.conj().recip().scale(C64::new(1.0 / st.rho, 0.0)))
            }
        }
    }
}

impl WaveFunction for QuadraticTransformed {
    fn info(&self) -> &WaveInfo {
        &self.info
    }

    fn at(&self, t: f64) -> Result<Box<dyn WaveSlice + '_>> {
        let mass = self.spec.coefficients(t)?.mass;
        let (a, b) = match &self.kind {
            QuadKind::General { psi, prev } => (Some(psi.at(t)?), prev.as_ref().map(|p| p.at(t)).transpose()?),
            QuadKind::SameBasis { psi, next } => (Some(psi.at(t)?), Some(next.at(t)?)),
            QuadKind::Partner { aux } => (Some(aux.at(t)?), None),
        };
        Ok(Box::new(QuadTransformedSlice {
            owner: self,
            s: self.pair.untilded.snapshot(t),
            st: self.pair.tilded.snapshot(t),
            mass,
            a,
            b,
        }))
    }
}

/// Eigenfunctions of the transformed unit oscillator with their energies.
pub struct SimpleTransformed {
    info: WaveInfo,
    n: usize,
    energy: f64,
    a: SharedWave,
    b: Option<SharedWave>,
}

/// `psi_m^{s,n}` with energy `(m + 1/2) hbar`, or for `m = -n` the extra
/// state with energy `-(n + 1/2) hbar`.
pub fn transformed_state_simple(m: i64, n: usize, hbar: f64) -> Result<(SimpleTransformed, f64)> {
    if n % 2 == 1 {
        return Err(Error::InvalidIndex(format!("auxiliary index {n} must be even")));
    }
    let info = WaveInfo { label: format!("psi_s[{m}; n={n}]"), family: Family::Physical, domain: Domain::Line, index: m, hbar };
    let st = if m >= 0 {
        let mu = m as usize;
        SimpleTransformed {
            info,
            n,
            energy: (m as f64 + 0.5) * hbar,
            a: Arc::new(psi_simple(mu, hbar)?),
            b: Some(Arc::new(psi_simple(mu + 1, hbar)?)),
        }
    } else if m == -(n as i64) {
        return partner_state_simple(n, hbar);
    } else {
        return Err(Error::InvalidIndex(format!("state index {m} must be >= 0 or equal -{n}")));
    };
    let e = st.energy;
    Ok((st, e))
}

/// `1 / conj(v_n^s)` with energy `-(n + 1/2) hbar`.
pub fn partner_state_simple(n: usize, hbar: f64) -> Result<(SimpleTransformed, f64)> {
    let info = WaveInfo {
        label: format!("psi_s[-{n}; n={n}]"),
        family: Family::Physical,
        domain: Domain::Line,
        index: -(n as i64),
        hbar,
    };
    let energy = -(n as f64 + 0.5) * hbar;
    Ok((SimpleTransformed { info, n, energy, a: Arc::new(aux_simple(n, hbar)?), b: None }, energy))
}

impl SimpleTransformed {
    pub fn energy(&self) -> f64 {
        self.energy
    }
}

struct SimpleTransformedSlice<'a> {
    owner: &'a SimpleTransformed,
    tau: f64,
    a: Box<dyn WaveSlice + 'a>,
    b: Option<Box<dyn WaveSlice + 'a>>,
}

impl WaveSlice for SimpleTransformedSlice<'_> {
    fn taylor(&self, x: f64, order: usize) -> Result<Jet> {
        let hbar = self.owner.info.hbar;
        let n = self.owner.n;
        let a = self.a.taylor(x, order)?;
        match &self.b {
            None => Ok(a.conj().recip()),
            Some(b) => {
                let m = self.owner.info.index as f64;
                let next = b.taylor(x, order)?;
                let z = Jet::variable(x, order).scale(C64::new(0.0, 1.0 / hbar.sqrt()));
                let ratio = hermite_ratio_jet(n, &z);
                let acc = next.scale(C64::from_polar((m + 1.0).sqrt(), self.tau))
                    + (&ratio * &a).scale(C64::new(0.0, 2f64.sqrt() * n as f64));
                Ok(acc.scale(C64::new(-(2.0 / hbar).sqrt(), 0.0)))
            }
        }
    }
}

impl WaveFunction for SimpleTransformed {
    fn info(&self) -> &WaveInfo {
        &self.info
    }

    fn at(&self, tau: f64) -> Result<Box<dyn WaveSlice + '_>> {
        Ok(Box::new(SimpleTransformedSlice {
            owner: self,
            tau,
            a: self.a.at(tau)?,
            b: self.b.as_ref().map(|b| b.at(tau)).transpose()?,
        }))
    }
}

/// Operator of the transformed unit oscillator.
pub fn simple_transformed_operator(n: usize, hbar: f64) -> SchrodingerOperator {
    SchrodingerOperator::simple(hbar).with_correction(Arc::new(SimpleCorrection { n, hbar }))
}

struct SimpleCorrection {
    n: usize,
    hbar: f64,
}

impl PotentialCorrection for SimpleCorrection {
    fn label(&self) -> String {
        format!("H1s[{}]", self.n)
    }

    fn slice(&self, _t: f64) -> Result<Box<dyn CorrectionSlice + '_>> {
        Ok(Box::new(SimpleCorrectionSlice { n: self.n, hbar: self.hbar }))
    }
}

struct SimpleCorrectionSlice {
    n: usize,
    hbar: f64,
}

impl CorrectionSlice for SimpleCorrectionSlice {
    fn delta_v(&self, x: f64) -> Result<f64> {
        Ok(h1_ns_delta_v(self.n, self.hbar, x))
    }
}

/// Which bracket to use in the one-fold inverse-square states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InverseSquareForm {
    /// `(m - n) - y + (n + a) L_{n-1}(-y)/L_n(-y)`, from `rho (psi' - psi v'/v)`
    Derived,
    /// `(m - n - 1) y + (n + a) L_{n-1}(-y)/L_n(-y)`
    Printed,
}

pub struct InverseSquareTransformed {
    info: WaveInfo,
    n: usize,
    form: InverseSquareForm,
    spec: Arc<InverseSquareSystemSpec>,
    basis: Arc<ClassicalBasis>,
    psi: SharedWave,
    prev: Option<SharedWave>,
}

/// `psi_m^{n,in}` built on a shared basis. For `alpha <= 0` the state is
/// still constructed; normalizability is left to the caller to check.
pub fn transformed_state_inverse_square(
    m: usize,
    n: usize,
    spec: Arc<InverseSquareSystemSpec>,
    basis: Arc<ClassicalBasis>,
    form: InverseSquareForm,
) -> Result<InverseSquareTransformed> {
    let psi: SharedWave = Arc::new(psi_inverse_square(m, spec.clone(), basis.clone())?);
    let prev: Option<SharedWave> = if m > 0 {
        Some(Arc::new(psi_inverse_square(m - 1, spec.clone(), basis.clone())?))
    } else {
        None
    };
    Ok(InverseSquareTransformed {
        info: WaveInfo {
            label: format!("psi_in[{m}; n={n}]"),
            family: Family::Physical,
            domain: Domain::HalfLine,
            index: m as i64,
            hbar: spec.hbar,
        },
        n,
        form,
        spec,
        basis,
        psi,
        prev,
    })
}

struct InverseTransformedSlice<'a> {
    owner: &'a InverseSquareTransformed,
    s: BasisSnapshot,
    psi: Box<dyn WaveSlice + 'a>,
    prev: Option<Box<dyn WaveSlice + 'a>>,
}

impl WaveSlice for InverseTransformedSlice<'_> {
    fn taylor(&self, x: f64, order: usize) -> Result<Jet> {
        if !(x > 0.0) {
            return Err(Error::HalfLine { x });
        }
        let o = self.owner;
        let alpha = o.spec.alpha();
        let (m, n) = (o.info.index as f64, o.n as f64);
        let s = &self.s;
        let xj = Jet::variable(x, order);
        let y = &xj * &xj * (s.omega / (o.spec.hbar * s.rho * s.rho));
        let q = if o.n == 0 {
            Jet::real(0.0, order)
        } else {
            let l = laguerre_jets(o.n, alpha, &(-&y));
            &l[o.n - 1] / &l[o.n]
        };
        let bracket = match o.form {
            InverseSquareForm::Derived => (-&y + (m - n)) + q * (n + alpha),
            InverseSquareForm::Printed => &y * (m - n - 1.0) + q * (n + alpha),
        };
        let pm = self.psi.taylor(x, order)?;
        let mut acc = &bracket * &pm;
        if let Some(prev) = &self.prev {
            let pp = prev.taylor(x, order)?;
            acc = acc - pp.scale(C64::from_polar((m * (m + alpha)).sqrt(), -2.0 * s.phase));
        }
        Ok((acc / &xj).scale(C64::new(2.0 * s.rho, 0.0)))
    }
}

impl WaveFunction for InverseSquareTransformed {
    fn info(&self) -> &WaveInfo {
        &self.info
    }

    fn at(&self, t: f64) -> Result<Box<dyn WaveSlice + '_>> {
        Ok(Box::new(InverseTransformedSlice {
            owner: self,
            s: self.basis.snapshot(t),
            psi: self.psi.at(t)?,
            prev: self.prev.as_ref().map(|p| p.at(t)).transpose()?,
        }))
    }
}
