//! Pipelines behind the command-line subcommands.
//!
//! Each pipeline turns a validated [`Scenario`] into a [`Report`] plus the
//! data files to write next to it. Nothing here touches the file system, so
//! the same code serves the CLI, the acceptance tests and the determinism
//! check. Admissibility failures of the requested transform (a vanishing or
//! non-Hermitizable Wronskian) become failed checks; other errors propagate
//! and map to exit codes through [`exit_code_for`].

use std::cell::RefCell;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::classical::ClassicalBasis;
use crate::darboux::{
    alpha_closed_form_defect, crum_residual, transform, transformed_state_inverse_square, transformed_state_quadratic,
    w2_inverse_closed, w2_quadratic_closed, wronskian, AlphaForm, ClosedForm, CrumDerivative, PotentialCorrection,
    SchrodingerOperator, TransformOptions, TransformResult,
};
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::scenario::{AuxiliaryKind, Scenario, Setup, TransformDef};
use crate::specfun::{j_n, j_n_wronskian, k_n, k_n_wronskian};
use crate::states::{
    aux_inverse_square, aux_quadratic, aux_quadratic_unchecked, psi_inverse_square, psi_quadratic, ClosureWave,
    Domain, Family, SharedWave, SumWave, WaveInfo,
};
use crate::verify::{
    propagate_cn, relative_l2_deviation, sample, schrodinger_residual, track_delta_v_extremum, CnOptions, Grid,
    ZERO_RATIO,
};
use crate::C64;

pub const TOOL: &str = "darboux";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Random Gaussian-polynomial sets per order in the Crum suite.
pub const CRUM_SAMPLES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Identities,
    Residuals,
    Potential,
    Evolve,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Identities => "identities",
            Command::Residuals => "residuals",
            Command::Potential => "potential",
            Command::Evolve => "evolve",
            Command::Report => "report",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// passes when `value < tolerance`
    Below,
    /// passes when `value > tolerance`
    Above,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, bound: Bound::Below, tolerance, passed: value < tolerance, reason: None }
    }

    pub fn above(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, bound: Bound::Above, tolerance, passed: value > tolerance, reason: None }
    }

    fn because(mut self, reason: impl Into<String>) -> Self {
        self.reason = Some(reason.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub scenario: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub passed: bool,
    /// names of the failed checks, with the reason when one is known
    pub failures: Vec<String>,
    pub checks: Vec<Check>,
    pub sections: Map<String, Value>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// A file produced by a pipeline, relative to the output directory.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub report: Report,
    pub artifacts: Vec<Artifact>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.passed {
            0
        } else {
            1
        }
    }
}

/// 2 for configuration and contract errors, 1 for admissibility failures,
/// 3 for numerical failures.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::InvalidIndex(_)
        | Error::InvalidCoupling(_)
        | Error::InvalidProfile(_)
        | Error::Grid(_)
        | Error::Capability { .. }
        | Error::HalfLine { .. }
        | Error::Domain { .. } => 2,
        Error::NonHermitizable { .. } | Error::ZeroCrossing { .. } => 1,
        _ => 3,
    }
}

/// Seventeen significant digits.
pub fn csv_number(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_row(values: &[f64]) -> String {
    let mut s = values.iter().map(|&v| csv_number(v)).collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

pub fn run(command: Command, sc: &Scenario) -> Result<Outcome> {
    sc.validate()?;
    let ctx = Context::new(sc)?;
    let mut acc = Accumulator::default();
    match command {
        Command::Identities => identities(&ctx, &mut acc)?,
        Command::Residuals => residuals(&ctx, &mut acc)?,
        Command::Potential => potential(&ctx, &mut acc)?,
        Command::Evolve => evolve(&ctx, &mut acc)?,
        Command::Report => {
            identities(&ctx, &mut acc)?;
            residuals(&ctx, &mut acc)?;
            if ctx.transform.is_some() {
                potential(&ctx, &mut acc)?;
            }
            evolve(&ctx, &mut acc)?;
        }
    }
    Ok(acc.finish(command, sc))
}

#[derive(Default)]
struct Accumulator {
    checks: Vec<Check>,
    sections: Map<String, Value>,
    artifacts: Vec<Artifact>,
}

impl Accumulator {
    fn push(&mut self, c: Check) {
        if !self.checks.iter().any(|d| d.name == c.name) {
            self.checks.push(c);
        }
    }

    fn finish(mut self, command: Command, sc: &Scenario) -> Outcome {
        let failures: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| match &c.reason {
                Some(r) => format!("{}: {r}", c.name),
                None => c.name.clone(),
            })
            .collect();
        let report = Report {
            tool: TOOL.into(),
            version: VERSION.into(),
            command,
            scenario: sc.name.clone(),
            scenario_hash: sc.hash(),
            seed: sc.seed,
            passed: failures.is_empty(),
            failures,
            checks: self.checks,
            sections: self.sections,
        };
        self.artifacts.push(Artifact { name: format!("{}.json", command.name()), contents: report.to_json() });
        Outcome { report, artifacts: self.artifacts }
    }
}

struct Requested {
    def: TransformDef,
    aux: Vec<SharedWave>,
    closed: Option<ClosedForm>,
    alpha: Option<(AlphaForm, Arc<ClassicalBasis>)>,
    /// `Err` holds an admissibility failure
    engine: std::result::Result<Arc<TransformResult>, Error>,
}

struct Context<'a> {
    sc: &'a Scenario,
    setup: Setup,
    grid: Grid,
    base: SchrodingerOperator,
    transform: Option<Requested>,
}

impl<'a> Context<'a> {
    fn new(sc: &'a Scenario) -> Result<Self> {
        let setup = sc.build()?;
        let grid = sc.grid()?;
        let base = match &setup {
            Setup::Quadratic { spec, .. } => SchrodingerOperator::quadratic(spec.clone()),
            Setup::InverseSquare { spec, .. } => SchrodingerOperator::inverse_square(spec.clone()),
        };
        let mut ctx = Context { sc, setup, grid, base, transform: None };
        if let Some(def) = &sc.transform {
            ctx.transform = Some(ctx.request(def)?);
        }
        Ok(ctx)
    }

    fn aux_basis(&self) -> Arc<ClassicalBasis> {
        match &self.setup {
            Setup::Quadratic { pair, .. } => pair.tilded.clone(),
            Setup::InverseSquare { basis, .. } => basis.clone(),
        }
    }

    fn psi(&self, m: usize) -> Result<SharedWave> {
        Ok(match &self.setup {
            Setup::Quadratic { spec, pair } => Arc::new(psi_quadratic(m, spec.clone(), pair.untilded.clone())?),
            Setup::InverseSquare { spec, basis } => Arc::new(psi_inverse_square(m, spec.clone(), basis.clone())?),
        })
    }

    fn aux_psi(&self, m: usize) -> Result<SharedWave> {
        let b = self.aux_basis();
        Ok(match &self.setup {
            Setup::Quadratic { spec, .. } => Arc::new(psi_quadratic(m, spec.clone(), b)?),
            Setup::InverseSquare { spec, .. } => Arc::new(psi_inverse_square(m, spec.clone(), b)?),
        })
    }

    fn aux_v(&self, n: usize, checked: bool) -> Result<SharedWave> {
        let b = self.aux_basis();
        Ok(match &self.setup {
            Setup::Quadratic { spec, .. } if checked => Arc::new(aux_quadratic(n, spec.clone(), b)?),
            Setup::Quadratic { spec, .. } => Arc::new(aux_quadratic_unchecked(n, spec.clone(), b)?),
            Setup::InverseSquare { spec, .. } => Arc::new(aux_inverse_square(n, spec.clone(), b, None)?),
        })
    }

    fn request(&self, def: &TransformDef) -> Result<Requested> {
        let b = self.aux_basis();
        let (n, k) = (def.n, def.order);
        let (aux, closed, alpha) = match def.auxiliary {
            AuxiliaryKind::V => {
                let closed = match &self.setup {
                    Setup::Quadratic { spec, .. } => ClosedForm::OneFoldQuadratic { n, spec: spec.clone(), basis: b.clone() },
                    Setup::InverseSquare { spec, .. } => ClosedForm::OneFoldInverse { n, spec: spec.clone(), basis: b.clone() },
                };
                (vec![self.aux_v(n, true)?], Some(closed), Some((AlphaForm::OneFold, b)))
            }
            AuxiliaryKind::Psi => {
                let aux = (n..n + k).map(|j| self.aux_psi(j)).collect::<Result<Vec<_>>>()?;
                let closed = (k == 2).then(|| match &self.setup {
                    Setup::Quadratic { spec, .. } => ClosedForm::TwoFoldQuadratic { n, spec: spec.clone(), basis: b.clone() },
                    Setup::InverseSquare { spec, .. } => ClosedForm::TwoFoldInverse { n, spec: spec.clone(), basis: b.clone() },
                });
                let alpha = match k {
                    1 => Some((AlphaForm::OneFold, b)),
                    2 => Some((AlphaForm::TwoFold, b)),
                    _ => None,
                };
                (aux, closed, alpha)
            }
            AuxiliaryKind::VSum => {
                let terms = def
                    .indices
                    .iter()
                    .map(|&j| Ok((C64::new(1.0, 0.0), self.aux_v(j, false)?)))
                    .collect::<Result<Vec<_>>>()?;
                let label = def.indices.iter().map(|j| format!("v{j}")).collect::<Vec<_>>().join("+");
                let sum: SharedWave = Arc::new(SumWave::new(label, terms)?);
                (vec![sum], None, None)
            }
        };
        let mut opts = TransformOptions::new(self.grid.clone(), self.sc.span);
        opts.check_times = self.sc.times();
        let engine = match transform(&self.base, aux.clone(), &opts) {
            Ok(r) => Ok(Arc::new(r)),
            Err(e @ (Error::NonHermitizable { .. } | Error::ZeroCrossing { .. })) => Err(e),
            Err(e) => return Err(e),
        };
        Ok(Requested { def: def.clone(), aux, closed, alpha, engine })
    }

    /// The admissibility gate as a check, present whenever a transform is
    /// requested.
    fn gate(&self) -> Option<Check> {
        let tr = self.transform.as_ref()?;
        let tol = self.sc.tolerances.identity;
        Some(match &tr.engine {
            Ok(r) => Check::below("hermiticity_spread", r.diagnostics().hermiticity_spread, tol),
            Err(Error::NonHermitizable { spread }) => {
                Check::below("hermiticity_spread", *spread, tol).because(format!("non-Hermitizable (spread {spread:e})"))
            }
            Err(Error::ZeroCrossing { t, x }) => {
                Check::above("zero_free", 0.0, ZERO_RATIO).because(format!("Wronskian vanishes near x = {x} at t = {t}"))
            }
            Err(e) => Check::below("transform", f64::NAN, tol).because(e.to_string()),
        })
    }

    fn transformed_operator(&self) -> Option<SchrodingerOperator> {
        let tr = self.transform.as_ref()?;
        match (&tr.closed, &tr.engine) {
            (Some(c), _) => Some(c.operator()),
            (None, Ok(r)) => Some(r.transformed_operator()),
            _ => None,
        }
    }

    /// The solution of the transformed system labelled by `m`, in closed form
    /// when one exists. `None` when `m` is annihilated by the transform or the
    /// transform is not admissible.
    fn transformed(&self, m: i64) -> Result<Option<SharedWave>> {
        let Some(tr) = &self.transform else { return Ok(None) };
        let n = tr.def.n;
        if tr.def.auxiliary == AuxiliaryKind::V {
            return Ok(Some(match &self.setup {
                Setup::Quadratic { spec, pair } => Arc::new(transformed_state_quadratic(m, n, spec.clone(), pair.clone())?),
                Setup::InverseSquare { spec, basis } => Arc::new(transformed_state_inverse_square(
                    usize::try_from(m).map_err(|_| Error::InvalidIndex(format!("state index {m}")))?,
                    n,
                    spec.clone(),
                    basis.clone(),
                    tr.def.form,
                )?),
            }));
        }
        let Ok(engine) = &tr.engine else { return Ok(None) };
        let Ok(mu) = usize::try_from(m) else { return Ok(None) };
        let shared = match &self.setup {
            Setup::Quadratic { pair, .. } => pair.is_shared(),
            Setup::InverseSquare { .. } => true,
        };
        if shared && tr.def.auxiliary == AuxiliaryKind::Psi && (n..n + tr.def.order).contains(&mu) {
            return Ok(None);
        }
        Ok(Some(Arc::new(engine.transformed_state(self.psi(mu)?))))
    }

    fn delta_v(&self) -> Option<(Arc<dyn PotentialCorrection>, &'static str)> {
        let tr = self.transform.as_ref()?;
        match (&tr.closed, &tr.engine) {
            (Some(c), _) => Some((Arc::new(c.clone()), "closed_form")),
            (None, Ok(r)) => Some((r.clone(), "engine")),
            _ => None,
        }
    }

    /// Points for pointwise identity checks, offset from the grid nodes.
    fn probe_points(&self, count: usize) -> Vec<f64> {
        let l = self.sc.hbar().sqrt();
        let (lo, hi) = if self.grid.half_line { (0.05 * l, 6.0 * l) } else { (-6.0 * l, 6.0 * l) };
        let (lo, hi) = (lo.max(self.grid.x_min), hi.min(self.grid.x_max));
        (0..count).map(|i| lo + (hi - lo) * (i as f64 + 0.37) / count as f64).collect()
    }

    fn interior_times(&self) -> Vec<f64> {
        let (a, b) = self.sc.span;
        let margin = 0.01 * (b - a);
        let t: Vec<f64> = self.sc.times().into_iter().filter(|&t| t > a + margin && t < b - margin).collect();
        if t.is_empty() {
            vec![0.5 * (a + b)]
        } else {
            t
        }
    }
}

fn gauss_poly(rng: &mut ChaCha8Rng, label: String) -> SharedWave {
    let c: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    let width: f64 = rng.gen_range(0.7..1.5);
    let shift: f64 = rng.gen_range(-0.5..0.5);
    let info = WaveInfo { label, family: Family::Auxiliary, domain: Domain::Line, index: 0, hbar: 1.0 };
    Arc::new(ClosureWave::new(
        info,
        usize::MAX,
        Arc::new(move |_t: f64, x: f64, order: usize| {
            let s = Jet::variable(x - shift, order);
            let poly = Jet::real(c[0], order) + &s * c[1] + &(&s * &s) * c[2];
            let g = (&(&s * &s) * (-0.5 / (width * width))).exp();
            (&poly * &g).derivatives()
        }),
    ))
}

fn identities(ctx: &Context<'_>, acc: &mut Accumulator) -> Result<()> {
    let sc = ctx.sc;
    let tol = &sc.tolerances;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let mut section = Map::new();

    // J_n > 0 on the real line, K_n < 0 on y > 0, recursions against the
    // Wronskian definitions
    let alpha = match &ctx.setup {
        Setup::InverseSquare { spec, .. } => spec.alpha(),
        Setup::Quadratic { .. } => 1.5,
    };
    let (mut j_min, mut k_max, mut j_rec, mut k_rec) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, 0.0f64);
    let samples = 200;
    for _ in 0..samples {
        let n = rng.gen_range(0..=8usize);
        let w: f64 = rng.gen_range(-6.0..6.0);
        let y: f64 = rng.gen_range(1e-3..30.0);
        let (j, k) = (j_n(n, w), k_n(n, alpha, y));
        j_min = j_min.min(j);
        k_max = k_max.max(k);
        j_rec = j_rec.max((j - j_n_wronskian(n, w)).abs() / j.abs());
        k_rec = k_rec.max((k - k_n_wronskian(n, alpha, y)).abs() / k.abs());
    }
    acc.push(Check::above("j_positive", j_min, 0.0));
    acc.push(Check::below("k_negative", k_max, 0.0));
    acc.push(Check::below("j_recursion", j_rec, tol.recursion));
    acc.push(Check::below("k_recursion", k_rec, tol.recursion));
    section.insert("special_function_samples".into(), json!(samples));
    section.insert("k_alpha".into(), json!(alpha));

    // Crum's formula on random Gaussian-polynomial columns
    for k in [2usize, 3] {
        let mut worst = 0.0f64;
        for i in 0..CRUM_SAMPLES {
            let aux: Vec<SharedWave> = (0..k).map(|j| gauss_poly(&mut rng, format!("u{i}_{j}"))).collect();
            let psi = gauss_poly(&mut rng, format!("f{i}"));
            let x: f64 = rng.gen_range(-2.0..2.0);
            worst = worst.max(crum_residual(&aux, &psi, 0.0, x, CrumDerivative::Exact)?);
        }
        acc.push(Check::below(format!("crum_k{k}"), worst, tol.identity));
    }
    section.insert("crum_samples".into(), json!(CRUM_SAMPLES));

    if let Some(gate) = ctx.gate() {
        acc.push(gate);
    }
    if let Some(tr) = &ctx.transform {
        if let Ok(engine) = &tr.engine {
            let d = engine.diagnostics();
            acc.push(Check::above("zero_free", d.min_zero_ratio, ZERO_RATIO));
            section.insert("transform".into(), serde_json::to_value(d).expect("diagnostics serialize"));
            let times = ctx.interior_times();
            if let Some((form, basis)) = &tr.alpha {
                let defect = alpha_closed_form_defect(engine, *form, basis, &times, 1e-3)?;
                acc.push(Check::below("alpha_closed_form", defect, tol.alpha));
            }
            let points = ctx.probe_points(25);
            if let Some(closed) = &tr.closed {
                let mut worst = 0.0f64;
                for &t in &times {
                    let scale = closed.asymptote(t)?.abs();
                    let cs = closed.slice(t)?;
                    for &x in &points {
                        let c = cs.delta_v(x)?;
                        worst = worst.max((engine.delta_v(t, x)? - c).abs() / scale.max(c.abs()));
                    }
                }
                acc.push(Check::below("engine_vs_closed_form", worst, tol.identity));
            }
            if tr.def.auxiliary == AuxiliaryKind::Psi && tr.def.order == 2 {
                let n = tr.def.n;
                let mut ratios = Vec::new();
                for &t in &times {
                    for &x in &points {
                        let closed = match &ctx.setup {
                            Setup::Quadratic { spec, .. } => w2_quadratic_closed(n, spec, &ctx.aux_basis(), t, x)?,
                            Setup::InverseSquare { spec, .. } => w2_inverse_closed(n, spec, &ctx.aux_basis(), t, x)?,
                        };
                        let w = wronskian(&tr.aux, t, x)?;
                        if closed.norm() > 1e-250 {
                            ratios.push(w / closed);
                        }
                    }
                }
                let r0 = ratios.first().copied().unwrap_or(C64::new(f64::NAN, 0.0));
                let spread = ratios.iter().map(|r| (r / r0 - 1.0).norm()).fold(0.0, f64::max);
                acc.push(Check::below("wronskian_constant_ratio", spread, tol.wronskian));
                section.insert("wronskian_ratio".into(), json!([r0.re, r0.im]));
            }
            if tr.aux.len() >= 2 {
                let psi = ctx.psi(tr.def.n + tr.def.order)?;
                let mut worst = 0.0f64;
                for &t in &times {
                    for &x in &points {
                        worst = worst.max(crum_residual(&tr.aux, &psi, t, x, CrumDerivative::Exact)?);
                    }
                }
                acc.push(Check::below("crum_scenario", worst, tol.identity));
            }
        }
    }
    acc.sections.insert("identities".into(), Value::Object(section));
    Ok(())
}

#[derive(Serialize)]
struct ResidualEntry {
    state: String,
    operator: &'static str,
    relative_l2: f64,
    sup_residual: f64,
    sup_location: (f64, f64),
}

fn residuals(ctx: &Context<'_>, acc: &mut Accumulator) -> Result<()> {
    let tol = ctx.sc.tolerances.residual;
    let mut jobs: Vec<(SharedWave, SchrodingerOperator, &'static str)> = Vec::new();
    for &m in &ctx.sc.states {
        if let Ok(mu) = usize::try_from(m) {
            jobs.push((ctx.psi(mu)?, ctx.base.clone(), "original"));
        }
    }
    if let Some(gate) = ctx.gate() {
        acc.push(gate);
    }
    if let Some(tr) = &ctx.transform {
        for a in &tr.aux {
            jobs.push((a.clone(), ctx.base.clone(), "original"));
        }
        if let Some(op) = ctx.transformed_operator() {
            for &m in &ctx.sc.states {
                if let Some(w) = ctx.transformed(m)? {
                    jobs.push((w, op.clone(), "transformed"));
                }
            }
        }
    }
    let mut entries = Vec::new();
    let mut csv = String::from("state,operator,t,relative_l2\n");
    for (wave, op, kind) in jobs {
        let label = wave.info().label.clone();
        let r = schrodinger_residual(&op, wave.as_ref(), &ctx.grid)?;
        for p in &r.per_t {
            csv.push_str(&format!("{label},{kind},{},{}\n", csv_number(p.t), csv_number(p.relative_l2)));
        }
        acc.push(Check::below(format!("residual:{kind}:{label}"), r.relative_l2, tol));
        entries.push(ResidualEntry {
            state: label,
            operator: kind,
            relative_l2: r.relative_l2,
            sup_residual: r.sup_residual,
            sup_location: r.sup_location,
        });
    }
    acc.sections.insert("residuals".into(), serde_json::to_value(entries).expect("entries serialize"));
    acc.artifacts.push(Artifact { name: "residuals.csv".into(), contents: csv });
    Ok(())
}

fn potential(ctx: &Context<'_>, acc: &mut Accumulator) -> Result<()> {
    if ctx.transform.is_none() {
        return Err(Error::Config("the potential pipeline needs a transform".into()));
    }
    if let Some(gate) = ctx.gate() {
        acc.push(gate);
    }
    let Some((dv, source)) = ctx.delta_v() else { return Ok(()) };
    let times = ctx.sc.times();
    let xs = ctx.grid.points();
    let mut csv = String::from("t,x,deltaV\n");
    for &t in &times {
        let slice = dv.slice(t)?;
        for &x in &xs {
            csv.push_str(&csv_row(&[t, x, slice.delta_v(x)?]));
        }
    }
    acc.artifacts.push(Artifact { name: "deltaV.csv".into(), contents: csv });
    let mut section = Map::new();
    section.insert("source".into(), json!(source));
    section.insert("label".into(), json!(dv.label()));
    section.insert("times".into(), json!(times));
    section.insert("points".into(), json!(xs.len()));
    if ctx.sc.track_extremum {
        let f = |t: f64, x: f64| dv.slice(t)?.delta_v(x);
        match track_delta_v_extremum(&f, &ctx.grid, &times, ctx.sc.hbar()) {
            Ok(track) => {
                let mut csv = String::from("t,x,depth\n");
                for s in &track {
                    csv.push_str(&csv_row(&[s.t, s.x, s.depth]));
                }
                acc.artifacts.push(Artifact { name: "extremum.csv".into(), contents: csv });
                if !ctx.grid.half_line {
                    let centre = ctx.aux_basis();
                    let off = track.iter().map(|s| (s.x - centre.xp(s.t).0).abs()).fold(0.0, f64::max);
                    acc.push(Check::below("extremum_tracks_xp", off / ctx.grid.dx(), 2.0));
                }
                section.insert("extremum_track".into(), serde_json::to_value(&track).expect("track serializes"));
            }
            Err(e @ Error::FlatPotential { .. }) => {
                acc.push(Check::above("extremum_track", 0.0, 0.0).because(e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    acc.sections.insert("potential".into(), Value::Object(section));
    Ok(())
}

#[derive(Serialize)]
struct EvolveSample {
    t: f64,
    l2_deviation: f64,
    norm_drift: f64,
}

fn evolve(ctx: &Context<'_>, acc: &mut Accumulator) -> Result<()> {
    let sc = ctx.sc;
    if let Some(gate) = ctx.gate() {
        acc.push(gate);
    }
    let (wave, op) = match &ctx.transform {
        Some(_) => {
            let Some(op) = ctx.transformed_operator() else { return Ok(()) };
            let mut found = None;
            for &m in &sc.states {
                if let Some(w) = ctx.transformed(m)? {
                    found = Some(w);
                    break;
                }
            }
            let w = found.ok_or_else(|| Error::Config("no requested state survives the transform".into()))?;
            (w, op)
        }
        None => {
            let m = sc.states.iter().copied().find(|&m| m >= 0).unwrap_or(0);
            (ctx.psi(m as usize)?, ctx.base.clone())
        }
    };
    let grid = &ctx.grid;
    let (t0, t1) = sc.span;
    let steps = sc.evolve.steps;
    let every = (steps / sc.evolve.series).max(1);
    let psi0 = sample(wave.as_ref(), grid, t0)?;
    let interior = |v: &[C64]| v[1..v.len() - 1].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let n0 = interior(&psi0);
    let series = RefCell::new(vec![EvolveSample { t: t0, l2_deviation: 0.0, norm_drift: 0.0 }]);
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let mut observer = |step: usize, t: f64, psi: &[C64]| {
        if step % every != 0 && step != steps {
            return;
        }
        match sample(wave.as_ref(), grid, t) {
            Ok(exact) => series.borrow_mut().push(EvolveSample {
                t,
                l2_deviation: relative_l2_deviation(psi, &exact),
                norm_drift: (interior(psi) / n0 - 1.0).abs(),
            }),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
            }
        }
    };
    let out = propagate_cn(&op, &psi0, grid, (t0, t1), steps, &CnOptions::default(), &mut observer)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let series = series.into_inner();
    let worst = series.iter().map(|s| s.l2_deviation).fold(0.0, f64::max);
    acc.push(Check::below("evolve_l2_deviation", worst, sc.tolerances.evolve));
    acc.push(Check::below("norm_drift", out.norm_drift, sc.tolerances.norm_drift));
    let mut csv = String::from("t,l2_deviation,norm_drift\n");
    for s in &series {
        csv.push_str(&csv_row(&[s.t, s.l2_deviation, s.norm_drift]));
    }
    acc.artifacts.push(Artifact { name: "evolve.csv".into(), contents: csv });
    acc.sections.insert(
        "evolve".into(),
        json!({
            "state": wave.info().label,
            "steps": steps,
            "points": grid.n_points,
            "norm_drift": out.norm_drift,
            "max_edge_ratio": out.max_edge_ratio,
            "series": series,
        }),
    );
    Ok(())
}
