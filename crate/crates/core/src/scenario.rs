//! Versioned scenario files driving the command-line pipelines.
//!
//! A scenario names one system, its classical basis (a preset or initial
//! conditions), an optional transformation request and the sampling grid.
//! Unknown keys are rejected at every level.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classical::{BasisPair, ClassicalBasis, Tolerance};
use crate::darboux::InverseSquareForm;
use crate::error::{Error, Result};
use crate::system::{ClassicalEom, InverseSquareSystemSpec, QuadraticSystemSpec};
use crate::verify::{Grid, MIN_POINTS};

pub const SCHEMA_VERSION: u32 = 1;

/// Breathing and oscillating one-fold scenario used when no file is given.
pub const DEFAULT_SCENARIO: &str = include_str!("../scenarios/default.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub system: SystemDef,
    pub basis: BasisDef,
    /// basis carrying the auxiliary function; defaults to `basis`
    #[serde(default)]
    pub tilded_basis: Option<BasisDef>,
    #[serde(default)]
    pub transform: Option<TransformDef>,
    /// quantum numbers of the physical states to check and transform
    #[serde(default = "default_states")]
    pub states: Vec<i64>,
    #[serde(default)]
    pub grid: GridDef,
    #[serde(default = "default_span")]
    pub span: (f64, f64),
    #[serde(default)]
    pub evolve: EvolveDef,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub track_extremum: bool,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

fn default_states() -> Vec<i64> {
    vec![0, 1, 2]
}

fn default_span() -> (f64, f64) {
    (0.0, std::f64::consts::TAU)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemDef {
    Quadratic(QuadraticSystemSpec),
    InverseSquare(InverseSquareSystemSpec),
}

impl SystemDef {
    pub fn hbar(&self) -> f64 {
        match self {
            SystemDef::Quadratic(s) => s.hbar,
            SystemDef::InverseSquare(s) => s.hbar,
        }
    }

    fn eom(&self) -> Arc<dyn ClassicalEom> {
        match self {
            SystemDef::Quadratic(s) => Arc::new(s.clone()),
            SystemDef::InverseSquare(s) => Arc::new(s.clone()),
        }
    }
}

/// `u = cos wt`, `v = c sin wt`, `xp = d cos wt` presets, or initial
/// conditions `(x, x')` at the span start integrated numerically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasisDef {
    Circular,
    Elliptic { c: f64 },
    Driven { d: f64 },
    Harmonic { c: f64, d: f64 },
    Initial {
        u: (f64, f64),
        v: (f64, f64),
        #[serde(default)]
        xp: (f64, f64),
    },
}

impl BasisDef {
    fn build(&self, eom: Arc<dyn ClassicalEom>, span: (f64, f64)) -> Result<ClassicalBasis> {
        let (c, d) = match *self {
            BasisDef::Circular => (1.0, 0.0),
            BasisDef::Elliptic { c } => (c, 0.0),
            BasisDef::Driven { d } => (1.0, d),
            BasisDef::Harmonic { c, d } => (c, d),
            BasisDef::Initial { u, v, xp } => {
                return ClassicalBasis::integrated(eom, u, v, xp, span, Tolerance::default());
            }
        };
        ClassicalBasis::harmonic(eom, c, d, span)
    }

    fn particular_motion(&self) -> bool {
        match *self {
            BasisDef::Driven { d } | BasisDef::Harmonic { d, .. } => d != 0.0,
            BasisDef::Initial { xp, .. } => xp != (0.0, 0.0),
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxiliaryKind {
    /// one-fold with the non-normalizable `v_n`
    V,
    /// `order` consecutive physical states `psi_n, psi_{n+1}, ...`
    Psi,
    /// one-fold with `sum_j v_{indices[j]}`
    VSum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformDef {
    pub auxiliary: AuxiliaryKind,
    #[serde(default)]
    pub n: usize,
    #[serde(default = "one")]
    pub order: usize,
    #[serde(default)]
    pub indices: Vec<usize>,
    #[serde(default = "derived_form")]
    pub form: InverseSquareForm,
}

fn one() -> usize {
    1
}

fn derived_form() -> InverseSquareForm {
    InverseSquareForm::Derived
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDef {
    /// half-width on the line, or `x_max` on the half line, in units of
    /// `sqrt(hbar)`
    #[serde(default = "default_extent")]
    pub extent: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    /// explicit sample times; otherwise `t_samples` evenly spaced over the span
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default = "default_t_samples")]
    pub t_samples: usize,
}

fn default_extent() -> f64 {
    10.0
}

fn default_points() -> usize {
    2048
}

fn default_t_samples() -> usize {
    9
}

impl Default for GridDef {
    fn default() -> Self {
        GridDef { extent: default_extent(), points: default_points(), times: None, t_samples: default_t_samples() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveDef {
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// number of deviation samples written along the run
    #[serde(default = "default_series")]
    pub series: usize,
}

fn default_steps() -> usize {
    4096
}

fn default_series() -> usize {
    32
}

impl Default for EvolveDef {
    fn default() -> Self {
        EvolveDef { steps: default_steps(), series: default_series() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "tol_residual")]
    pub residual: f64,
    #[serde(default = "tol_identity")]
    pub identity: f64,
    #[serde(default = "tol_alpha")]
    pub alpha: f64,
    #[serde(default = "tol_evolve")]
    pub evolve: f64,
    #[serde(default = "tol_drift")]
    pub norm_drift: f64,
    /// special-function recursion against the Wronskian definition
    #[serde(default = "tol_recursion")]
    pub recursion: f64,
    /// constancy of the engine-to-closed-form Wronskian ratio
    #[serde(default = "tol_wronskian")]
    pub wronskian: f64,
}

fn tol_residual() -> f64 {
    1e-6
}

fn tol_identity() -> f64 {
    1e-8
}

fn tol_alpha() -> f64 {
    1e-6
}

fn tol_evolve() -> f64 {
    1e-3
}

fn tol_drift() -> f64 {
    1e-10
}

fn tol_recursion() -> f64 {
    1e-10
}

fn tol_wronskian() -> f64 {
    1e-9
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            residual: tol_residual(),
            identity: tol_identity(),
            alpha: tol_alpha(),
            evolve: tol_evolve(),
            norm_drift: tol_drift(),
            recursion: tol_recursion(),
            wronskian: tol_wronskian(),
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub grid_points: Option<usize>,
    pub hbar: Option<f64>,
    pub output: Option<String>,
}

/// The built objects a pipeline works with.
#[derive(Clone, Debug)]
pub enum Setup {
    Quadratic { spec: Arc<QuadraticSystemSpec>, pair: BasisPair },
    InverseSquare { spec: Arc<InverseSquareSystemSpec>, basis: Arc<ClassicalBasis> },
}

impl Scenario {
    pub fn default_scenario() -> Self {
        Self::from_json(DEFAULT_SCENARIO).expect("bundled scenario is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(n) = o.grid_points {
            self.grid.points = n;
        }
        if let Some(out) = &o.output {
            self.output = Some(out.clone());
        }
        if let Some(hbar) = o.hbar {
            // rebuilt through the constructors so derived quantities follow
            self.system = match &self.system {
                SystemDef::Quadratic(s) => SystemDef::Quadratic(QuadraticSystemSpec { hbar, ..s.clone() }),
                SystemDef::InverseSquare(s) => SystemDef::InverseSquare(InverseSquareSystemSpec::new(
                    s.mass.clone(),
                    s.a.clone(),
                    s.c.clone(),
                    s.g,
                    hbar,
                )?),
            };
        }
        self.validate()
    }

    /// Hex SHA-256 of the canonical (compact) JSON of the effective scenario.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("scenario serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        let hbar = self.system.hbar();
        if !(hbar > 0.0 && hbar.is_finite()) {
            return bad(format!("hbar must be positive, got {hbar}"));
        }
        if !(self.span.1 > self.span.0) {
            return bad(format!("empty span {:?}", self.span));
        }
        if self.grid.points < MIN_POINTS {
            return bad(format!("grid needs at least {MIN_POINTS} points, got {}", self.grid.points));
        }
        if !(self.grid.extent > 0.0) {
            return bad("grid extent must be positive".into());
        }
        if self.grid.times.is_none() && self.grid.t_samples == 0 {
            return bad("t_samples must be positive".into());
        }
        if self.states.is_empty() {
            return bad("at least one state is required".into());
        }
        if self.evolve.steps == 0 || self.evolve.series == 0 {
            return bad("evolve needs positive steps and series".into());
        }
        let inverse = matches!(self.system, SystemDef::InverseSquare(_));
        for b in std::iter::once(&self.basis).chain(&self.tilded_basis) {
            if inverse && b.particular_motion() {
                return bad("the inverse-square system has no particular motion; use d = 0".into());
            }
        }
        if let Some(tr) = &self.transform {
            match tr.auxiliary {
                AuxiliaryKind::V => {
                    if tr.order != 1 {
                        return bad("auxiliary v supports order 1 only".into());
                    }
                    if !inverse && tr.n % 2 == 1 {
                        return bad(format!("auxiliary v_{} has a zero; the index must be even", tr.n));
                    }
                }
                AuxiliaryKind::Psi => {
                    if !(1..=3).contains(&tr.order) {
                        return bad(format!("order {} outside 1..=3", tr.order));
                    }
                }
                AuxiliaryKind::VSum => {
                    if tr.order != 1 || tr.indices.len() < 2 {
                        return bad("v_sum is one-fold and needs at least two indices".into());
                    }
                }
            }
            if inverse && self.tilded_basis.is_some() {
                return bad("the inverse-square transforms use a single basis".into());
            }
        } else if self.tilded_basis.is_some() {
            return bad("tilded_basis given without a transform".into());
        }
        let min_state = if let Some(TransformDef { auxiliary: AuxiliaryKind::V, n, .. }) = &self.transform {
            if inverse {
                0
            } else {
                -(*n as i64)
            }
        } else {
            0
        };
        if let Some(&m) = self.states.iter().find(|&&m| m < min_state || (m < 0 && m != min_state)) {
            return bad(format!("state index {m} is not available for this transform"));
        }
        Ok(())
    }

    pub fn hbar(&self) -> f64 {
        self.system.hbar()
    }

    pub fn build(&self) -> Result<Setup> {
        let eom = self.system.eom();
        let basis = Arc::new(self.basis.build(eom.clone(), self.span)?);
        Ok(match &self.system {
            SystemDef::Quadratic(s) => {
                s.validate(self.span)?;
                let tilded = match &self.tilded_basis {
                    Some(b) => Arc::new(b.build(eom, self.span)?),
                    None => basis.clone(),
                };
                let pair = if Arc::ptr_eq(&tilded, &basis) { BasisPair::same(basis) } else { BasisPair::new(basis, tilded)? };
                Setup::Quadratic { spec: Arc::new(s.clone()), pair }
            }
            SystemDef::InverseSquare(s) => {
                s.validate(self.span)?;
                Setup::InverseSquare { spec: Arc::new(s.clone()), basis }
            }
        })
    }

    pub fn grid(&self) -> Result<Grid> {
        let hbar = self.hbar();
        let extent = self.grid.extent * hbar.sqrt();
        let g = match self.system {
            SystemDef::Quadratic(_) => Grid::symmetric(extent, self.grid.points, hbar)?,
            SystemDef::InverseSquare(_) => Grid::half_line(extent, self.grid.points, hbar)?,
        };
        Ok(g.with_times(self.times()).with_time_scale(self.span.1 - self.span.0))
    }

    pub fn times(&self) -> Vec<f64> {
        match &self.grid.times {
            Some(t) => t.clone(),
            None => {
                let n = self.grid.t_samples;
                if n == 1 {
                    return vec![self.span.0];
                }
                (0..n).map(|i| self.span.0 + (self.span.1 - self.span.0) * i as f64 / (n - 1) as f64).collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "system": {"kind": "quadratic", "mass": {"kind": "constant", "value": 1.0},
                   "omega": {"kind": "constant", "value": 1.0}},
        "basis": {"preset": "harmonic", "c": 2.0, "d": 1.0},
        "transform": {"auxiliary": "v", "n": 2}
    }"#;

    #[test]
    fn minimal_scenario_fills_defaults() {
        let sc = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(sc.grid.points, 2048);
        assert_eq!(sc.states, vec![0, 1, 2]);
        assert_eq!(sc.times().len(), 9);
        assert_eq!(sc.hbar(), 1.0);
        let g = sc.grid().unwrap();
        assert_eq!((g.x_min, g.x_max), (-10.0, 10.0));
        assert!(matches!(sc.build().unwrap(), Setup::Quadratic { .. }));
        // round trip through the canonical form
        assert_eq!(Scenario::from_json(&sc.to_json()).unwrap(), sc);
    }

    #[test]
    fn unknown_keys_and_versions_are_rejected() {
        let typo = MINIMAL.replace("\"n\": 2", "\"n\": 2, \"m\": 1");
        assert!(matches!(Scenario::from_json(&typo), Err(Error::Config(_))));
        let top = MINIMAL.replace("\"schema_version\": 1,", "\"schema_version\": 1, \"extra\": true,");
        assert!(Scenario::from_json(&top).is_err());
        let v2 = MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(Scenario::from_json(&v2), Err(Error::Config(m)) if m.contains("schema_version")));
        let preset = MINIMAL.replace("\"harmonic\"", "\"wobbly\"");
        assert!(Scenario::from_json(&preset).is_err());
    }

    #[test]
    fn contract_violations_are_config_errors() {
        let odd = MINIMAL.replace("\"n\": 2", "\"n\": 3");
        assert!(matches!(Scenario::from_json(&odd), Err(Error::Config(m)) if m.contains("even")));
        let small = MINIMAL.replace("\"transform\"", "\"grid\": {\"points\": 100}, \"transform\"");
        assert!(Scenario::from_json(&small).is_err());
        let states = MINIMAL.replace("\"transform\"", "\"states\": [-1], \"transform\"");
        assert!(Scenario::from_json(&states).is_err());
        let partner = MINIMAL.replace("\"transform\"", "\"states\": [-2, 0], \"transform\"");
        assert!(Scenario::from_json(&partner).is_ok());
    }

    #[test]
    fn hash_tracks_the_effective_scenario() {
        let sc = Scenario::from_json(MINIMAL).unwrap();
        let h = sc.hash();
        assert_eq!(h.len(), 64);
        assert_eq!(h, Scenario::from_json(MINIMAL).unwrap().hash());
        let mut other = sc.clone();
        other.apply(&Overrides { seed: Some(9), ..Default::default() }).unwrap();
        assert_ne!(other.hash(), h);
        other.apply(&Overrides { hbar: Some(0.5), grid_points: Some(513), ..Default::default() }).unwrap();
        assert_eq!(other.hbar(), 0.5);
        assert_eq!(other.grid().unwrap().x_max, 10.0 * 0.5f64.sqrt());
        assert!(other.apply(&Overrides { grid_points: Some(10), ..Default::default() }).is_err());
    }

    #[test]
    fn inverse_square_scenarios() {
        let text = r#"{
            "schema_version": 1,
            "system": {"kind": "inverse_square", "mass": {"kind": "constant", "value": 1.0},
                       "c": {"kind": "constant", "value": 1.0}, "g": 1.0},
            "basis": {"preset": "elliptic", "c": 2.0},
            "transform": {"auxiliary": "psi", "n": 0, "order": 2}
        }"#;
        let sc = Scenario::from_json(text).unwrap();
        assert!(sc.grid().unwrap().half_line);
        assert!(matches!(sc.build().unwrap(), Setup::InverseSquare { .. }));
        let driven = text.replace("\"elliptic\", \"c\": 2.0", "\"driven\", \"d\": 1.0");
        assert!(Scenario::from_json(&driven).is_err());
        let repulsive = text.replace("\"g\": 1.0", "\"g\": -1.0");
        assert!(Scenario::from_json(&repulsive).is_err());
    }
}
