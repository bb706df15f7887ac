//! Browser demo: three entry points returning JSON strings, so the page needs
//! no bindings beyond `wasm-bindgen` and the functions run natively in tests.

use std::sync::Arc;

use darboux_core::classical::ClassicalBasis;
use darboux_core::darboux::{h1_nq_delta_v, transform, transformed_state_simple, SchrodingerOperator, TransformOptions};
use darboux_core::states::{aux_simple_unchecked, SharedWave, SumWave, WaveFunction};
use darboux_core::system::{ClassicalEom, QuadraticSystemSpec};
use darboux_core::verify::Grid;
use darboux_core::{Error, C64};
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

const MAX_POINTS: usize = 4001;

fn respond(r: Result<Value, String>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn axis(extent: f64, points: usize) -> Result<Vec<f64>, String> {
    if !(extent > 0.0 && extent.is_finite()) || !(2..=MAX_POINTS).contains(&points) {
        return Err(format!("need extent > 0 and 2..={MAX_POINTS} points"));
    }
    Ok((0..points).map(|i| -extent + 2.0 * extent * i as f64 / (points - 1) as f64).collect())
}

/// One-fold potential correction seeded by `v_n` on the basis
/// `u = cos t`, `v = c sin t`, `x_p = d cos t` of the unit oscillator,
/// sampled at time `t`. Returns `{x, deltaV, xp, rho}`.
#[wasm_bindgen]
pub fn delta_v_curve(c: f64, d: f64, n: u32, hbar: f64, t: f64, extent: f64, points: usize) -> String {
    respond((|| {
        let xs = axis(extent, points)?;
        let spec = Arc::new(QuadraticSystemSpec::simple(hbar));
        let span = (t.min(0.0), t.max(0.0) + 1.0);
        spec.validate(span).map_err(|e| e.to_string())?;
        let eom: Arc<dyn ClassicalEom> = spec.clone();
        let basis = Arc::new(ClassicalBasis::harmonic(eom, c, d, span).map_err(|e| e.to_string())?);
        let dv = xs
            .iter()
            .map(|&x| h1_nq_delta_v(n as usize, spec.clone(), basis.clone(), t, x))
            .collect::<Result<Vec<f64>, Error>>()
            .map_err(|e| e.to_string())?;
        Ok(json!({ "x": xs, "deltaV": dv, "xp": basis.xp(t).0, "rho": basis.rho(t) }))
    })())
}

/// Eigenfunction `m` of the unit oscillator transformed with `v_n`; `m = -n`
/// selects the state below the original spectrum. Returns
/// `{x, density, energy}` with the density normalized on the sample grid.
#[wasm_bindgen]
pub fn transformed_state(m: i32, n: u32, hbar: f64, extent: f64, points: usize) -> String {
    respond((|| {
        let xs = axis(extent, points)?;
        let (state, energy) = transformed_state_simple(m as i64, n as usize, hbar).map_err(|e| e.to_string())?;
        let mut density = xs
            .iter()
            .map(|&x| state.value(0.0, x).map(|v| v.norm_sqr()))
            .collect::<Result<Vec<f64>, Error>>()
            .map_err(|e| e.to_string())?;
        let dx = xs[1] - xs[0];
        let total: f64 = density.iter().sum::<f64>() * dx;
        if total > 0.0 {
            density.iter_mut().for_each(|p| *p /= total);
        }
        Ok(json!({ "x": xs, "density": density, "energy": energy }))
    })())
}

/// Tries a one-fold transform of the unit oscillator with `v_{n1} + w v_{n2}`
/// (`w = 0` keeps a single auxiliary). Returns `{hermitizable, reason,
/// spread}`; a sum of two auxiliaries fails the Hermiticity condition.
#[wasm_bindgen]
pub fn hermiticity_check(n1: u32, n2: u32, weight: f64, hbar: f64) -> String {
    respond((|| {
        let a: SharedWave = Arc::new(aux_simple_unchecked(n1 as usize, hbar).map_err(|e| e.to_string())?);
        let aux: SharedWave = if weight == 0.0 {
            a
        } else {
            let b: SharedWave = Arc::new(aux_simple_unchecked(n2 as usize, hbar).map_err(|e| e.to_string())?);
            let label = format!("v{n1}+{weight}v{n2}");
            Arc::new(SumWave::new(label, vec![(C64::new(1.0, 0.0), a), (C64::new(weight, 0.0), b)]).map_err(|e| e.to_string())?)
        };
        let grid = Grid::symmetric(6.0 * hbar.sqrt(), 401, hbar).map_err(|e| e.to_string())?;
        let mut opts = TransformOptions::new(grid, (0.0, 1.0));
        opts.check_times = vec![0.0, 0.5, 1.0];
        Ok(match transform(&SchrodingerOperator::simple(hbar), vec![aux], &opts) {
            Ok(r) => json!({ "hermitizable": true, "reason": null, "spread": r.diagnostics().hermiticity_spread }),
            Err(e @ Error::NonHermitizable { spread }) => {
                json!({ "hermitizable": false, "reason": "non-Hermitizable", "detail": e.to_string(), "spread": spread })
            }
            Err(e @ Error::ZeroCrossing { .. }) => {
                json!({ "hermitizable": false, "reason": "zero crossing", "detail": e.to_string(), "spread": null })
            }
            Err(e) => return Err(e.to_string()),
        })
    })())
}
