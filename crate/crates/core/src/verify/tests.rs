use super::*;
use crate::classical::{ClassicalBasis, Tolerance};
use crate::darboux::{
    simple_transformed_operator, transformed_state_simple, wronskian_of_jets, ClosedForm, PotentialCorrection,
};
use crate::states::{
    aux_simple, aux_simple_unchecked, psi_inverse_square, psi_quadratic, psi_simple, ClosureWave, Family, SharedWave,
    SumWave, WaveInfo,
};
use crate::system::{ClassicalEom, CoefficientProfile, InverseSquareSystemSpec, QuadraticSystemSpec};
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

const SPAN: (f64, f64) = (0.0, TAU);

fn harmonic(hbar: f64, c: f64, d: f64) -> (Arc<QuadraticSystemSpec>, Arc<ClassicalBasis>) {
    let spec = Arc::new(QuadraticSystemSpec::simple(hbar));
    let eom: Arc<dyn ClassicalEom> = spec.clone();
    (spec, Arc::new(ClassicalBasis::harmonic(eom, c, d, SPAN).unwrap()))
}

fn line(hbar: f64, n: usize) -> Grid {
    Grid::symmetric(10.0 * hbar.sqrt(), n, hbar).unwrap()
}

/// Free Gaussian of initial width `sigma` (M = 1), exact for all t.
fn free_gaussian(sigma: f64, hbar: f64) -> ClosureWave {
    let info = WaveInfo { label: "free".into(), family: Family::Physical, domain: Domain::Line, index: 0, hbar };
    ClosureWave::new(
        info,
        8,
        Arc::new(move |t: f64, x: f64, order: usize| {
            let s2 = C64::new(sigma * sigma, hbar * t);
            let pre = (sigma * sigma / PI).powf(0.25) / s2.sqrt();
            let xj = Jet::variable(x, order);
            let arg = (&xj * &xj).scale(-0.5 / s2);
            arg.exp().scale(pre).derivatives()
        }),
    )
}

#[test]
fn grid_invariants() {
    assert!(matches!(Grid::symmetric(5.0, 256, 1.0), Err(Error::Grid(_))));
    assert!(Grid::uniform(1.0, 1.0, 300, 1.0).is_err());
    let g = Grid::half_line(6.0, 301, 4.0).unwrap();
    assert_eq!(g.x_min, 2e-6);
    assert!(g.half_line);
    let xs = g.points();
    assert_eq!(xs.len(), 301);
    assert_eq!(xs[300], 6.0);
    assert!(xs.windows(2).all(|w| ((w[1] - w[0]) - g.dx()).abs() < 1e-12));
    let r = Grid::symmetric(3.0, 301, 1.0).unwrap().refined(2048).unwrap();
    assert_eq!(r.n_points, 2049);
    assert_eq!(r.point(1024), 0.0);
}

#[test]
fn ground_state_residual_is_tiny() {
    let op = SchrodingerOperator::simple(1.0);
    let psi = psi_simple(0, 1.0).unwrap();
    let grid = line(1.0, 513).with_times(vec![0.0, 0.9, 2.5]);
    let r = schrodinger_residual(&op, &psi, &grid).unwrap();
    assert!(r.relative_l2 < 1e-8, "{r:?}");
    assert!(r.sup_residual >= 0.0 && r.per_t.len() == 3);
}

#[test]
fn driven_elliptic_state_residual() {
    let (spec, basis) = harmonic(1.0, 2.0, 1.0);
    let op = SchrodingerOperator::quadratic(spec.clone());
    let psi = psi_quadratic(2, spec, basis).unwrap();
    let grid = line(1.0, 513).with_times(vec![0.2, 1.7, 3.3, 5.1]);
    let r = schrodinger_residual(&op, &psi, &grid).unwrap();
    assert!(r.relative_l2 < 1e-6, "{r:?}");
}

#[test]
fn wrong_sign_of_the_linear_term_is_caught() {
    let drive = |sign: f64| {
        Arc::new(QuadraticSystemSpec {
            force: CoefficientProfile::cosine(sign * 0.5, 2.0, 0.0, 0.0),
            ..QuadraticSystemSpec::simple(1.0)
        })
    };
    let spec = drive(1.0);
    let eom: Arc<dyn ClassicalEom> = spec.clone();
    let basis = Arc::new(
        ClassicalBasis::integrated(eom, (1.0, 0.0), (0.0, 2.0), (1.0, 0.0), SPAN, Tolerance::default()).unwrap(),
    );
    let psi = psi_quadratic(0, spec.clone(), basis).unwrap();
    let grid = line(1.0, 401).with_times(vec![0.7, 2.9, 4.4]);
    let good = schrodinger_residual(&SchrodingerOperator::quadratic(spec), &psi, &grid).unwrap();
    assert!(good.relative_l2 < 1e-6, "{good:?}");
    let bad = schrodinger_residual(&SchrodingerOperator::quadratic(drive(-1.0)), &psi, &grid).unwrap();
    assert!(bad.relative_l2 > 1e-2, "{bad:?}");
}

#[test]
fn oscillator_norms_and_parity() {
    let grid = line(1.0, 2049);
    let n0 = norm(&psi_simple(0, 1.0).unwrap(), &grid, 0.4).unwrap();
    assert!((n0.value.re - 1.0).abs() < 1e-10 && n0.value.im.abs() < 1e-14);
    assert!(!n0.tail_warning && n0.origin_exponent.is_none());
    let o = norm_and_overlap(&psi_simple(0, 1.0).unwrap(), &psi_simple(1, 1.0).unwrap(), &grid, 0.4).unwrap();
    assert!(o.value.norm() < 1e-12);
    // a grid that cuts the packet short warns
    let short = Grid::symmetric(2.0, 401, 1.0).unwrap();
    assert!(norm(&psi_simple(0, 1.0).unwrap(), &short, 0.0).unwrap().tail_warning);
}

#[test]
fn inverse_square_state_is_normalized_on_the_half_line() {
    let spec = Arc::new(InverseSquareSystemSpec::simple(1.5, 1.0).unwrap());
    let eom: Arc<dyn ClassicalEom> = spec.clone();
    let basis = Arc::new(ClassicalBasis::harmonic(eom, 2.0, 0.0, SPAN).unwrap());
    let psi = psi_inverse_square(1, spec, basis).unwrap();
    let grid = Grid::half_line(10.0, 1025, 1.0).unwrap();
    for t in [0.0, 1.1] {
        let n = norm(&psi, &grid, t).unwrap();
        assert!((n.value.re - 1.0).abs() < 1e-8, "{n:?}");
        assert!(!n.divergent && !n.tail_warning);
        assert!((n.origin_exponent.unwrap() - 4.0).abs() < 1e-6);
    }
}

#[test]
fn simpson_converges_at_fourth_order() {
    // truncated range, so the error is the endpoint O(h^4) term rather than
    // the exponentially small error of a fully resolved Gaussian
    let psi = psi_simple(0, 1.0).unwrap();
    let value = |n: usize| norm(&psi, &Grid::symmetric(1.0, n, 1.0).unwrap(), 0.0).unwrap().value.re;
    let v: Vec<f64> = [257, 513, 1025].iter().map(|&n| value(n)).collect();
    let ratio = (v[0] - v[1]) / (v[1] - v[2]);
    assert!((ratio - 16.0).abs() < 0.5, "{v:?} {ratio}");
    assert!((v[2] - statrs::function::erf::erf(1.0)).abs() < 1e-11);
}

#[test]
fn rayleigh_quotients_match_the_spectrum() {
    let grid = line(1.0, 2049);
    let op = SchrodingerOperator::simple(1.0);
    let e3 = rayleigh_quotient(&op, &psi_simple(3, 1.0).unwrap(), &grid, 0.3).unwrap();
    assert!((e3 - 3.5).abs() < 1e-8, "{e3}");
    let h2 = simple_transformed_operator(2, 1.0);
    let (s0, e0) = transformed_state_simple(0, 2, 1.0).unwrap();
    let (sm, em) = transformed_state_simple(-2, 2, 1.0).unwrap();
    assert_eq!((e0, em), (0.5, -2.5));
    assert!((rayleigh_quotient(&h2, &s0, &grid, 0.0).unwrap() - 0.5).abs() < 1e-6);
    assert!((rayleigh_quotient(&h2, &sm, &grid, 0.0).unwrap() + 2.5).abs() < 1e-6);
}

#[test]
fn rayleigh_quotient_rejects_a_vanishing_state() {
    let info = WaveInfo { label: "zero".into(), family: Family::Physical, domain: Domain::Line, index: 0, hbar: 1.0 };
    let zero = ClosureWave::new(info, 4, Arc::new(|_, _, order| vec![C64::new(0.0, 0.0); order + 1]));
    let r = rayleigh_quotient(&SchrodingerOperator::simple(1.0), &zero, &line(1.0, 301), 0.0);
    assert!(matches!(r, Err(Error::DegenerateState { .. })));
}

#[test]
fn rayleigh_quotient_is_stationary_in_time() {
    let grid = line(0.7, 1025);
    let op = SchrodingerOperator::simple(0.7);
    for n in 0..4 {
        let psi = psi_simple(n, 0.7).unwrap();
        let e: Vec<f64> = [0.0, 1.3, 2.9, 5.2].iter().map(|&t| rayleigh_quotient(&op, &psi, &grid, t).unwrap()).collect();
        let spread = e.iter().fold(0.0f64, |m, v| m.max((v - e[0]).abs()));
        assert!(spread < 1e-6, "n={n} {e:?}");
        assert!((e[0] - (n as f64 + 0.5) * 0.7).abs() < 1e-8);
    }
}

#[test]
fn zero_scans() {
    let grid = line(1.0, 401);
    let v0 = zero_free_scan(&aux_simple(0, 1.0).unwrap(), &grid, 0.0).unwrap();
    assert!(v0.min_abs_location.abs() < 1e-6 && (v0.min_abs - 1.0).abs() < 1e-12, "{v0:?}");
    assert!(!v0.is_zero());
    let v1 = zero_free_scan(&aux_simple_unchecked(1, 1.0).unwrap(), &grid, 0.0).unwrap();
    assert!(v1.is_zero() && v1.ratio_location.abs() < 1e-8, "{v1:?}");

    let (spec, basis) = harmonic(1.0, 2.0, 1.0);
    let aux: Vec<SharedWave> = vec![
        Arc::new(psi_quadratic(0, spec.clone(), basis.clone()).unwrap()),
        Arc::new(psi_quadratic(1, spec, basis).unwrap()),
    ];
    for t in [0.0, 1.0, 4.0] {
        let slices: Vec<_> = aux.iter().map(|w| w.at(t).unwrap()).collect();
        let scan = scan_zeros(
            &|x| wronskian_of_jets(&slices.iter().map(|s| s.taylor(x, 2)).collect::<Result<Vec<_>>>()?, 1),
            &grid.refined(2048).unwrap(),
        )
        .unwrap();
        assert!(!scan.is_zero() && scan.min_abs > 0.0, "{scan:?}");
    }
}

#[test]
fn half_line_scan_ignores_power_law_vanishing() {
    let spec = Arc::new(InverseSquareSystemSpec::simple(1.5, 1.0).unwrap());
    let eom: Arc<dyn ClassicalEom> = spec.clone();
    let basis = Arc::new(ClassicalBasis::harmonic(eom, 1.0, 0.0, SPAN).unwrap());
    let psi = psi_inverse_square(0, spec, basis).unwrap();
    let s = zero_free_scan(&psi, &Grid::half_line(6.0, 401, 1.0).unwrap(), 0.5).unwrap();
    assert!(!s.is_zero(), "{s:?}");
}

#[test]
fn crank_nicolson_ground_state() {
    let grid = line(1.0, 2048);
    let op = SchrodingerOperator::simple(1.0);
    let psi = psi_simple(0, 1.0).unwrap();
    let start = sample(&psi, &grid, 0.0).unwrap();
    let out = propagate_cn(&op, &start, &grid, (0.0, TAU), 4096, &CnOptions::default(), &mut |_, _, _| {}).unwrap();
    let exact = sample(&psi, &grid, TAU).unwrap();
    let dev = relative_l2_deviation(&out.psi, &exact);
    assert!(dev < 1e-4, "{dev}");
    assert!(out.norm_drift < 1e-10, "{}", out.norm_drift);
}

#[test]
fn crank_nicolson_free_gaussian() {
    let hbar = 1.0;
    let free = SchrodingerOperator::quadratic(Arc::new(QuadraticSystemSpec {
        omega: CoefficientProfile::zero(),
        ..QuadraticSystemSpec::simple(hbar)
    }));
    let psi = free_gaussian(1.0, hbar);
    let grid = Grid::symmetric(16.0, 8192, hbar).unwrap();
    let r = schrodinger_residual(&free, &psi, &Grid::symmetric(8.0, 401, hbar).unwrap().with_times(vec![0.5])).unwrap();
    assert!(r.relative_l2 < 1e-9, "{r:?}");
    let start = sample(&psi, &grid, 0.0).unwrap();
    let out = propagate_cn(&free, &start, &grid, (0.0, 2.0), 2000, &CnOptions::default(), &mut |_, _, _| {}).unwrap();
    let dev = relative_l2_deviation(&out.psi, &sample(&psi, &grid, 2.0).unwrap());
    assert!(dev < 1e-5, "{dev}");
}

#[test]
fn crank_nicolson_preserves_the_norm_over_many_steps() {
    let (spec, basis) = harmonic(1.0, 2.0, 1.0);
    let op = SchrodingerOperator::quadratic(spec.clone());
    let psi = psi_quadratic(1, spec, basis).unwrap();
    let grid = line(1.0, 1024);
    let start = sample(&psi, &grid, 0.0).unwrap();
    let mut seen = 0;
    let out = propagate_cn(&op, &start, &grid, (0.0, 4.0 * TAU), 10_000, &CnOptions::default(), &mut |_, _, _| seen += 1)
        .unwrap();
    assert_eq!(seen, 10_000);
    assert!(out.norm_drift < 1e-10, "{}", out.norm_drift);
}

#[test]
fn crank_nicolson_reports_boundary_leaks_and_bad_input() {
    let op = SchrodingerOperator::simple(1.0);
    let grid = Grid::symmetric(3.0, 301, 1.0).unwrap();
    let displaced: Vec<C64> = grid.points().iter().map(|x| C64::new((-(x - 1.5) * (x - 1.5)).exp(), 0.0)).collect();
    let r = propagate_cn(&op, &displaced, &grid, (0.0, 3.0), 300, &CnOptions::default(), &mut |_, _, _| {});
    assert!(matches!(r, Err(Error::BoundaryLeak { .. })), "{r:?}");
    let r = propagate_cn(&op, &displaced[1..], &grid, (0.0, 1.0), 10, &CnOptions::default(), &mut |_, _, _| {});
    assert!(matches!(r, Err(Error::Grid(_))));
}

#[test]
fn extremum_follows_the_classical_path() {
    let (spec, basis) = harmonic(1.0, 2.0, 1.0);
    let form = ClosedForm::OneFoldQuadratic { n: 2, spec, basis: basis.clone() };
    let grid = line(1.0, 2048);
    let times: Vec<f64> = (0..=32).map(|k| k as f64 * TAU / 32.0).collect();
    let dv = |t: f64, x: f64| form.slice(t)?.delta_v(x);
    let track = track_delta_v_extremum(&dv, &grid, &times, 1.0).unwrap();
    for s in &track {
        let xp = basis.xp(s.t).0;
        assert!((s.x - xp).abs() < 2.0 * grid.dx(), "t={} x*={} xp={xp}", s.t, s.x);
        assert!(s.depth < 0.0);
    }
}

#[test]
fn static_scenario_has_a_fixed_extremum() {
    let (spec, basis) = harmonic(1.0, 1.0, 0.0);
    let form = ClosedForm::OneFoldQuadratic { n: 2, spec, basis };
    let grid = line(1.0, 1025);
    let times: Vec<f64> = (0..16).map(|k| k as f64 * 0.4).collect();
    let track = track_delta_v_extremum(&|t, x| form.slice(t)?.delta_v(x), &grid, &times, 1.0).unwrap();
    assert!(track.iter().all(|s| s.x == track[0].x && s.x.abs() < 1e-12), "{track:?}");
}

#[test]
fn ground_auxiliary_gives_a_flat_potential() {
    let (spec, basis) = harmonic(1.0, 2.0, 1.0);
    let form = ClosedForm::OneFoldQuadratic { n: 0, spec, basis };
    let r = track_delta_v_extremum(&|t, x| form.slice(t)?.delta_v(x), &line(1.0, 401), &[0.5], 1.0);
    assert!(matches!(r, Err(Error::FlatPotential { .. })));
}

#[test]
fn feature_width_scales_with_the_square_root_of_hbar() {
    let widths: Vec<f64> = [0.25, 1.0, 4.0]
        .iter()
        .map(|&hbar| {
            let (spec, basis) = harmonic(hbar, 2.0, 1.0);
            let form = ClosedForm::OneFoldQuadratic { n: 2, spec, basis };
            let t = 0.8;
            let slice = form.slice(t).unwrap();
            let w = feature_width(&|x| slice.delta_v(x), &line(hbar, 4097), form.asymptote(t).unwrap()).unwrap();
            w / hbar.sqrt()
        })
        .collect();
    for w in &widths {
        assert!((w / widths[1] - 1.0).abs() < 0.1, "{widths:?}");
    }
}

#[test]
fn reports_use_the_documented_field_names() {
    let op = SchrodingerOperator::simple(1.0);
    let r = schrodinger_residual(&op, &psi_simple(0, 1.0).unwrap(), &line(1.0, 301)).unwrap();
    let v = serde_json::to_value(&r).unwrap();
    for k in ["relative_l2", "sup_residual", "sup_location"] {
        assert!(v.get(k).is_some(), "{k}");
    }
    let grid = line(1.0, 301);
    let start = sample(&psi_simple(0, 1.0).unwrap(), &grid, 0.0).unwrap();
    let out = propagate_cn(&op, &start, &grid, (0.0, 0.1), 4, &CnOptions::default(), &mut |_, _, _| {}).unwrap();
    assert!(serde_json::to_value(&out).unwrap().get("norm_drift").is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn residual_is_linear(ar in -2.0f64..2.0, ai in -2.0f64..2.0, br in -2.0f64..2.0, bi in -2.0f64..2.0, t in 0.0f64..6.0) {
        let (spec, basis) = harmonic(1.0, 2.0, 1.0);
        let op = SchrodingerOperator::quadratic(spec.clone());
        let p: SharedWave = Arc::new(psi_quadratic(1, spec.clone(), basis.clone()).unwrap());
        let q: SharedWave = Arc::new(crate::states::aux_quadratic(2, spec, basis).unwrap());
        let (a, b) = (C64::new(ar, ai), C64::new(br, bi));
        let sum = SumWave::new("sum", vec![(a, p.clone()), (b, q.clone())]).unwrap();
        let xs: Vec<f64> = (0..41).map(|i| -4.0 + 0.2 * i as f64).collect();
        // truncation error of the time difference is linear; only rounding,
        // amplified by 1/dt, is not, so a coarse step isolates linearity
        let dt = 1e-2;
        let rp = residual_samples(&op, p.as_ref(), t, &xs, dt).unwrap();
        let rq = residual_samples(&op, q.as_ref(), t, &xs, dt).unwrap();
        let rs = residual_samples(&op, &sum, t, &xs, dt).unwrap();
        for i in 0..xs.len() {
            let want = a * rp[i][0] + b * rq[i][0];
            let scale = (a * rp[i][1]).norm() + (b * rq[i][1]).norm() + (a * rp[i][2]).norm() + (b * rq[i][2]).norm();
            prop_assert!((rs[i][0] - want).norm() <= 1e-12 * scale.max(1e-300), "x={} {} vs {}", xs[i], rs[i][0], want);
        }
    }
}
