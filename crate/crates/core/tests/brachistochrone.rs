//! Adiabatic-time functional, Euler–Lagrange solver and criticality checks,
//! compared against closed-form curves.

use std::f64::consts::PI;

use qutrit_battery::brachistochrone::{
    constrained_residual, el_residual, functional_time, gateaux_derivative, max_relative_residual,
    second_derivative_test, second_partials, solve_unconstrained, BoundaryValues, Constraint, Criticality,
};
use qutrit_battery::pulse::{discretize, ChargeMode, ProtocolFamily, ProtocolTag, PulseSchedule};
use qutrit_battery::Error;

const WMAX: f64 = 2.0 * PI * 10e6;
const TAU: f64 = 200e-9;
const N: usize = 2001;

fn closed(tag: ProtocolTag, mode: ChargeMode) -> PulseSchedule {
    let f = ProtocolFamily::new(tag, WMAX, TAU, mode).unwrap();
    discretize(&f, N, None).unwrap()
}

fn solved(mode: ChargeMode) -> PulseSchedule {
    solved_on(mode, N)
}

fn solved_on(mode: ChargeMode, n: usize) -> PulseSchedule {
    solve_unconstrained(&BoundaryValues::symmetric(mode), TAU, WMAX, n)
        .unwrap()
        .schedule
}

/// Critical curve of the unconstrained problem: `1/(Ω1 + iΩ2)` moves on a
/// straight line, which for equal endpoint amplitudes `A` gives
/// `Ω = A (s, 1 − s) / (s² + (1 − s)²)` with peak `A√2` at `s = 1/2`.
fn unconstrained_oracle(s: f64, mode: ChargeMode) -> (f64, f64) {
    let a = WMAX / 2f64.sqrt();
    let d = s * s + (1.0 - s) * (1.0 - s);
    let (x, y) = (a * s / d, a * (1.0 - s) / d);
    match mode {
        ChargeMode::Stable => (x, y),
        ChargeMode::Unstable => (y, x),
    }
}

#[test]
fn solver_matches_closed_form_curve() {
    for mode in ChargeMode::ALL {
        let s = solved(mode);
        let mut worst = 0.0_f64;
        for i in 0..s.len() {
            let (a, b) = unconstrained_oracle(s.times()[i] / TAU, mode);
            worst = worst.max((s.omega1()[i] - a).abs()).max((s.omega2()[i] - b).abs());
        }
        assert!(worst / WMAX < 1e-5, "{mode}: max deviation {:e}", worst / WMAX);
    }
}

#[test]
fn solution_meets_contract() {
    for mode in ChargeMode::ALL {
        let sol = solve_unconstrained(&BoundaryValues::symmetric(mode), TAU, WMAX, N).unwrap();
        let s = &sol.schedule;
        assert!((s.peak_field() / WMAX - 1.0).abs() < 1e-8);
        let r = max_relative_residual(s, Constraint::Unconstrained).unwrap();
        assert!(r < 1e-6, "residual {r:e}");
        let (first, last) = (0, s.len() - 1);
        match mode {
            ChargeMode::Stable => {
                assert_eq!(s.omega1()[first], 0.0);
                assert_eq!(s.omega2()[last], 0.0);
                assert!(s.omega2()[first] > 0.0 && s.omega1()[last] > 0.0);
            }
            ChargeMode::Unstable => {
                assert_eq!(s.omega2()[first], 0.0);
                assert_eq!(s.omega1()[last], 0.0);
            }
        }
        let norms: Vec<f64> = sol.iterations.iter().map(|i| i.residual_norm).collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0]), "{norms:?}");
        assert!(sol.iterations.len() <= 101);
    }
}

#[test]
fn asymmetric_boundary_values_also_converge() {
    let bc = BoundaryValues::new(ChargeMode::Stable, (0.0, 1.0), (2.5, 0.0)).unwrap();
    let sol = solve_unconstrained(&bc, TAU, WMAX, 1001).unwrap();
    assert!(max_relative_residual(&sol.schedule, Constraint::Unconstrained).unwrap() < 1e-6);
    let s = &sol.schedule;
    let ratio = s.omega1()[s.len() - 1] / s.omega2()[0];
    assert!((ratio - 2.5).abs() < 1e-12);
}

#[test]
fn qab_functional_closed_form() {
    let a = functional_time(&closed(ProtocolTag::QabQuadratic, ChargeMode::Stable))
        .unwrap()
        .value;
    let want = PI * PI / (4.0 * TAU * WMAX * WMAX);
    assert!((a / want - 1.0).abs() < 1e-6, "A = {a:e}, want {want:e}");
}

#[test]
fn functional_values_order_the_families() {
    let unit = 1.0 / (TAU * WMAX * WMAX);
    let value = |s: &PulseSchedule| functional_time(s).unwrap().value / unit;
    let qab = value(&closed(ProtocolTag::QabQuadratic, ChargeMode::Stable));
    let numerical = value(&solved(ChargeMode::Stable));
    let cycloid = value(&closed(ProtocolTag::CycloidLinear, ChargeMode::Stable));
    let ramp = value(&closed(ProtocolTag::LinearRamp, ChargeMode::Stable));
    assert!((numerical - 4.0).abs() < 1e-5, "{numerical}");
    assert!((cycloid - PI * PI / 2.0).abs() < 1e-5, "{cycloid}");
    assert!(qab < numerical && numerical < cycloid && cycloid < ramp);
}

#[test]
fn closed_form_families_are_critical_on_their_constraint() {
    for mode in ChargeMode::ALL {
        let q = closed(ProtocolTag::QabQuadratic, mode);
        assert!(max_relative_residual(&q, Constraint::Quadratic).unwrap() < 1e-6);
        // the cycloid's fourth derivative is large near the ends, so its
        // O(h²) residual needs a finer grid to drop below the threshold
        let f = ProtocolFamily::new(ProtocolTag::CycloidLinear, WMAX, TAU, mode).unwrap();
        let c = discretize(&f, 8001, None).unwrap();
        assert!(max_relative_residual(&c, Constraint::Linear).unwrap() < 1e-6);
        let r = closed(ProtocolTag::LinearRamp, mode);
        assert!(max_relative_residual(&r, Constraint::Linear).unwrap() > 1e-2);
    }
}

#[test]
fn residuals_converge_quadratically() {
    let f = ProtocolFamily::new(ProtocolTag::CycloidLinear, WMAX, TAU, ChargeMode::Stable).unwrap();
    let max_at = |n: usize| {
        let s = discretize(&f, n, None).unwrap();
        constrained_residual(&s, Constraint::Linear)
            .unwrap()
            .iter()
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    };
    let (coarse, mid, fine) = (max_at(51), max_at(101), max_at(201));
    for ratio in [coarse / mid, mid / fine] {
        assert!((3.0..5.0).contains(&ratio), "refinement ratio {ratio}");
    }
}

#[test]
fn residual_lengths_skip_endpoints() {
    let s = closed(ProtocolTag::QabQuadratic, ChargeMode::Stable);
    let (r1, r2) = el_residual(&s).unwrap();
    assert_eq!(r1.len(), N - 2);
    assert_eq!(r2.len(), N - 2);
}

#[test]
fn qab_is_a_minimum_with_analytic_terms() {
    let s = closed(ProtocolTag::QabQuadratic, ChargeMode::Stable);
    let v = second_derivative_test(&s, 50).unwrap();
    assert_eq!(v.verdict, Criticality::Minimum);
    assert_eq!(v.lambda_terms.len(), 50);
    for (k, terms) in v.lambda_terms.iter().enumerate() {
        let n = (k + 1) as f64;
        let want = PI * PI * (1.0 + n * n) / (WMAX.powi(4) * TAU);
        for t in terms {
            assert!(*t > 0.0);
            assert!((t / want - 1.0).abs() < 1e-5, "n = {n}: {t:e} vs {want:e}");
        }
    }
}

#[test]
fn second_partials_match_hand_derivatives_on_qab() {
    let s = closed(ProtocolTag::QabQuadratic, ChargeMode::Stable);
    let p = second_partials(&s).unwrap();
    let k = PI / (2.0 * TAU);
    let w4 = WMAX.powi(4);
    for i in [100, 1000, 1900] {
        let t = s.times()[i];
        let (sn, cs) = (k * t).sin_cos();
        let (o1, d1) = (WMAX * sn, WMAX * k * cs);
        let speed2 = (WMAX * k).powi(2);
        let d = WMAX * WMAX;
        let coordinate = speed2 * (-4.0 / d.powi(3) + 24.0 * o1 * o1 / d.powi(4));
        let mixed = -8.0 * o1 * d1 / d.powi(3);
        let velocity = 2.0 / w4;
        assert!((p[i][0].coordinate / coordinate - 1.0).abs() < 1e-5);
        assert!((p[i][0].mixed / mixed - 1.0).abs() < 1e-5);
        assert!((p[i][0].velocity / velocity - 1.0).abs() < 1e-6);
    }
}

#[test]
fn non_critical_schedule_is_rejected() {
    let s = closed(ProtocolTag::LinearRamp, ChargeMode::Stable);
    assert!(matches!(
        second_derivative_test(&s, 10),
        Err(Error::NotCriticalPoint { .. })
    ));
}

fn bump(s: f64) -> (f64, f64) {
    let b = (PI * s).sin().powi(2);
    (b, 0.5 * b * (2.0 * PI * s).cos())
}

fn wiggle(s: f64) -> (f64, f64) {
    let w = (3.0 * PI * s).sin();
    (0.7 * w, -0.3 * (PI * s).sin())
}

#[test]
fn gateaux_derivative_vanishes_at_critical_curves() {
    let cases = [
        (
            closed(ProtocolTag::QabQuadratic, ChargeMode::Stable),
            Constraint::Quadratic,
        ),
        (
            closed(ProtocolTag::QabQuadratic, ChargeMode::Unstable),
            Constraint::Quadratic,
        ),
        (
            closed(ProtocolTag::CycloidLinear, ChargeMode::Stable),
            Constraint::Linear,
        ),
        (
            closed(ProtocolTag::CycloidLinear, ChargeMode::Unstable),
            Constraint::Linear,
        ),
        // the collocation and quadrature stencils differ at O(h²), so the
        // solved curve is only critical for the discrete functional on a fine grid
        (solved_on(ChargeMode::Stable, 8001), Constraint::Unconstrained),
        (solved_on(ChargeMode::Unstable, 8001), Constraint::Unconstrained),
    ];
    for (s, constraint) in &cases {
        for eta in [bump as fn(f64) -> (f64, f64), wiggle] {
            let d = gateaux_derivative(s, *constraint, &eta, 1e-5).unwrap();
            assert!(d.abs() < 1e-6, "{:?} {constraint:?}: {d:e}", s.family().tag);
        }
    }
}

#[test]
fn gateaux_derivative_detects_non_critical_curve() {
    let s = closed(ProtocolTag::LinearRamp, ChargeMode::Stable);
    // an antisymmetric shift; symmetric ones cancel by the ramp's mirror symmetry
    let shift = |x: f64| ((2.0 * PI * x).sin(), 0.0);
    let d = gateaux_derivative(&s, Constraint::Linear, &shift, 1e-5).unwrap();
    assert!(d.abs() > 1e-3, "{d:e}");
}
