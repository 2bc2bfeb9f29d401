use std::f64::consts::PI;

use popcode::channels::ModeParams;
use popcode::dts_protocols::{error_budget, ledger_for, run_case, Case, ProtocolConfig};
use popcode::linalg::C64;
use proptest::prelude::*;

fn config(
    case: Case,
    n: u64,
    delta: f64,
    alpha: C64,
    beta: f64,
    mc: usize,
    seed: u64,
) -> ProtocolConfig {
    let mut c = ProtocolConfig::new(case, n, delta, ModeParams::new(alpha, beta).unwrap());
    c.mc_samples = mc;
    c.seed = seed;
    c
}

#[test]
fn displacement_case_improves_with_n() {
    let eps: Vec<f64> = [100u64, 1000, 10_000]
        .iter()
        .map(|&n| {
            let c = config(Case::Displacement, n, 0.3, C64::new(0.3, 0.0), 0.2, 200, 11);
            run_case(&c).unwrap().epsilon_hat
        })
        .collect();
    assert!(eps[0] > eps[1] && eps[1] > eps[2], "{eps:?}");
    assert!(eps[2] < 0.1, "{eps:?}");
}

#[test]
fn budget_dominates_the_estimate() {
    for case in Case::ALL {
        for &(n, delta) in &[(256u64, 0.25), (4096, 0.2)] {
            let c = config(case, n, delta, C64::new(0.4, -0.3), 0.3, 40, 3);
            let r = run_case(&c).unwrap();
            let b = error_budget(&c).unwrap();
            assert!(
                b.total() >= r.epsilon_hat - 3.0 * r.epsilon_stderr,
                "case {} n {n}: budget {} vs {}",
                case.id(),
                b.total(),
                r.epsilon_hat
            );
        }
    }
}

/// `P(|g| > R)` for a circular Gaussian of per-axis variance `s2`, by
/// trapezoid quadrature of the radial density.
fn radial_tail(s2: f64, radius: f64) -> f64 {
    let top = radius + 40.0 * s2.sqrt();
    let steps = 200_000;
    let h = (top - radius) / steps as f64;
    let f = |r: f64| r / s2 * (-r * r / (2.0 * s2)).exp();
    let mut acc = 0.5 * (f(radius) + f(top));
    for i in 1..steps {
        acc += f(radius + i as f64 * h);
    }
    acc * h
}

#[test]
fn heterodyne_tail_term_matches_quadrature() {
    for &(n, delta, beta) in &[(1000u64, 0.3, 0.2), (10_000, 0.2, 0.5), (256, 0.1, 0.0)] {
        let c = config(Case::Displacement, n, delta, C64::new(0.2, 0.1), beta, 1, 0);
        let b = error_budget(&c).unwrap();
        let copies = (n as f64).powf(1.0 - delta);
        let s2 = 1.0 / (2.0 * (1.0 - beta) * copies);
        let q = radial_tail(s2, b.radius);
        assert!(
            (b.heterodyne_tail - q).abs() < 1e-8,
            "{} vs {q}",
            b.heterodyne_tail
        );
    }
}

#[test]
fn estimates_leave_the_radius_at_the_predicted_rate() {
    let c = config(
        Case::Displacement,
        1000,
        0.3,
        C64::new(0.3, 0.0),
        0.2,
        400,
        8,
    );
    let r = run_case(&c).unwrap();
    let p = error_budget(&c).unwrap().heterodyne_tail;
    let sd = (p * (1.0 - p) / 400.0).sqrt();
    assert!((r.diagnostics.outside_radius_fraction - p).abs() < 4.0 * sd);
}

#[test]
fn phase_cases_co_rotate() {
    let phi0 = 0.7;
    for case in [Case::Phase, Case::PhaseThermal] {
        let a = config(case, 500, 0.3, C64::from_polar(0.8, 0.4), 0.25, 30, 21);
        let mut b = a.clone();
        b.params = ModeParams::new(C64::from_polar(0.8, 0.4 + phi0), 0.25).unwrap();
        b.ranges.phase = (a.ranges.phase.0 + phi0, a.ranges.phase.1 + phi0);
        let (ra, rb) = (run_case(&a).unwrap(), run_case(&b).unwrap());
        assert!((ra.epsilon_hat - rb.epsilon_hat).abs() < 1e-9);
    }
    for case in [Case::Modulus, Case::ModulusThermal] {
        let a = config(case, 500, 0.3, C64::from_polar(0.8, 0.0), 0.25, 30, 21);
        let mut b = a.clone();
        b.params = ModeParams::new(C64::from_polar(0.8, 2.0 * PI / 3.0), 0.25).unwrap();
        let (ra, rb) = (run_case(&a).unwrap(), run_case(&b).unwrap());
        assert!((ra.epsilon_hat - rb.epsilon_hat).abs() < 1e-9);
    }
}

#[test]
fn thermal_estimator_follows_the_geometric_fisher_information() {
    let c = config(
        Case::DisplacementThermal,
        200,
        0.3,
        C64::new(0.1, 0.0),
        0.3,
        400,
        4,
    );
    let s = run_case(&c).unwrap().diagnostics.beta_estimator.unwrap();
    assert!((s.mean - 0.3).abs() < 0.01);
    let ratio = s.empirical_variance / s.predicted_variance_geometric;
    assert!((ratio - 1.0).abs() < 0.25, "ratio {ratio}");
    assert!(s.empirical_variance / s.predicted_variance_quoted > 1.25);
}

#[test]
fn thermal_case_adds_codec_and_estimation_error() {
    let alpha = C64::new(0.3, 0.1);
    let a = run_case(&config(Case::Displacement, 1000, 0.3, alpha, 0.2, 50, 9)).unwrap();
    let b = run_case(&config(
        Case::DisplacementThermal,
        1000,
        0.3,
        alpha,
        0.2,
        50,
        9,
    ))
    .unwrap();
    let codec = b.diagnostics.codec_error.unwrap();
    assert!(b.epsilon_hat >= a.epsilon_hat + codec - 1e-12);
}

#[test]
fn ledgers_are_exact_formulas() {
    let l = ledger_for(Case::Displacement, 10_000, 0.3);
    assert_eq!(l.cbits, 10_000f64.log2());
    assert_eq!(l.qubits, 2.0 * 0.3 * 10_000f64.log2());
    assert_eq!(l.family.total(), 2);
    assert_eq!(
        ledger_for(Case::DisplacementThermal, 100, 0.3)
            .family
            .total(),
        3
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn estimates_are_probabilities(
        id in 1u8..8,
        n in 20u64..400,
        delta in 0.1f64..0.4,
        re in -0.5f64..0.5,
        im in -0.5f64..0.5,
        beta in 0.0f64..0.6,
        seed in 0u64..1000,
    ) {
        let c = config(Case::from_id(id).unwrap(), n, delta, C64::new(re, im), beta, 6, seed);
        let r = run_case(&c).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.epsilon_hat));
        prop_assert!(r.epsilon_stderr >= 0.0);
        prop_assert!(r.diagnostics.max_leakage < 1e-9);
    }
}
