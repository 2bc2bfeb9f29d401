use nalgebra::DMatrix;
use popcode::channels;
use popcode::linalg::{self, CMat, C64};
use popcode::qudit_gaussian::*;
use proptest::prelude::*;

/// `exp(iH)` by its Taylor series.
fn series_exp_i(h: &CMat) -> CMat {
    let d = h.nrows();
    let ih = h * C64::i();
    let mut term = CMat::identity(d, d);
    let mut sum = term.clone();
    for k in 1..40 {
        term = &term * &ih / C64::new(k as f64, 0.0);
        sum += &term;
    }
    sum
}

#[test]
fn qubit_state_matches_series_conjugation() {
    let p = QuditParametrization::new(vec![0.7, 0.3], vec![(0.1, 0.0)]).unwrap();
    let u = series_exp_i(&p.hamiltonian());
    let rho0 = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
        C64::new(0.7, 0.0),
        C64::new(0.3, 0.0),
    ]));
    let oracle = &u * rho0 * u.adjoint();
    assert!(linalg::max_abs(&(build_qudit_state(&p) - oracle)) < 1e-9);
}

#[test]
fn generators_follow_the_matrix_units() {
    let ti = QuditParametrization::generator_imag(3, 0, 2);
    assert_eq!(ti[(0, 2)], C64::new(0.0, 1.0));
    assert_eq!(ti[(2, 0)], C64::new(0.0, -1.0));
    let tr = QuditParametrization::generator_real(3, 0, 2);
    assert_eq!(
        (tr[(0, 2)], tr[(2, 0)]),
        (C64::new(1.0, 0.0), C64::new(1.0, 0.0))
    );
}

#[test]
fn thermal_parameters_of_the_modes() {
    let th = QuditParametrization::diagonal(vec![0.5, 0.3, 0.2]).unwrap();
    let t = qlan_target(&th, &LocalParameter::zero(3), 100, 0.1).unwrap();
    let b = |j, k| t.target.mode_params[&(j, k)].beta();
    assert!((b(0, 1) - 0.6).abs() < 1e-15);
    assert!((b(0, 2) - 0.4).abs() < 1e-15);
    assert!((b(1, 2) - 2.0 / 3.0).abs() < 1e-15);
    assert!(t
        .target
        .mode_params
        .values()
        .all(|p| p.alpha().norm() == 0.0));
    assert!(t.within_neighborhood);
}

#[test]
fn covariance_is_the_inverse_fisher_information() {
    let v = spectrum_covariance(&[0.7, 0.3]);
    assert!((v[(0, 0)] - 0.21).abs() < 1e-15);
    for mu in [
        vec![0.7, 0.3],
        vec![0.4, 0.3, 0.2, 0.1],
        vec![0.35, 0.25, 0.2, 0.12, 0.08],
    ] {
        let inv = spectrum_fisher(&mu).try_inverse().unwrap();
        assert!((inv - spectrum_covariance(&mu)).amax() < 1e-12);
        assert!(spectrum_covariance(&mu).cholesky().is_some());
    }
}

#[test]
fn neighborhood_violation_is_reported() {
    let th = QuditParametrization::diagonal(vec![0.7, 0.3]).unwrap();
    let local = LocalParameter {
        delta_mu: vec![0.0],
        delta_xi: vec![(50.0, 0.0)],
    };
    let t = qlan_target(&th, &local, 100, 0.2).unwrap();
    assert!(!t.within_neighborhood);
}

#[test]
fn kappa_is_non_increasing_with_certified_maximiser() {
    let grid: Vec<f64> = (0..50).map(|i| i as f64 * KAPPA_X_MAX / 50.0).collect();
    let ks: Vec<Kappa> = grid.iter().map(|&x| kappa(x).unwrap()).collect();
    for (x, k) in grid.iter().zip(&ks) {
        assert!(kappa_feasible(*x, k.y, k.z, k.eta));
        assert_eq!(kappa_objective(*x, k.y, k.z, k.eta), k.value);
    }
    for w in ks.windows(2) {
        assert!(w[1].value <= w[0].value + 1e-6);
    }
    assert!(kappa(0.01).unwrap().value >= kappa(0.2).unwrap().value);
}

#[test]
fn lattice_register_error_is_small_and_shrinks() {
    let g = GaussianSpec::scalar(1.0, 0.21).unwrap();
    let c = LatticeCode::new(10_000, 0.4, 1).unwrap();
    assert!(c.decode_error_1d(&g).unwrap() <= 0.05);
    assert!((c.memory_bits() - 0.4 * 10_000f64.log2()).abs() < 1e-12);
    let errs: Vec<f64> = [100u64, 1000, 10_000, 100_000, 1_000_000]
        .iter()
        .map(|&n| {
            LatticeCode::new(n, 0.4, 1)
                .unwrap()
                .decode_error_1d(&g)
                .unwrap()
        })
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn lattice_point_mass_round_trips() {
    let c = LatticeCode::new(4096, 0.3, 2).unwrap();
    let h = c.spacing();
    let u = [2.0 * h, -5.0 * h];
    let t = c.compress(&u);
    assert_eq!(t, vec![2, -5]);
    let mut rng = channels::stream(3, 0);
    let back = c.decode(&t, &mut rng);
    assert!(back.iter().zip(&u).all(|(a, b)| (a - b).abs() <= 0.5 * h));
}

#[test]
fn shifted_mean_truncation_below_tail_bound() {
    for &n in &[1000u64, 10_000, 100_000] {
        let delta = 0.4;
        let c = LatticeCode::new(n, delta, 1).unwrap();
        let shift = (n as f64).powf(delta / 3.0);
        let g = GaussianSpec::scalar(shift, 0.21).unwrap();
        let mass = c.truncation_mass_1d(&g).unwrap();
        let bound = gaussian_tail_bound(&g, c.half_width() - shift);
        assert!(mass <= bound, "n={n}: {mass} > {bound}");
    }
}

#[test]
fn amplification_pushes_forward() {
    let g = GaussianSpec::scalar(1.0, 0.21).unwrap();
    assert_eq!(classical_amplify(&g, 1.0).unwrap(), g);
    let a = classical_amplify(&g, 1.1).unwrap();
    assert!((a.mean[0] - 1.1f64.sqrt()).abs() < 1e-15);
    assert!((a.cov[(0, 0)] - 0.231).abs() < 1e-15);
    assert!(classical_amplify(&g, 0.9).is_err());
}

#[test]
fn amplification_mismatch_scales_like_the_gain_excess() {
    let delta = 0.4;
    let v = GaussianSpec::scalar(0.0, 0.21).unwrap();
    let ns = [100u64, 1000, 10_000, 100_000, 1_000_000];
    let mut tvs = Vec::new();
    for &n in &ns {
        let excess = (n as f64).powf(-delta / 2.0);
        let amp = classical_amplify(&v, 1.0 + excess).unwrap();
        tvs.push((gaussian_tv_1d(&amp, &v).unwrap(), excess));
    }
    let c = tvs.iter().map(|(t, e)| t / e).fold(0.0, f64::max);
    assert!(c < 1.0);
    assert!(tvs.windows(2).all(|w| w[1].0 < w[0].0));
    assert!(tvs.iter().all(|(t, e)| *t <= c * e));
}

#[test]
fn tomography_recovers_a_pure_state() {
    let rho = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
        C64::new(1.0, 0.0),
        C64::new(0.0, 0.0),
    ]));
    let mut failures = 0;
    for seed in 0..200 {
        let mut rng = channels::stream(seed, 0);
        let est = tomography_sim(&rho, 100_000, &mut rng).unwrap();
        if 0.5 * linalg::trace_norm_hermitian(&(est - &rho)) > 0.02 {
            failures += 1;
        }
    }
    assert!(failures <= 2, "{failures} failures");
}

#[test]
fn tomography_failure_rate_within_envelope() {
    let p = QuditParametrization::new(vec![0.8, 0.2], vec![(0.3, -0.2)]).unwrap();
    let rho = build_qudit_state(&p);
    for &copies in &[10_000u64, 50_000] {
        let env = tomography_envelope(copies, 2, 0.1);
        let trials = 100;
        let fails = (0..trials)
            .filter(|&s| {
                let mut rng = channels::stream(s, copies);
                let est = tomography_sim(&rho, copies, &mut rng).unwrap();
                0.5 * linalg::trace_norm_hermitian(&(est - &rho)) > 0.1
            })
            .count();
        if env < 1.0 {
            assert!(fails as f64 / trials as f64 <= env, "copies {copies}");
        } else {
            assert_eq!(env, 1.0);
        }
    }
    let mut rng = channels::stream(0, 0);
    assert!(tomography_sim(&rho, 3, &mut rng).is_err());
}

#[test]
fn witness_properties() {
    let th = QuditParametrization::diagonal(vec![0.7, 0.3]).unwrap();
    let w = |re: f64| {
        theorem2_witness(
            &th,
            Perturbation::Quantum {
                j: 0,
                k: 1,
                re,
                im: 0.0,
            },
            120,
        )
        .unwrap()
        .value
    };
    assert_eq!(w(0.0), 0.0);
    assert!(w(1.0) > 0.0);
    assert!((w(1.0) - w(-1.0)).abs() < 1e-12);
    let c = theorem2_witness(
        &th,
        Perturbation::Classical {
            index: 0,
            value: 1.0,
        },
        120,
    )
    .unwrap();
    assert_eq!(c.value, 0.0);
    assert!(!c.applicable);
    assert!(theorem2_witness(
        &th,
        Perturbation::Quantum {
            j: 1,
            k: 0,
            re: 1.0,
            im: 0.0
        },
        120
    )
    .is_err());
}

#[test]
fn qudit_ledger_matches_family_counts() {
    let fam = full_family(3);
    assert_eq!((fam.f_c, fam.f_q), (2, 6));
    let l = qudit_ledger(fam, 1 << 20, 0.1);
    assert!((l.cbits - (0.5 * 8.0 + 0.2) * 20.0).abs() < 1e-12);
    assert!((l.qubits - 0.6 * 20.0).abs() < 1e-12);
}

#[test]
fn ideal_channel_charges_the_kappa_term() {
    let th = QuditParametrization::diagonal(vec![0.7, 0.3]).unwrap();
    let q = IdealQlan;
    let t = q.forward(&th, &LocalParameter::zero(2), 1000, 0.1).unwrap();
    assert_eq!(
        t,
        qlan_target(&th, &LocalParameter::zero(2), 1000, 0.1).unwrap()
    );
    let e = q.error_term(1000, 0.1).unwrap();
    assert!((e - 1000f64.powf(-kappa(0.1).unwrap().value)).abs() < 1e-15);
}

fn spectrum(raw: Vec<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = raw
        .iter()
        .enumerate()
        .map(|(i, r)| r + 0.05 * (raw.len() - i) as f64)
        .collect();
    v.sort_by(|a, b| b.total_cmp(a));
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conjugation_keeps_the_spectrum(
        raw in proptest::collection::vec(0.01f64..1.0, 3),
        xi in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3),
    ) {
        let mu = spectrum(raw);
        let p = QuditParametrization::new(mu.clone(), xi).unwrap();
        let mut ev = linalg::hermitian_eigenvalues(&build_qudit_state(&p));
        ev.reverse();
        for (a, b) in ev.iter().zip(&mu) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        let u = p.unitary();
        prop_assert!(linalg::max_abs(&(&u * u.adjoint() - CMat::identity(3, 3))) < 1e-9);
    }

    #[test]
    fn mode_amplitudes_are_linear(
        raw in proptest::collection::vec(0.01f64..1.0, 3),
        dxi in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 3),
    ) {
        let th = QuditParametrization::diagonal(spectrum(raw)).unwrap();
        let one = LocalParameter { delta_mu: vec![0.0; 2], delta_xi: dxi.clone() };
        let two = LocalParameter { delta_mu: vec![0.0; 2], delta_xi: dxi.iter().map(|&(r, i)| (2.0 * r, 2.0 * i)).collect() };
        let a = qlan_target(&th, &one, 100, 0.2).unwrap().target;
        let b = qlan_target(&th, &two, 100, 0.2).unwrap().target;
        for (k, p) in &a.mode_params {
            prop_assert!(p.beta() > 0.0 && p.beta() < 1.0);
            prop_assert_eq!(b.mode_params[k].alpha(), p.alpha() * 2.0);
        }
    }

    #[test]
    fn tomography_outputs_states(
        raw in proptest::collection::vec(0.01f64..1.0, 3),
        xi in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3),
        seed in 0u64..10_000,
    ) {
        let rho = build_qudit_state(&QuditParametrization::new(spectrum(raw), xi).unwrap());
        let mut rng = channels::stream(seed, 1);
        let est = tomography_sim(&rho, 70, &mut rng).unwrap();
        prop_assert!(linalg::hermitian_eigenvalues(&est)[0] >= -1e-12);
        prop_assert!((est.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(linalg::hermiticity_error(&est) < 1e-12);
    }
}

#[test]
fn gaussian_spec_rejects_indefinite_covariance() {
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    assert!(GaussianSpec::new(nalgebra::DVector::zeros(2), cov).is_err());
}
