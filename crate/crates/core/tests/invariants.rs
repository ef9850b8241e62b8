use nalgebra::DMatrix;
use proptest::prelude::*;
use qsc_core::constellation::{PhaseConstellation, QndmConstellation, Y00Constellation};
use qsc_core::quantum_detection::{
    coherent_overlap, gram_matrix, helstrom_binary_mixed, helstrom_binary_pure, holevo_information,
    mutual_information, psk_ensemble, srm_channel, srm_error_covariant, srm_povm, verify_bayes_conditions,
    PureStateEnsemble, SpanBasis,
};
use qsc_core::receivers::{bob_error, eve_error_mary, tail_q, SpacingMode};
use qsc_core::simulator::{
    kpa_search, run_kpa_experiment, run_trial, KpaConfig, KpaExperiment, Scheme, TrialConfig,
};
use qsc_core::C64;

fn first_row(e: &PureStateEnsemble) -> Vec<C64> {
    let a = e.amplitudes();
    a.iter().map(|&b| coherent_overlap(a[0], b)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn srm_routes_agree_on_random_psk(n in 2usize..40, amp in 0.2f64..5.0) {
        let e = psk_ensemble(n, amp).unwrap();
        let ch = srm_channel(&e).unwrap();
        let direct = 1.0 - (0..n).map(|i| ch.get(i, i)).sum::<f64>() / n as f64;
        let closed = srm_error_covariant(n, &first_row(&e)).unwrap();
        prop_assert!((direct - closed).abs() < 1e-8, "{direct} vs {closed}");
        prop_assert!(ch.is_circulant(1e-9));
    }

    #[test]
    fn channel_rows_are_distributions(n in 2usize..24, amp in 0.1f64..4.0, tilt in 0.0f64..1.0) {
        let amps: Vec<C64> = (0..n).map(|k| C64::from_polar(amp * (1.0 + tilt * k as f64 / n as f64), 0.3 * k as f64)).collect();
        let e = PureStateEnsemble::uniform(amps).unwrap();
        let basis = SpanBasis::from_ensemble(&e).unwrap();
        let ch = srm_povm(&basis).unwrap().channel(&basis).unwrap();
        for m in 0..n {
            let s: f64 = (0..n).map(|l| ch.get(m, l)).sum();
            prop_assert!((s - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn holevo_bounds_accessible_information(n in 2usize..24, amp in 0.1f64..4.0) {
        let e = psk_ensemble(n, amp).unwrap();
        let ih = holevo_information(&e);
        let mi = mutual_information(&srm_channel(&e).unwrap(), e.priors()).unwrap();
        prop_assert!(ih >= mi - 1e-9);
        prop_assert!(ih <= (n as f64).log2() + 1e-12);
    }

    #[test]
    fn helstrom_pure_matches_mixed_for_coherent_pairs(a in 0.0f64..3.0, phase in 0.0f64..6.0, xi in 0.01f64..0.99) {
        let e = PureStateEnsemble::uniform(vec![C64::new(a, 0.0), C64::from_polar(a, phase)]).unwrap();
        let basis = SpanBasis::from_ensemble(&e).unwrap();
        let kappa_sq = coherent_overlap(e.amplitudes()[0], e.amplitudes()[1]).norm_sqr();
        let mixed = helstrom_binary_mixed(&basis.projector(0), &basis.projector(1), xi).unwrap();
        prop_assert!((helstrom_binary_pure(kappa_sq, xi).unwrap() - mixed).abs() < 1e-9);
    }

    #[test]
    fn eve_error_is_bounded_and_exceeds_bob(m in 2u32..128, amp in 0.5f64..6.0) {
        for mode in [SpacingMode::Y00, SpacingMode::Qndm] {
            let p = eve_error_mary(m, amp, mode).unwrap();
            prop_assert!((0.0..=1.0 - 1.0 / m as f64 + 1e-15).contains(&p));
        }
        prop_assert!((bob_error(amp).unwrap() - tail_q(2.0 * amp)).abs() < 1e-15);
    }
}

#[test]
fn srm_is_bayes_optimal_for_covariant_sets() {
    for (n, amp) in [(4usize, 1.0), (8, 0.7), (16, 2.0)] {
        let e = psk_ensemble(n, amp).unwrap();
        let basis = SpanBasis::from_ensemble(&e).unwrap();
        let r = verify_bayes_conditions(&e, &basis, &srm_povm(&basis).unwrap()).unwrap();
        assert!(r.offdiag < 1e-9 && r.positivity < 1e-9, "n={n}: {r:?}");
    }
}

#[test]
fn gram_of_constellations_is_unit_diagonal() {
    let y = Y00Constellation::new(8, 2.0).unwrap();
    let q = QndmConstellation::new(4, 2.0).unwrap();
    for pts in [y.points(), q.points()] {
        let e = PureStateEnsemble::uniform(pts.iter().map(|p| C64::from_polar(2.0, p.theta)).collect()).unwrap();
        let g = gram_matrix(&e);
        assert_eq!(g.diagonal(), DMatrix::<C64>::identity(g.nrows(), g.nrows()).diagonal());
        assert!((&g - g.adjoint()).camax() < 1e-15);
    }
}

#[test]
fn trials_are_reproducible_and_seed_sensitive() {
    let cfg = TrialConfig::new(Scheme::qndm(), 8, 1.0, 5000, 99);
    let a = run_trial(&cfg, Some(1)).unwrap();
    let b = run_trial(&cfg, Some(3)).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(serde_json::to_string(&a.summary).unwrap(), serde_json::to_string(&b.summary).unwrap());
    let c = run_trial(&TrialConfig::new(Scheme::qndm(), 8, 1.0, 5000, 100), Some(1)).unwrap();
    assert_ne!(a.records, c.records);
}

#[test]
fn survivor_curves_never_increase_under_hard_scoring() {
    for scheme in [Scheme::y00(), Scheme::qndm()] {
        let r = run_kpa_experiment(&KpaExperiment::new(KpaConfig::new(scheme, 8, 2.0, 10), 0x155, 40, 5)).unwrap();
        assert_eq!(r.curve[0].survivors, r.keyspace);
        assert!(r.curve.windows(2).all(|w| w[1].survivors <= w[0].survivors));
        assert_eq!(r.survived(0x155), Some(true));
    }
}

#[test]
fn empty_plaintext_leaves_full_keyspace() {
    let r = kpa_search(&[], &[], &KpaConfig::new(Scheme::y00(), 4, 1.0, 8)).unwrap();
    assert_eq!(r.curve.len(), 1);
    assert_eq!(r.final_survivors(), 255);
}
