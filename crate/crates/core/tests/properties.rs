use gmnl::inequalities::{canonicalize, BellExpression, RelabelingElement};
use gmnl::quantum::{
    born_behavior, seesaw_run, Measurements, QuantumScenario, QuantumState, StateVector,
};
use gmnl::vertices::{ns2_vertices, s2_generators};
use gmnl::{Behavior, Rational};
use nalgebra::SVector;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn int(v: i64) -> Rational {
    Rational::from_integer(v.into())
}

fn expression(coeffs: &[i64]) -> BellExpression {
    BellExpression::from_correlator_coefficients(coeffs.iter().map(|&c| int(c)).collect()).unwrap()
}

/// Mixture of NS₂ generators with integer weights.
fn ns_mixture(picks: &[(usize, u8)]) -> Behavior<Rational> {
    let points = ns2_vertices();
    let total: i64 = picks.iter().map(|&(_, w)| w as i64 + 1).sum();
    let mut p = vec![Rational::from_integer(0.into()); 64];
    for &(i, w) in picks {
        let weight = Rational::new((w as i64 + 1).into(), total.into());
        for (e, v) in points.points[i % points.len()].behavior.entries().iter().enumerate() {
            p[e] += &weight * v;
        }
    }
    Behavior::new(p).unwrap()
}

fn random_scenario(seed: u64) -> QuantumScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: StateVector =
        SVector::from_fn(|_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let v = v / Complex64::new(v.norm(), 0.0);
    QuantumScenario { state: QuantumState::pure(&v).unwrap(), measurements: Measurements::random(&mut rng) }
}

proptest! {
    #[test]
    fn correlator_and_probability_bases_round_trip(coeffs in prop::collection::vec(-3i64..=3, 27)) {
        let e = expression(&coeffs);
        let (probabilities, constant) = e.to_probability_basis();
        let back = BellExpression::from_probability_coefficients(probabilities, constant).unwrap();
        prop_assert_eq!(back.correlator_coefficients(), e.correlator_coefficients());
    }

    #[test]
    fn both_bases_agree_on_no_signalling_behaviors(
        coeffs in prop::collection::vec(-3i64..=3, 27),
        picks in prop::collection::vec((0usize..160, 0u8..4), 1..4),
    ) {
        let e = expression(&coeffs);
        let b = ns_mixture(&picks);
        prop_assert_eq!(e.evaluate(&b), e.evaluate_correlators(&b).unwrap());
    }

    #[test]
    fn relabeling_preserves_values(
        coeffs in prop::collection::vec(-3i64..=3, 27),
        g in 0usize..3072,
        b in 0usize..3072,
    ) {
        let g = RelabelingElement::from_index(g);
        let e = expression(&coeffs);
        let behavior = s2_generators().points[b % s2_generators().len()].behavior.clone();
        prop_assert_eq!(e.relabel(&g).evaluate(&g.apply_behavior(&behavior)), e.evaluate(&behavior));
    }

    #[test]
    fn composition_matches_sequential_action(a in 0usize..3072, b in 0usize..3072) {
        let (a, b) = (RelabelingElement::from_index(a), RelabelingElement::from_index(b));
        let ab = a.compose(&b);
        for e in 0..64 {
            prop_assert_eq!(ab.map_entry(e), a.map_entry(b.map_entry(e)));
        }
        prop_assert_eq!(a.compose(&a.inverse()), RelabelingElement::IDENTITY);
    }

    #[test]
    fn noise_mixes_linearly(seed in any::<u64>(), p in 0.0f64..1.0) {
        let s = random_scenario(seed);
        let clean = born_behavior(&s).unwrap();
        let noisy = born_behavior(&QuantumScenario {
            state: s.state.with_white_noise(p).unwrap(),
            measurements: s.measurements,
        })
        .unwrap();
        let expected = clean.mix(&Behavior::uniform(), &p).unwrap();
        prop_assert!(noisy.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn born_behaviors_are_no_signalling(seed in any::<u64>()) {
        let b = born_behavior(&random_scenario(seed)).unwrap();
        prop_assert!(b.normalize_check());
        prop_assert!(b.entries().iter().all(|&v| v > -1e-12));
        prop_assert!(b.is_no_signalling());
    }

    #[test]
    fn exchanging_qubits_exchanges_parties(seed in any::<u64>(), k in 0usize..6) {
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let perm = PERMS[k];
        let s = random_scenario(seed);
        let mut settings = s.measurements.settings;
        for p in 0..3 {
            settings[perm[p]] = s.measurements.settings[p];
        }
        let swapped = born_behavior(&QuantumScenario {
            state: s.state.permute_parties(perm),
            measurements: Measurements::new(settings),
        })
        .unwrap();
        let g = RelabelingElement { perm: perm.map(|v| v as u8), ..RelabelingElement::IDENTITY };
        let relabeled = g.apply_behavior(&born_behavior(&s).unwrap());
        prop_assert!(swapped.max_abs_diff(&relabeled) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn canonical_form_is_a_class_invariant(
        coeffs in prop::collection::vec(-2i64..=2, 27),
        g in 0usize..3072,
    ) {
        let e = expression(&coeffs);
        let c = canonicalize(&e);
        let moved = canonicalize(&e.relabel(&RelabelingElement::from_index(g)));
        prop_assert_eq!(moved.coefficients, c.coefficients);
        prop_assert_eq!(moved.stabilizer, c.stabilizer);
    }

    #[test]
    fn seesaw_never_decreases(seed in any::<u64>(), coeffs in prop::collection::vec(-2i64..=2, 27)) {
        let s = random_scenario(seed);
        let c: [f64; 27] = std::array::from_fn(|i| coeffs[i] as f64);
        let run = seesaw_run(&c, &s.state.pauli_tensor(), s.measurements);
        for w in run.trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9 * (1.0 + w[0].abs()), "{} then {}", w[0], w[1]);
        }
    }
}
