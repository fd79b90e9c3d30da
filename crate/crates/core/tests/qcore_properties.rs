use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsqm::qcore::matrix::{self, CMatrix};
use tsqm::qcore::{fidelity_up_to_phase, BellOutcome, PauliByproduct, StateVector};

fn state(n: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n)
        .prop_filter("nonzero", |v| v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3)
        .prop_map(move |v| StateVector::normalized(n, v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()).unwrap())
}

/// Haar-ish unitary from the QR factor of a complex Gaussian-like matrix.
fn random_unitary(dim: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    m.qr().q()
}

fn pauli() -> impl Strategy<Value = PauliByproduct> {
    prop_oneof![Just(PauliByproduct::I), Just(PauliByproduct::X), Just(PauliByproduct::Z), Just(PauliByproduct::XZ)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unitaries_preserve_the_norm(psi in state(3), seed in any::<u64>(), k in 1usize..=3, offset in 0usize..3) {
        let targets: Vec<usize> = (0..k).map(|i| (i + offset) % 3).collect();
        let u = random_unitary(1 << k, seed);
        let out = psi.apply_unitary(&u, &targets).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn collapse_reports_the_projected_weight(psi in state(2), seed in any::<u64>(), q in 0usize..2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let projectors = matrix::computational_projectors(1);
        let (k, post, p) = psi.measure_projective(&projectors, &[q], &mut rng).unwrap();
        let weight: f64 = (0..4).filter(|i| (i >> q) & 1 == k).map(|i| psi.amplitude(i).norm_sqr()).sum();
        prop_assert!((p - weight).abs() < 1e-12);
        prop_assert!((post.norm_sqr() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bell_outcome_leaves_the_correction_times_input(psi in state(1), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reg = psi.tensor(&StateVector::bell(BellOutcome::PhiPlus)).unwrap();
        let (o, post) = reg.bell_measure((0, 1), &mut rng).unwrap();
        let far = post.subsystem(&[2]).unwrap();
        let want = psi.apply_byproduct(&[o.correction()], &[0]).unwrap();
        prop_assert!(fidelity_up_to_phase(&far, &want).unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn byproduct_composition_matches_sequential_application(psi in state(1), a in pauli(), b in pauli()) {
        let seq = psi.apply_byproduct(&[a], &[0]).unwrap().apply_byproduct(&[b], &[0]).unwrap();
        let composed = psi.apply_byproduct(&[a.then(b)], &[0]).unwrap();
        prop_assert!(fidelity_up_to_phase(&seq, &composed).unwrap() > 1.0 - 1e-9);
    }
}

#[test]
fn bell_outcomes_are_uniform_on_maximally_entangled_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 40_000u64;
    let mut counts = [0u64; 4];
    // qubit 0 is maximally entangled with qubit 2; measure (0, 1)
    let reg = StateVector::bell(BellOutcome::PsiMinus)
        .tensor(&StateVector::random(1, &mut rng))
        .unwrap()
        .apply_unitary(&matrix::swap(), &[1, 2])
        .unwrap();
    for _ in 0..n {
        counts[reg.bell_measure((0, 1), &mut rng).unwrap().0.index()] += 1;
    }
    let sigma = (0.25f64 * 0.75 / n as f64).sqrt();
    for c in counts {
        assert!((c as f64 / n as f64 - 0.25).abs() < 4.0 * sigma, "{counts:?}");
    }
}

#[test]
fn register_cap_is_enforced() {
    assert!(StateVector::basis_state(16, 0).is_ok());
    assert!(StateVector::basis_state(17, 0).is_err());
}
