use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tsqm::ledger::{check_instantaneity, count_channels, ChannelId, SiteId};
use tsqm::protocols::demolition::{Layout, DEMOLITION_TAG};
use tsqm::protocols::{
    attempt_reverse_forward, demolition_attempt, demolition_measure, half_teleport, move_backward_state,
    time_reverse_backward, ChannelPair, ChannelPool, NonlocalObservable,
};
use tsqm::qcore::matrix::{self, c};
use tsqm::qcore::{fidelity_up_to_phase, StateVector};
use tsqm::stats::{total_variation, Tally};
use tsqm::tsv::{ChannelKind, Scenario, StepKind};
use tsqm::{Error, RandomSource};

fn cardinal_states() -> Vec<StateVector> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (s, s, 0.0), (s, -s, 0.0), (s, 0.0, s), (s, 0.0, -s)]
        .iter()
        .map(|&(a, b, bi)| StateVector::qubit(c(a, 0.0), c(b, bi)).unwrap())
        .collect()
}

#[test]
fn teleportation_identity_for_every_outcome_and_cardinal_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    for psi in cardinal_states() {
        let mut seen = [false; 4];
        while !seen.iter().all(|&x| x) {
            let (st, ch) = ChannelPair::attach(&psi, ChannelId(0), ChannelKind::PhiPlus, SiteId::ALICE, SiteId::BOB).unwrap();
            let mut chans = [ch];
            let run = half_teleport(&st, &[0], &mut chans, 0.0, &mut rng).unwrap();
            let o = run.outcomes[0];
            seen[o.index()] = true;
            let fixed = run.state.apply_byproduct(&[o.correction().inverse()], &run.remote).unwrap();
            assert!(fidelity_up_to_phase(&fixed.subsystem(&run.remote).unwrap(), &psi).unwrap() > 1.0 - 1e-9);
        }
    }
}

#[test]
fn half_teleportation_does_not_signal() {
    let n = 100_000u64;
    let src = RandomSource::new(72);
    let measure = |psi: &StateVector, stream: u64| {
        let mut t = Tally::new(2);
        for i in 0..n {
            let mut rng = src.derive(stream).substream(i);
            let (st, ch) = ChannelPair::attach(psi, ChannelId(0), ChannelKind::PhiPlus, SiteId::ALICE, SiteId::BOB).unwrap();
            let mut chans = [ch];
            let run = half_teleport(&st, &[0], &mut chans, 0.0, &mut rng).unwrap();
            let (k, _, _) = run.state.measure_projective(&matrix::computational_projectors(1), &run.remote, &mut rng).unwrap();
            t.record(k);
        }
        t.frequencies()
    };
    let up = measure(&StateVector::up(), 1);
    let down = measure(&StateVector::down(), 2);
    assert!(total_variation(&up, &down) < 0.02);
    assert!(total_variation(&up, &[0.5, 0.5]) < 0.02);
}

#[test]
fn backward_reversal_never_fails_while_forward_reversal_succeeds_a_quarter_of_the_time() {
    let phi = StateVector::qubit(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
    let mut s = Scenario::new(StateVector::up().tensor(&StateVector::up()).unwrap(), vec![SiteId::BOB; 2]).unwrap();
    s.postselect_state(phi, vec![0]).unwrap();
    let step = time_reverse_backward(&mut s, 0, 1, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(73);
    let (mut accepted, mut reversed) = (0, 0);
    for _ in 0..20_000 {
        if let Some((outcomes, _)) = s.run_once(&mut rng).unwrap() {
            accepted += 1;
            reversed += outcomes.iter().any(|(id, _)| *id == step) as u64;
        }
    }
    assert_eq!(reversed, accepted);
    let hits = (0..20_000).filter(|_| attempt_reverse_forward(&phi_like(), 0, &mut rng).unwrap().succeeded()).count();
    assert!((hits as f64 / 20_000.0 - 0.25).abs() < 0.015);
}

fn phi_like() -> StateVector {
    StateVector::qubit(c(0.8, 0.0), c(0.36, 0.48)).unwrap()
}

#[test]
fn a_move_consumes_one_channel() {
    let mut s = Scenario::new(StateVector::up(), vec![SiteId::BOB]).unwrap();
    s.push_step(SiteId::BOB, 0.5, StepKind::Unitary { matrix: matrix::hadamard(), targets: vec![0] }).unwrap();
    s.postselect_state(phi_like(), vec![0]).unwrap();
    move_backward_state(&mut s, 0, SiteId::ALICE, 1.0).unwrap();
    assert_eq!(count_channels(&s.to_transcript("mv", 1.0).unwrap(), "mv").unwrap(), 1);
}

fn observable() -> impl Strategy<Value = NonlocalObservable> {
    prop_oneof![Just(NonlocalObservable::crossed_forward()), Just(NonlocalObservable::bell_operator())]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eigenstates_are_never_misidentified(obs in observable(), k in 0usize..4, seed in any::<u64>(), phase in 0.0f64..6.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = obs.eigenstates()[k].scaled(Complex64::from_polar(1.0, phase));
        for _ in 0..20 {
            let run = demolition_attempt(&obs, &e, 6, &mut ChannelPool::unlimited(), &mut rng).unwrap();
            if let Some(i) = run.eigen_index {
                prop_assert_eq!(i, k);
            }
            prop_assert!(check_instantaneity(&run.transcript).unwrap().passed());
        }
    }

    #[test]
    fn pairs_consumed_follow_the_round_schedule(obs in observable(), seed in any::<u64>(), rounds in 1usize..6) {
        let layout = Layout::of(&obs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = StateVector::random(2, &mut rng);
        let mut pool = ChannelPool::unlimited();
        let run = demolition_attempt(&obs, &input, rounds, &mut pool, &mut rng).unwrap();
        let expect: u64 = (1..=run.rounds()).map(|r| layout.pairs_in_round(r).unwrap()).sum();
        let (provisioned, consumed) = run.transcript.channel_balance(DEMOLITION_TAG);
        prop_assert_eq!(consumed, expect);
        prop_assert_eq!(provisioned, consumed);
        prop_assert_eq!(pool.used(), expect);
        prop_assert!(run.rounds() <= rounds);
        prop_assert_eq!(run.succeeded(), run.records.last().unwrap().success);
    }
}

#[test]
fn exhausted_rounds_and_small_pools_are_errors() {
    let obs = NonlocalObservable::crossed_forward();
    let input = obs.eigenstates()[0].clone();
    let mut rng = ChaCha8Rng::seed_from_u64(74);
    let mut exhausted = 0;
    for _ in 0..200 {
        match demolition_measure(&obs, &input, 1, &mut ChannelPool::unlimited(), &mut rng) {
            Ok(run) => assert_eq!(run.eigen_index, Some(0)),
            Err(Error::RoundsExhausted { rounds: 1 }) => exhausted += 1,
            Err(e) => panic!("{e}"),
        }
    }
    assert!(exhausted > 100);
    let need = Layout::of(&obs).unwrap().pairs_required(3).unwrap();
    let r = demolition_measure(&obs, &input, 3, &mut ChannelPool::with_pairs(need - 1), &mut rng);
    assert!(matches!(r, Err(Error::Resource(_))));
    let mut big = Layout::of(&obs).unwrap();
    big.bob.push(3);
    assert!(big.pairs_required(40).is_none());
}

#[test]
fn mixed_and_oversized_observables_are_refused_by_the_forward_protocol() {
    let mut rng = ChaCha8Rng::seed_from_u64(75);
    let mixed = NonlocalObservable::crossed_mixed();
    let r = demolition_attempt(&mixed, &StateVector::basis_state(2, 0).unwrap(), 3, &mut ChannelPool::unlimited(), &mut rng);
    assert!(matches!(r, Err(Error::Domain(_))));
    let local = NonlocalObservable::computational(vec![SiteId::ALICE, SiteId::ALICE]).unwrap();
    let r = demolition_attempt(&local, &StateVector::basis_state(2, 0).unwrap(), 3, &mut ChannelPool::unlimited(), &mut rng);
    assert!(r.is_err());
    let wide = NonlocalObservable::computational(vec![SiteId::ALICE, SiteId::BOB, SiteId::BOB, SiteId::BOB]).unwrap();
    let r = demolition_attempt(&wide, &StateVector::basis_state(4, 0).unwrap(), 3, &mut ChannelPool::unlimited(), &mut rng);
    assert!(matches!(r, Err(Error::Capacity(_))));
}
