use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Check, Comparison, ExperimentInfo, Params, Report, Statistic};
use crate::error::{Error, Result};
use crate::ledger::{check_instantaneity, classical_bits_sent_by, count_channels, SiteId, Transcript, Violation};
use crate::protocols::demolition::DEMOLITION_TAG;
use crate::protocols::{
    attempt_reverse_forward, consolidate_backward, consolidate_generalized, crossed_measurement_scenario,
    demolition_attempt, demolition_tally, demolition_with_early_message, generalized_forward_image,
    naive_prepare_strategy, prepare_mixed_direction, time_reverse_backward, ChannelPool, CrossedMeasurement,
    ForwardReversal, MixedDirectionSetup, NonlocalObservable, PrepareStrategy,
};
use crate::qcore::matrix::{self, c, CMatrix};
use crate::qcore::{fidelity_up_to_phase, fidelity_with_density, PauliByproduct, StateVector};
use crate::rng::RandomSource;
use crate::stats::{binomial_sigma, total_variation};
use crate::tsv::{abl_probability, GeneralizedTwoStateVector, GtsvTerm, Scenario, StepKind, TwoStateVector};

const EXACT: f64 = 1e-9;
const DEFAULT_TV: f64 = 0.02;
const DEFAULT_SIGMAS: f64 = 3.0;
const DEFAULT_ROUNDS: usize = 8;
const DEFAULT_ATTEMPTS: u64 = 1_000_000_000;

struct Ctx<'a> {
    info: &'a ExperimentInfo,
    params: &'a Params,
    source: RandomSource,
    statistics: Vec<Statistic>,
    checks: Vec<Check>,
    digests: Vec<String>,
    transcript: Option<Transcript>,
}

impl Ctx<'_> {
    fn trials(&self, default: u64) -> u64 {
        self.params.trials.unwrap_or(default)
    }

    fn states(&self, default: usize) -> usize {
        self.params.states.unwrap_or(default)
    }

    fn tv(&self) -> f64 {
        self.params.tv_tolerance.unwrap_or(DEFAULT_TV)
    }

    fn sigmas(&self) -> f64 {
        self.params.sigmas.unwrap_or(DEFAULT_SIGMAS)
    }

    fn rounds(&self) -> usize {
        self.params.max_rounds.unwrap_or(DEFAULT_ROUNDS)
    }

    fn attempts(&self) -> u64 {
        self.params.max_attempts.unwrap_or(DEFAULT_ATTEMPTS)
    }

    fn check(&mut self, name: impl Into<String>, observed: f64, cmp: Comparison, expected: f64, tolerance: f64) {
        self.checks.push(Check::new(self.info.criterion, name, observed, cmp, expected, tolerance));
    }

    /// Rate check: `observed` within the configured number of binomial
    /// standard errors of `expected`.
    fn rate(&mut self, name: &str, successes: u64, trials: u64, expected: f64) {
        let tol = self.sigmas() * binomial_sigma(expected, trials);
        self.check(name, successes as f64 / trials as f64, Comparison::Within, expected, tol);
    }

    /// Passes when `1 − fidelity ≤ 1e-9`; reports the infidelity.
    fn fidelity(&mut self, name: impl Into<String>, fidelity: f64) {
        self.check(format!("{} (infidelity)", name.into()), 1.0 - fidelity, Comparison::AtMost, EXACT, EXACT);
    }

    fn distribution(&mut self, label: String, samples: u64, empirical: Vec<f64>, oracle: Vec<f64>) {
        let tv = total_variation(&empirical, &oracle);
        let tol = self.tv();
        self.check(format!("{label}: TV to oracle"), tv, Comparison::AtMost, tol, tol);
        self.statistics.push(Statistic::new(label, samples, empirical, oracle));
    }
}

pub(super) fn run(info: &ExperimentInfo, seed: u64, params: &Params) -> Result<Report> {
    let mut ctx = Ctx {
        info,
        params,
        source: RandomSource::new(seed),
        statistics: Vec::new(),
        checks: Vec::new(),
        digests: Vec::new(),
        transcript: None,
    };
    match info.id {
        "time-reversal" => time_reversal(&mut ctx)?,
        "forward-reversal" => forward_reversal(&mut ctx)?,
        "demolition-reliability" => demolition_reliability(&mut ctx)?,
        "demolition-statistics" => demolition_statistics(&mut ctx)?,
        "round-convergence" => round_convergence(&mut ctx)?,
        "abl-agreement" => abl_agreement(&mut ctx)?,
        "crossed-measurement" => crossed_measurement(&mut ctx)?,
        "consolidation-resources" => consolidation_resources(&mut ctx)?,
        "instantaneity" => instantaneity(&mut ctx)?,
        "naive-preparation" => naive_preparation(&mut ctx)?,
        other => return Err(Error::Validation(format!("unknown experiment '{other}'"))),
    }
    Ok(Report {
        experiment: info.id.to_string(),
        criterion: info.criterion.to_string(),
        seed,
        params: params.clone(),
        statistics: ctx.statistics,
        checks: ctx.checks,
        transcript_digests: ctx.digests,
        duration_ms: None,
        transcript: ctx.transcript,
    })
}

fn sqrt_half() -> f64 {
    std::f64::consts::FRAC_1_SQRT_2
}

/// Projectors onto the z, x and y eigenbases of one qubit.
fn pauli_bases() -> Vec<(&'static str, Vec<StateVector>)> {
    let s = sqrt_half();
    let st = |a: Complex64, b: Complex64| StateVector::qubit(a, b).expect("normalized");
    vec![
        ("z", vec![StateVector::up(), StateVector::down()]),
        ("x", vec![st(c(s, 0.0), c(s, 0.0)), st(c(s, 0.0), c(-s, 0.0))]),
        ("y", vec![st(c(s, 0.0), c(0.0, s)), st(c(s, 0.0), c(0.0, -s))]),
    ]
}

fn projectors_of(basis: &[StateVector]) -> Vec<CMatrix> {
    basis.iter().map(|b| matrix::outer(b.amplitudes())).collect()
}

fn born(basis: &[StateVector], psi: &StateVector) -> Vec<f64> {
    basis.iter().map(|b| b.inner(psi).map(|a| a.norm_sqr()).unwrap_or(f64::NAN)).collect()
}

/// Particle 0 post-selected onto `phi`, reversed onto ancilla 1 at t = 1.
fn reversal_scenario(phi: &StateVector) -> Result<Scenario> {
    let mut s = Scenario::new(StateVector::up().tensor(&StateVector::up())?, vec![SiteId::BOB; 2])?;
    s.postselect_state(phi.clone(), vec![0])?;
    time_reverse_backward(&mut s, 0, 1, 1.0)?;
    Ok(s)
}

/// `−β*|↑⟩ + α*|↓⟩` for `φ = α|↑⟩ + β|↓⟩`.
fn expected_reversal(phi: &StateVector) -> StateVector {
    let (a, b) = (phi.amplitude(0), phi.amplitude(1));
    StateVector::qubit(-b.conj(), a.conj()).expect("normalized")
}

fn time_reversal(ctx: &mut Ctx) -> Result<()> {
    let n = ctx.states(1000);
    let states = ctx.source.derive(1);
    let worst = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let phi = StateVector::random(1, &mut states.substream(i));
            let s = reversal_scenario(&phi)?;
            let rho = s.conditional_density(&[1])?;
            let f = fidelity_with_density(&expected_reversal(&phi), &rho)?;
            Ok((f, (s.acceptance_probability()? - 0.5).abs()))
        })
        .try_reduce(|| (1.0, 0.0), |a: (f64, f64), b| Ok((a.0.min(b.0), a.1.max(b.1))))?;
    ctx.fidelity(format!("minimum ancilla fidelity over {n} backward states"), worst.0);
    ctx.check("largest deviation of exact acceptance from 1/2", worst.1, Comparison::AtMost, EXACT, EXACT);

    let runs = ctx.trials(100_000);
    let phi = StateVector::random(1, &mut ctx.source.derive(2).substream(0));
    let expect = expected_reversal(&phi);
    let (mut accepted, mut attempts) = (0, 0);
    for (b, (name, basis)) in pauli_bases().into_iter().enumerate() {
        let mut s = reversal_scenario(&phi)?;
        let m = s.push_step(SiteId::BOB, 2.0, StepKind::Measure { projectors: projectors_of(&basis), targets: vec![1] })?;
        let (tally, tries) = s.conditional_distribution(m, &ctx.source.derive(10 + b as u64), runs, ctx.attempts())?;
        accepted += tally.total();
        attempts += tries;
        ctx.distribution(format!("ancilla in the {name} basis"), tally.total(), tally.frequencies(), born(&basis, &expect));
    }
    ctx.rate("post-selection acceptance rate", accepted, attempts, 0.5);
    Ok(())
}

fn forward_reversal(ctx: &mut Ctx) -> Result<()> {
    let n = ctx.trials(100_000);
    let psi = StateVector::random(1, &mut ctx.source.derive(1).substream(0));
    let want = psi.apply_byproduct(&[PauliByproduct::XZ], &[0])?;
    let src = ctx.source.derive(2);
    let (hits, worst) = (0..n)
        .into_par_iter()
        .map(|i| match attempt_reverse_forward(&psi, 0, &mut src.substream(i))? {
            ForwardReversal::Success { state, partner, .. } => {
                Ok((1u64, fidelity_up_to_phase(&state.subsystem(&[partner])?, &want)?))
            }
            ForwardReversal::Failure(_) => Ok((0, 1.0)),
        })
        .try_reduce(|| (0, 1.0), |a: (u64, f64), b| Ok((a.0 + b.0, a.1.min(b.1))))?;
    ctx.rate("forward reversal success frequency", hits, n, 0.25);
    ctx.fidelity("minimum fidelity of the partner to XZψ on success", worst);
    Ok(())
}

/// Demolition runs on substreams `0, 1, …` until `target` of them succeed.
/// Returns (successes, trials, mismatches, index counts).
fn demolish_until(
    obs: &NonlocalObservable,
    input: &StateVector,
    oracle: impl Fn(&mut ChaCha8Rng) -> Result<usize> + Sync,
    target: u64,
    max_rounds: usize,
    source: &RandomSource,
) -> Result<(u64, u64, u64, Vec<u64>)> {
    const CHUNK: u64 = 4096;
    let d = obs.eigenstates().len();
    let (mut ok, mut trials, mut bad) = (0u64, 0u64, 0u64);
    let mut counts = vec![0u64; d];
    let proto = source.derive(1);
    let direct = source.derive(2);
    while ok < target {
        let chunk = (trials..trials + CHUNK)
            .into_par_iter()
            .map(|i| {
                let run = demolition_attempt(obs, input, max_rounds, &mut ChannelPool::unlimited(), &mut proto.substream(i))?;
                Ok(match run.eigen_index {
                    Some(k) => Some((k, k != oracle(&mut direct.substream(i))?)),
                    None => None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        for (k, mismatch) in chunk.into_iter().flatten() {
            if ok == target {
                break;
            }
            ok += 1;
            bad += mismatch as u64;
            counts[k] += 1;
        }
        trials += CHUNK;
    }
    Ok((ok, trials, bad, counts))
}

fn direct_measurement(obs: &NonlocalObservable, input: &StateVector) -> impl Fn(&mut ChaCha8Rng) -> Result<usize> + Sync {
    let projectors = obs.projectors();
    let input = input.clone();
    let targets: Vec<usize> = (0..obs.num_qubits()).collect();
    move |rng| Ok(input.measure_projective(&projectors, &targets, rng)?.0)
}

fn observables() -> [(&'static str, NonlocalObservable); 2] {
    [("crossed", NonlocalObservable::crossed_forward()), ("bell", NonlocalObservable::bell_operator())]
}

fn demolition_reliability(ctx: &mut Ctx) -> Result<()> {
    let target = ctx.trials(10_000);
    let rounds = ctx.rounds();
    let mut label = 0;
    for (name, obs) in observables() {
        for (k, e) in obs.eigenstates().iter().enumerate() {
            label += 1;
            let (ok, _, bad, _) = demolish_until(&obs, e, direct_measurement(&obs, e), target, rounds, &ctx.source.derive(label))?;
            ctx.check(format!("{name} eigenstate {k}: mismatches in {ok} successful runs"), bad as f64, Comparison::AtMost, 0.0, 0.0);
        }
    }
    Ok(())
}

fn demolition_statistics(ctx: &mut Ctx) -> Result<()> {
    let target = ctx.trials(100_000);
    let rounds = ctx.rounds();
    for (i, (name, obs)) in observables().into_iter().enumerate() {
        let input = StateVector::random(obs.num_qubits(), &mut ctx.source.derive(100 + i as u64).substream(0));
        let oracle = obs.born_distribution(&input)?;
        let (ok, _, _, counts) = demolish_until(&obs, &input, |_| Ok(0), target, rounds, &ctx.source.derive(i as u64))?;
        let freq = counts.iter().map(|&c| c as f64 / ok as f64).collect();
        ctx.distribution(format!("{name} observable on a random superposition"), ok, freq, oracle);
    }
    Ok(())
}

fn round_convergence(ctx: &mut Ctx) -> Result<()> {
    let n = ctx.trials(100_000);
    let rounds = ctx.rounds().max(8);
    let obs = NonlocalObservable::crossed_forward();
    let input = StateVector::random(2, &mut ctx.source.derive(1).substream(0));
    let tally = demolition_tally(&obs, &input, rounds, n, &ctx.source.derive(2))?;
    let cum = tally.cumulative_success();
    // Bob's byproducts are uniform: 1/4 for his one qubit in round 1, then
    // 1/16 per round for the two returned qubits.
    let analytic: Vec<f64> = (1..=rounds).map(|r| 1.0 - 0.75 * (15.0f64 / 16.0).powi(r as i32 - 1)).collect();
    let drops = cum.windows(2).filter(|w| w[1] < w[0]).count();
    ctx.check("rounds where the cumulative success decreases", drops as f64, Comparison::AtMost, 0.0, 0.0);
    ctx.rate("round-1 success rate (one qubit at Bob)", tally.success_by_round[0], n, 0.25);
    let at8 = cum[7];
    ctx.check("cumulative success within 8 rounds", at8, Comparison::Above, 0.3, 0.0);
    let tol = ctx.sigmas() * binomial_sigma(analytic[7], n);
    ctx.check("cumulative success within 8 rounds, pinned", at8, Comparison::Within, analytic[7], tol);
    ctx.statistics.push(Statistic::new("cumulative success by round", n, cum, analytic));
    Ok(())
}

fn random_tsv(rng: &mut ChaCha8Rng) -> Result<TwoStateVector> {
    let ket = StateVector::random(2, rng);
    let bra = StateVector::random(2, rng);
    TwoStateVector::new(bra, ket, vec![SiteId::ALICE, SiteId::BOB])
}

/// Independent ABL evaluation: `|⟨Φ|P_k|Ψ⟩|²` normalized, for rank-one
/// computational projectors on both qubits.
fn abl_oracle(tsv: &TwoStateVector) -> Vec<f64> {
    let w: Vec<f64> = (0..4).map(|k| (tsv.bra().amplitude(k).conj() * tsv.ket().amplitude(k)).norm_sqr()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

fn abl_agreement(ctx: &mut Ctx) -> Result<()> {
    let vectors = ctx.states(50);
    let runs = ctx.trials(100_000);
    let projectors = matrix::computational_projectors(2);
    let (mut worst_tv, mut worst_exact) = (0.0f64, 0.0f64);
    for v in 0..vectors as u64 {
        let tsv = random_tsv(&mut ctx.source.derive(1).substream(v))?;
        let oracle = abl_oracle(&tsv);
        let formula = abl_probability(&tsv, &projectors, &[0, 1])?;
        worst_exact = worst_exact.max(total_variation(&formula, &oracle));
        let mut s = Scenario::from_two_state_vector(&tsv)?;
        let m = s.push_step(SiteId::ALICE, 1.0, StepKind::Measure { projectors: projectors.clone(), targets: vec![0, 1] })?;
        let (tally, _) = s.conditional_distribution(m, &ctx.source.derive(1000 + v), runs, ctx.attempts())?;
        let tv = total_variation(&tally.frequencies(), &formula);
        worst_tv = worst_tv.max(tv);
        if v < 3 {
            ctx.statistics.push(Statistic::new(format!("two-state vector {v}"), tally.total(), tally.frequencies(), formula));
        }
    }
    ctx.check("abl_probability against the independent formula (TV)", worst_exact, Comparison::AtMost, EXACT, EXACT);
    let tol = ctx.tv();
    ctx.check(format!("largest sampler TV over {vectors} two-state vectors"), worst_tv, Comparison::AtMost, tol, tol);
    Ok(())
}

/// The forward eigenstates the crossed preparations must reverse into,
/// written out independently of the observable catalog.
fn crossed_forward_eigenstates() -> [StateVector; 4] {
    let s = sqrt_half();
    let st = |v: [f64; 4]| StateVector::from_amplitudes(2, v.iter().map(|&x| c(x, 0.0)).collect()).expect("normalized");
    [st([1.0, 0.0, 0.0, 0.0]), st([0.0, 0.0, 0.0, 1.0]), st([0.0, -s, s, 0.0]), st([0.0, s, s, 0.0])]
}

fn crossed_measurement(ctx: &mut Ctx) -> Result<()> {
    let want = crossed_forward_eigenstates();
    let mixed = NonlocalObservable::crossed_mixed();
    let runs = ctx.trials(200);
    for (i, (o1, o2)) in [(2, None), (-2, None), (0, Some(0)), (0, Some(2))].into_iter().enumerate() {
        let cm = crossed_measurement_scenario(o1, o2)?;
        let mut reversed = cm.clone();
        let anc = reversed.reverse_b()?;
        let rho = reversed.scenario.conditional_density(&[CrossedMeasurement::A, anc])?;
        let label = match o2 {
            Some(v) => format!("O1={o1}, O2={v}"),
            None => format!("O1={o1}"),
        };
        let f = fidelity_with_density(&want[cm.eigen_index()], &rho)?;
        ctx.fidelity(format!("{label}: fidelity of (A, ancilla) to its forward eigenstate"), f);

        let setup = MixedDirectionSetup {
            scenario: cm.scenario.clone(),
            system: vec![CrossedMeasurement::A, CrossedMeasurement::B],
            time: crate::protocols::reversal::CROSSED_T,
        };
        let prepared = prepare_mixed_direction(&mixed, &setup)?;
        let src = ctx.source.derive(i as u64);
        let rounds = ctx.rounds();
        let attempts = ctx.attempts();
        let results = (0..runs)
            .into_par_iter()
            .map(|j| prepared.sample(rounds, attempts, &mut ChannelPool::unlimited(), &mut src.substream(j)).map(|r| r.run.eigen_index))
            .collect::<Result<Vec<_>>>()?;
        let bad = results.iter().flatten().filter(|&&k| k != cm.eigen_index()).count();
        let ok = results.iter().flatten().count();
        ctx.check(format!("{label}: mixed-direction demolition mismatches in {ok} successful runs"), bad as f64, Comparison::AtMost, 0.0, 0.0);
    }
    Ok(())
}

fn consolidation_resources(ctx: &mut Ctx) -> Result<()> {
    const TAG: &str = "consolidate";
    const T: f64 = 1.0;
    for n in 2..=5usize {
        let phi = StateVector::random(n, &mut ctx.source.derive(1).substream(n as u64));
        let sites: Vec<SiteId> = (0..n as u32).map(SiteId).collect();
        let mut s = Scenario::new(StateVector::basis_state(n, 0)?, sites)?;
        s.postselect_state(phi.clone(), (0..n).collect())?;
        let moves = consolidate_backward(&mut s, &(0..n).collect::<Vec<_>>(), SiteId(0), T)?;
        let tr = s.to_transcript(TAG, T)?;
        ctx.check(format!("N={n}: singlet channels consumed"), count_channels(&tr, TAG)? as f64, Comparison::Within, n as f64 - 1.0, 0.0);
        ctx.check(format!("N={n}: classical bits sent by the measurement time"), classical_bits_sent_by(&tr, T)? as f64, Comparison::Within, 0.0, 0.0);
        let fwd: Vec<usize> = moves.iter().map(|m| m.forward_qubit).collect();
        let rho = s.conditional_density(&fwd)?;
        // time reversal of the whole bra: conjugate, then XZ on every qubit
        let image = phi.conj().apply_byproduct(&vec![PauliByproduct::XZ; n], &(0..n).collect::<Vec<_>>())?;
        ctx.fidelity(format!("N={n}: fidelity of the gathered forward state"), fidelity_with_density(&image, &rho)?);
        ctx.digests.push(tr.digest()?);
    }
    for sites in 2..=3usize {
        let mut rng = ctx.source.derive(2).substream(sites as u64);
        let terms = (0..2)
            .map(|_| GtsvTerm {
                coefficient: StateVector::random(1, &mut rng).amplitude(0),
                bras: (0..sites).map(|_| StateVector::random(1, &mut rng)).collect(),
                kets: (0..sites).map(|_| StateVector::random(1, &mut rng)).collect(),
            })
            .collect();
        let g = GeneralizedTwoStateVector::new(terms)?;
        let gc = consolidate_generalized(&g, T)?;
        let tr = gc.scenario.to_transcript(TAG, T)?;
        ctx.check(
            format!("generalized, {sites} sites: singlet channels consumed"),
            count_channels(&tr, TAG)? as f64,
            Comparison::Within,
            sites as f64 - 1.0,
            0.0,
        );
        let rho = gc.scenario.conditional_density(&gc.forward_qubits())?;
        let f = fidelity_with_density(&generalized_forward_image(&g)?, &rho)?;
        ctx.fidelity(format!("generalized, {sites} sites: fidelity to the 2N-part forward image"), f);
    }
    Ok(())
}

fn instantaneity(ctx: &mut Ctx) -> Result<()> {
    let n = ctx.trials(1000);
    let rounds = ctx.rounds();
    let obs = observables();
    let src = ctx.source.derive(1);
    let (passed, checked) = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = src.substream(i);
            let (_, o) = &obs[(i % 2) as usize];
            let input = StateVector::random(2, &mut rng);
            let run = demolition_attempt(o, &input, rounds, &mut ChannelPool::unlimited(), &mut rng)?;
            run.transcript.validate()?;
            Ok((check_instantaneity(&run.transcript)?.passed() as u64, 1u64))
        })
        .try_reduce(|| (0, 0), |a: (u64, u64), b| Ok((a.0 + b.0, a.1 + b.1)))?;
    ctx.check(format!("demolition transcripts passing the checker (of {checked})"), passed as f64, Comparison::Within, checked as f64, 0.0);

    let sample = demolition_attempt(&obs[1].1, &obs[1].1.eigenstates()[2], rounds, &mut ChannelPool::unlimited(), &mut src.substream(n))?;
    ctx.digests.push(sample.transcript.digest()?);
    let (prov, cons) = sample.transcript.channel_balance(DEMOLITION_TAG);
    ctx.check("sample transcript: pairs consumed = pairs provisioned", cons as f64, Comparison::Within, prov as f64, 0.0);
    ctx.transcript = Some(sample.transcript);

    let bell = &obs[1].1;
    let cheat = demolition_with_early_message(bell, &bell.eigenstates()[1], &mut ctx.source.derive(2).substream(0))?;
    let verdict = check_instantaneity(&cheat.transcript)?;
    let early = verdict.violations().iter().filter(|v| matches!(v, Violation::EarlyMessage { .. })).count();
    ctx.check("early-message control: violations reported", verdict.violations().len() as f64, Comparison::AtLeast, 1.0, 0.0);
    ctx.check("early-message control: early-message violations", early as f64, Comparison::AtLeast, 1.0, 0.0);
    ctx.digests.push(cheat.transcript.digest()?);
    Ok(())
}

fn naive_preparation(ctx: &mut Ctx) -> Result<()> {
    let runs = ctx.trials(10_000);
    let obs = NonlocalObservable::crossed_forward();
    let e = obs.eigenstates();
    let s = sqrt_half();
    let amps = e[0].amplitudes().iter().zip(e[1].amplitudes()).map(|(a, b)| (a + b) * s).collect();
    let phi = StateVector::from_amplitudes(2, amps)?;
    let fixed = naive_prepare_strategy(&obs, PrepareStrategy::Fixed(0), &phi, runs, &ctx.source.derive(1))?;
    let oracle = vec![0.5, 0.5, 0.0, 0.0];
    let tv = total_variation(&fixed.empirical, &oracle);
    ctx.check("always preparing e0: TV to the oracle", tv, Comparison::AtLeast, 0.4, 0.0);
    ctx.check("always preparing e0: TV to the oracle, analytic", total_variation(&fixed.analytic, &oracle), Comparison::Within, 0.5, EXACT);
    ctx.statistics.push(Statistic::new("always prepare e0", fixed.accepted_runs, fixed.empirical, oracle.clone()));
    let uniform = naive_prepare_strategy(&obs, PrepareStrategy::UniformRandom, &phi, runs, &ctx.source.derive(2))?;
    ctx.statistics.push(Statistic::new("prepare a uniformly random eigenstate", uniform.accepted_runs, uniform.empirical, oracle));
    Ok(())
}
