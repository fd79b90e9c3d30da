use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{self, CMatrix, ONE, ZERO};
use super::pauli::{BellOutcome, PauliByproduct};
use super::{QubitId, MAX_QUBITS, NORM_TOL, PROB_FLOOR};
use crate::error::{domain, validation, Error, Result};

/// Dense amplitude vector over `num_qubits` qubits.
///
/// Qubit `q` is bit `q` of the amplitude index (little-endian). `tensor(a, b)`
/// places `a` on the low qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawState", into = "RawState")]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct RawState {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl TryFrom<RawState> for StateVector {
    type Error = Error;
    fn try_from(r: RawState) -> Result<Self> {
        StateVector::from_amplitudes(r.num_qubits, r.amplitudes)
    }
}

impl From<StateVector> for RawState {
    fn from(s: StateVector) -> Self {
        RawState { num_qubits: s.num_qubits, amplitudes: s.amps }
    }
}

pub(crate) fn check_capacity(num_qubits: usize) -> Result<()> {
    if num_qubits > MAX_QUBITS {
        return Err(Error::Capacity(format!(
            "{num_qubits} qubits exceeds the register cap of {MAX_QUBITS}"
        )));
    }
    Ok(())
}

pub(crate) fn check_targets(num_qubits: usize, targets: &[QubitId]) -> Result<()> {
    for (i, &t) in targets.iter().enumerate() {
        if t >= num_qubits {
            return Err(domain(format!("qubit {t} out of range for {num_qubits} qubits")));
        }
        if targets[..i].contains(&t) {
            return Err(domain(format!("duplicate target qubit {t}")));
        }
    }
    Ok(())
}

/// Places bit `i` of `value` at position `positions[i]`.
#[inline]
pub(crate) fn scatter(value: usize, positions: &[QubitId]) -> usize {
    positions
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &p)| acc | (((value >> i) & 1) << p))
}

pub(crate) fn complement(num_qubits: usize, targets: &[QubitId]) -> Vec<QubitId> {
    (0..num_qubits).filter(|q| !targets.contains(q)).collect()
}

pub(crate) fn norm_sqr(amps: &[Complex64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum()
}

/// Applies an arbitrary `2^k × 2^k` matrix on `targets` in place.
pub(crate) fn apply_matrix_raw(amps: &mut [Complex64], num_qubits: usize, m: &CMatrix, targets: &[QubitId]) {
    let k = targets.len();
    let sub = 1usize << k;
    let rest = complement(num_qubits, targets);
    let mut buf = vec![ZERO; sub];
    let mut out = vec![ZERO; sub];
    let offsets: Vec<usize> = (0..sub).map(|j| scatter(j, targets)).collect();
    for r in 0..(1usize << rest.len()) {
        let base = scatter(r, &rest);
        for j in 0..sub {
            buf[j] = amps[base | offsets[j]];
        }
        for i in 0..sub {
            let mut acc = ZERO;
            for j in 0..sub {
                let mij = m[(i, j)];
                if mij != ZERO {
                    acc += mij * buf[j];
                }
            }
            out[i] = acc;
        }
        for i in 0..sub {
            amps[base | offsets[i]] = out[i];
        }
    }
}

/// `(⟨phi| ⊗ I) amps`: contracts `targets` against `phi`, leaving the other
/// qubits in their original relative order. The result is unnormalized.
pub(crate) fn contract_raw(amps: &[Complex64], num_qubits: usize, targets: &[QubitId], phi: &[Complex64]) -> Vec<Complex64> {
    let rest = complement(num_qubits, targets);
    let offsets: Vec<usize> = (0..phi.len()).map(|j| scatter(j, targets)).collect();
    (0..(1usize << rest.len()))
        .map(|r| {
            let base = scatter(r, &rest);
            phi.iter()
                .zip(&offsets)
                .map(|(p, &o)| p.conj() * amps[base | o])
                .sum()
        })
        .collect()
}

/// Inverse of `contract_raw`: builds `phi` on `targets` times `rest` on the
/// remaining qubits.
pub(crate) fn embed_raw(rest_amps: &[Complex64], num_qubits: usize, targets: &[QubitId], phi: &[Complex64]) -> Vec<Complex64> {
    let rest = complement(num_qubits, targets);
    let mut out = vec![ZERO; 1 << num_qubits];
    for (r, &a) in rest_amps.iter().enumerate() {
        if a == ZERO {
            continue;
        }
        let base = scatter(r, &rest);
        for (j, &p) in phi.iter().enumerate() {
            out[base | scatter(j, targets)] = a * p;
        }
    }
    out
}

impl StateVector {
    pub fn basis_state(num_qubits: usize, index: usize) -> Result<Self> {
        check_capacity(num_qubits)?;
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(domain(format!("basis index {index} out of range for {num_qubits} qubits")));
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(Self { num_qubits, amps })
    }

    /// Builds a state from amplitudes that must already be normalized.
    pub fn from_amplitudes(num_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        check_capacity(num_qubits)?;
        if amps.len() != 1usize << num_qubits {
            return Err(domain(format!(
                "{} amplitudes for {num_qubits} qubits",
                amps.len()
            )));
        }
        let n = norm_sqr(&amps);
        if (n - 1.0).abs() > NORM_TOL {
            return Err(validation(format!("state norm² {n} is not 1")));
        }
        Ok(Self { num_qubits, amps })
    }

    /// Builds a state from arbitrary nonzero amplitudes, normalizing them.
    pub fn normalized(num_qubits: usize, mut amps: Vec<Complex64>) -> Result<Self> {
        check_capacity(num_qubits)?;
        if amps.len() != 1usize << num_qubits {
            return Err(domain(format!("{} amplitudes for {num_qubits} qubits", amps.len())));
        }
        let n = norm_sqr(&amps);
        if n < PROB_FLOOR {
            return Err(Error::Numerical("cannot normalize a vanishing vector".into()));
        }
        let s = 1.0 / n.sqrt();
        amps.iter_mut().for_each(|a| *a *= s);
        Ok(Self { num_qubits, amps })
    }

    /// Single-qubit state `alpha|↑⟩ + beta|↓⟩`, normalized.
    pub fn qubit(alpha: Complex64, beta: Complex64) -> Result<Self> {
        Self::normalized(1, vec![alpha, beta])
    }

    pub fn up() -> Self {
        Self { num_qubits: 1, amps: vec![ONE, ZERO] }
    }

    pub fn down() -> Self {
        Self { num_qubits: 1, amps: vec![ZERO, ONE] }
    }

    /// Bell state on a fresh two-qubit register; qubit 0 is the first member.
    pub fn bell(o: BellOutcome) -> Self {
        Self { num_qubits: 2, amps: o.amplitudes().to_vec() }
    }

    /// `(|↑↓⟩ − |↓↑⟩)/√2` with qubit 0 as the first factor.
    pub fn singlet() -> Self {
        Self::bell(BellOutcome::PsiMinus)
    }

    /// Haar-random pure state.
    pub fn random<R: Rng + ?Sized>(num_qubits: usize, rng: &mut R) -> Self {
        let amps: Vec<Complex64> = (0..(1usize << num_qubits))
            .map(|_| Complex64::new(gaussian(rng), gaussian(rng)))
            .collect();
        Self::normalized(num_qubits, amps).expect("gaussian vector is nonzero")
    }

    pub(crate) fn from_raw(num_qubits: usize, amps: Vec<Complex64>) -> Self {
        debug_assert_eq!(amps.len(), 1 << num_qubits);
        Self { num_qubits, amps }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amps)
    }

    pub fn to_dvector(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.amps)
    }

    /// Inner product `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.num_qubits != other.num_qubits {
            return Err(domain(format!(
                "inner product of {}- and {}-qubit states",
                self.num_qubits, other.num_qubits
            )));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn conj(&self) -> StateVector {
        Self::from_raw(self.num_qubits, self.amps.iter().map(|a| a.conj()).collect())
    }

    pub fn scaled(&self, phase: Complex64) -> StateVector {
        Self::from_raw(self.num_qubits, self.amps.iter().map(|a| a * phase).collect())
    }

    /// Kronecker product with `self` on the low qubits.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let n = self.num_qubits + other.num_qubits;
        check_capacity(n)?;
        let mut amps = Vec::with_capacity(1 << n);
        for b in &other.amps {
            for a in &self.amps {
                amps.push(a * b);
            }
        }
        Ok(Self::from_raw(n, amps))
    }

    /// Applies a unitary on `targets`; `targets[i]` is local qubit `i` of the matrix.
    pub fn apply_unitary(&self, m: &CMatrix, targets: &[QubitId]) -> Result<StateVector> {
        check_targets(self.num_qubits, targets)?;
        if m.nrows() != 1 << targets.len() || m.ncols() != m.nrows() {
            return Err(domain(format!(
                "{}x{} matrix for {} targets",
                m.nrows(),
                m.ncols(),
                targets.len()
            )));
        }
        matrix::check_unitary(m, NORM_TOL)?;
        let mut out = self.clone();
        apply_matrix_raw(&mut out.amps, self.num_qubits, m, targets);
        Ok(out)
    }

    pub(crate) fn apply_unitary_unchecked(&mut self, m: &CMatrix, targets: &[QubitId]) {
        apply_matrix_raw(&mut self.amps, self.num_qubits, m, targets);
    }

    /// Applies one Pauli byproduct per target qubit.
    pub fn apply_byproduct(&self, byproducts: &[PauliByproduct], targets: &[QubitId]) -> Result<StateVector> {
        if byproducts.len() != targets.len() {
            return Err(domain(format!(
                "{} byproducts for {} targets",
                byproducts.len(),
                targets.len()
            )));
        }
        check_targets(self.num_qubits, targets)?;
        let mut out = self.clone();
        for (&p, &q) in byproducts.iter().zip(targets) {
            out.apply_pauli_unchecked(p, q);
        }
        Ok(out)
    }

    pub(crate) fn apply_pauli_unchecked(&mut self, p: PauliByproduct, q: QubitId) {
        if p.is_identity() {
            return;
        }
        let bit = 1usize << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (lo, hi) = self.amps.split_at_mut(i | bit);
                p.apply_pair(&mut lo[i], &mut hi[0]);
            }
        }
    }

    /// Projective measurement of `targets` with the given complete orthogonal projectors.
    ///
    /// Returns the outcome index, the renormalized post-measurement state and
    /// the Born probability of the outcome.
    pub fn measure_projective<R: Rng + ?Sized>(
        &self,
        projectors: &[CMatrix],
        targets: &[QubitId],
        rng: &mut R,
    ) -> Result<(usize, StateVector, f64)> {
        check_targets(self.num_qubits, targets)?;
        matrix::check_projectors(projectors, 1 << targets.len(), NORM_TOL)?;
        self.measure_projective_unchecked(projectors, targets, rng)
    }

    pub(crate) fn measure_projective_unchecked<R: Rng + ?Sized>(
        &self,
        projectors: &[CMatrix],
        targets: &[QubitId],
        rng: &mut R,
    ) -> Result<(usize, StateVector, f64)> {
        let branches: Vec<(Vec<Complex64>, f64)> = projectors
            .iter()
            .map(|p| {
                let mut amps = self.amps.clone();
                apply_matrix_raw(&mut amps, self.num_qubits, p, targets);
                let prob = norm_sqr(&amps);
                (amps, prob)
            })
            .collect();
        let probs: Vec<f64> = branches.iter().map(|b| b.1).collect();
        let k = sample_index(&probs, rng)?;
        let (mut amps, prob) = branches.into_iter().nth(k).expect("sampled index in range");
        let s = 1.0 / prob.sqrt();
        amps.iter_mut().for_each(|a| *a *= s);
        Ok((k, Self::from_raw(self.num_qubits, amps), prob))
    }

    /// Probability that a projective measurement onto `phi` on `targets` succeeds.
    pub fn overlap_probability(&self, phi: &StateVector, targets: &[QubitId]) -> Result<f64> {
        check_targets(self.num_qubits, targets)?;
        if phi.num_qubits != targets.len() {
            return Err(domain("projection state does not match target count"));
        }
        Ok(norm_sqr(&contract_raw(&self.amps, self.num_qubits, targets, &phi.amps)))
    }

    /// Samples a Bell measurement on the ordered pair.
    pub fn bell_measure<R: Rng + ?Sized>(&self, pair: (QubitId, QubitId), rng: &mut R) -> Result<(BellOutcome, StateVector)> {
        if pair.0 == pair.1 {
            return Err(domain(format!("Bell measurement on qubit {} twice", pair.0)));
        }
        let targets = [pair.0, pair.1];
        check_targets(self.num_qubits, &targets)?;
        let rests: Vec<Vec<Complex64>> = BellOutcome::ALL
            .iter()
            .map(|o| contract_raw(&self.amps, self.num_qubits, &targets, &o.amplitudes()))
            .collect();
        let probs: Vec<f64> = rests.iter().map(|r| norm_sqr(r)).collect();
        let k = sample_index(&probs, rng)?;
        let o = BellOutcome::ALL[k];
        let s = 1.0 / probs[k].sqrt();
        let rest: Vec<Complex64> = rests[k].iter().map(|a| a * s).collect();
        let amps = embed_raw(&rest, self.num_qubits, &targets, &o.amplitudes());
        Ok((o, Self::from_raw(self.num_qubits, amps)))
    }

    /// Puts `pair` into the singlet. The pair must be in a product state with
    /// the rest of the register; use [`Self::prepare_singlet_overwriting`] otherwise.
    pub fn prepare_singlet(&self, pair: (QubitId, QubitId)) -> Result<StateVector> {
        if pair.0 == pair.1 {
            return Err(domain("singlet on a single qubit"));
        }
        let targets = [pair.0, pair.1];
        check_targets(self.num_qubits, &targets)?;
        let (_, rest) = self.factor(&targets).ok_or_else(|| {
            validation("pair is entangled with the rest of the register")
        })?;
        Ok(Self::from_raw(
            self.num_qubits,
            embed_raw(&rest.amps, self.num_qubits, &targets, &BellOutcome::PsiMinus.amplitudes()),
        ))
    }

    /// Discards whatever the pair held (by measuring it) and puts it in the singlet.
    pub fn prepare_singlet_overwriting<R: Rng + ?Sized>(&self, pair: (QubitId, QubitId), rng: &mut R) -> Result<StateVector> {
        let (o, collapsed) = self.bell_measure(pair, rng)?;
        // Bell state o = (I ⊗ P(o))Φ+, singlet = (I ⊗ XZ)Φ+
        let fix = o.correction().then(PauliByproduct::XZ);
        let mut out = collapsed;
        out.apply_pauli_unchecked(fix, pair.1);
        Ok(out)
    }

    /// Splits the register into `targets` and the rest when it is a product
    /// across that cut (within `NORM_TOL`). Both factors are normalized; the
    /// rest keeps its qubits in their original relative order.
    pub fn factor(&self, targets: &[QubitId]) -> Option<(StateVector, StateVector)> {
        let rest = complement(self.num_qubits, targets);
        let sub_dim = 1usize << targets.len();
        let rest_dim = 1usize << rest.len();
        let sub_off: Vec<usize> = (0..sub_dim).map(|j| scatter(j, targets)).collect();
        let rest_off: Vec<usize> = (0..rest_dim).map(|r| scatter(r, &rest)).collect();
        // pick the rest column with largest weight as the candidate sub-state
        let (best, _) = rest_off
            .iter()
            .enumerate()
            .map(|(r, &b)| (r, sub_off.iter().map(|&o| self.amps[b | o].norm_sqr()).sum::<f64>()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let sub: Vec<Complex64> = sub_off.iter().map(|&o| self.amps[rest_off[best] | o]).collect();
        let sub = Self::normalized(targets.len(), sub).ok()?;
        let rest_amps = contract_raw(&self.amps, self.num_qubits, targets, &sub.amps);
        let rebuilt = embed_raw(&rest_amps, self.num_qubits, targets, &sub.amps);
        let err: f64 = rebuilt.iter().zip(&self.amps).map(|(a, b)| (a - b).norm_sqr()).sum();
        if err.sqrt() > NORM_TOL {
            return None;
        }
        let rest_state = Self::normalized(rest.len(), rest_amps).ok()?;
        Some((sub, rest_state))
    }

    /// Removes `targets`, which must be in the known state `phi` (product with the rest).
    pub(crate) fn discard(&self, targets: &[QubitId], phi: &[Complex64]) -> StateVector {
        let rest = contract_raw(&self.amps, self.num_qubits, targets, phi);
        let n = self.num_qubits - targets.len();
        let norm = norm_sqr(&rest);
        debug_assert!((norm - 1.0).abs() < 1e-6, "discarded qubits were not in the stated state");
        let s = 1.0 / norm.sqrt();
        Self::from_raw(n, rest.into_iter().map(|a| a * s).collect())
    }

    /// Reduced density matrix of `targets` (local index order follows `targets`).
    pub fn reduced_density_matrix(&self, targets: &[QubitId]) -> Result<CMatrix> {
        check_targets(self.num_qubits, targets)?;
        Ok(reduced_density_raw(&self.amps, self.num_qubits, targets))
    }

    /// Extracts the state of `targets` when they are unentangled from the rest.
    pub fn subsystem(&self, targets: &[QubitId]) -> Result<StateVector> {
        check_targets(self.num_qubits, targets)?;
        self.factor(targets)
            .map(|(s, _)| s)
            .ok_or_else(|| validation("subsystem is entangled with the rest of the register"))
    }
}

pub(crate) fn reduced_density_raw(amps: &[Complex64], num_qubits: usize, targets: &[QubitId]) -> CMatrix {
    let rest = complement(num_qubits, targets);
    let d = 1usize << targets.len();
    let off: Vec<usize> = (0..d).map(|j| scatter(j, targets)).collect();
    let mut rho = CMatrix::zeros(d, d);
    for r in 0..(1usize << rest.len()) {
        let base = scatter(r, &rest);
        for i in 0..d {
            let ai = amps[base | off[i]];
            if ai == ZERO {
                continue;
            }
            for j in 0..d {
                rho[(i, j)] += ai * amps[base | off[j]].conj();
            }
        }
    }
    rho
}

/// Samples an index with probability proportional to `weights`.
pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    let total: f64 = weights.iter().sum();
    if total < PROB_FLOOR {
        return Err(Error::Numerical("all outcome probabilities vanish".into()));
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = k;
        if u < acc {
            return Ok(k);
        }
    }
    Ok(last)
}

pub(crate) fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// `|⟨a|b⟩|²`, insensitive to global phase.
pub fn fidelity_up_to_phase(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

/// `⟨psi|rho|psi⟩` for a density matrix on the same space.
pub fn fidelity_with_density(psi: &StateVector, rho: &CMatrix) -> Result<f64> {
    if rho.nrows() != psi.dim() {
        return Err(domain("density matrix dimension mismatch"));
    }
    let v = psi.to_dvector();
    Ok((v.adjoint() * rho * &v)[(0, 0)].re)
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm() < 1e-12 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let label: String = (0..self.num_qubits)
                .map(|q| if (i >> q) & 1 == 0 { '↑' } else { '↓' })
                .collect();
            write!(f, "({:.4}{:+.4}i)|{label}⟩", a.re, a.im)?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::matrix::{c, cnot, hadamard, identity, kron, pauli_x, pauli_z};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn assert_amps(s: &StateVector, expected: &[Complex64]) {
        assert_eq!(s.dim(), expected.len());
        for (a, e) in s.amplitudes().iter().zip(expected) {
            assert!((a - e).norm() < 1e-12, "{s} vs {expected:?}");
        }
    }

    #[test]
    fn basis_states() {
        assert_amps(&StateVector::basis_state(1, 0).unwrap(), &[ONE, ZERO]);
        assert_amps(&StateVector::basis_state(1, 1).unwrap(), &[ZERO, ONE]);
        assert_eq!(StateVector::basis_state(2, 3).unwrap().amplitude(3), ONE);
        assert!(matches!(StateVector::basis_state(2, 4), Err(Error::Domain(_))));
        assert!(matches!(StateVector::basis_state(17, 0), Err(Error::Capacity(_))));
    }

    #[test]
    fn tensor_puts_left_factor_on_qubit_zero() {
        let s = StateVector::up().tensor(&StateVector::down()).unwrap();
        // qubit 0 = ↑ (bit 0 clear), qubit 1 = ↓ (bit 1 set)
        assert_eq!(s, StateVector::basis_state(2, 2).unwrap());
        let t = StateVector::up().tensor(&StateVector::singlet()).unwrap();
        // singlet on qubits (1, 2): +|↑↓⟩ at index 4, −|↓↑⟩ at index 2
        let mut e = vec![ZERO; 8];
        e[4] = c(H, 0.0);
        e[2] = c(-H, 0.0);
        assert_amps(&t, &e);
        let id = StateVector::basis_state(0, 0).unwrap();
        assert_eq!(t.tensor(&id).unwrap(), t);
    }

    #[test]
    fn unitary_examples() {
        let s = StateVector::up().apply_unitary(&pauli_x(), &[0]).unwrap();
        assert_eq!(s, StateVector::down());
        let bell_circuit = cnot() * kron(&identity(2), &hadamard());
        let s = StateVector::basis_state(2, 0).unwrap().apply_unitary(&bell_circuit, &[0, 1]).unwrap();
        assert_amps(&s, &[c(H, 0.0), ZERO, ZERO, c(H, 0.0)]);
        let r = StateVector::random(3, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(r.apply_unitary(&identity(4), &[2, 0]).unwrap(), r);
        assert!(matches!(r.apply_unitary(&(pauli_x() * c(0.5, 0.0)), &[0]), Err(Error::Validation(_))));
        assert!(matches!(r.apply_unitary(&identity(4), &[1, 1]), Err(Error::Domain(_))));
    }

    #[test]
    fn projective_measurement_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = crate::qcore::matrix::computational_projectors(1);
        let (k, post, p) = StateVector::up().measure_projective(&z, &[0], &mut rng).unwrap();
        assert_eq!((k, p), (0, 1.0));
        assert_eq!(post, StateVector::up());

        let singlet = StateVector::singlet();
        let zz = crate::qcore::matrix::computational_projectors(2);
        for _ in 0..20 {
            let (k, post, p) = singlet.measure_projective(&zz, &[0, 1], &mut rng).unwrap();
            assert!(k == 1 || k == 2);
            assert!((p - 0.5).abs() < 1e-12);
            assert!((post.norm_sqr() - 1.0).abs() < 1e-12);
        }
        let incomplete = vec![z[0].clone()];
        assert!(singlet.measure_projective(&incomplete, &[0], &mut rng).is_err());
    }

    #[test]
    fn bell_measure_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let (o, _) = StateVector::singlet().bell_measure((0, 1), &mut rng).unwrap();
            assert_eq!(o, BellOutcome::PsiMinus);
            let (o, post) = StateVector::basis_state(2, 0).unwrap().bell_measure((0, 1), &mut rng).unwrap();
            assert!(matches!(o, BellOutcome::PhiPlus | BellOutcome::PhiMinus));
            assert_eq!(post, StateVector::bell(o));
        }
        assert!(StateVector::singlet().bell_measure((1, 1), &mut rng).is_err());
    }

    #[test]
    fn singlet_preparation() {
        let s = StateVector::basis_state(2, 0).unwrap().prepare_singlet((0, 1)).unwrap();
        // the literal (0, 1/√2, −1/√2, 0) differs from ours by a global sign
        let literal = StateVector::from_amplitudes(2, vec![ZERO, c(H, 0.0), c(-H, 0.0), ZERO]).unwrap();
        assert!((fidelity_up_to_phase(&s, &literal).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(s.prepare_singlet((0, 1)).unwrap(), s);
        let three = StateVector::basis_state(3, 0).unwrap().prepare_singlet((1, 2)).unwrap();
        assert_eq!(three, StateVector::up().tensor(&StateVector::singlet()).unwrap());
        let ghz = StateVector::normalized(3, vec![ONE, ZERO, ZERO, ZERO, ZERO, ZERO, ZERO, ONE]).unwrap();
        assert!(matches!(ghz.prepare_singlet((0, 1)), Err(Error::Validation(_))));
        let forced = ghz.prepare_singlet_overwriting((0, 1), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let pair = forced.subsystem(&[0, 1]).unwrap();
        assert!((fidelity_up_to_phase(&pair, &StateVector::singlet()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn byproduct_examples() {
        use PauliByproduct::*;
        assert_eq!(StateVector::up().apply_byproduct(&[X], &[0]).unwrap(), StateVector::down());
        let zd = StateVector::down().apply_byproduct(&[Z], &[0]).unwrap();
        assert_eq!(zd, StateVector::down().scaled(-ONE));
        let xz = StateVector::up().apply_byproduct(&[XZ], &[0]).unwrap();
        assert!((fidelity_up_to_phase(&xz, &StateVector::down()).unwrap() - 1.0).abs() < 1e-12);
        assert!(StateVector::up().apply_byproduct(&[X, Z], &[0]).is_err());
        // in-place application agrees with the matrix form
        let r = StateVector::random(2, &mut ChaCha8Rng::seed_from_u64(5));
        let m = crate::qcore::pauli::pauli_string(&[XZ, Z]);
        let a = r.apply_byproduct(&[XZ, Z], &[0, 1]).unwrap();
        let b = r.apply_unitary(&m, &[0, 1]).unwrap();
        assert_amps(&a, b.amplitudes());
        let _ = pauli_z();
    }

    #[test]
    fn fidelity_examples() {
        let s = StateVector::random(2, &mut ChaCha8Rng::seed_from_u64(6));
        assert!((fidelity_up_to_phase(&s, &s).unwrap() - 1.0).abs() < 1e-12);
        let ph = s.scaled(Complex64::from_polar(1.0, 0.7));
        assert!((fidelity_up_to_phase(&s, &ph).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(fidelity_up_to_phase(&StateVector::up(), &StateVector::down()).unwrap(), 0.0);
        assert!(fidelity_up_to_phase(&StateVector::up(), &s).is_err());
    }

    #[test]
    fn factor_and_reduced_density() {
        let a = StateVector::random(1, &mut ChaCha8Rng::seed_from_u64(7));
        let b = StateVector::random(2, &mut ChaCha8Rng::seed_from_u64(8));
        let s = a.tensor(&b).unwrap();
        let (sub, rest) = s.factor(&[0]).unwrap();
        assert!((fidelity_up_to_phase(&sub, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!((fidelity_up_to_phase(&rest, &b).unwrap() - 1.0).abs() < 1e-12);
        let rho = StateVector::singlet().reduced_density_matrix(&[1]).unwrap();
        assert!((rho[(0, 0)].re - 0.5).abs() < 1e-12 && rho[(0, 1)].norm() < 1e-12);
        assert!(StateVector::singlet().subsystem(&[0]).is_err());
    }
}
