use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, validation, Result};
use crate::ledger::SiteId;
use crate::qcore::matrix::{self, CMatrix};
use crate::qcore::state::{apply_matrix_raw, check_targets};
use crate::qcore::{QubitId, StateVector, NORM_TOL, PROB_FLOOR};

/// Pre- and post-selected description `⟨Φ| |Ψ⟩`.
///
/// The backward-evolving `⟨Φ|` is stored as the ket `|Φ⟩` that the future
/// post-selection projects onto; conjugation happens where it is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStateVector {
    bra: StateVector,
    ket: StateVector,
    sites: Vec<SiteId>,
}

impl TwoStateVector {
    pub fn new(bra: StateVector, ket: StateVector, sites: Vec<SiteId>) -> Result<Self> {
        if bra.num_qubits() != ket.num_qubits() {
            return Err(domain("bra and ket act on different numbers of qubits"));
        }
        if sites.len() != ket.num_qubits() {
            return Err(domain("site partition must tag every qubit"));
        }
        Ok(Self { bra, ket, sites })
    }

    /// All qubits at a single site.
    pub fn local(bra: StateVector, ket: StateVector) -> Result<Self> {
        let n = ket.num_qubits();
        Self::new(bra, ket, vec![SiteId::ALICE; n])
    }

    pub fn bra(&self) -> &StateVector {
        &self.bra
    }

    pub fn ket(&self) -> &StateVector {
        &self.ket
    }

    pub fn sites(&self) -> &[SiteId] {
        &self.sites
    }

    pub fn num_qubits(&self) -> usize {
        self.ket.num_qubits()
    }
}

/// Unnormalized ABL weights `|⟨Φ|P_k|Ψ⟩|²`.
fn abl_weights(bra: &StateVector, ket: &StateVector, projectors: &[CMatrix], targets: &[QubitId]) -> Vec<f64> {
    projectors
        .iter()
        .map(|p| {
            let mut amps = ket.amplitudes().to_vec();
            apply_matrix_raw(&mut amps, ket.num_qubits(), p, targets);
            let amp: Complex64 = bra.amplitudes().iter().zip(&amps).map(|(b, a)| b.conj() * a).sum();
            amp.norm_sqr()
        })
        .collect()
}

fn normalize_weights(w: Vec<f64>) -> Result<Vec<f64>> {
    let total: f64 = w.iter().sum();
    if total < PROB_FLOOR {
        return Err(domain("pre- and post-selection are incompatible with every outcome of this measurement"));
    }
    Ok(w.into_iter().map(|x| x / total).collect())
}

fn check_measurement(num_qubits: usize, projectors: &[CMatrix], targets: &[QubitId]) -> Result<()> {
    check_targets(num_qubits, targets)?;
    matrix::check_projectors(projectors, 1 << targets.len(), NORM_TOL)
}

/// Outcome distribution of an intermediate projective measurement on
/// `targets`, `P(k) = |⟨Φ|P_k|Ψ⟩|² / Σ_j |⟨Φ|P_j|Ψ⟩|²`.
pub fn abl_probability(tsv: &TwoStateVector, projectors: &[CMatrix], targets: &[QubitId]) -> Result<Vec<f64>> {
    check_measurement(tsv.num_qubits(), projectors, targets)?;
    normalize_weights(abl_weights(&tsv.bra, &tsv.ket, projectors, targets))
}

/// One product term of a generalized two-state vector: a coefficient times
/// per-site bras and kets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtsvTerm {
    pub coefficient: Complex64,
    pub bras: Vec<StateVector>,
    pub kets: Vec<StateVector>,
}

/// `Σ_t c_t Π_n ⟨B_{t,n}| |K_{t,n}⟩`: a superposition of per-site bra/ket
/// products that need not factor into a single `⟨Φ| |Ψ⟩`.
///
/// Site `n` owns a contiguous block of qubits, site 0 lowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedTwoStateVector {
    site_qubits: Vec<usize>,
    terms: Vec<GtsvTerm>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reduction {
    Reducible(TwoStateVector),
    NotReducible { singular_values: Vec<f64> },
}

impl GeneralizedTwoStateVector {
    pub fn new(terms: Vec<GtsvTerm>) -> Result<Self> {
        let first = terms.first().ok_or_else(|| validation("generalized two-state vector needs a term"))?;
        if first.bras.len() != first.kets.len() || first.kets.is_empty() {
            return Err(validation("each term needs one bra and one ket per site"));
        }
        let site_qubits: Vec<usize> = first.kets.iter().map(|k| k.num_qubits()).collect();
        for t in &terms {
            let ok = t.bras.len() == site_qubits.len()
                && t.kets.len() == site_qubits.len()
                && t.bras.iter().zip(&t.kets).zip(&site_qubits).all(|((b, k), &n)| b.num_qubits() == n && k.num_qubits() == n);
            if !ok {
                return Err(validation("terms disagree on per-site qubit counts"));
            }
            if !t.coefficient.re.is_finite() || !t.coefficient.im.is_finite() {
                return Err(validation("non-finite coefficient"));
            }
        }
        let g = Self { site_qubits, terms };
        let norm = g.coefficient_matrix()?.norm();
        if !(norm > PROB_FLOOR && norm.is_finite()) {
            return Err(validation("generalized two-state vector vanishes"));
        }
        Ok(g)
    }

    /// Embeds a plain two-state vector whose qubits all sit at one site.
    pub fn from_two_state_vector(tsv: &TwoStateVector) -> Self {
        Self {
            site_qubits: vec![tsv.num_qubits()],
            terms: vec![GtsvTerm {
                coefficient: Complex64::new(1.0, 0.0),
                bras: vec![tsv.bra.clone()],
                kets: vec![tsv.ket.clone()],
            }],
        }
    }

    pub fn terms(&self) -> &[GtsvTerm] {
        &self.terms
    }

    pub fn site_qubits(&self) -> &[usize] {
        &self.site_qubits
    }

    pub fn num_sites(&self) -> usize {
        self.site_qubits.len()
    }

    pub fn num_qubits(&self) -> usize {
        self.site_qubits.iter().sum()
    }

    /// Per-qubit site tags.
    pub fn sites(&self) -> Vec<SiteId> {
        self.site_qubits
            .iter()
            .enumerate()
            .flat_map(|(s, &n)| std::iter::repeat_n(SiteId(s as u32), n))
            .collect()
    }

    fn product(factors: &[StateVector]) -> Result<StateVector> {
        factors.iter().skip(1).try_fold(factors[0].clone(), |acc, f| acc.tensor(f))
    }

    pub fn term_bra(&self, t: usize) -> Result<StateVector> {
        Self::product(&self.terms[t].bras)
    }

    pub fn term_ket(&self, t: usize) -> Result<StateVector> {
        Self::product(&self.terms[t].kets)
    }

    /// `T[i][j] = Σ_t c_t conj(B_t[i]) K_t[j]`, rows indexed by the bra
    /// multi-index and columns by the ket multi-index.
    pub fn coefficient_matrix(&self) -> Result<CMatrix> {
        let d = 1usize << self.num_qubits();
        let mut m = CMatrix::zeros(d, d);
        for (t, term) in self.terms.iter().enumerate() {
            let b = self.term_bra(t)?;
            let k = self.term_ket(t)?;
            for i in 0..d {
                let bi = b.amplitude(i).conj() * term.coefficient;
                if bi.norm() == 0.0 {
                    continue;
                }
                for j in 0..d {
                    m[(i, j)] += bi * k.amplitude(j);
                }
            }
        }
        Ok(m)
    }

    /// Generalized ABL rule `P(k) ∝ |Σ_t c_t ⟨B_t|P_k|K_t⟩|²`.
    pub fn abl_probability(&self, projectors: &[CMatrix], targets: &[QubitId]) -> Result<Vec<f64>> {
        let n = self.num_qubits();
        check_measurement(n, projectors, targets)?;
        let pairs: Vec<(Complex64, StateVector, StateVector)> = (0..self.terms.len())
            .map(|t| Ok((self.terms[t].coefficient, self.term_bra(t)?, self.term_ket(t)?)))
            .collect::<Result<_>>()?;
        let weights = projectors
            .iter()
            .map(|p| {
                let amp: Complex64 = pairs
                    .iter()
                    .map(|(c, b, k)| {
                        let mut amps = k.amplitudes().to_vec();
                        apply_matrix_raw(&mut amps, n, p, targets);
                        c * b.amplitudes().iter().zip(&amps).map(|(x, y)| x.conj() * y).sum::<Complex64>()
                    })
                    .sum();
                amp.norm_sqr()
            })
            .collect();
        normalize_weights(weights)
    }

    /// Factors into a single `⟨Φ| |Ψ⟩` when the coefficient matrix has
    /// numerical rank one (second singular value below `1e-9` of the first).
    pub fn reduce(&self) -> Result<Reduction> {
        let t = self.coefficient_matrix()?;
        let n = self.num_qubits();
        let svd = t.svd(true, true);
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
        let top = sv[0];
        if sv.len() > 1 && sv[1] >= NORM_TOL * top {
            return Ok(Reduction::NotReducible { singular_values: sv });
        }
        let u = svd.u.as_ref().expect("requested U");
        let v_t = svd.v_t.as_ref().expect("requested V^T");
        let k = order[0];
        // T ≈ σ u v† and T[i][j] = s conj(Φ_i) Ψ_j
        let bra = StateVector::normalized(n, u.column(k).iter().map(|z| z.conj()).collect())?;
        let ket = StateVector::normalized(n, v_t.row(k).iter().copied().collect())?;
        Ok(Reduction::Reducible(TwoStateVector::new(bra, ket, self.sites())?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::fidelity_up_to_phase;
    use crate::qcore::matrix::{c, computational_projectors, hadamard, outer};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn x_projectors() -> Vec<CMatrix> {
        let h = hadamard();
        computational_projectors(1).into_iter().map(|p| &h * p * &h).collect()
    }

    fn plus() -> StateVector {
        StateVector::qubit(c(1.0, 0.0), c(1.0, 0.0)).unwrap()
    }

    #[test]
    fn abl_examples() {
        let z = computational_projectors(1);
        let t = TwoStateVector::local(StateVector::up(), StateVector::up()).unwrap();
        assert_eq!(abl_probability(&t, &z, &[0]).unwrap(), vec![1.0, 0.0]);

        let t = TwoStateVector::local(StateVector::up(), plus()).unwrap();
        let p = abl_probability(&t, &z, &[0]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 1e-12);

        let t = TwoStateVector::local(StateVector::up(), StateVector::down()).unwrap();
        let p = abl_probability(&t, &x_projectors(), &[0]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);

        // orthogonal pre/post with a measurement that commutes with both
        assert!(matches!(abl_probability(&t, &z, &[0]), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn abl_with_equal_bra_and_ket_squares_born_weights() {
        // P(k) ∝ |⟨ψ|P_k|ψ⟩|² = born_k², which is not the Born rule itself
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let s = StateVector::random(2, &mut rng);
            let t = TwoStateVector::local(s.clone(), s.clone()).unwrap();
            let p = abl_probability(&t, &computational_projectors(2), &[0, 1]).unwrap();
            let sq: Vec<f64> = s.amplitudes().iter().map(|a| a.norm_sqr().powi(2)).collect();
            let total: f64 = sq.iter().sum();
            for (pk, w) in p.iter().zip(&sq) {
                assert!((pk - w / total).abs() < 1e-9);
            }
            let proj = outer(s.amplitudes());
            let rest = crate::qcore::matrix::identity(4) - &proj;
            let p = abl_probability(&t, &[proj, rest], &[0, 1]).unwrap();
            assert!((p[0] - 1.0).abs() < 1e-9);
        }
    }

    fn term(coef: f64, bras: &[StateVector], kets: &[StateVector]) -> GtsvTerm {
        GtsvTerm { coefficient: c(coef, 0.0), bras: bras.to_vec(), kets: kets.to_vec() }
    }

    #[test]
    fn reduce_examples() {
        let (u, d) = (StateVector::up(), StateVector::down());
        let single = GeneralizedTwoStateVector::new(vec![term(1.0, &[u.clone(), d.clone()], &[plus(), u.clone()])]).unwrap();
        match single.reduce().unwrap() {
            Reduction::Reducible(t) => {
                let expect_bra = u.tensor(&d).unwrap();
                let expect_ket = plus().tensor(&u).unwrap();
                assert!((fidelity_up_to_phase(t.bra(), &expect_bra).unwrap() - 1.0).abs() < 1e-9);
                assert!((fidelity_up_to_phase(t.ket(), &expect_ket).unwrap() - 1.0).abs() < 1e-9);
            }
            r => panic!("{r:?}"),
        }

        let g = GeneralizedTwoStateVector::new(vec![
            term(1.0, &[u.clone(), u.clone()], &[u.clone(), u.clone()]),
            term(1.0, &[u.clone(), u.clone()], &[d.clone(), d.clone()]),
        ])
        .unwrap();
        match g.reduce().unwrap() {
            Reduction::Reducible(t) => {
                let ghz = StateVector::normalized(2, vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
                assert!((fidelity_up_to_phase(t.ket(), &ghz).unwrap() - 1.0).abs() < 1e-9);
                assert!((fidelity_up_to_phase(t.bra(), &u.tensor(&u).unwrap()).unwrap() - 1.0).abs() < 1e-9);
            }
            r => panic!("{r:?}"),
        }

        let g = GeneralizedTwoStateVector::new(vec![
            term(1.0, &[u.clone(), u.clone()], &[u.clone(), u.clone()]),
            term(1.0, &[d.clone(), d.clone()], &[d.clone(), d.clone()]),
        ])
        .unwrap();
        match g.reduce().unwrap() {
            Reduction::NotReducible { singular_values } => {
                assert!((singular_values[0] - singular_values[1]).abs() < 1e-12)
            }
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn reduction_round_trip_on_random_two_state_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..25 {
            let t = TwoStateVector::local(StateVector::random(2, &mut rng), StateVector::random(2, &mut rng)).unwrap();
            let g = GeneralizedTwoStateVector::from_two_state_vector(&t);
            let Reduction::Reducible(r) = g.reduce().unwrap() else { panic!("rank one") };
            assert!(fidelity_up_to_phase(r.bra(), t.bra()).unwrap() >= 1.0 - 1e-9);
            assert!(fidelity_up_to_phase(r.ket(), t.ket()).unwrap() >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn generalized_abl_matches_plain_abl_for_single_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let t = TwoStateVector::local(StateVector::random(1, &mut rng), StateVector::random(1, &mut rng)).unwrap();
        let g = GeneralizedTwoStateVector::from_two_state_vector(&t);
        let a = abl_probability(&t, &x_projectors(), &[0]).unwrap();
        let b = g.abl_probability(&x_projectors(), &[0]).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-12);
    }

    #[test]
    fn invalid_generalized_vectors() {
        assert!(GeneralizedTwoStateVector::new(vec![]).is_err());
        let bad = vec![
            term(1.0, &[StateVector::up()], &[StateVector::up()]),
            term(1.0, &[StateVector::singlet()], &[StateVector::singlet()]),
        ];
        assert!(GeneralizedTwoStateVector::new(bad).is_err());
        let zero = vec![term(0.0, &[StateVector::up()], &[StateVector::up()])];
        assert!(GeneralizedTwoStateVector::new(zero).is_err());
    }
}
