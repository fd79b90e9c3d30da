use serde::{Deserialize, Serialize};

use crate::error::{domain, validation, Result};
use crate::ledger::SiteId;
use crate::qcore::matrix::{self, c, CMatrix};
use crate::qcore::{BellOutcome, PauliByproduct, QubitId, StateVector, NORM_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DirectionTag {
    Forward,
    Backward,
}

/// A nondegenerate-basis observable on a register split across sites.
///
/// On `Backward` qubits the eigenstate coefficients are the literal bra
/// coefficients: `|↑⟩_A ⟨↓|_B` is stored as the vector with a single 1 at
/// A = ↑, B = ↓.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlocalObservable {
    eigenstates: Vec<StateVector>,
    eigenvalues: Vec<f64>,
    sites: Vec<SiteId>,
    directions: Vec<DirectionTag>,
}

impl NonlocalObservable {
    pub fn new(
        eigenstates: Vec<StateVector>,
        eigenvalues: Vec<f64>,
        sites: Vec<SiteId>,
        directions: Vec<DirectionTag>,
    ) -> Result<Self> {
        let o = Self { eigenstates, eigenvalues, sites, directions };
        o.validate()?;
        Ok(o)
    }

    /// Every qubit evolving forward in time.
    pub fn forward(eigenstates: Vec<StateVector>, eigenvalues: Vec<f64>, sites: Vec<SiteId>) -> Result<Self> {
        let n = sites.len();
        Self::new(eigenstates, eigenvalues, sites, vec![DirectionTag::Forward; n])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sites.len();
        if self.directions.len() != n {
            return Err(domain("one direction tag per qubit"));
        }
        for i in 0..n {
            if (0..i).any(|j| self.sites[j] == self.sites[i] && self.directions[j] != self.directions[i]) {
                return Err(validation(format!("site {} carries both time directions", self.sites[i].0)));
            }
        }
        if self.eigenstates.len() != 1 << n {
            return Err(validation("eigenstates must span the register"));
        }
        if self.eigenvalues.len() != self.eigenstates.len() {
            return Err(validation("one eigenvalue per eigenstate"));
        }
        if self.eigenstates.iter().any(|e| e.num_qubits() != n) {
            return Err(validation("eigenstate size does not match the site partition"));
        }
        for i in 0..self.eigenstates.len() {
            for j in 0..i {
                if self.eigenstates[i].inner(&self.eigenstates[j])?.norm() > NORM_TOL {
                    return Err(validation(format!("eigenstates {j} and {i} are not orthogonal")));
                }
            }
        }
        Ok(())
    }

    /// Eigenstates `|↑↑⟩, |↓↓⟩, singlet, (|↑↓⟩+|↓↑⟩)/√2` with A on qubit 0 and B on qubit 1.
    pub fn crossed_forward() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let states = vec![
            StateVector::basis_state(2, 0b00).expect("valid"),
            StateVector::basis_state(2, 0b11).expect("valid"),
            two_qubit([0.0, -s, s, 0.0]),
            two_qubit([0.0, s, s, 0.0]),
        ];
        Self::forward(states, vec![2.0, -2.0, 0.0, 0.0], vec![SiteId::ALICE, SiteId::BOB]).expect("orthonormal")
    }

    /// Eigenstates of the crossed-measurement variable, forward at A and
    /// backward at B, ordered by `(O1, O2)` = (2, ·), (−2, ·), (0, 0), (0, 2).
    pub fn crossed_mixed() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let states = vec![
            // |↑⟩_A ⟨↓|_B
            StateVector::basis_state(2, 0b10).expect("valid"),
            // |↓⟩_A ⟨↑|_B
            StateVector::basis_state(2, 0b01).expect("valid"),
            two_qubit([s, 0.0, 0.0, s]),
            two_qubit([s, 0.0, 0.0, -s]),
        ];
        Self::new(
            states,
            vec![2.0, -2.0, 0.0, 0.0],
            vec![SiteId::ALICE, SiteId::BOB],
            vec![DirectionTag::Forward, DirectionTag::Backward],
        )
        .expect("orthonormal")
    }

    /// Bell basis prepared by `CNOT·(H ⊗ I)` from `|k⟩`, so that the
    /// eigenbasis unitary is exactly the inverse of that circuit.
    pub fn bell_operator() -> Self {
        let prep = bell_preparation_circuit();
        let states = (0..4)
            .map(|k| StateVector::from_amplitudes(2, prep.column(k).iter().copied().collect()).expect("unitary column"))
            .collect();
        Self::forward(states, vec![0.0, 1.0, 2.0, 3.0], vec![SiteId::ALICE, SiteId::BOB]).expect("orthonormal")
    }

    /// The computational basis, eigenvalue `k` for `|k⟩`.
    pub fn computational(sites: Vec<SiteId>) -> Result<Self> {
        let n = sites.len();
        let states = (0..1usize << n).map(|k| StateVector::basis_state(n, k)).collect::<Result<_>>()?;
        Self::forward(states, (0..1usize << n).map(|k| k as f64).collect(), sites)
    }

    pub fn num_qubits(&self) -> usize {
        self.sites.len()
    }

    pub fn eigenstates(&self) -> &[StateVector] {
        &self.eigenstates
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn sites(&self) -> &[SiteId] {
        &self.sites
    }

    pub fn directions(&self) -> &[DirectionTag] {
        &self.directions
    }

    pub fn is_forward(&self) -> bool {
        self.directions.iter().all(|d| *d == DirectionTag::Forward)
    }

    pub fn qubits_at(&self, site: SiteId) -> Vec<QubitId> {
        (0..self.num_qubits()).filter(|&q| self.sites[q] == site).collect()
    }

    pub fn backward_qubits(&self) -> Vec<QubitId> {
        (0..self.num_qubits()).filter(|&q| self.directions[q] == DirectionTag::Backward).collect()
    }

    /// Reverses every backward qubit with `α⟨↑| + β⟨↓| → −β|↑⟩ + α|↓⟩`
    /// (literal bra coefficients), which is `XZ` acting on the stored vector.
    pub fn forward_image(&self) -> Self {
        let back = self.backward_qubits();
        let fix = vec![PauliByproduct::XZ; back.len()];
        let states = self
            .eigenstates
            .iter()
            .map(|e| e.apply_byproduct(&fix, &back).expect("valid targets"))
            .collect();
        Self {
            eigenstates: states,
            eigenvalues: self.eigenvalues.clone(),
            sites: self.sites.clone(),
            directions: vec![DirectionTag::Forward; self.num_qubits()],
        }
    }

    /// `U` with `U e_k = |k⟩`.
    pub fn eigenbasis_unitary(&self) -> CMatrix {
        let d = self.eigenstates.len();
        CMatrix::from_fn(d, d, |k, j| self.eigenstates[k].amplitude(j).conj())
    }

    pub fn projectors(&self) -> Vec<CMatrix> {
        self.eigenstates.iter().map(|e| matrix::outer(e.amplitudes())).collect()
    }

    /// Born distribution `|⟨e_k|ψ⟩|²` of a forward state over the eigenbasis.
    pub fn born_distribution(&self, psi: &StateVector) -> Result<Vec<f64>> {
        self.eigenstates.iter().map(|e| Ok(e.inner(psi)?.norm_sqr())).collect()
    }

    /// Index of the eigenstate `psi` equals up to phase, if any.
    pub fn eigen_index_of(&self, psi: &StateVector) -> Option<usize> {
        self.eigenstates
            .iter()
            .position(|e| e.inner(psi).map(|z| z.norm_sqr() > 1.0 - NORM_TOL).unwrap_or(false))
    }
}

/// Free-function form of [`NonlocalObservable::eigenbasis_unitary`] that
/// also checks unitarity of the result.
pub fn eigenbasis_unitary(observable: &NonlocalObservable) -> Result<CMatrix> {
    observable.validate()?;
    let u = observable.eigenbasis_unitary();
    matrix::check_unitary(&u, NORM_TOL)?;
    Ok(u)
}

/// `CNOT·(H ⊗ I)` with qubit 0 as control.
pub fn bell_preparation_circuit() -> CMatrix {
    matrix::cnot() * matrix::kron_qubits(&[matrix::hadamard(), matrix::identity(2)])
}

fn two_qubit(a: [f64; 4]) -> StateVector {
    StateVector::from_amplitudes(2, a.iter().map(|&x| c(x, 0.0)).collect()).expect("normalized")
}

/// The Bell state for `o` as an eigenstate-style vector.
pub fn bell_state(o: BellOutcome) -> StateVector {
    StateVector::from_amplitudes(2, o.amplitudes().to_vec()).expect("normalized")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::fidelity_up_to_phase;
    use proptest::prelude::*;

    #[test]
    fn eigenbasis_unitary_maps_eigenstates_to_labels() {
        for o in [
            NonlocalObservable::crossed_forward(),
            NonlocalObservable::bell_operator(),
            NonlocalObservable::computational(vec![SiteId::ALICE, SiteId::BOB]).unwrap(),
        ] {
            let u = eigenbasis_unitary(&o).unwrap();
            for (k, e) in o.eigenstates().iter().enumerate() {
                let img = e.apply_unitary(&u, &[0, 1]).unwrap();
                assert!((img.amplitude(k) - c(1.0, 0.0)).norm() < 1e-12);
            }
        }
        let comp = NonlocalObservable::computational(vec![SiteId::ALICE, SiteId::BOB]).unwrap();
        assert!(matrix::max_abs_diff(&comp.eigenbasis_unitary(), &matrix::identity(4)) < 1e-15);
        let bell = NonlocalObservable::bell_operator();
        let prod = bell.eigenbasis_unitary() * bell_preparation_circuit();
        assert!(matrix::max_abs_diff(&prod, &matrix::identity(4)) < 1e-12);
    }

    #[test]
    fn crossed_mixed_image_is_crossed_forward() {
        let img = NonlocalObservable::crossed_mixed().forward_image();
        let fwd = NonlocalObservable::crossed_forward();
        for (a, b) in img.eigenstates().iter().zip(fwd.eigenstates()) {
            assert!(fidelity_up_to_phase(a, b).unwrap() > 1.0 - 1e-12);
        }
        assert!(img.is_forward());
    }

    #[test]
    fn rejects_bad_observables() {
        let up = StateVector::up();
        let r = NonlocalObservable::forward(vec![up.clone(), up.clone()], vec![0.0, 1.0], vec![SiteId::ALICE]);
        assert!(r.is_err());
        let r = NonlocalObservable::forward(vec![up.clone()], vec![0.0], vec![SiteId::ALICE]);
        assert!(r.is_err());
        let r = NonlocalObservable::new(
            NonlocalObservable::crossed_forward().eigenstates().to_vec(),
            vec![0.0; 4],
            vec![SiteId::ALICE, SiteId::ALICE],
            vec![DirectionTag::Forward, DirectionTag::Backward],
        );
        assert!(r.is_err());
    }

    proptest! {
        #[test]
        fn random_bases_give_unitaries(seed in any::<u64>()) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            // orthonormalize a random unitary's columns via QR
            let m = CMatrix::from_fn(4, 4, |_, _| {
                let s = StateVector::random(1, &mut rng);
                s.amplitude(0)
            });
            let q = m.qr().q();
            let states: Vec<StateVector> = (0..4)
                .map(|k| StateVector::normalized(2, q.column(k).iter().copied().collect()).unwrap())
                .collect();
            let o = NonlocalObservable::forward(states, vec![0.0; 4], vec![SiteId::ALICE, SiteId::BOB]).unwrap();
            let u = eigenbasis_unitary(&o).unwrap();
            prop_assert!(matrix::is_unitary(&u, 1e-9));
            let p = o.born_distribution(&o.eigenstates()[2]).unwrap();
            prop_assert!((p[2] - 1.0).abs() < 1e-9);
        }
    }
}
