use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::matrix::{self, CMatrix};

/// Single-qubit Pauli byproduct, up to global phase.
///
/// `XZ` means Z is applied first, then X. Modulo phase the four elements form
/// the Klein four-group, so composition is XOR on the (x, z) bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PauliByproduct {
    I,
    X,
    Z,
    XZ,
}

impl PauliByproduct {
    pub const ALL: [PauliByproduct; 4] = [Self::I, Self::X, Self::Z, Self::XZ];

    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Self::I,
            (true, false) => Self::X,
            (false, true) => Self::Z,
            (true, true) => Self::XZ,
        }
    }

    pub fn x_bit(self) -> bool {
        matches!(self, Self::X | Self::XZ)
    }

    pub fn z_bit(self) -> bool {
        matches!(self, Self::Z | Self::XZ)
    }

    pub fn is_identity(self) -> bool {
        self == Self::I
    }

    /// `self` followed by `other`, modulo global phase.
    pub fn then(self, other: Self) -> Self {
        Self::from_bits(self.x_bit() ^ other.x_bit(), self.z_bit() ^ other.z_bit())
    }

    /// Every element is its own inverse modulo phase.
    pub fn inverse(self) -> Self {
        self
    }

    pub fn matrix(self) -> CMatrix {
        match self {
            Self::I => matrix::identity(2),
            Self::X => matrix::pauli_x(),
            Self::Z => matrix::pauli_z(),
            Self::XZ => matrix::pauli_x() * matrix::pauli_z(),
        }
    }

    /// Applies the byproduct in place to a single-qubit amplitude pair.
    pub(crate) fn apply_pair(self, a0: &mut Complex64, a1: &mut Complex64) {
        if self.z_bit() {
            *a1 = -*a1;
        }
        if self.x_bit() {
            std::mem::swap(a0, a1);
        }
    }
}

impl fmt::Display for PauliByproduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::I => "I",
            Self::X => "X",
            Self::Z => "Z",
            Self::XZ => "XZ",
        };
        f.write_str(s)
    }
}

/// Tensor product of per-qubit byproducts; `ps[0]` acts on local qubit 0.
pub fn pauli_string(ps: &[PauliByproduct]) -> CMatrix {
    let factors: Vec<CMatrix> = ps.iter().map(|p| p.matrix()).collect();
    matrix::kron_qubits(&factors)
}

/// Outcome of a Bell measurement on an ordered pair `(a, b)`.
///
/// The index order (0..4) matches the byproduct bits `x + 2z` of the
/// correction map for a PhiPlus channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellOutcome {
    PhiPlus,
    PsiPlus,
    PhiMinus,
    PsiMinus,
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] = [Self::PhiPlus, Self::PsiPlus, Self::PhiMinus, Self::PsiMinus];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Byproduct left on the remote half of a PhiPlus channel; also the
    /// correction that undoes it.
    pub fn correction(self) -> PauliByproduct {
        match self {
            Self::PhiPlus => PauliByproduct::I,
            Self::PsiPlus => PauliByproduct::X,
            Self::PhiMinus => PauliByproduct::Z,
            Self::PsiMinus => PauliByproduct::XZ,
        }
    }

    pub fn from_correction(p: PauliByproduct) -> Self {
        match p {
            PauliByproduct::I => Self::PhiPlus,
            PauliByproduct::X => Self::PsiPlus,
            PauliByproduct::Z => Self::PhiMinus,
            PauliByproduct::XZ => Self::PsiMinus,
        }
    }

    /// Two-qubit amplitudes of the Bell state, little-endian over `(a, b)`.
    ///
    /// Each state equals `(I ⊗ correction) |PhiPlus⟩` exactly, with the
    /// correction acting on `b`.
    pub fn amplitudes(self) -> [Complex64; 4] {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = Complex64::new(0.0, 0.0);
        // index = bit(a) + 2 * bit(b)
        match self {
            Self::PhiPlus => [h, z, z, h],
            Self::PhiMinus => [h, z, z, -h],
            Self::PsiPlus => [z, h, h, z],
            Self::PsiMinus => [z, -h, h, z],
        }
    }
}

impl fmt::Display for BellOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::PhiPlus => "Phi+",
            Self::PsiPlus => "Psi+",
            Self::PhiMinus => "Phi-",
            Self::PsiMinus => "Psi-",
        };
        f.write_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::matrix::{identity, max_abs_diff};

    fn phase_equal(a: &CMatrix, b: &CMatrix) -> bool {
        // a = e^{iθ} b for unitary Paulis iff |tr(a† b)| = dim
        let t = (a.adjoint() * b).trace().norm();
        (t - a.nrows() as f64).abs() < 1e-12
    }

    #[test]
    fn composition_is_a_group_up_to_phase() {
        for a in PauliByproduct::ALL {
            assert_eq!(a.then(PauliByproduct::I), a);
            assert_eq!(a.then(a.inverse()), PauliByproduct::I);
            for b in PauliByproduct::ALL {
                // composing then applying equals applying sequentially
                assert!(phase_equal(&(b.matrix() * a.matrix()), &a.then(b).matrix()));
                for c in PauliByproduct::ALL {
                    assert_eq!(a.then(b).then(c), a.then(b.then(c)));
                }
            }
        }
    }

    #[test]
    fn xz_applies_z_first() {
        let xz = PauliByproduct::XZ.matrix();
        assert!(max_abs_diff(&xz, &(crate::qcore::matrix::pauli_x() * crate::qcore::matrix::pauli_z())) < 1e-15);
        assert!(max_abs_diff(&(xz.adjoint() * &xz), &identity(2)) < 1e-15);
    }

    #[test]
    fn bell_states_are_corrections_of_phi_plus() {
        let phi = BellOutcome::PhiPlus.amplitudes();
        for o in BellOutcome::ALL {
            let m = pauli_string(&[PauliByproduct::I, o.correction()]);
            let v = nalgebra::DVector::from_column_slice(&phi);
            let w = m * v;
            let expected = o.amplitudes();
            for i in 0..4 {
                assert!((w[i] - expected[i]).norm() < 1e-15, "{o}");
            }
            assert_eq!(BellOutcome::from_correction(o.correction()), o);
            assert_eq!(BellOutcome::from_index(o.index()), Some(o));
        }
    }
}
