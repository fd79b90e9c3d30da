//! Dense state-vector engine for small qubit registers.
//!
//! Qubit `q` is bit `q` of the amplitude index. Bell outcomes map to Pauli
//! corrections PhiPlus→I, PsiPlus→X, PhiMinus→Z, PsiMinus→XZ (Z applied first).

pub mod matrix;
pub mod pauli;
pub mod state;

pub use matrix::CMatrix;
pub use pauli::{pauli_string, BellOutcome, PauliByproduct};
pub use state::{fidelity_up_to_phase, fidelity_with_density, StateVector};

/// Index of a qubit within a register.
pub type QubitId = usize;

/// Tolerance for exact-math checks (norms, unitarity, orthogonality).
pub const NORM_TOL: f64 = 1e-9;
/// Probabilities below this are treated as zero.
pub const PROB_FLOOR: f64 = 1e-12;
/// Largest register the dense engine accepts.
pub const MAX_QUBITS: usize = 16;
