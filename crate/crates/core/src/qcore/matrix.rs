use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{validation, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO])
}

pub fn hadamard() -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)])
}

/// Phase gate diag(1, i).
pub fn phase_s() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, c(0.0, 1.0)])
}

/// CNOT with control on target slot 0 and target on slot 1 (little-endian local index).
pub fn cnot() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    // local index = control + 2 * target
    m[(0, 0)] = ONE;
    m[(2, 2)] = ONE;
    m[(3, 1)] = ONE;
    m[(1, 3)] = ONE;
    m
}

pub fn swap() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(1, 2)] = ONE;
    m[(2, 1)] = ONE;
    m[(3, 3)] = ONE;
    m
}

/// Kronecker product `a ⊗ b` where `b` occupies the low (least significant) qubits.
///
/// To build an operator for targets `[q0, q1, ..]` from per-qubit factors,
/// call `kron(&f1, &f0)`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Tensor product of per-qubit operators; `factors[0]` acts on local qubit 0.
pub fn kron_qubits(factors: &[CMatrix]) -> CMatrix {
    factors
        .iter()
        .fold(identity(1), |acc, f| kron(f, &acc))
}

/// Rank-1 projector |v⟩⟨v| from an amplitude slice.
pub fn outer(v: &[Complex64]) -> CMatrix {
    let n = v.len();
    CMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj())
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn is_unitary(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && max_abs_diff(&(m.adjoint() * m), &identity(m.nrows())) < tol
}

pub fn check_unitary(m: &CMatrix, tol: f64) -> Result<()> {
    if !m.is_square() {
        return Err(validation(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
    }
    if !is_unitary(m, tol) {
        return Err(validation("matrix is not unitary"));
    }
    Ok(())
}

/// Checks that `projectors` are Hermitian idempotents, mutually orthogonal and complete.
pub fn check_projectors(projectors: &[CMatrix], dim: usize, tol: f64) -> Result<()> {
    if projectors.is_empty() {
        return Err(validation("empty projector set"));
    }
    let mut sum = CMatrix::zeros(dim, dim);
    for (k, p) in projectors.iter().enumerate() {
        if p.nrows() != dim || p.ncols() != dim {
            return Err(validation(format!("projector {k} has wrong dimension")));
        }
        if max_abs_diff(p, &p.adjoint()) > tol {
            return Err(validation(format!("projector {k} is not Hermitian")));
        }
        if max_abs_diff(&(p * p), p) > tol {
            return Err(validation(format!("projector {k} is not idempotent")));
        }
        sum += p;
    }
    for i in 0..projectors.len() {
        for j in (i + 1)..projectors.len() {
            let prod = &projectors[i] * &projectors[j];
            if prod.iter().any(|z| z.norm() > tol) {
                return Err(validation(format!("projectors {i} and {j} are not orthogonal")));
            }
        }
    }
    if max_abs_diff(&sum, &identity(dim)) > tol {
        return Err(validation("projectors do not sum to the identity"));
    }
    Ok(())
}

/// Computational-basis projectors on `num_qubits` qubits, in index order.
pub fn computational_projectors(num_qubits: usize) -> Vec<CMatrix> {
    let dim = 1 << num_qubits;
    (0..dim)
        .map(|k| {
            let mut p = CMatrix::zeros(dim, dim);
            p[(k, k)] = ONE;
            p
        })
        .collect()
}

/// Serde adapter storing a complex matrix as rows of `[re, im]` pairs.
pub mod serde_matrix {
    use super::CMatrix;
    use num_complex::Complex64;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(D::Error::custom("matrix must be square"));
        }
        Ok(CMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
    }

    pub mod vec {
        use super::super::CMatrix;
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        #[derive(Serialize, Deserialize)]
        struct Wrapped(#[serde(with = "super")] CMatrix);

        pub fn serialize<S: Serializer>(ms: &[CMatrix], s: S) -> Result<S::Ok, S::Error> {
            let w: Vec<Wrapped> = ms.iter().cloned().map(Wrapped).collect();
            w.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMatrix>, D::Error> {
            let w: Vec<Wrapped> = Vec::deserialize(d)?;
            Ok(w.into_iter().map(|w| w.0).collect())
        }
    }
}
