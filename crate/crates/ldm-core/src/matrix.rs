//! Dense complex matrices and the quantum-state layer built on them.
//!
//! Everything in the interpreter ultimately bottoms out in three types:
//!
//! * [`ComplexMatrix`] — a dense row-major matrix over `Complex64` with the
//!   handful of operations the calculi need (product, adjoint, trace,
//!   Kronecker product, Hermitian eigenvalues).
//! * [`DensityMatrix`] — a `2^n × 2^n` matrix validated to be Hermitian,
//!   positive semidefinite and of unit trace (all within the global
//!   tolerance), tagged with its qubit count `n`.
//! * [`UnitaryOp`] — a `2^m × 2^m` matrix validated to satisfy `U†U = I`,
//!   applied to the first `m` qubits of a larger state by implicit extension
//!   with the identity.
//!
//! States are indexed big-endian: qubit 1 is the most significant bit of the
//! basis index, so `A.tensor(B)` places `A`'s qubits before `B`'s and equals
//! the plain Kronecker product. Measurement outcomes use the opposite
//! convention (see [`DensityMatrix::measure_comp`]).
//!
//! Matrices never exceed a few dozen rows in practice, so the eigenvalue
//! routine is a cyclic Jacobi iteration rather than a LAPACK binding.

use num_complex::Complex64;
use thiserror::Error;

use crate::tol::tolerance;

/// Errors raised when constructing or combining matrix-layer values.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("matrix is {rows}x{cols}, expected square with power-of-two size")]
    NotSquarePowerOfTwo { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (max |M - M†| entry = {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix is not positive semidefinite (smallest eigenvalue {eigenvalue:.3e})")]
    NotPositive { eigenvalue: f64 },
    #[error("matrix trace is {trace:.12}{imag:+.3e}i, expected 1")]
    TraceNotOne { trace: f64, imag: f64 },
    #[error("operator is not unitary (max |U†U - I| entry = {deviation:.3e})")]
    NotUnitary { deviation: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("operator acts on {op} qubits but the state has only {state}")]
    ArityMismatch { op: u32, state: u32 },
}

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Builds a matrix from row vectors. All rows must have equal length.
    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self, MatrixError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        for row in &rows {
            if row.len() != c {
                return Err(MatrixError::DimensionMismatch { left: c, right: row.len() });
            }
        }
        Ok(ComplexMatrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn add(&self, other: &Self) -> Result<Self, MatrixError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(MatrixError::DimensionMismatch { left: self.rows, right: other.rows });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(ComplexMatrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, k: Complex64) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * k).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self, MatrixError> {
        if self.cols != other.rows {
            return Err(MatrixError::DimensionMismatch { left: self.cols, right: other.rows });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// Kronecker product; the left factor's indices are the high-order bits.
    pub fn kron(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out.set(i * other.rows + k, j * other.cols + l, a * other.get(k, l));
                    }
                }
            }
        }
        out
    }

    /// Largest entrywise absolute difference. Panics on shape mismatch; use
    /// [`ComplexMatrix::approx_eq`] when shapes are not known to agree.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Entrywise comparison within `tol`; `false` on shape mismatch.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self.rows, self.cols) == (other.rows, other.cols) && self.max_abs_diff(other) <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.rows == self.cols && self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// Eigenvalues of a Hermitian matrix, ascending. Cyclic Jacobi: each
    /// rotation first folds the phase of the pivot entry into its column so
    /// the remaining 2×2 subproblem is real symmetric. The caller is
    /// responsible for near-Hermitian input; the iteration itself works on
    /// the Hermitian part `(M + M†)/2`.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        assert_eq!(self.rows, self.cols, "eigenvalues of a non-square matrix");
        let n = self.rows;
        // Hermitian part, so roundoff asymmetry cannot stall convergence.
        let mut a = self.add(&self.adjoint()).expect("square").scale(Complex64::new(0.5, 0.0));
        let norm: f64 = a.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let target = 1e-14 * (1.0 + norm);
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|p| (0..n).filter(move |q| *q != p).map(move |q| (p, q)))
                .map(|(p, q)| a.get(p, q).norm_sqr())
                .sum::<f64>()
                .sqrt();
            if off <= target {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    let r = apq.norm();
                    if r <= f64::MIN_POSITIVE {
                        continue;
                    }
                    // Phase fold: column q scaled by u, row q by conj(u),
                    // making the pivot real without moving the diagonal.
                    let u = apq.conj() / r;
                    for k in 0..n {
                        let v = a.get(k, q) * u;
                        a.set(k, q, v);
                    }
                    for k in 0..n {
                        let v = a.get(q, k) * u.conj();
                        a.set(q, k, v);
                    }
                    let app = a.get(p, p).re;
                    let aqq = a.get(q, q).re;
                    let tau = (aqq - app) / (2.0 * r);
                    let t = if tau == 0.0 {
                        1.0
                    } else {
                        tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, akp.scale(c) - akq.scale(s));
                        a.set(k, q, akp.scale(s) + akq.scale(c));
                    }
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, apk.scale(c) - aqk.scale(s));
                        a.set(q, k, apk.scale(s) + aqk.scale(c));
                    }
                    let zero = Complex64::new(0.0, 0.0);
                    a.set(p, q, zero);
                    a.set(q, p, zero);
                }
            }
        }
        let mut eigs: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
        eigs.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
        eigs
    }
}

/// Result of one branch of a computational-basis measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOutcome {
    /// Outcome word; qubit k's result is bit k-1.
    pub outcome: u64,
    /// Probability of this branch; branches with probability within tolerance
    /// of zero are dropped.
    pub prob: f64,
    /// Renormalized post-measurement state, still on all n qubits.
    pub state: DensityMatrix,
}

/// A validated n-qubit density matrix: Hermitian, positive semidefinite and
/// unit-trace within the global tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    qubits: u32,
    mat: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates and wraps `mat` as a density matrix on `qubits` qubits.
    pub fn new(qubits: u32, mat: ComplexMatrix) -> Result<Self, MatrixError> {
        let tol = tolerance();
        let dim = 1usize
            .checked_shl(qubits)
            .filter(|_| qubits >= 1)
            .ok_or(MatrixError::NotSquarePowerOfTwo { rows: mat.rows, cols: mat.cols })?;
        if mat.rows != dim || mat.cols != dim {
            return Err(MatrixError::NotSquarePowerOfTwo { rows: mat.rows, cols: mat.cols });
        }
        let dev = mat.max_abs_diff(&mat.adjoint());
        if dev > tol {
            return Err(MatrixError::NotHermitian { deviation: dev });
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(MatrixError::TraceNotOne { trace: tr.re, imag: tr.im });
        }
        let min_eig = mat
            .hermitian_eigenvalues()
            .first()
            .copied()
            .unwrap_or(0.0);
        // Eigenvalues of the Hermitian part; tolerance scaled up slightly
        // because Jacobi itself carries a few ulps of error.
        if min_eig < -tol * 10.0 {
            return Err(MatrixError::NotPositive { eigenvalue: min_eig });
        }
        Ok(DensityMatrix { qubits, mat })
    }

    /// Wraps matrices produced by operations that preserve validity
    /// (unitary conjugation, projection + renormalization, convex sums).
    fn from_parts(qubits: u32, mat: ComplexMatrix) -> Self {
        debug_assert!(mat.rows == 1 << qubits && mat.cols == 1 << qubits);
        debug_assert!(mat.is_hermitian(tolerance() * 100.0));
        DensityMatrix { qubits, mat }
    }

    pub fn qubits(&self) -> u32 {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    /// |v⟩⟨v| for a state vector of length 2^n. The vector is normalized
    /// first; a zero vector is rejected as not positive.
    pub fn from_ket(amplitudes: &[Complex64]) -> Result<Self, MatrixError> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(MatrixError::NotSquarePowerOfTwo { rows: dim, cols: 1 });
        }
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm <= tolerance() {
            return Err(MatrixError::NotPositive { eigenvalue: 0.0 });
        }
        let qubits = dim.trailing_zeros();
        let mut mat = ComplexMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                mat.set(i, j, amplitudes[i] * amplitudes[j].conj() / (norm * norm));
            }
        }
        Ok(DensityMatrix { qubits, mat })
    }

    /// |i⟩⟨i| on `qubits` qubits, `i` a big-endian basis index.
    pub fn pure_basis(qubits: u32, index: usize) -> Self {
        let dim = 1usize << qubits;
        assert!(index < dim, "basis index {index} out of range for {qubits} qubits");
        let mut mat = ComplexMatrix::zeros(dim, dim);
        mat.set(index, index, Complex64::new(1.0, 0.0));
        DensityMatrix { qubits, mat }
    }

    /// |+⟩⟨+| on one qubit.
    pub fn plus() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::from_ket(&[h, h]).expect("|+> is a valid state")
    }

    /// |−⟩⟨−| on one qubit.
    pub fn minus() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::from_ket(&[h, -h]).expect("|-> is a valid state")
    }

    /// The Bell state (|00⟩ + |11⟩)/√2 as a density matrix.
    pub fn bell00() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = Complex64::new(0.0, 0.0);
        Self::from_ket(&[h, z, z, h]).expect("Bell state is valid")
    }

    /// Composite state with `self`'s qubits first.
    pub fn tensor(&self, other: &Self) -> Self {
        DensityMatrix::from_parts(self.qubits + other.qubits, self.mat.kron(&other.mat))
    }

    /// UρU† with `op` extended by the identity onto trailing qubits.
    pub fn evolve(&self, op: &UnitaryOp) -> Result<Self, MatrixError> {
        let ext = op.extended(self.qubits)?;
        let out = ext.mat.mul(&self.mat).expect("dims").mul(&ext.mat.adjoint()).expect("dims");
        Ok(DensityMatrix::from_parts(self.qubits, out))
    }

    /// Computational-basis measurement of the first `m` qubits, keeping all
    /// n qubits in the post-measurement states.
    ///
    /// Outcome convention: the outcome word stores qubit k's result in bit
    /// k-1 (qubit 1 is the least significant bit), while basis indices are
    /// big-endian (qubit 1 most significant). The projector for outcome `b`
    /// therefore targets the m-bit-reversed prefix of the basis index.
    /// Branches whose probability is within tolerance of zero are dropped;
    /// the rest are renormalized.
    pub fn measure_comp(&self, m: u32) -> Result<Vec<MeasurementOutcome>, MatrixError> {
        if m < 1 || m > self.qubits {
            return Err(MatrixError::ArityMismatch { op: m, state: self.qubits });
        }
        let n = self.qubits;
        let dim = self.dim();
        let rest = 1usize << (n - m);
        let tol = tolerance();
        let mut outcomes = Vec::new();
        for b in 0..(1u64 << m) {
            let prefix = reverse_bits(b, m) as usize;
            // p = tr(P ρ) over the block of rows selected by the prefix.
            let lo = prefix * rest;
            let hi = lo + rest;
            let prob: f64 = (lo..hi).map(|i| self.mat.get(i, i).re).sum();
            if prob <= tol {
                continue;
            }
            let mut mat = ComplexMatrix::zeros(dim, dim);
            for i in lo..hi {
                for j in lo..hi {
                    mat.set(i, j, self.mat.get(i, j) / prob);
                }
            }
            outcomes.push(MeasurementOutcome {
                outcome: b,
                prob,
                state: DensityMatrix::from_parts(n, mat),
            });
        }
        Ok(outcomes)
    }

    /// Convex combination Σ wᵢ ρᵢ. Weights must be positive and sum to 1
    /// within tolerance; all states must have the same qubit count.
    pub fn weighted_sum(parts: &[(f64, DensityMatrix)]) -> Result<Self, MatrixError> {
        let (w0, first) = parts.first().ok_or(MatrixError::DimensionMismatch { left: 0, right: 0 })?;
        let qubits = first.qubits;
        let dim = first.dim();
        let mut acc = first.mat.scale(Complex64::new(*w0, 0.0));
        let mut total = *w0;
        for (w, d) in &parts[1..] {
            if d.qubits != qubits {
                return Err(MatrixError::DimensionMismatch { left: dim, right: d.dim() });
            }
            acc = acc.add(&d.mat.scale(Complex64::new(*w, 0.0))).expect("dims");
            total += w;
        }
        if (total - 1.0).abs() > tolerance() * 10.0 {
            return Err(MatrixError::TraceNotOne { trace: total, imag: 0.0 });
        }
        Ok(DensityMatrix::from_parts(qubits, acc))
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.qubits == other.qubits && self.mat.approx_eq(&other.mat, tol)
    }
}

/// Reverses the low `m` bits of `b`.
fn reverse_bits(b: u64, m: u32) -> u64 {
    let mut out = 0;
    for k in 0..m {
        out |= ((b >> k) & 1) << (m - 1 - k);
    }
    out
}

/// A validated m-qubit unitary operator.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOp {
    qubits: u32,
    mat: ComplexMatrix,
}

impl UnitaryOp {
    pub fn new(qubits: u32, mat: ComplexMatrix) -> Result<Self, MatrixError> {
        let dim = 1usize
            .checked_shl(qubits)
            .filter(|_| qubits >= 1)
            .ok_or(MatrixError::NotSquarePowerOfTwo { rows: mat.rows, cols: mat.cols })?;
        if mat.rows != dim || mat.cols != dim {
            return Err(MatrixError::NotSquarePowerOfTwo { rows: mat.rows, cols: mat.cols });
        }
        let prod = mat.adjoint().mul(&mat).expect("square");
        let dev = prod.max_abs_diff(&ComplexMatrix::identity(dim));
        if dev > tolerance() * 100.0 {
            return Err(MatrixError::NotUnitary { deviation: dev });
        }
        Ok(UnitaryOp { qubits, mat })
    }

    pub fn qubits(&self) -> u32 {
        self.qubits
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    /// Composite operator with `self` acting on the leading qubits.
    pub fn tensor(&self, other: &Self) -> Self {
        UnitaryOp { qubits: self.qubits + other.qubits, mat: self.mat.kron(&other.mat) }
    }

    /// `self ⊗ I` extended to act on `n ≥ m` qubits.
    pub fn extended(&self, n: u32) -> Result<Self, MatrixError> {
        if self.qubits > n {
            return Err(MatrixError::ArityMismatch { op: self.qubits, state: n });
        }
        if self.qubits == n {
            return Ok(self.clone());
        }
        Ok(UnitaryOp {
            qubits: n,
            mat: self.mat.kron(&ComplexMatrix::identity(1 << (n - self.qubits))),
        })
    }

    pub fn identity(qubits: u32) -> Self {
        UnitaryOp { qubits, mat: ComplexMatrix::identity(1 << qubits) }
    }

    pub fn pauli_x() -> Self {
        let o = Complex64::new(1.0, 0.0);
        let z = Complex64::new(0.0, 0.0);
        UnitaryOp {
            qubits: 1,
            mat: ComplexMatrix::from_rows(vec![vec![z, o], vec![o, z]]).expect("2x2"),
        }
    }

    pub fn pauli_y() -> Self {
        let i = Complex64::new(0.0, 1.0);
        let z = Complex64::new(0.0, 0.0);
        UnitaryOp {
            qubits: 1,
            mat: ComplexMatrix::from_rows(vec![vec![z, -i], vec![i, z]]).expect("2x2"),
        }
    }

    pub fn pauli_z() -> Self {
        let o = Complex64::new(1.0, 0.0);
        let z = Complex64::new(0.0, 0.0);
        UnitaryOp {
            qubits: 1,
            mat: ComplexMatrix::from_rows(vec![vec![o, z], vec![z, -o]]).expect("2x2"),
        }
    }

    pub fn hadamard() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        UnitaryOp {
            qubits: 1,
            mat: ComplexMatrix::from_rows(vec![vec![h, h], vec![h, -h]]).expect("2x2"),
        }
    }

    /// Controlled-X with qubit 1 as control and qubit 2 as target.
    pub fn cnot() -> Self {
        let o = Complex64::new(1.0, 0.0);
        let z = Complex64::new(0.0, 0.0);
        UnitaryOp {
            qubits: 2,
            mat: ComplexMatrix::from_rows(vec![
                vec![o, z, z, z],
                vec![z, o, z, z],
                vec![z, z, z, o],
                vec![z, z, o, z],
            ])
            .expect("4x4"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn diag2(a: f64, b: f64) -> ComplexMatrix {
        ComplexMatrix::from_rows(vec![vec![c(a, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(b, 0.0)]])
            .unwrap()
    }

    /// ρ = 3/4|0⟩⟨0| + √3/4|0⟩⟨1| + √3/4|1⟩⟨0| + 1/4|1⟩⟨1|, the pure state
    /// (√3|0⟩ + |1⟩)/2 used across the fixture corpus.
    fn rho_example() -> DensityMatrix {
        let s = 3f64.sqrt() / 4.0;
        DensityMatrix::new(
            1,
            ComplexMatrix::from_rows(vec![
                vec![c(0.75, 0.0), c(s, 0.0)],
                vec![c(s, 0.0), c(0.25, 0.0)],
            ])
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn mul_and_kron_basics() {
        let x = UnitaryOp::pauli_x();
        let id = ComplexMatrix::identity(2);
        assert!(x.matrix().mul(x.matrix()).unwrap().approx_eq(&id, 1e-15));
        let k = id.kron(x.matrix());
        assert_eq!(k.rows(), 4);
        assert_eq!(k.get(0, 1), c(1.0, 0.0));
        assert_eq!(k.get(2, 3), c(1.0, 0.0));
        assert_eq!(k.get(0, 0), c(0.0, 0.0));
    }

    #[test]
    fn adjoint_and_trace() {
        let m = ComplexMatrix::from_rows(vec![
            vec![c(1.0, 2.0), c(3.0, -1.0)],
            vec![c(0.0, 5.0), c(2.0, 0.0)],
        ])
        .unwrap();
        let a = m.adjoint();
        assert_eq!(a.get(0, 1), c(0.0, -5.0));
        assert_eq!(a.get(1, 0), c(3.0, 1.0));
        assert_eq!(m.trace(), c(3.0, 2.0));
    }

    #[test]
    fn jacobi_on_known_matrices() {
        // Pauli X: eigenvalues ±1.
        let eigs = UnitaryOp::pauli_x().matrix().hermitian_eigenvalues();
        assert!((eigs[0] + 1.0).abs() < 1e-12 && (eigs[1] - 1.0).abs() < 1e-12);
        // [[2, i], [-i, 2]]: eigenvalues 1 and 3.
        let m = ComplexMatrix::from_rows(vec![
            vec![c(2.0, 0.0), c(0.0, 1.0)],
            vec![c(0.0, -1.0), c(2.0, 0.0)],
        ])
        .unwrap();
        let eigs = m.hermitian_eigenvalues();
        assert!((eigs[0] - 1.0).abs() < 1e-12 && (eigs[1] - 3.0).abs() < 1e-12);
        // Diagonal input comes back sorted.
        let eigs = diag2(5.0, -2.0).hermitian_eigenvalues();
        assert_eq!(eigs.len(), 2);
        assert!((eigs[0] + 2.0).abs() < 1e-12 && (eigs[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_eigenvalue_sums_match_traces() {
        // 4x4 Hermitian with distinct entries.
        let m = ComplexMatrix::from_rows(vec![
            vec![c(1.0, 0.0), c(0.5, 0.25), c(0.0, -1.0), c(0.1, 0.0)],
            vec![c(0.5, -0.25), c(2.0, 0.0), c(0.3, 0.0), c(0.0, 0.2)],
            vec![c(0.0, 1.0), c(0.3, 0.0), c(-1.0, 0.0), c(0.7, -0.1)],
            vec![c(0.1, 0.0), c(0.0, -0.2), c(0.7, 0.1), c(0.5, 0.0)],
        ])
        .unwrap();
        let eigs = m.hermitian_eigenvalues();
        let sum: f64 = eigs.iter().sum();
        let sum_sq: f64 = eigs.iter().map(|x| x * x).sum();
        assert!((sum - m.trace().re).abs() < 1e-10);
        assert!((sum_sq - m.mul(&m).unwrap().trace().re).abs() < 1e-9);
    }

    #[test]
    fn density_validation_rejects_bad_inputs() {
        // Not Hermitian.
        let m = ComplexMatrix::from_rows(vec![
            vec![c(0.5, 0.0), c(0.5, 0.0)],
            vec![c(0.0, 0.0), c(0.5, 0.0)],
        ])
        .unwrap();
        assert!(matches!(DensityMatrix::new(1, m), Err(MatrixError::NotHermitian { .. })));
        // Trace 2.
        assert!(matches!(
            DensityMatrix::new(1, diag2(1.0, 1.0)),
            Err(MatrixError::TraceNotOne { .. })
        ));
        // Negative eigenvalue, trace still 1.
        assert!(matches!(
            DensityMatrix::new(1, diag2(1.5, -0.5)),
            Err(MatrixError::NotPositive { .. })
        ));
        // Wrong size for the declared qubit count.
        assert!(matches!(
            DensityMatrix::new(2, diag2(0.5, 0.5)),
            Err(MatrixError::NotSquarePowerOfTwo { .. })
        ));
    }

    #[test]
    fn kets_and_named_states() {
        let plus = DensityMatrix::plus();
        for i in 0..2 {
            for j in 0..2 {
                assert!((plus.matrix().get(i, j) - c(0.5, 0.0)).norm() < 1e-15);
            }
        }
        let bell = DensityMatrix::bell00();
        assert_eq!(bell.qubits(), 2);
        for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            assert!((bell.matrix().get(i, j) - c(0.5, 0.0)).norm() < 1e-15);
        }
        assert!((bell.matrix().get(1, 1)).norm() < 1e-15);
    }

    #[test]
    fn evolve_applies_leading_qubit_extension() {
        // H|0⟩⟨0|H = |+⟩⟨+|.
        let h = UnitaryOp::hadamard();
        let evolved = DensityMatrix::pure_basis(1, 0).evolve(&h).unwrap();
        assert!(evolved.approx_eq(&DensityMatrix::plus(), 1e-12));
        // X on qubit 1 of |00⟩ gives |10⟩ (big-endian index 2).
        let two = DensityMatrix::pure_basis(2, 0).evolve(&UnitaryOp::pauli_x()).unwrap();
        assert!(two.approx_eq(&DensityMatrix::pure_basis(2, 2), 1e-12));
        // Arity mismatch: 2-qubit op on 1-qubit state.
        assert!(matches!(
            DensityMatrix::pure_basis(1, 0).evolve(&UnitaryOp::cnot()),
            Err(MatrixError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn measurement_of_rho_example() {
        let outs = rho_example().measure_comp(1).unwrap();
        assert_eq!(outs.len(), 2);
        assert_eq!(outs[0].outcome, 0);
        assert!((outs[0].prob - 0.75).abs() < 1e-12);
        assert!(outs[0].state.approx_eq(&DensityMatrix::pure_basis(1, 0), 1e-12));
        assert_eq!(outs[1].outcome, 1);
        assert!((outs[1].prob - 0.25).abs() < 1e-12);
        assert!(outs[1].state.approx_eq(&DensityMatrix::pure_basis(1, 1), 1e-12));
    }

    #[test]
    fn measurement_keeps_unmeasured_qubits() {
        // Measuring qubit 1 of |+⟩⟨+| ⊗ |0⟩⟨0| yields 2-qubit states.
        let state = DensityMatrix::plus().tensor(&DensityMatrix::pure_basis(1, 0));
        let outs = state.measure_comp(1).unwrap();
        assert_eq!(outs.len(), 2);
        for o in &outs {
            assert!((o.prob - 0.5).abs() < 1e-12);
            assert_eq!(o.state.qubits(), 2);
        }
        assert!(outs[0].state.approx_eq(&DensityMatrix::pure_basis(2, 0), 1e-12));
        assert!(outs[1].state.approx_eq(&DensityMatrix::pure_basis(2, 2), 1e-12));
    }

    #[test]
    fn measurement_outcome_word_is_little_endian() {
        // |10⟩ (qubit 1 = 1, qubit 2 = 0) measured on both qubits must
        // report outcome 0b01 = 1: qubit 1 sits in bit 0.
        let state = DensityMatrix::pure_basis(2, 2);
        let outs = state.measure_comp(2).unwrap();
        assert_eq!(outs.len(), 1);
        assert_eq!(outs[0].outcome, 1);
        assert!((outs[0].prob - 1.0).abs() < 1e-12);
        assert!(outs[0].state.approx_eq(&state, 1e-12));
    }

    #[test]
    fn measurement_drops_zero_branches() {
        let outs = DensityMatrix::pure_basis(1, 1).measure_comp(1).unwrap();
        assert_eq!(outs.len(), 1);
        assert_eq!(outs[0].outcome, 1);
    }

    #[test]
    fn weighted_sum_mixes_states() {
        let mix = DensityMatrix::weighted_sum(&[
            (0.625, DensityMatrix::pure_basis(1, 0)),
            (0.375, DensityMatrix::pure_basis(1, 1)),
        ])
        .unwrap();
        assert!(mix.matrix().approx_eq(&diag2(0.625, 0.375), 1e-15));
        // Weights must sum to 1.
        assert!(DensityMatrix::weighted_sum(&[
            (0.5, DensityMatrix::pure_basis(1, 0)),
            (0.25, DensityMatrix::pure_basis(1, 1)),
        ])
        .is_err());
    }

    #[test]
    fn unitary_validation() {
        assert!(matches!(
            UnitaryOp::new(1, diag2(1.0, 2.0)),
            Err(MatrixError::NotUnitary { .. })
        ));
        let z = UnitaryOp::new(1, UnitaryOp::pauli_z().matrix().clone()).unwrap();
        assert_eq!(z.qubits(), 1);
        let ext = z.extended(2).unwrap();
        assert_eq!(ext.qubits(), 2);
        assert_eq!(ext.matrix().get(3, 3), c(-1.0, 0.0));
        assert!(matches!(
            UnitaryOp::cnot().extended(1),
            Err(MatrixError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn bit_reversal() {
        assert_eq!(reverse_bits(0b01, 2), 0b10);
        assert_eq!(reverse_bits(0b1, 1), 0b1);
        assert_eq!(reverse_bits(0b011, 3), 0b110);
        assert_eq!(reverse_bits(0b101, 3), 0b101);
    }
}
