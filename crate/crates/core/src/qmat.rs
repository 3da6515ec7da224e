//! Dense complex matrices sized for a handful of qubits: Kronecker products,
//! partial traces, a cyclic Jacobi eigensolver for Hermitian matrices,
//! entropies and purifications.
//!
//! Everything here is immutable once built and the operations are plain
//! functions, so values can be shared freely across threads.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Entries strictly below this are dropped from entropy sums (0 log 0 = 0).
pub const EIGEN_CLAMP: f64 = 1e-12;
/// Tolerance on Hermiticity, trace and positivity for a `DensityMatrix`.
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;
/// Inputs to the eigensolver may deviate from Hermitian by at most this much.
pub const EIG_INPUT_TOL: f64 = 1e-10;

const JACOBI_OFF_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 100;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for col in 0..self.cols {
                let z = self[(r, col)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    /// |ψ⟩⟨ψ|
    pub fn outer(psi: &[C64]) -> Self {
        let n = psi.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for col in 0..self.cols {
                m[(col, r)] = self[(r, col)].conj();
            }
        }
        m
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Tr[self · other] without forming the product.
    pub fn trace_of_product(&self, other: &Self) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.rows {
            for j in 0..self.cols {
                acc += self[(i, j)] * other[(j, i)];
            }
        }
        acc
    }

    /// Largest entrywise |A − A†|.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// (A + A†)/2
    pub fn hermitian_part(&self) -> Self {
        let mut m = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(i, j)] = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
            }
        }
        m
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut m = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    m.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        Ok(m)
    }

    /// Applies the matrix to a column vector.
    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect())
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    fn check_same_shape(&self, other: &Self) {
        assert!(
            self.rows == other.rows && self.cols == other.cols,
            "shape mismatch: {}x{} vs {}x{}",
            self.rows,
            self.cols,
            other.rows,
            other.cols
        );
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.check_same_shape(rhs);
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.check_same_shape(rhs);
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Panics on inner-dimension mismatch; use [`ComplexMatrix::matmul`] for a fallible product.
impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("matrix product dimension mismatch")
    }
}

/// Kronecker product; `a`'s indices vary slowest.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut m = ComplexMatrix::zeros(rows, cols);
    for ar in 0..a.rows {
        for ac in 0..a.cols {
            let x = a[(ar, ac)];
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            for br in 0..b.rows {
                for bc in 0..b.cols {
                    m[(ar * b.rows + br, ac * b.cols + bc)] = x * b[(br, bc)];
                }
            }
        }
    }
    m
}

/// Kronecker product of a list of factors (identity 1×1 for an empty list).
pub fn tensor_all<'a, I>(factors: I) -> ComplexMatrix
where
    I: IntoIterator<Item = &'a ComplexMatrix>,
{
    factors
        .into_iter()
        .fold(ComplexMatrix::identity(1), |acc, f| tensor(&acc, f))
}

pub fn tensor_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| x * y))
        .collect()
}

/// Pauli matrices.
pub fn sigma_x() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
}

pub fn sigma_y() -> ComplexMatrix {
    ComplexMatrix::from_vec(
        2,
        2,
        vec![c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)],
    )
    .unwrap()
}

pub fn sigma_z() -> ComplexMatrix {
    ComplexMatrix::diag(&[1.0, -1.0])
}

/// Result of [`hermitian_eig`]: eigenvalues in descending order and the
/// matching eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// V Λ V†
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.values.len();
        let mut m = ComplexMatrix::zeros(n, n);
        for (k, &lambda) in self.values.iter().enumerate() {
            for i in 0..n {
                let vi = self.vectors[(i, k)] * lambda;
                for j in 0..n {
                    m[(i, j)] += vi * self.vectors[(j, k)].conj();
                }
            }
        }
        m
    }
}

/// Cyclic Jacobi eigendecomposition of a complex Hermitian matrix.
///
/// Each rotation first removes the phase of the pivot `h[p][q]` and then
/// applies the real symmetric Jacobi rotation, so the accumulated transform
/// stays unitary. Sweeps stop once the off-diagonal Frobenius mass drops
/// below 1e-14 (relative to the matrix norm when that exceeds 1).
pub fn hermitian_eig(h: &ComplexMatrix) -> Result<HermitianEigen> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition of a {}x{} matrix",
            h.rows, h.cols
        )));
    }
    let dev = h.hermitian_deviation();
    if dev > EIG_INPUT_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let n = h.rows;
    let mut a = h.hermitian_part();
    let mut v = ComplexMatrix::identity(n);

    let norm: f64 = a.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let tol = JACOBI_OFF_TOL * norm.max(1.0);

    let off = |a: &ComplexMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off(&a) >= tol {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence(sweeps));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag < 1e-300 {
                    continue;
                }
                let phase = apq / mag;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                // J = D·P with D = diag(1, conj(phase)) on (p, q) and P the real rotation.
                let jpp = C64::new(cs, 0.0);
                let jpq = C64::new(sn, 0.0);
                let jqp = -phase.conj() * sn;
                let jqq = phase.conj() * cs;

                // A ← A·J
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * jpp + akq * jqp;
                    a[(k, q)] = akp * jpq + akq * jqq;
                }
                // A ← J†·A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
                    a[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                // V ← V·J
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * jpp + vkq * jqp;
                    v[(k, q)] = vkp * jpq + vkq * jqq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, new)] = v[(k, old)];
        }
    }
    Ok(HermitianEigen { values, vectors })
}

/// −Σ λ log₂ λ over the spectrum of a PSD matrix, which need not have unit
/// trace. Eigenvalues below [`EIGEN_CLAMP`] contribute nothing.
pub fn matrix_entropy(m: &ComplexMatrix) -> Result<f64> {
    if m.rows == 1 && m.cols == 1 {
        return Ok(shannon_term(m[(0, 0)].re));
    }
    let eig = hermitian_eig(m)?;
    Ok(eig.values.iter().map(|&l| shannon_term(l)).sum())
}

#[inline]
pub(crate) fn shannon_term(p: f64) -> f64 {
    if p < EIGEN_CLAMP {
        0.0
    } else {
        -p * p.log2()
    }
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    shannon_term(p) + shannon_term(1.0 - p)
}

/// Square, Hermitian, PSD, unit-trace matrix together with its tensor factor
/// dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    dims: Vec<usize>,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix, dims: Vec<usize>) -> Result<Self> {
        let side: usize = dims.iter().product();
        if !matrix.is_square() || matrix.rows != side || dims.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix with subsystem dims {:?}",
                matrix.rows, matrix.cols, dims
            )));
        }
        let dev = matrix.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidTrace(tr.re));
        }
        let min_eig = hermitian_eig(&matrix)?
            .values
            .last()
            .copied()
            .unwrap_or(0.0);
        if min_eig < -PSD_TOL {
            return Err(Error::NotPositive(min_eig));
        }
        Ok(Self { matrix, dims })
    }

    /// Skips validation; for results of operations that preserve validity.
    pub(crate) fn new_unchecked(matrix: ComplexMatrix, dims: Vec<usize>) -> Self {
        Self { matrix, dims }
    }

    /// Hermitizes and renormalizes a matrix that is a density matrix up to
    /// floating-point noise, then validates it.
    pub fn from_noisy(matrix: ComplexMatrix, dims: Vec<usize>) -> Result<Self> {
        let h = matrix.hermitian_part();
        let tr = h.trace().re;
        if tr.abs() < 1e-300 {
            return Err(Error::InvalidTrace(tr));
        }
        Self::new(h.scale(1.0 / tr), dims)
    }

    pub fn from_pure(psi: &[C64], dims: Vec<usize>) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Err(Error::InvalidTrace(0.0));
        }
        let psi: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        Self::new(ComplexMatrix::outer(&psi).hermitian_part(), dims)
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let d: usize = dims.iter().product();
        Self::new_unchecked(ComplexMatrix::identity(d).scale(1.0 / d as f64), dims)
    }

    /// The 1×1 state used for a trivial eavesdropper register.
    pub fn trivial() -> Self {
        Self::new_unchecked(ComplexMatrix::identity(1), vec![1])
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self::new_unchecked(tensor(&self.matrix, &other.matrix), dims)
    }

    /// Expectation value Tr[ρ O].
    pub fn expectation(&self, op: &ComplexMatrix) -> Result<C64> {
        if op.rows != self.dim() || op.cols != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "operator {}x{} on a state of dimension {}",
                op.rows,
                op.cols,
                self.dim()
            )));
        }
        Ok(self.matrix.trace_of_product(op))
    }
}

/// Mixed-radix digits of `index` over `dims` (first digit slowest).
pub(crate) fn digits(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
}

pub(crate) fn compose(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&d, &n)| acc * n + d)
}

/// Partial trace of a raw square matrix over every factor not in `keep`.
pub(crate) fn partial_trace_matrix(
    m: &ComplexMatrix,
    dims: &[usize],
    keep: &[usize],
) -> Result<(ComplexMatrix, Vec<usize>)> {
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.is_empty() {
        return Err(Error::InvalidSubsystems(
            "empty keep set; use the trace for a scalar".into(),
        ));
    }
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::InvalidSubsystems(format!(
            "subsystem {bad} out of range for {} factors",
            dims.len()
        )));
    }
    let side: usize = dims.iter().product();
    if m.rows != side || m.cols != side {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix with subsystem dims {:?}",
            m.rows, m.cols, dims
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    let kept_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let out_side: usize = kept_dims.iter().product();
    let mut out = ComplexMatrix::zeros(out_side, out_side);

    let n = dims.len();
    let mut rd = vec![0; n];
    let mut cd = vec![0; n];
    let mut kr = vec![0; keep.len()];
    let mut kc = vec![0; keep.len()];
    let mut tr = vec![0; traced.len()];
    let mut tc = vec![0; traced.len()];
    for r in 0..side {
        digits(r, dims, &mut rd);
        for (slot, &k) in traced.iter().enumerate() {
            tr[slot] = rd[k];
        }
        let traced_r = compose(&tr, &traced_dims);
        for (slot, &k) in keep.iter().enumerate() {
            kr[slot] = rd[k];
        }
        let out_r = compose(&kr, &kept_dims);
        for col in 0..side {
            let z = m[(r, col)];
            if z == C64::new(0.0, 0.0) {
                continue;
            }
            digits(col, dims, &mut cd);
            for (slot, &k) in traced.iter().enumerate() {
                tc[slot] = cd[k];
            }
            if compose(&tc, &traced_dims) != traced_r {
                continue;
            }
            for (slot, &k) in keep.iter().enumerate() {
                kc[slot] = cd[k];
            }
            out[(out_r, compose(&kc, &kept_dims))] += z;
        }
    }
    Ok((out, kept_dims))
}

/// Reduced state on the subsystems in `keep`, listed in their original order.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let (m, dims) = partial_trace_matrix(&rho.matrix, &rho.dims, keep)?;
    Ok(DensityMatrix::new_unchecked(m, dims))
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    matrix_entropy(&rho.matrix)
}

/// ½‖ρ − σ‖₁.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dims != sigma.dims {
        return Err(Error::DimensionMismatch(format!(
            "trace distance between dims {:?} and {:?}",
            rho.dims, sigma.dims
        )));
    }
    let diff = &rho.matrix - &sigma.matrix;
    let eig = hermitian_eig(&diff)?;
    Ok(0.5 * eig.values.iter().map(|l| l.abs()).sum::<f64>())
}

/// A normalized state vector with tensor factor dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    pub amplitudes: Vec<C64>,
    pub dims: Vec<usize>,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>, dims: Vec<usize>) -> Result<Self> {
        let side: usize = dims.iter().product();
        if amplitudes.len() != side {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for dims {:?}",
                amplitudes.len(),
                dims
            )));
        }
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidTrace(norm * norm));
        }
        Ok(Self { amplitudes, dims })
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::new_unchecked(
            ComplexMatrix::outer(&self.amplitudes).hermitian_part(),
            self.dims.clone(),
        )
    }
}

/// Purifies ρ as Σₖ √λₖ |vₖ⟩|k⟩ over the eigenvalues above 1e-12. The
/// purifying register is appended as the last tensor factor and has
/// dimension equal to the rank.
pub fn purify(rho: &DensityMatrix) -> Result<PureState> {
    let eig = hermitian_eig(&rho.matrix)?;
    let kept: Vec<usize> = (0..eig.values.len())
        .filter(|&k| eig.values[k] > EIGEN_CLAMP)
        .collect();
    let rank = kept.len().max(1);
    let d = rho.dim();
    let mut amps = vec![C64::new(0.0, 0.0); d * rank];
    for (slot, &k) in kept.iter().enumerate() {
        let w = eig.values[k].sqrt();
        for i in 0..d {
            amps[i * rank + slot] = eig.vectors[(i, k)] * w;
        }
    }
    let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= norm;
    }
    let mut dims = rho.dims.clone();
    dims.push(rank);
    PureState::new(amps, dims)
}

/// Indexed family of PSD effects summing to the identity on one subsystem.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    effects: Vec<ComplexMatrix>,
}

pub const POVM_TOL: f64 = 1e-10;

impl Povm {
    pub fn new(effects: Vec<ComplexMatrix>) -> Result<Self> {
        let Some(first) = effects.first() else {
            return Err(Error::InvalidPovm("no effects".into()));
        };
        let d = first.rows;
        let mut sum = ComplexMatrix::zeros(d, d);
        for (k, e) in effects.iter().enumerate() {
            if !e.is_square() || e.rows != d {
                return Err(Error::InvalidPovm(format!(
                    "effect {k} is {}x{}, expected {d}x{d}",
                    e.rows, e.cols
                )));
            }
            let dev = e.hermitian_deviation();
            if dev > POVM_TOL {
                return Err(Error::InvalidPovm(format!(
                    "effect {k} not Hermitian (deviation {dev:e})"
                )));
            }
            let eig = hermitian_eig(e)?;
            let hi = eig.values[0];
            let lo = *eig.values.last().unwrap();
            if lo < -POVM_TOL || hi > 1.0 + POVM_TOL {
                return Err(Error::InvalidPovm(format!(
                    "effect {k} has eigenvalues in [{lo}, {hi}]"
                )));
            }
            sum = &sum + e;
        }
        let dev = sum.max_abs_diff(&ComplexMatrix::identity(d));
        if dev > POVM_TOL {
            return Err(Error::InvalidPovm(format!(
                "effects sum to identity only within {dev:e}"
            )));
        }
        Ok(Self { effects })
    }

    /// Two-outcome projective measurement of a ±1-valued observable. Outcome
    /// 0 is the +1 eigenspace.
    pub fn from_observable(observable: &ComplexMatrix) -> Result<Self> {
        let id = ComplexMatrix::identity(observable.rows);
        Self::new(vec![
            (&id + observable).scale(0.5),
            (&id - observable).scale(0.5),
        ])
    }

    /// With probability `random_prob` the device ignores the system and
    /// reports a uniformly random outcome.
    pub fn with_random_assignment(&self, random_prob: f64) -> Result<Self> {
        crate::error::check_range("random_prob", random_prob, 0.0, 1.0, "[0, 1]")?;
        let k = self.effects.len() as f64;
        let id = ComplexMatrix::identity(self.dim()).scale(random_prob / k);
        Self::new(
            self.effects
                .iter()
                .map(|e| &e.scale(1.0 - random_prob) + &id)
                .collect(),
        )
    }

    pub fn effects(&self) -> &[ComplexMatrix] {
        &self.effects
    }

    pub fn effect(&self, outcome: usize) -> &ComplexMatrix {
        &self.effects[outcome]
    }

    pub fn num_outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn dim(&self) -> usize {
        self.effects[0].rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ghz(n: usize) -> Vec<C64> {
        let d = 1 << n;
        let mut v = vec![c(0.0, 0.0); d];
        v[0] = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        v[d - 1] = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        v
    }

    #[test]
    fn tensor_identities_and_paulis() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(tensor(&i2, &i2), ComplexMatrix::identity(4));
        let zz = tensor(&sigma_z(), &sigma_z());
        assert_eq!(zz, ComplexMatrix::diag(&[1.0, -1.0, -1.0, 1.0]));
        let m = tensor(&ComplexMatrix::zeros(2, 2), &ComplexMatrix::zeros(3, 3));
        assert_eq!((m.rows(), m.cols()), (6, 6));
    }

    #[test]
    fn partial_trace_examples() {
        let rho = DensityMatrix::new(ComplexMatrix::diag(&[0.25, 0.75]), vec![2]).unwrap();
        let sigma = DensityMatrix::maximally_mixed(vec![3]);
        let back = partial_trace(&rho.tensor(&sigma), &[0]).unwrap();
        assert!(back.matrix().max_abs_diff(rho.matrix()) < 1e-14);

        let g = DensityMatrix::from_pure(&ghz(3), vec![2, 2, 2]).unwrap();
        let m = partial_trace(&g, &[0]).unwrap();
        assert!(
            m.matrix()
                .max_abs_diff(&ComplexMatrix::identity(2).scale(0.5))
                < 1e-14
        );

        let bell = DensityMatrix::from_pure(&ghz(2), vec![2, 2]).unwrap();
        let m = partial_trace(&bell, &[1]).unwrap();
        assert!(
            m.matrix()
                .max_abs_diff(&ComplexMatrix::identity(2).scale(0.5))
                < 1e-14
        );

        assert!(matches!(
            partial_trace(&bell, &[]),
            Err(Error::InvalidSubsystems(_))
        ));
        assert!(partial_trace(&bell, &[2]).is_err());
    }

    #[test]
    fn partial_trace_keeps_original_order() {
        let a = DensityMatrix::new(ComplexMatrix::diag(&[1.0, 0.0]), vec![2]).unwrap();
        let b = DensityMatrix::maximally_mixed(vec![2]);
        let cst = DensityMatrix::new(ComplexMatrix::diag(&[0.2, 0.3, 0.5]), vec![3]).unwrap();
        let abc = a.tensor(&b).tensor(&cst);
        let ac = partial_trace(&abc, &[2, 0]).unwrap();
        assert_eq!(ac.dims(), &[2, 3]);
        assert!(ac.matrix().max_abs_diff(a.tensor(&cst).matrix()) < 1e-14);
    }

    #[test]
    fn eig_examples() {
        let e = hermitian_eig(&ComplexMatrix::diag(&[1.0, 3.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        let e = hermitian_eig(&sigma_x()).unwrap();
        assert_abs_diff_eq!(e.values[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], -1.0, epsilon = 1e-14);
        let e = hermitian_eig(&sigma_y()).unwrap();
        assert!(e.reconstruct().max_abs_diff(&sigma_y()) < 1e-14);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(hermitian_eig(&m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn entropy_examples() {
        let pure = DensityMatrix::from_pure(&ghz(3), vec![2, 2, 2]).unwrap();
        assert_abs_diff_eq!(von_neumann_entropy(&pure).unwrap(), 0.0, epsilon = 1e-12);
        for d in [2usize, 3, 8] {
            let mm = DensityMatrix::maximally_mixed(vec![d]);
            assert_abs_diff_eq!(
                von_neumann_entropy(&mm).unwrap(),
                (d as f64).log2(),
                epsilon = 1e-12
            );
        }
        let rho = DensityMatrix::new(ComplexMatrix::diag(&[0.75, 0.25]), vec![2]).unwrap();
        // h(1/4) = −¼log₂¼ − ¾log₂¾
        let h = 0.25 * 2.0 - 0.75 * 0.75f64.log2();
        assert_abs_diff_eq!(von_neumann_entropy(&rho).unwrap(), h, epsilon = 1e-12);
        assert_abs_diff_eq!(h, 0.811278, epsilon = 1e-6);
    }

    #[test]
    fn trace_distance_examples() {
        let zero = DensityMatrix::new(ComplexMatrix::diag(&[1.0, 0.0]), vec![2]).unwrap();
        let one = DensityMatrix::new(ComplexMatrix::diag(&[0.0, 1.0]), vec![2]).unwrap();
        let mixed = DensityMatrix::maximally_mixed(vec![2]);
        assert_abs_diff_eq!(trace_distance(&zero, &zero).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(trace_distance(&zero, &one).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(trace_distance(&zero, &mixed).unwrap(), 0.5, epsilon = 1e-15);
        let three = DensityMatrix::maximally_mixed(vec![3]);
        assert!(trace_distance(&zero, &three).is_err());
    }

    #[test]
    fn purification_examples() {
        let pure = DensityMatrix::from_pure(&ghz(2), vec![2, 2]).unwrap();
        let psi = purify(&pure).unwrap();
        assert_eq!(psi.dims, vec![2, 2, 1]);
        let back = partial_trace(&psi.to_density(), &[0, 1]).unwrap();
        assert!(back.matrix().max_abs_diff(pure.matrix()) < 1e-10);

        let mixed = DensityMatrix::maximally_mixed(vec![2]);
        let psi = purify(&mixed).unwrap();
        assert_eq!(psi.dims, vec![2, 2]);
        let joint = psi.to_density();
        assert_abs_diff_eq!(von_neumann_entropy(&joint).unwrap(), 0.0, epsilon = 1e-12);
        let env = partial_trace(&joint, &[1]).unwrap();
        assert!(
            env.matrix()
                .max_abs_diff(&ComplexMatrix::identity(2).scale(0.5))
                < 1e-12
        );
    }

    #[test]
    fn density_matrix_validation() {
        assert!(matches!(
            DensityMatrix::new(ComplexMatrix::diag(&[0.5, 0.6]), vec![2]),
            Err(Error::InvalidTrace(_))
        ));
        assert!(matches!(
            DensityMatrix::new(ComplexMatrix::diag(&[1.5, -0.5]), vec![2]),
            Err(Error::NotPositive(_))
        ));
        assert!(DensityMatrix::new(ComplexMatrix::identity(4).scale(0.25), vec![2, 3]).is_err());
    }

    #[test]
    fn povm_validation() {
        let z = Povm::from_observable(&sigma_z()).unwrap();
        assert_eq!(z.num_outcomes(), 2);
        let noisy = z.with_random_assignment(0.3).unwrap();
        assert_abs_diff_eq!(noisy.effect(0)[(0, 0)].re, 0.85, epsilon = 1e-15);
        assert_abs_diff_eq!(noisy.effect(0)[(1, 1)].re, 0.15, epsilon = 1e-15);
        assert!(Povm::new(vec![ComplexMatrix::diag(&[1.0, 0.0])]).is_err());
        assert!(Povm::new(vec![
            ComplexMatrix::diag(&[1.5, 0.0]),
            ComplexMatrix::diag(&[-0.5, 1.0])
        ])
        .is_err());
        assert!(Povm::new(vec![]).is_err());
    }
}
