//! Dense linear algebra on small finite-dimensional Hilbert spaces.
//!
//! States are complex amplitude vectors, operators are dense row-major
//! matrices. Everything here is sized for `N <= ~16`; all routines are
//! `O(N^3)` at worst.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

/// Default absolute tolerance for Hermiticity and commutation checks.
pub const DEFAULT_TOL: f64 = 1e-10;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Complex amplitude vector of dimension `N >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    /// Wraps raw amplitudes without normalizing them.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.len() < 2 {
            return Err(Error::DimensionTooSmall(amps.len()));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::DegenerateState);
        }
        Ok(Self { amps })
    }

    /// Wraps and normalizes the amplitudes.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        let mut state = Self::new(amps)?;
        if !(state.norm_sqr() > 0.0) {
            return Err(Error::DegenerateState);
        }
        state.normalize();
        Ok(state)
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: index + 1,
            });
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Self::new(amps)
    }

    /// Uniform superposition of all basis states.
    pub fn uniform(dim: usize) -> Result<Self> {
        Self::normalized(vec![ONE; dim])
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amps)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Rescales to unit norm and returns the squared norm before rescaling.
    pub fn normalize(&mut self) -> f64 {
        let n2 = self.norm_sqr();
        let inv = 1.0 / n2.sqrt();
        for a in &mut self.amps {
            *a *= inv;
        }
        n2
    }

    /// `<self|other>`
    pub fn inner(&self, other: &[C64]) -> C64 {
        inner(&self.amps, other)
    }

    /// Squared amplitudes `z_a = |psi_a|^2` in the computational basis.
    pub fn populations(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

pub(crate) fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { ONE } else { ZERO })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
        }
        Ok(Self::from_fn(dim, |i, j| rows[i][j]))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        Self::from_fn(diag.len(), |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                ZERO
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// `max |M_ij - conj(M_ji)|`
    pub fn hermiticity_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        debug_assert_eq!(v.len(), self.dim);
        self.data
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(v).map(|(m, x)| m * x).sum())
            .collect()
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        &(self * other) + &(other * self)
    }

    /// `|v><v|` without any normalization.
    pub fn outer(v: &[C64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j].conj())
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl<'a> Add for &'a CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &'a CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim);
        CMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl<'a> Sub for &'a CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &'a CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim);
        CMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl<'a> Mul for &'a CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &'a CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

/// Hermitian operator, checked at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator(CMatrix);

impl HermitianOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, DEFAULT_TOL)
    }

    pub fn with_tolerance(matrix: CMatrix, tol: f64) -> Result<Self> {
        if matrix.dim() < 2 {
            return Err(Error::DimensionTooSmall(matrix.dim()));
        }
        let residual = matrix.hermiticity_residual();
        if !(residual <= tol) {
            return Err(Error::NotHermitian { residual });
        }
        Ok(Self(matrix))
    }

    /// Real diagonal operator; always Hermitian.
    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::new(CMatrix::from_real_diagonal(values))
    }

    pub fn zero(dim: usize) -> Result<Self> {
        Self::new(CMatrix::zeros(dim))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(CMatrix::identity(dim))
    }

    pub fn pauli_x() -> Self {
        Self(CMatrix::from_fn(2, |i, j| if i != j { ONE } else { ZERO }))
    }

    pub fn pauli_y() -> Self {
        Self(CMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 1) => C64::new(0.0, -1.0),
            (1, 0) => C64::new(0.0, 1.0),
            _ => ZERO,
        }))
    }

    pub fn pauli_z() -> Self {
        Self(CMatrix::from_real_diagonal(&[1.0, -1.0]))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.scale(C64::new(s, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.0.apply(v)
    }

    fn check_state(&self, state: &StateVector) -> Result<()> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: state.dim(),
            });
        }
        Ok(())
    }
}

/// `<psi|O|psi> / <psi|psi>`. For unit states this is the usual quantum
/// expectation; for unnormalized states it is the expectation in the
/// normalized ray, which is what the nonlinear drift terms require.
pub fn expectation(op: &HermitianOperator, state: &StateVector) -> Result<f64> {
    op.check_state(state)?;
    expectation_raw(op, state.amplitudes())
}

pub(crate) fn expectation_raw(op: &HermitianOperator, psi: &[C64]) -> Result<f64> {
    let n2 = norm_sqr(psi);
    if !(n2 > 0.0) || !n2.is_finite() {
        return Err(Error::DegenerateState);
    }
    let value = inner(psi, &op.apply(psi));
    let scale = op.matrix().max_abs().max(1.0) * n2;
    if value.im.abs() > DEFAULT_TOL * scale {
        return Err(Error::NonRealExpectation {
            imag: value.im / n2,
        });
    }
    Ok(value.re / n2)
}

/// `(O - <O>) psi`.
pub fn apply_delta(op: &HermitianOperator, state: &StateVector) -> Result<Vec<C64>> {
    op.check_state(state)?;
    let mean = expectation_raw(op, state.amplitudes())?;
    Ok(centered_apply(op, mean, state.amplitudes()))
}

pub(crate) fn centered_apply(op: &HermitianOperator, mean: f64, v: &[C64]) -> Vec<C64> {
    let mut out = op.apply(v);
    for (o, x) in out.iter_mut().zip(v) {
        *o -= x * mean;
    }
    out
}

/// `<O^2> - <O>^2`, evaluated as `||(O - <O>) psi||^2 / ||psi||^2`.
pub fn variance(op: &HermitianOperator, state: &StateVector) -> Result<f64> {
    let delta = apply_delta(op, state)?;
    Ok(norm_sqr(&delta) / state.norm_sqr())
}

/// Largest entry of any pairwise commutator.
pub fn max_commutator_norm(ops: &[HermitianOperator]) -> f64 {
    let mut worst = 0.0_f64;
    for (i, a) in ops.iter().enumerate() {
        for b in &ops[i + 1..] {
            worst = worst.max(a.matrix().commutator(b.matrix()).max_abs());
        }
    }
    worst
}

pub fn check_commuting(ops: &[HermitianOperator], tol: f64) -> bool {
    max_commutator_norm(ops) <= tol
}

/// Density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, DEFAULT_TOL)
    }

    pub fn with_tolerance(matrix: CMatrix, tol: f64) -> Result<Self> {
        let residual = matrix.hermiticity_residual();
        if !(residual <= tol) {
            return Err(Error::NotHermitian { residual });
        }
        let tr = matrix.trace();
        if !((tr - ONE).norm() <= tol) {
            return Err(Error::InvalidParameter {
                name: "density matrix trace",
                value: tr.re,
            });
        }
        let lowest = eigenvalues(&matrix)[0];
        if lowest < -tol {
            return Err(Error::InvalidParameter {
                name: "density matrix eigenvalue",
                value: lowest,
            });
        }
        Ok(Self(matrix))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }
}

/// `|psi><psi|` of the normalized ray.
pub fn outer(state: &StateVector) -> DensityMatrix {
    let m = CMatrix::outer(state.amplitudes()).scale(C64::new(1.0 / state.norm_sqr(), 0.0));
    DensityMatrix(m)
}

pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    trace_distance_matrices(a.matrix(), b.matrix())
}

/// `1/2 sum |lambda_i|` of `a - b` for any pair of Hermitian matrices.
pub fn trace_distance_matrices(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    a.check_dim(b)?;
    let diff = a - b;
    Ok(0.5 * eigenvalues(&diff).iter().map(|l| l.abs()).sum::<f64>())
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn eigenvalues(m: &CMatrix) -> Vec<f64> {
    let (mut vals, _) = real_embedding_eigen(m);
    vals.sort_by(f64::total_cmp);
    // Each eigenvalue of M appears twice in the real embedding.
    vals.into_iter().step_by(2).collect()
}

/// `f(M)` for Hermitian `M`, applying `f` to the spectrum.
pub fn matrix_function(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let n = m.dim();
    let size = 2 * n;
    let (vals, vecs) = real_embedding_eigen(m);
    let mut fr = vec![0.0; size * size];
    for (k, &lambda) in vals.iter().enumerate() {
        let fl = f(lambda);
        if fl == 0.0 {
            continue;
        }
        for i in 0..size {
            let vi = vecs[i * size + k] * fl;
            for j in 0..size {
                fr[i * size + j] += vi * vecs[j * size + k];
            }
        }
    }
    // f([[A, -B], [B, A]]) = [[Re f, -Im f], [Im f, Re f]]
    CMatrix::from_fn(n, |i, j| C64::new(fr[i * size + j], fr[(i + n) * size + j]))
}

/// Eigen-decomposition of the real symmetric `2N x 2N` embedding
/// `[[Re M, -Im M], [Im M, Re M]]`. Eigenvectors are stored column-wise.
fn real_embedding_eigen(m: &CMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = m.dim();
    let size = 2 * n;
    let mut a = vec![0.0; size * size];
    for i in 0..n {
        for j in 0..n {
            // Symmetrize so round-off in the input cannot break the solver.
            let z = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            a[i * size + j] = z.re;
            a[(i + n) * size + (j + n)] = z.re;
            a[i * size + (j + n)] = -z.im;
            a[(i + n) * size + j] = z.im;
        }
    }
    jacobi_eigen(a, size)
}

/// Cyclic Jacobi eigensolver for a dense real symmetric matrix.
fn jacobi_eigen(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        return (vec![0.0; n], v);
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}
