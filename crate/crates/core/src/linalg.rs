//! Dense complex linear algebra: state vectors, operators, Kronecker
//! products, Hermitian eigendecomposition and seeded random states.
//!
//! Storage is backed by `nalgebra`. Every constructor rejects non-finite
//! entries, and every value is immutable once built.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance for exact algebraic identities.
pub const ALGEBRAIC_TOL: f64 = 1e-12;
/// Tolerance for eigendecomposition residuals.
pub const EIGEN_TOL: f64 = 1e-10;
/// Default cap on the number of entries a tensor product may produce.
pub const DEFAULT_TENSOR_CAP: usize = 1_000_000;

const PHASE_THRESHOLD: f64 = 1e-12;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn all_finite<'a>(it: impl IntoIterator<Item = &'a C64>) -> bool {
    it.into_iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Ket in a finite-dimensional Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: DVector<C64>,
}

impl StateVector {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::Invalid("state vector must have dim >= 1".into()));
        }
        if !all_finite(&amps) {
            return Err(Error::NonFinite("state vector"));
        }
        Ok(Self {
            amps: DVector::from_vec(amps),
        })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&x| c(x, 0.0)).collect())
    }

    pub(crate) fn from_dvector(amps: DVector<C64>) -> Self {
        Self { amps }
    }

    /// Computational basis vector |k⟩.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::InvalidLabel { label: k, dim });
        }
        let mut v = vec![ZERO; dim];
        v[k] = ONE;
        Self::new(v)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        self.amps.as_slice()
    }

    pub fn as_dvector(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn is_normalized(&self) -> bool {
        (self.amps.norm_squared() - 1.0).abs() <= ALGEBRAIC_TOL
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroNorm);
        }
        Ok(Self {
            amps: &self.amps / c(n, 0.0),
        })
    }

    pub fn scale(&self, z: C64) -> Self {
        Self {
            amps: &self.amps * z,
        }
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.amps.dotc(&other.amps))
    }

    /// |self⟩⟨other|
    pub fn outer(&self, other: &StateVector) -> Operator {
        Operator {
            mat: &self.amps * other.amps.adjoint(),
        }
    }

    pub fn add(&self, other: &StateVector) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self {
            amps: &self.amps + &other.amps,
        })
    }

    /// Multiplies by the global phase that makes the first nonzero
    /// component real and positive.
    pub fn with_fixed_phase(&self) -> Self {
        let mut amps = self.amps.clone();
        fix_phase(amps.as_mut_slice());
        Self { amps }
    }

    pub fn tensor(&self, other: &StateVector) -> Result<Self> {
        self.tensor_with_cap(other, DEFAULT_TENSOR_CAP)
    }

    pub fn tensor_with_cap(&self, other: &StateVector, cap: usize) -> Result<Self> {
        let entries = checked_entries(self.dim(), other.dim(), cap)?;
        let mut out = Vec::with_capacity(entries);
        for a in self.amps.iter() {
            for b in other.amps.iter() {
                out.push(a * b);
            }
        }
        Ok(Self {
            amps: DVector::from_vec(out),
        })
    }
}

fn fix_phase(v: &mut [C64]) {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return;
    }
    if let Some(first) = v.iter().find(|z| z.norm() > PHASE_THRESHOLD * scale) {
        let phase = first.conj() / first.norm();
        for z in v.iter_mut() {
            *z *= phase;
        }
    }
}

fn checked_entries(a: usize, b: usize, cap: usize) -> Result<usize> {
    match a.checked_mul(b) {
        Some(n) if n <= cap => Ok(n),
        _ => Err(Error::Capacity {
            entries: a.saturating_mul(b),
            cap,
        }),
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    mat: DMatrix<C64>,
}

impl Operator {
    /// Builds an operator from row-major entries.
    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::Invalid("operator must have dim >= 1".into()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        let flat: Vec<C64> = rows.into_iter().flatten().collect();
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, &flat))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| c(x, 0.0)).collect())
                .collect(),
        )
    }

    pub fn from_matrix(mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch {
                expected: mat.nrows(),
                found: mat.ncols(),
            });
        }
        if mat.nrows() == 0 {
            return Err(Error::Invalid("operator must have dim >= 1".into()));
        }
        if !all_finite(mat.iter()) {
            return Err(Error::NonFinite("operator"));
        }
        Ok(Self { mat })
    }

    pub(crate) fn from_matrix_unchecked(mat: DMatrix<C64>) -> Self {
        debug_assert_eq!(mat.nrows(), mat.ncols());
        Self { mat }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: DMatrix::zeros(dim, dim),
        }
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let d: Vec<C64> = diag.iter().map(|&x| c(x, 0.0)).collect();
        Self::from_matrix(DMatrix::from_diagonal(&DVector::from_vec(d)))
    }

    /// |v⟩⟨v|
    pub fn projector(v: &StateVector) -> Self {
        v.outer(v)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.mat[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            mat: self.mat.adjoint(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { mat: &self.mat * z }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.norm()
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        check_dim(self.dim(), v.dim())?;
        Ok(StateVector {
            amps: &self.mat * &v.amps,
        })
    }

    /// ⟨bra|self|ket⟩
    pub fn sandwich(&self, bra: &StateVector, ket: &StateVector) -> Result<C64> {
        check_dim(self.dim(), ket.dim())?;
        check_dim(self.dim(), bra.dim())?;
        Ok(bra.amps.dotc(&(&self.mat * &ket.amps)))
    }

    pub fn matmul(&self, other: &Operator) -> Result<Operator> {
        check_dim(self.dim(), other.dim())?;
        Ok(Operator {
            mat: &self.mat * &other.mat,
        })
    }

    pub fn plus(&self, other: &Operator) -> Result<Operator> {
        check_dim(self.dim(), other.dim())?;
        Ok(Operator {
            mat: &self.mat + &other.mat,
        })
    }

    pub fn minus(&self, other: &Operator) -> Result<Operator> {
        check_dim(self.dim(), other.dim())?;
        Ok(Operator {
            mat: &self.mat - &other.mat,
        })
    }

    pub fn powi(&self, n: u32) -> Operator {
        let mut out = DMatrix::identity(self.dim(), self.dim());
        for _ in 0..n {
            out = &out * &self.mat;
        }
        Operator { mat: out }
    }

    /// Largest entrywise deviation from the conjugate transpose.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim();
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    pub fn require_hermitian(&self, tol: f64) -> Result<()> {
        let deviation = self.hermitian_deviation();
        if deviation > tol {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(())
    }

    /// Frobenius distance to another operator.
    pub fn distance(&self, other: &Operator) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        Ok((&self.mat - &other.mat).norm())
    }

    pub fn tensor(&self, other: &Operator) -> Result<Operator> {
        self.tensor_with_cap(other, DEFAULT_TENSOR_CAP)
    }

    pub fn tensor_with_cap(&self, other: &Operator, cap: usize) -> Result<Operator> {
        let d = checked_entries(self.dim(), other.dim(), usize::MAX)?;
        checked_entries(d, d, cap)?;
        Ok(Operator {
            mat: self.mat.kronecker(&other.mat),
        })
    }

    /// Partial trace of an operator on C^{d_a} ⊗ C^{d_b}; `keep_first`
    /// selects whether the first or second factor survives.
    pub fn partial_trace(&self, d_a: usize, d_b: usize, keep_first: bool) -> Result<Operator> {
        check_dim(d_a * d_b, self.dim())?;
        let (keep, drop) = if keep_first { (d_a, d_b) } else { (d_b, d_a) };
        let mut out = DMatrix::zeros(keep, keep);
        for i in 0..keep {
            for j in 0..keep {
                let mut acc = ZERO;
                for k in 0..drop {
                    let (r, s) = if keep_first {
                        (i * d_b + k, j * d_b + k)
                    } else {
                        (k * d_b + i, k * d_b + j)
                    };
                    acc += self.mat[(r, s)];
                }
                out[(i, j)] = acc;
            }
        }
        Ok(Operator { mat: out })
    }

    /// exp(-i·self·t) for Hermitian `self`.
    pub fn unitary_evolution(&self, t: f64) -> Result<Operator> {
        let eig = eig_hermitian(self)?;
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for (lambda, v) in eig.values.iter().zip(&eig.vectors) {
            let phase = C64::from_polar(1.0, -lambda * t);
            out += (&v.amps * v.amps.adjoint()) * phase;
        }
        Ok(Operator { mat: out })
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        self.plus(rhs).expect("operator dimensions must match")
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        self.minus(rhs).expect("operator dimensions must match")
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.matmul(rhs).expect("operator dimensions must match")
    }
}

/// Eigenvalues (ascending) and matching orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<StateVector>,
}

impl Eigen {
    /// Groups eigenvalues closer than `tol` into eigenspaces, returning
    /// (representative value, member indices).
    pub fn eigenspaces(&self, tol: f64) -> Vec<(f64, Vec<usize>)> {
        let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
        for (k, &v) in self.values.iter().enumerate() {
            match groups.last_mut() {
                Some((first, members)) if (v - *first).abs() <= tol => members.push(k),
                _ => groups.push((v, vec![k])),
            }
        }
        for (value, members) in groups.iter_mut() {
            *value = members.iter().map(|&k| self.values[k]).sum::<f64>() / members.len() as f64;
        }
        groups
    }
}

/// Eigendecomposition of a Hermitian operator. Eigenvalues ascend; each
/// eigenvector has its first nonzero component real and positive.
pub fn eig_hermitian(a: &Operator) -> Result<Eigen> {
    let scale = a.mat.iter().map(|z| z.norm()).fold(1.0, f64::max);
    a.require_hermitian(ALGEBRAIC_TOL * scale)?;
    // Symmetrize so the solver sees an exactly Hermitian input.
    let herm = (&a.mat + a.mat.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..a.dim()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = order
        .iter()
        .map(|&k| {
            let mut col: Vec<C64> = eig.eigenvectors.column(k).iter().copied().collect();
            let n = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            col.iter_mut().for_each(|z| *z /= n);
            fix_phase(&mut col);
            StateVector::from_dvector(DVector::from_vec(col))
        })
        .collect();
    Ok(Eigen { values, vectors })
}

/// Seeded Haar-like random normalized state. The phase convention makes
/// the output unique for a given (dim, seed).
pub fn random_state(dim: usize, seed: u64) -> StateVector {
    assert!(dim >= 1, "random_state requires dim >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut amps: Vec<C64> = (0..dim)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            c(re, im)
        })
        .collect();
    let n = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|z| *z /= n);
    fix_phase(&mut amps);
    StateVector::from_dvector(DVector::from_vec(amps))
}

/// Seeded random Hermitian matrix with Gaussian entries.
pub fn random_hermitian(dim: usize, seed: u64) -> Operator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_4e4d);
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = if i == j {
                0.0
            } else {
                StandardNormal.sample(&mut rng)
            };
            m[(i, j)] = c(re, im);
            m[(j, i)] = c(re, -im);
        }
    }
    Operator { mat: m }
}

/// Seeded random orthonormal basis (eigenvectors of a random Hermitian).
pub fn random_basis(dim: usize, seed: u64) -> Vec<StateVector> {
    eig_hermitian(&random_hermitian(dim, seed))
        .expect("random Hermitian is Hermitian")
        .vectors
}

pub fn sigma_x() -> Operator {
    Operator::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).expect("valid")
}

pub fn sigma_y() -> Operator {
    Operator::from_rows(vec![vec![ZERO, -I], vec![I, ZERO]]).expect("valid")
}

pub fn sigma_z() -> Operator {
    Operator::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]).expect("valid")
}
