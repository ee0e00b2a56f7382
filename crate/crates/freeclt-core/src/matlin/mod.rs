//! Dense complex matrix kernel and the geometry of well-conditioned domains.
//!
//! Everything here works on square matrices over `Complex64`. The kernel is
//! deliberately small: operator norms, LU inversion, Hermitian eigensolves and
//! the polar-decomposition paths needed by the domain predicates. Matrices are
//! immutable values; all operations are pure.

mod eigen;
mod factor;
mod omega;

pub use eigen::{hermitian_eigen, polar, unitary_eigen};
pub use factor::qr_unitary;
pub use omega::{
    annulus_contains, in_omega, lambda_diag, neumann_inverse_bound, omega_margins, omega_path,
    sample_omega_point, CertifiedConstants, OmegaParams, OMEGA_GUARD_BAND,
};

use num_complex::Complex64;
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by the matrix kernel.
#[derive(Debug, Error, PartialEq)]
pub enum MatError {
    #[error("matrix is singular at working precision")]
    Singular,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero parameter where a nonzero value is required")]
    ZeroParameter,
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("entries must be finite")]
    NonFinite,
}

pub type MatResult<T> = Result<T, MatError>;

/// Dense square complex matrix, stored row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl std::fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    /// Builds a matrix from row-major data; rejects non-finite entries and
    /// empty dimensions.
    pub fn from_vec(dim: usize, data: Vec<Complex64>) -> MatResult<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(MatError::DimensionMismatch(dim * dim, data.len()));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(MatError::NonFinite);
        }
        Ok(Self { dim, data })
    }

    /// Builds a matrix from real row-major data.
    pub fn from_real(dim: usize, data: &[f64]) -> MatResult<Self> {
        Self::from_vec(dim, data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![Complex64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn diag(entries: &[Complex64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &z) in entries.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    /// Scalar multiple of the identity.
    pub fn scalar(dim: usize, z: Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = z;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, other.dim);
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        CMatrix { dim: self.dim, data }
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, other.dim);
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        CMatrix { dim: self.dim, data }
    }

    pub fn scale(&self, z: Complex64) -> CMatrix {
        CMatrix { dim: self.dim, data: self.data.iter().map(|a| a * z).collect() }
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.data[i * n + k];
                if aik.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += aik * other.data[k * n + j];
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        let n = self.dim;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let n = self.dim;
        for i in 0..n {
            for j in i..n {
                let d = self.data[i * n + j] - self.data[j * n + i].conj();
                if d.norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Hermitian part `(a + a*)/2`.
    pub fn hermitian_part(&self) -> CMatrix {
        self.add(&self.adjoint()).scale(Complex64::new(0.5, 0.0))
    }

    /// Skew part mapped to a Hermitian matrix: `(a - a*) / (2i)`.
    pub fn imag_part(&self) -> CMatrix {
        self.sub(&self.adjoint()).scale(Complex64::new(0.0, -0.5))
    }

    /// Operator norm (largest singular value).
    ///
    /// Full spectral decomposition of `a* a` up to dimension 64, power
    /// iteration (tolerance 1e-12, capped at 10_000 steps) beyond that.
    pub fn op_norm(&self) -> f64 {
        if self.max_abs() == 0.0 {
            return 0.0;
        }
        let ata = self.adjoint().mul(self);
        if self.dim <= 64 {
            let (eigs, _) = eigen::hermitian_eigen(&ata);
            eigs.iter().fold(0.0_f64, |m, &l| m.max(l)).max(0.0).sqrt()
        } else {
            eigen::power_lambda_max(&ata, 1e-12, 10_000).max(0.0).sqrt()
        }
    }

    /// Inverse via LU with partial pivoting. A pivot of modulus below
    /// `1e-13 * op_norm` declares the matrix singular.
    pub fn inverse(&self) -> MatResult<CMatrix> {
        factor::lu_inverse(self)
    }

    /// Solves `self * x = rhs` columnwise for a matrix right-hand side.
    pub fn solve(&self, rhs: &CMatrix) -> MatResult<CMatrix> {
        factor::lu_solve(self, rhs)
    }

    /// Kronecker product; `self` provides the coarse block structure.
    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        let m = self.dim;
        let n = other.dim;
        let mut out = CMatrix::zeros(m * n);
        for p in 0..m {
            for q in 0..m {
                let a = self.data[p * m + q];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for s in 0..n {
                    for t in 0..n {
                        out.data[(p * n + s) * (m * n) + (q * n + t)] = a * other.data[s * n + t];
                    }
                }
            }
        }
        out
    }

    /// Extracts the `(bi, bj)` block of size `n` from a matrix of dimension
    /// `m * n` laid out as an `m x m` grid of `n x n` blocks.
    pub fn block(&self, n: usize, bi: usize, bj: usize) -> CMatrix {
        let big = self.dim;
        assert!(big.is_multiple_of(n));
        let mut out = CMatrix::zeros(n);
        for s in 0..n {
            for t in 0..n {
                out[(s, t)] = self.data[(bi * n + s) * big + (bj * n + t)];
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

// Wire format: a matrix is a row-major nested array, each entry `[re, im]`.
impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut rows = serializer.serialize_seq(Some(self.dim))?;
        for i in 0..self.dim {
            let row: Vec<[f64; 2]> =
                (0..self.dim).map(|j| [self[(i, j)].re, self[(i, j)].im]).collect();
            rows.serialize_element(&row)?;
        }
        rows.end()
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct MatVisitor;
        impl<'de> Visitor<'de> for MatVisitor {
            type Value = CMatrix;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a square nested array of [re, im] pairs")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<CMatrix, A::Error> {
                let mut rows: Vec<Vec<[f64; 2]>> = Vec::new();
                while let Some(row) = seq.next_element::<Vec<[f64; 2]>>()? {
                    rows.push(row);
                }
                let dim = rows.len();
                if dim == 0 || rows.iter().any(|r| r.len() != dim) {
                    return Err(de::Error::custom("matrix must be square and non-empty"));
                }
                let data = rows
                    .into_iter()
                    .flatten()
                    .map(|[re, im]| Complex64::new(re, im))
                    .collect();
                CMatrix::from_vec(dim, data).map_err(de::Error::custom)
            }
        }
        deserializer.deserialize_seq(MatVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn op_norm_identity_and_diag() {
        assert!((CMatrix::identity(3).op_norm() - 1.0).abs() < 1e-12);
        let d = CMatrix::diag(&[c(3.0, 0.0), c(4.0, 0.0)]);
        assert!((d.op_norm() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn op_norm_nilpotent() {
        let a = CMatrix::from_real(2, &[0.0, 2.0, 0.0, 0.0]).unwrap();
        assert!((a.op_norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn op_norm_power_iteration_large() {
        // 70x70 diagonal exercises the power-iteration branch.
        let entries: Vec<Complex64> = (0..70).map(|i| c(1.0 + i as f64 / 10.0, 0.0)).collect();
        let d = CMatrix::diag(&entries);
        assert!((d.op_norm() - 7.9).abs() < 1e-9);
    }

    #[test]
    fn inverse_diag_and_identity() {
        let i2 = CMatrix::identity(2);
        assert!(i2.inverse().unwrap().sub(&i2).op_norm() < 1e-14);
        let d = CMatrix::diag(&[c(2.0, 0.0), c(4.0, 0.0)]);
        let want = CMatrix::diag(&[c(0.5, 0.0), c(0.25, 0.0)]);
        assert!(d.inverse().unwrap().sub(&want).op_norm() < 1e-14);
    }

    #[test]
    fn inverse_rank_deficient_is_singular() {
        let a = CMatrix::from_real(2, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(a.inverse().unwrap_err(), MatError::Singular);
    }

    #[test]
    fn non_finite_rejected() {
        let r = CMatrix::from_vec(1, vec![c(f64::NAN, 0.0)]);
        assert_eq!(r.unwrap_err(), MatError::NonFinite);
    }

    #[test]
    fn json_round_trip() {
        let a = CMatrix::from_vec(2, vec![c(1.0, 2.0), c(0.0, -1.0), c(3.5, 0.0), c(0.0, 0.0)])
            .unwrap();
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, "[[[1.0,2.0],[0.0,-1.0]],[[3.5,0.0],[0.0,0.0]]]");
        let b: CMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kron_block_round_trip() {
        let a = CMatrix::from_real(2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let x = CMatrix::from_real(2, &[0.0, 1.0, -1.0, 0.0]).unwrap();
        let k = a.kron(&x);
        assert_eq!(k.dim(), 4);
        for bi in 0..2 {
            for bj in 0..2 {
                let blk = k.block(2, bi, bj);
                let want = x.scale(a[(bi, bj)]);
                assert!(blk.sub(&want).op_norm() < 1e-15);
            }
        }
    }
}
