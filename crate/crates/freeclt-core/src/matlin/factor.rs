//! LU and QR factorizations for the dense complex kernel.

use num_complex::Complex64;

use super::{CMatrix, MatError, MatResult};

/// Relative pivot threshold below which LU declares singularity.
const PIVOT_REL_TOL: f64 = 1e-13;

struct Lu {
    dim: usize,
    // Combined L (unit lower) and U factors.
    lu: Vec<Complex64>,
    perm: Vec<usize>,
}

fn lu_decompose(a: &CMatrix) -> MatResult<Lu> {
    let n = a.dim();
    let mut lu = a.data().to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let pivot_floor = PIVOT_REL_TOL * a.op_norm();

    for k in 0..n {
        let mut p = k;
        let mut best = lu[k * n + k].norm();
        for i in (k + 1)..n {
            let v = lu[i * n + k].norm();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best <= pivot_floor {
            return Err(MatError::Singular);
        }
        if p != k {
            for j in 0..n {
                lu.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
        }
        let pivot = lu[k * n + k];
        for i in (k + 1)..n {
            let factor = lu[i * n + k] / pivot;
            lu[i * n + k] = factor;
            for j in (k + 1)..n {
                let ukj = lu[k * n + j];
                lu[i * n + j] -= factor * ukj;
            }
        }
    }
    Ok(Lu { dim: n, lu, perm })
}

impl Lu {
    fn solve_vec(&self, b: &[Complex64], out: &mut [Complex64]) {
        let n = self.dim;
        for i in 0..n {
            out[i] = b[self.perm[i]];
        }
        // Forward substitution with unit lower factor.
        for i in 0..n {
            for j in 0..i {
                let lij = self.lu[i * n + j];
                let xj = out[j];
                out[i] -= lij * xj;
            }
        }
        // Back substitution with U.
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let uij = self.lu[i * n + j];
                let xj = out[j];
                out[i] -= uij * xj;
            }
            out[i] /= self.lu[i * n + i];
        }
    }
}

pub(super) fn lu_solve(a: &CMatrix, rhs: &CMatrix) -> MatResult<CMatrix> {
    if a.dim() != rhs.dim() {
        return Err(MatError::DimensionMismatch(a.dim(), rhs.dim()));
    }
    let n = a.dim();
    let lu = lu_decompose(a)?;
    let mut out = CMatrix::zeros(n);
    let mut col = vec![Complex64::default(); n];
    let mut sol = vec![Complex64::default(); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = rhs[(i, j)];
        }
        lu.solve_vec(&col, &mut sol);
        for i in 0..n {
            out[(i, j)] = sol[i];
        }
    }
    Ok(out)
}

pub(super) fn lu_inverse(a: &CMatrix) -> MatResult<CMatrix> {
    lu_solve(a, &CMatrix::identity(a.dim()))
}

/// Unitary factor of the Householder QR of `a`, with the diagonal of `R`
/// rotated to be real positive. QR of a complex Ginibre sample with this
/// phase correction is Haar-distributed on the unitary group.
pub fn qr_unitary(a: &CMatrix) -> CMatrix {
    let n = a.dim();
    let mut r = a.data().to_vec();
    let mut q = CMatrix::identity(n);

    for k in 0..n {
        // Householder vector for column k.
        let mut norm_x = 0.0;
        for i in k..n {
            norm_x += r[i * n + k].norm_sqr();
        }
        let norm_x = norm_x.sqrt();
        if norm_x == 0.0 {
            continue;
        }
        let x0 = r[k * n + k];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { Complex64::new(1.0, 0.0) };
        let alpha = -phase * norm_x;
        let mut v = vec![Complex64::default(); n - k];
        v[0] = x0 - alpha;
        for i in (k + 1)..n {
            v[i - k] = r[i * n + k];
        }
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // Apply H = I - 2 v v* / (v* v) to R (left) and accumulate into Q.
        for j in k..n {
            let mut dot = Complex64::default();
            for i in k..n {
                dot += v[i - k].conj() * r[i * n + j];
            }
            let s = dot * (2.0 / vnorm2);
            for i in k..n {
                r[i * n + j] -= s * v[i - k];
            }
        }
        for row in 0..n {
            let mut dot = Complex64::default();
            for i in k..n {
                dot += q[(row, i)] * v[i - k];
            }
            let s = dot * (2.0 / vnorm2);
            for i in k..n {
                q[(row, i)] -= s * v[i - k].conj();
            }
        }
    }

    // Phase correction: make diag(R) real positive so the distribution of Q
    // is exactly Haar for Ginibre input.
    for k in 0..n {
        let d = r[k * n + k];
        if d.norm() > 0.0 {
            let phase = (d / d.norm()).conj();
            for row in 0..n {
                q[(row, k)] /= phase.conj();
            }
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let data: Vec<Complex64> = (0..n * n)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        CMatrix::from_vec(n, data).unwrap()
    }

    #[test]
    fn solve_reconstructs_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_matrix(5, &mut rng);
            let inv = a.inverse().unwrap();
            let resid = a.mul(&inv).sub(&CMatrix::identity(5)).op_norm();
            assert!(resid < 1e-11, "residual {resid}");
        }
    }

    #[test]
    fn qr_factor_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [2, 5, 9] {
            let a = random_matrix(n, &mut rng);
            let q = qr_unitary(&a);
            let resid = q.adjoint().mul(&q).sub(&CMatrix::identity(n)).op_norm();
            assert!(resid < 1e-12, "n={n} resid {resid}");
        }
    }
}
