//! Hermitian eigensolver (cyclic Jacobi), power iteration, and the polar /
//! functional-calculus helpers built on top of them.

use num_complex::Complex64;

use super::{CMatrix, MatError, MatResult};

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching unitary of column
/// eigenvectors. Input is symmetrized first, so slightly non-Hermitian noise
/// is tolerated.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.dim();
    let mut m = a.hermitian_part();
    let mut v = CMatrix::identity(n);
    let scale = m.frobenius_norm().max(1e-300);
    let tol = 1e-15 * scale;

    for _sweep in 0..80 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let b = apq.norm();
                if b <= 1e-300 {
                    continue;
                }
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let u = apq / b;
                let tau = (aqq - app) / (2.0 * b);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = u * (t * c);
                // G = [[c, s], [-conj(s), c]] acting on columns (p, q);
                // update M <- G* M G and V <- V G.
                for i in 0..n {
                    let mip = m[(i, p)];
                    let miq = m[(i, q)];
                    m[(i, p)] = mip * c - miq * s.conj();
                    m[(i, q)] = mip * s + miq * c;
                }
                for j in 0..n {
                    let mpj = m[(p, j)];
                    let mqj = m[(q, j)];
                    m[(p, j)] = mpj * c - mqj * s;
                    m[(q, j)] = mpj * s.conj() + mqj * c;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * c - viq * s.conj();
                    v[(i, q)] = vip * s + viq * c;
                }
            }
        }
    }

    let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (m[(i, i)].re, i)).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let eigs: Vec<f64> = pairs.iter().map(|&(l, _)| l).collect();
    let mut vs = CMatrix::zeros(n);
    for (newcol, &(_, oldcol)) in pairs.iter().enumerate() {
        for i in 0..n {
            vs[(i, newcol)] = v[(i, oldcol)];
        }
    }
    (eigs, vs)
}

/// Largest eigenvalue of a Hermitian PSD matrix by power iteration.
pub(super) fn power_lambda_max(ata: &CMatrix, tol: f64, max_iter: usize) -> f64 {
    let n = ata.dim();
    // Deterministic start: uniform vector with a tilt so orthogonal starts
    // cannot persist.
    let mut v = vec![Complex64::new(1.0, 0.0); n];
    for (i, z) in v.iter_mut().enumerate() {
        z.re += (i as f64 + 1.0) * 1e-3;
    }
    normalize(&mut v);
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = matvec(ata, &v);
        let new_lambda: f64 = v.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum();
        let wnorm: f64 = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if wnorm == 0.0 {
            return 0.0;
        }
        v = w;
        normalize(&mut v);
        if (new_lambda - lambda).abs() <= tol * new_lambda.abs().max(1.0) {
            return new_lambda;
        }
        lambda = new_lambda;
    }
    lambda
}

fn normalize(v: &mut [Complex64]) {
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        for z in v.iter_mut() {
            *z /= norm;
        }
    }
}

fn matvec(a: &CMatrix, v: &[Complex64]) -> Vec<Complex64> {
    let n = a.dim();
    let mut out = vec![Complex64::default(); n];
    for i in 0..n {
        let mut acc = Complex64::default();
        for j in 0..n {
            acc += a[(i, j)] * v[j];
        }
        out[i] = acc;
    }
    out
}

/// Fractional power of a Hermitian positive semidefinite matrix.
/// Eigenvalues below zero (round-off) are clamped to zero.
pub(super) fn pow_psd(h: &CMatrix, t: f64) -> CMatrix {
    let (eigs, v) = hermitian_eigen(h);
    let d = CMatrix::diag(
        &eigs
            .iter()
            .map(|&l| Complex64::new(l.max(0.0).powf(t), 0.0))
            .collect::<Vec<_>>(),
    );
    v.mul(&d).mul(&v.adjoint())
}

/// Polar decomposition `b = U P` of an invertible matrix, with `U` unitary and
/// `P` Hermitian positive definite.
pub fn polar(b: &CMatrix) -> MatResult<(CMatrix, CMatrix)> {
    let p = pow_psd(&b.adjoint().mul(b), 0.5);
    let p_inv = p.inverse().map_err(|_| MatError::Singular)?;
    let u = b.mul(&p_inv);
    Ok((u, p))
}

/// Spectral decomposition of a unitary matrix.
///
/// Returns unit-modulus eigenvalues and a unitary of eigenvectors. Uses the
/// commuting Hermitian pair `(U + U*)/2`, `(U - U*)/(2i)`: a random real
/// combination of the two is eigensolved and the basis is checked to actually
/// diagonalize `U`, retrying with a different mixing coefficient when a
/// degenerate cluster mixes distinct eigenphases.
pub fn unitary_eigen(u: &CMatrix) -> MatResult<(Vec<Complex64>, CMatrix)> {
    let n = u.dim();
    let re = u.hermitian_part();
    let im = u.imag_part();
    // Fixed irrational-ish mixing coefficients keep the result deterministic.
    for &c in &[0.7310585786300049, 0.4142135623730951, 1.324_717_957_244_746, 0.1f64, 2.618_033_988_749_895] {
        let mix = re.add(&im.scale(Complex64::new(c, 0.0)));
        let (_, v) = hermitian_eigen(&mix);
        let d = v.adjoint().mul(u).mul(&v);
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += d[(i, j)].norm_sqr();
                }
            }
        }
        if off.sqrt() <= 1e-10 * (n as f64).sqrt() {
            let eigs: Vec<Complex64> = (0..n)
                .map(|i| {
                    let z = d[(i, i)];
                    let m = z.norm();
                    if m > 0.0 {
                        z / m
                    } else {
                        Complex64::new(1.0, 0.0)
                    }
                })
                .collect();
            return Ok((eigs, v));
        }
    }
    Err(MatError::InvalidParams(
        "could not diagonalize unitary factor; input may be far from unitary".into(),
    ))
}

/// Fractional power `U^t` of a unitary via eigenphases taken in `(-pi, pi]`.
pub(super) fn pow_unitary(u: &CMatrix, t: f64) -> MatResult<CMatrix> {
    let (eigs, v) = unitary_eigen(u)?;
    let d = CMatrix::diag(
        &eigs
            .iter()
            .map(|z| Complex64::from_polar(1.0, t * z.arg()))
            .collect::<Vec<_>>(),
    );
    Ok(v.mul(&d).mul(&v.adjoint()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let data: Vec<Complex64> = (0..n * n)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        CMatrix::from_vec(n, data).unwrap().hermitian_part()
    }

    #[test]
    fn jacobi_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 3, 6, 10] {
            let h = random_hermitian(n, &mut rng);
            let (eigs, v) = hermitian_eigen(&h);
            let d = CMatrix::diag(
                &eigs.iter().map(|&l| Complex64::new(l, 0.0)).collect::<Vec<_>>(),
            );
            let resid = v.mul(&d).mul(&v.adjoint()).sub(&h).op_norm();
            assert!(resid < 1e-12, "n={n} resid={resid}");
            let unit = v.adjoint().mul(&v).sub(&CMatrix::identity(n)).op_norm();
            assert!(unit < 1e-12);
        }
    }

    #[test]
    fn polar_recombines() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let b = {
                let data: Vec<Complex64> = (0..16)
                    .map(|_| Complex64::new(rng.gen::<f64>() + 0.2, rng.gen::<f64>()))
                    .collect();
                CMatrix::from_vec(4, data).unwrap().add(&CMatrix::identity(4))
            };
            if b.inverse().is_err() {
                continue;
            }
            let (u, p) = polar(&b).unwrap();
            assert!(u.mul(&p).sub(&b).op_norm() < 1e-10);
            assert!(u.adjoint().mul(&u).sub(&CMatrix::identity(4)).op_norm() < 1e-10);
        }
    }

    #[test]
    fn unitary_fractional_power_interpolates() {
        // Rotation by angle pi/3 in a 2d subspace: its square root rotates by pi/6.
        let th = std::f64::consts::PI / 3.0;
        let u = CMatrix::from_vec(
            2,
            vec![
                Complex64::new(th.cos(), 0.0),
                Complex64::new(-th.sin(), 0.0),
                Complex64::new(th.sin(), 0.0),
                Complex64::new(th.cos(), 0.0),
            ],
        )
        .unwrap();
        let h = pow_unitary(&u, 0.5).unwrap();
        assert!(h.mul(&h).sub(&u).op_norm() < 1e-10);
    }
}
