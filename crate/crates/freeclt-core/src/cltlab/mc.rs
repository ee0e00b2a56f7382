//! Random-matrix Monte Carlo oracle: realizes the free family by independent
//! unitarily invariant matrix models (GUE for semicircular components,
//! Haar-conjugated diagonal atoms for two-atom laws) and estimates the
//! matrix-valued Cauchy transform of the partial sum by partial traces of
//! finite-dimensional resolvents.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::freemoments::{DistributionSpec, FamilyConfig};
use crate::matlin::{qr_unitary, CMatrix, MatError};
use crate::opmodel::OperatorModel;

use super::{LabError, LabResult};

/// GUE sample normalized so the spectral law converges to the semicircle of
/// the given variance.
pub fn gue(n: usize, variance: f64, rng: &mut ChaCha8Rng) -> CMatrix {
    let scale = (variance / n as f64).sqrt();
    let mut g = CMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            g[(i, j)] = Complex64::new(re * scale, im * scale);
        }
    }
    // Hermitian part of a Ginibre with per-entry variance 2v/n has entry
    // variance v/n, the normalization whose spectral law converges to the
    // semicircle of variance v.
    g.hermitian_part()
}

/// Haar-distributed unitary via phase-corrected QR of a complex Ginibre.
pub fn haar_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let mut g = CMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            g[(i, j)] = Complex64::new(re, im);
        }
    }
    qr_unitary(&g)
}

/// Haar-conjugated diagonal atom matrix with deterministic atom counts
/// `round(n * w)`; the counts reproduce the weights exactly whenever
/// `n * w` is integral.
pub fn atom_matrix(
    atoms: [f64; 2],
    weights: [f64; 2],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> CMatrix {
    let k = (n as f64 * weights[0]).round() as usize;
    let mut d = CMatrix::zeros(n);
    for i in 0..n {
        let v = if i < k { atoms[0] } else { atoms[1] };
        d[(i, i)] = Complex64::new(v, 0.0);
    }
    let u = haar_unitary(n, rng);
    u.mul(&d).mul(&u.adjoint())
}

fn realize_base_component(
    spec: &DistributionSpec,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> LabResult<CMatrix> {
    match spec {
        DistributionSpec::Semicircular { variance } => Ok(gue(n, *variance, rng)),
        DistributionSpec::Bernoulli {} => Ok(atom_matrix([1.0, -1.0], [0.5, 0.5], n, rng)),
        DistributionSpec::TwoAtom { atoms, weights } => {
            Ok(atom_matrix(*atoms, *weights, n, rng))
        }
        DistributionSpec::Moments { .. } => Err(LabError::Unsupported(
            "moment-list distributions have no generative matrix model".into(),
        )),
    }
}

/// Partial trace over the second factor: entry `(p, q)` is the normalized
/// trace of block `(p, q)`.
fn partial_trace(big: &CMatrix, m: usize, n: usize) -> CMatrix {
    let mut out = CMatrix::zeros(m);
    for p in 0..m {
        for q in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..n {
                acc += big[(p * n + t, q * n + t)];
            }
            out[(p, q)] = acc / n as f64;
        }
    }
    out
}

/// One realization of the centered sum `(1/sqrt(n)) sum_i sum_k a_k ⊗
/// x_i^(k)` at matrix size `size`.
fn realize_sum(
    model: &OperatorModel,
    gen: &FamilyConfig,
    n: u64,
    size: usize,
    rng: &mut ChaCha8Rng,
) -> LabResult<CMatrix> {
    let m = model.m();
    let mixing = model.family().mixing().clone();
    let mut acc = CMatrix::zeros(m * size);
    for _i in 0..n {
        let base: Vec<CMatrix> = gen
            .components
            .iter()
            .map(|s| realize_base_component(s, size, rng))
            .collect::<LabResult<_>>()?;
        for (k, ak) in model.coeffs().iter().enumerate() {
            let mut xk = CMatrix::zeros(size);
            for (j, y) in base.iter().enumerate() {
                if mixing[k][j] != 0.0 {
                    xk = xk.add(&y.scale(Complex64::new(mixing[k][j], 0.0)));
                }
            }
            acc = acc.add(&ak.kron(&xk));
        }
    }
    Ok(acc.scale(Complex64::new(1.0 / (n as f64).sqrt(), 0.0)))
}

/// Monte Carlo estimate of `E[((b - a0) ⊗ I - S_n(A))^-1]` with `samples`
/// independent realizations at matrix size `size`; returns the sample mean
/// (an `m x m` matrix) and the Frobenius standard error of the mean.
/// Deterministic for a fixed seed: sample `i` draws from stream `i` of the
/// seeded generator regardless of scheduling.
pub fn mc_estimate(
    model: &OperatorModel,
    gen: &FamilyConfig,
    n: u64,
    b: &CMatrix,
    size: usize,
    samples: usize,
    seed: u64,
) -> LabResult<(CMatrix, f64)> {
    if size < 50 {
        return Err(LabError::InvalidSize(format!("matrix size {size} below 50")));
    }
    if samples < 1 {
        return Err(LabError::InvalidSize("need at least one sample".into()));
    }
    if gen.components.len() != model.family().base().len() {
        return Err(LabError::Unsupported(
            "generative family does not match the model's base family".into(),
        ));
    }
    let m = model.m();
    if b.dim() != m {
        return Err(LabError::Mat(MatError::DimensionMismatch(b.dim(), m)));
    }
    let b0 = b.sub(model.a0());
    let estimates: Vec<CMatrix> = (0..samples)
        .into_par_iter()
        .map(|s| -> LabResult<CMatrix> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64 + 1);
            let sum = realize_sum(model, gen, n, size, &mut rng)?;
            let big = b0.kron(&CMatrix::identity(size)).sub(&sum);
            let inv = big.inverse().map_err(|_| LabError::Mat(MatError::Singular))?;
            Ok(partial_trace(&inv, m, size))
        })
        .collect::<LabResult<Vec<_>>>()?;

    let mut mean = CMatrix::zeros(m);
    for e in &estimates {
        mean = mean.add(e);
    }
    mean = mean.scale(Complex64::new(1.0 / samples as f64, 0.0));
    let stderr = if samples > 1 {
        let var: f64 = estimates
            .iter()
            .map(|e| e.sub(&mean).frobenius_norm().powi(2))
            .sum::<f64>()
            / (samples as f64 - 1.0);
        (var / samples as f64).sqrt()
    } else {
        f64::INFINITY
    };
    Ok((mean, stderr))
}

/// Residuals of the two finite-dimensional resolvent identities relating the
/// sum resolvent `R = (b ⊗ I - S_n)^-1` to the leave-one-out resolvent
/// `R' = (b ⊗ I - S_n^[i])^-1`:
///
/// ```text
/// R = R' + n^(-1/2) R' X_i R' + n^(-1) R X_i R' X_i R'
/// R = R' + n^(-1/2) R' X_i R
/// ```
///
/// These hold exactly in finite dimensions, so residuals are round-off only.
pub fn resolvent_identity_check(
    model: &OperatorModel,
    gen: &FamilyConfig,
    n: u64,
    i: u64,
    b: &CMatrix,
    size: usize,
    seed: u64,
) -> LabResult<(f64, f64)> {
    if i == 0 || i > n {
        return Err(LabError::IndexContract(format!("index {i} outside 1..={n}")));
    }
    let m = model.m();
    let mixing = model.family().mixing().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Draw the n independent copies X_1 .. X_n.
    let mut copies: Vec<CMatrix> = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let base: Vec<CMatrix> = gen
            .components
            .iter()
            .map(|s| realize_base_component(s, size, &mut rng))
            .collect::<LabResult<_>>()?;
        let mut xi = CMatrix::zeros(m * size);
        for (k, ak) in model.coeffs().iter().enumerate() {
            let mut xk = CMatrix::zeros(size);
            for (j, y) in base.iter().enumerate() {
                if mixing[k][j] != 0.0 {
                    xk = xk.add(&y.scale(Complex64::new(mixing[k][j], 0.0)));
                }
            }
            xi = xi.add(&ak.kron(&xk));
        }
        copies.push(xi);
    }
    let sqrt_n = (n as f64).sqrt();
    let mut sum = CMatrix::zeros(m * size);
    for x in &copies {
        sum = sum.add(x);
    }
    let s_n = sum.scale(Complex64::new(1.0 / sqrt_n, 0.0));
    let xi = &copies[(i - 1) as usize];
    let s_loo = s_n.sub(&xi.scale(Complex64::new(1.0 / sqrt_n, 0.0)));

    let big_b = b.kron(&CMatrix::identity(size));
    let r = big_b.sub(&s_n).inverse().map_err(|_| LabError::Mat(MatError::Singular))?;
    let rp = big_b.sub(&s_loo).inverse().map_err(|_| LabError::Mat(MatError::Singular))?;

    let inv_sqrt = Complex64::new(1.0 / sqrt_n, 0.0);
    let inv_n = Complex64::new(1.0 / n as f64, 0.0);
    let second = rp.mul(xi).mul(&rp).scale(inv_sqrt);
    let third = r.mul(xi).mul(&rp).mul(xi).mul(&rp).scale(inv_n);
    let res1 = r.sub(&rp).sub(&second).sub(&third).op_norm();
    let res2 = r.sub(&rp).sub(&rp.mul(xi).mul(&r).scale(inv_sqrt)).op_norm();
    Ok((res1, res2))
}
