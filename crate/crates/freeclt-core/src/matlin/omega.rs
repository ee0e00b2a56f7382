//! Well-conditioned matrix domains: invertible matrices whose inverse norm
//! and condition number sit below prescribed bounds, the diagonal rescaling
//! family `Λ(λ, μ)`, and the polar path connecting two domain points.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::eigen::{polar, pow_psd, pow_unitary};
use super::factor::qr_unitary;
use super::{CMatrix, MatError, MatResult};

/// Floating-point guard band for borderline strict inequalities. Membership
/// tests stay strict; margins below this are worth flagging in reports.
pub const OMEGA_GUARD_BAND: f64 = 1e-12;

/// Parameters of the domain `{ b invertible : ||b^-1|| < kappa, cond(b) < c }`
/// together with the contraction budget `theta` and slack `sigma` used when
/// the domain certifies the fixed-point solver.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaParams {
    /// Contraction budget in (0, 1); `kappa = theta / reference-norm-bound`.
    pub theta: f64,
    /// Slack parameter in (0, 1).
    pub sigma: f64,
    /// Condition-number bound, > 1.
    pub c: f64,
    /// Inverse-norm bound, > 0.
    pub kappa: f64,
}

impl OmegaParams {
    pub fn new(theta: f64, sigma: f64, c: f64, kappa: f64) -> MatResult<Self> {
        if !(0.0 < theta && theta < 1.0) || !(0.0 < sigma && sigma < 1.0) {
            return Err(MatError::InvalidParams("theta, sigma must lie in (0, 1)".into()));
        }
        if c <= 1.0 {
            return Err(MatError::InvalidParams("c must exceed 1".into()));
        }
        if !(kappa > 0.0) {
            return Err(MatError::InvalidParams("kappa must be positive".into()));
        }
        Ok(Self { theta, sigma, c, kappa })
    }

    /// Default budget `theta = 0.2`, slack `sigma = 0.9`, condition bound
    /// `c = 2`, with `kappa` derived from the given reference norm bound.
    pub fn default_for_norm(norm_bound: f64) -> MatResult<Self> {
        if !(norm_bound > 0.0) {
            return Err(MatError::InvalidParams("reference norm bound must be positive".into()));
        }
        Self::new(0.2, 0.9, 2.0, 0.2 / norm_bound)
    }

    /// Conservative inner parameters derived from a shrink factor `gamma`.
    pub fn tightened(&self, cc: &CertifiedConstants, norm_bound: f64) -> MatResult<Self> {
        Self::new(cc.theta_star, self.sigma, cc.c_star, cc.theta_star / norm_bound)
    }
}

/// Shrunken constants `(gamma, theta*, c*)` used for the conservative inner
/// domain: `c* = c - (1 + c) gamma` with `0 < gamma < (c-1)/(c+1)` and
/// `0 < theta* < (1 - gamma) theta`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifiedConstants {
    pub gamma: f64,
    pub theta_star: f64,
    pub c_star: f64,
}

impl CertifiedConstants {
    /// Derives inner constants from `params` and a chosen `gamma`, placing
    /// `theta*` at 90% of its allowed range.
    pub fn derive(params: &OmegaParams, gamma: f64) -> MatResult<Self> {
        let gamma_max = (params.c - 1.0) / (params.c + 1.0);
        if !(0.0 < gamma && gamma < gamma_max) {
            return Err(MatError::InvalidParams(format!(
                "gamma must lie in (0, {gamma_max})"
            )));
        }
        let theta_star = 0.9 * (1.0 - gamma) * params.theta;
        let c_star = params.c - (1.0 + params.c) * gamma;
        let cc = Self { gamma, theta_star, c_star };
        cc.validate(params)?;
        Ok(cc)
    }

    pub fn validate(&self, params: &OmegaParams) -> MatResult<()> {
        if !(1.0 < self.c_star && self.c_star < params.c) {
            return Err(MatError::InvalidParams("c_star must lie in (1, c)".into()));
        }
        if !(0.0 < self.theta_star && self.theta_star < (1.0 - self.gamma) * params.theta) {
            return Err(MatError::InvalidParams(
                "theta_star must lie in (0, (1-gamma) theta)".into(),
            ));
        }
        if self.theta_star / (1.0 - self.theta_star) >= params.sigma / self.c_star {
            return Err(MatError::InvalidParams(
                "inner constants violate theta*/(1-theta*) < sigma/c*".into(),
            ));
        }
        Ok(())
    }
}

/// Membership test: `b` invertible with `||b^-1|| < kappa` and
/// `||b|| ||b^-1|| < c`. Non-invertible inputs simply fail the test.
pub fn in_omega(b: &CMatrix, p: &OmegaParams) -> bool {
    match b.inverse() {
        Ok(inv) => {
            let ni = inv.op_norm();
            ni < p.kappa && b.op_norm() * ni < p.c
        }
        Err(_) => false,
    }
}

/// Distances to the two domain boundaries: `(kappa - ||b^-1||, c - cond(b))`.
/// Negative margins mean the point is outside; margins below
/// [`OMEGA_GUARD_BAND`] (relative) are borderline at floating-point scale.
pub fn omega_margins(b: &CMatrix, p: &OmegaParams) -> Option<(f64, f64)> {
    let inv = b.inverse().ok()?;
    let ni = inv.op_norm();
    Some((p.kappa - ni, p.c - b.op_norm() * ni))
}

/// Invertibility bound for a perturbed matrix: if `||x - y|| < sigma_frac /
/// ||x^-1||` with `sigma_frac` in (0,1), the Neumann series of `y^-1` around
/// `x^-1` converges and `||y^-1|| <= ||x^-1|| / (1 - sigma_frac)`.
pub fn neumann_inverse_bound(x: &CMatrix, y: &CMatrix, sigma_frac: f64) -> MatResult<f64> {
    if !(0.0 < sigma_frac && sigma_frac < 1.0) {
        return Err(MatError::InvalidParams("sigma_frac must lie in (0, 1)".into()));
    }
    let x_inv = x.inverse()?;
    let x_inv_norm = x_inv.op_norm();
    let dist = x.sub(y).op_norm();
    if dist >= sigma_frac / x_inv_norm {
        return Err(MatError::PreconditionFailed(format!(
            "||x - y|| = {dist} is not below sigma/||x^-1|| = {}",
            sigma_frac / x_inv_norm
        )));
    }
    Ok(x_inv_norm / (1.0 - sigma_frac))
}

/// Diagonal matrix `diag(lambda, mu, ..., mu)` of size `m`.
pub fn lambda_diag(lambda: Complex64, mu: Complex64, m: usize) -> MatResult<CMatrix> {
    if lambda.norm() == 0.0 || mu.norm() == 0.0 {
        return Err(MatError::ZeroParameter);
    }
    if m == 0 {
        return Err(MatError::InvalidParams("dimension must be at least 1".into()));
    }
    let mut entries = vec![mu; m];
    entries[0] = lambda;
    Ok(CMatrix::diag(&entries))
}

/// Annulus condition guaranteeing `lambda_diag(lambda, mu, m)` lies in the
/// domain for every `m >= 1`:
/// `max(1/kappa, |mu|/c) < |lambda| < c |mu|`, requiring `|mu| > 1/kappa`.
pub fn annulus_contains(lambda: Complex64, mu: Complex64, p: &OmegaParams) -> MatResult<bool> {
    if mu.norm() == 0.0 {
        return Err(MatError::ZeroParameter);
    }
    if mu.norm() <= 1.0 / p.kappa {
        return Err(MatError::PreconditionFailed(format!(
            "|mu| = {} must exceed 1/kappa = {}",
            mu.norm(),
            1.0 / p.kappa
        )));
    }
    let lo = (1.0 / p.kappa).max(mu.norm() / p.c);
    let hi = p.c * mu.norm();
    Ok(lo < lambda.norm() && lambda.norm() < hi)
}

/// Point on the polar-interpolation path between two invertible matrices:
/// with `b1 = U1 P1`, `b2 = U2 P2`, returns
/// `gamma(t) = U1^(1-t) P1^(1-t) U2^t P2^t`.
/// The path stays inside both inverse-norm and norm balls, so it connects
/// points of the domain without leaving it.
pub fn omega_path(b1: &CMatrix, b2: &CMatrix, t: f64) -> MatResult<CMatrix> {
    if b1.dim() != b2.dim() {
        return Err(MatError::DimensionMismatch(b1.dim(), b2.dim()));
    }
    b1.inverse().map_err(|_| MatError::Singular)?;
    b2.inverse().map_err(|_| MatError::Singular)?;
    let (u1, p1) = polar(b1)?;
    let (u2, p2) = polar(b2)?;
    let part1 = pow_unitary(&u1, 1.0 - t)?.mul(&pow_psd(&p1, 1.0 - t));
    let part2 = pow_unitary(&u2, t)?.mul(&pow_psd(&p2, t));
    Ok(part1.mul(&part2))
}

/// Draws a matrix from the domain by construction: `U diag(r) V*` with Haar
/// factors and singular values `r` spread inside `(1/kappa, c/kappa)` so both
/// domain inequalities hold with slack.
pub fn sample_omega_point<R: Rng>(rng: &mut R, m: usize, p: &OmegaParams) -> CMatrix {
    let ginibre = |rng: &mut R| {
        let data: Vec<Complex64> = (0..m * m)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        CMatrix::from_vec(m, data).unwrap()
    };
    let u = qr_unitary(&ginibre(rng));
    let v = qr_unitary(&ginibre(rng));
    let lo = 1.02 / p.kappa;
    let hi = 0.98 * p.c / p.kappa;
    let svals: Vec<Complex64> = (0..m)
        .map(|_| Complex64::new(lo + (hi - lo) * rng.gen::<f64>(), 0.0))
        .collect();
    u.mul(&CMatrix::diag(&svals)).mul(&v.adjoint())
}
