//! Operator-valued models `X = a_0 ⊗ 1 + sum_k a_k ⊗ x^(k)` over a free
//! scalar family, the conditional expectation onto the matrix level, the
//! covariance map `eta`, and the truncated-series matrix-valued Cauchy
//! transform with a certified geometric tail bound.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freemoments::{
    norm_upper_estimate, FamilyConfig, FreeFamilySpec, MomentError, Word,
};
use crate::matlin::{CMatrix, MatError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("series divergent: q = {q} is not below 1 (or tail decay failed: {why})")]
    Divergent { q: f64, why: String },
    #[error("order exceeded: need {needed} series terms, limit {available}")]
    OrderExceeded { needed: usize, available: usize },
    #[error("dimension mismatch")]
    DimensionMismatch,
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error(transparent)]
    Mat(#[from] MatError),
}

pub type ModelResult<T> = Result<T, ModelError>;

/// Linear covariance map `b -> sum_{k,l} a_k b a_l sigma_{k,l}`.
#[derive(Clone, Debug)]
pub struct CovarianceMap {
    coeffs: Vec<CMatrix>,
    sigma: Vec<Vec<f64>>,
}

impl CovarianceMap {
    pub fn new(coeffs: Vec<CMatrix>, sigma: Vec<Vec<f64>>) -> ModelResult<Self> {
        let d = coeffs.len();
        if sigma.len() != d || sigma.iter().any(|r| r.len() != d) {
            return Err(ModelError::DimensionMismatch);
        }
        let m = coeffs.first().map(|c| c.dim()).unwrap_or(1);
        if coeffs.iter().any(|c| c.dim() != m) {
            return Err(ModelError::DimensionMismatch);
        }
        Ok(Self { coeffs, sigma })
    }

    pub fn dim(&self) -> usize {
        self.coeffs.first().map(|c| c.dim()).unwrap_or(1)
    }

    pub fn coeffs(&self) -> &[CMatrix] {
        &self.coeffs
    }

    pub fn sigma(&self) -> &Vec<Vec<f64>> {
        &self.sigma
    }

    /// `eta(b) = sum_{k,l} a_k b a_l sigma_{k,l}`; linear in `b`.
    pub fn apply(&self, b: &CMatrix) -> ModelResult<CMatrix> {
        if b.dim() != self.dim() {
            return Err(ModelError::DimensionMismatch);
        }
        let mut acc = CMatrix::zeros(b.dim());
        for (k, ak) in self.coeffs.iter().enumerate() {
            let akb = ak.mul(b);
            for (l, al) in self.coeffs.iter().enumerate() {
                let s = self.sigma[k][l];
                if s == 0.0 {
                    continue;
                }
                acc = acc.add(&akb.mul(al).scale(Complex64::new(s, 0.0)));
            }
        }
        Ok(acc)
    }

    /// Bound `M = sum_{k,l} ||a_k|| ||a_l|| |sigma_{k,l}|`, so that
    /// `||eta(b)|| <= M ||b||`.
    pub fn bound(&self) -> f64 {
        let norms: Vec<f64> = self.coeffs.iter().map(|a| a.op_norm()).collect();
        let mut m = 0.0;
        for k in 0..self.coeffs.len() {
            for l in 0..self.coeffs.len() {
                m += norms[k] * norms[l] * self.sigma[k][l].abs();
            }
        }
        m
    }
}

/// `X = a_0 ⊗ 1 + sum_k a_k ⊗ x^(k)` with the scalar family declared free.
#[derive(Clone, Debug)]
pub struct OperatorModel {
    m: usize,
    a0: CMatrix,
    coeffs: Vec<CMatrix>,
    family: FreeFamilySpec,
}

/// Normalized partial sum of `n` free copies of a base model; the family is
/// replaced by its rescaled-cumulant version, the constant part is untouched.
#[derive(Clone, Debug)]
pub struct SumModel {
    base: OperatorModel,
    n: u64,
    family_n: FreeFamilySpec,
}

impl OperatorModel {
    pub fn new(a0: CMatrix, coeffs: Vec<CMatrix>, family: FreeFamilySpec) -> ModelResult<Self> {
        let m = a0.dim();
        if coeffs.len() != family.d() {
            return Err(ModelError::DimensionMismatch);
        }
        if coeffs.iter().any(|c| c.dim() != m) {
            return Err(ModelError::DimensionMismatch);
        }
        Ok(Self { m, a0, coeffs, family })
    }

    /// Centered model without a constant coefficient.
    pub fn centered(coeffs: Vec<CMatrix>, family: FreeFamilySpec) -> ModelResult<Self> {
        let m = coeffs.first().map(|c| c.dim()).unwrap_or(1);
        Self::new(CMatrix::zeros(m), coeffs, family)
    }

    /// Scalar model `X = x` for a single distribution.
    pub fn scalar(family: FreeFamilySpec) -> ModelResult<Self> {
        Self::centered(vec![CMatrix::identity(1)], family)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn a0(&self) -> &CMatrix {
        &self.a0
    }

    pub fn coeffs(&self) -> &[CMatrix] {
        &self.coeffs
    }

    pub fn family(&self) -> &FreeFamilySpec {
        &self.family
    }

    pub fn is_selfadjoint(&self, tol: f64) -> bool {
        self.a0.is_hermitian(tol) && self.coeffs.iter().all(|c| c.is_hermitian(tol))
    }

    pub fn covariance_map(&self) -> CovarianceMap {
        CovarianceMap { coeffs: self.coeffs.clone(), sigma: self.family.sigma().clone() }
    }

    /// Coefficients of the free base components after mixing:
    /// `ã_j = sum_k C_{k,j} a_k`.
    fn effective_coeffs(&self) -> Vec<CMatrix> {
        let c = self.family.mixing();
        let dprime = c.first().map(|r| r.len()).unwrap_or(0);
        (0..dprime)
            .map(|j| {
                let mut acc = CMatrix::zeros(self.m);
                for (k, ak) in self.coeffs.iter().enumerate() {
                    if c[k][j] != 0.0 {
                        acc = acc.add(&ak.scale(Complex64::new(c[k][j], 0.0)));
                    }
                }
                acc
            })
            .collect()
    }

    /// Second-moment matrix `E[X* X] = a_0* a_0 + sum_{k,l} a_k* a_l
    /// sigma_{k,l}`; Hermitian positive semidefinite for self-adjoint data.
    pub fn alpha(&self) -> CMatrix {
        let mut acc = self.a0.adjoint().mul(&self.a0);
        let sigma = self.family.sigma();
        for (k, ak) in self.coeffs.iter().enumerate() {
            let akst = ak.adjoint();
            for (l, al) in self.coeffs.iter().enumerate() {
                let s = sigma[k][l];
                if s == 0.0 {
                    continue;
                }
                acc = acc.add(&akst.mul(al).scale(Complex64::new(s, 0.0)));
            }
        }
        acc
    }

    /// Norm estimate of the centered part `A = sum_k a_k ⊗ x^(k)` from the
    /// operator moments `E[(A* A)^k]`, mirroring the scalar estimator:
    /// `safety * max_k max(||E[(A*A)^k]||^(1/2k), ratio estimates)`, floored
    /// by `||alpha||^(1/2)` of the centered part. An estimate, not a bound.
    pub fn norm_upper_estimate(&self, safety: f64) -> ModelResult<f64> {
        norm_estimate_impl(self, &self.family, safety)
    }

    /// Matrix-valued Cauchy transform by truncated series; see
    /// [`SumModel::cauchy_series`] for the summed variant. Returns the value
    /// and the geometric tail bound actually achieved.
    pub fn cauchy_series(
        &self,
        b: &CMatrix,
        tol: f64,
        jmax: usize,
    ) -> ModelResult<(CMatrix, f64)> {
        series_impl(self, &self.family, b, tol, jmax)
    }

    pub fn sum(&self, n: u64) -> SumModel {
        SumModel { base: self.clone(), n, family_n: self.family.clt(n) }
    }

    /// Scalar moment of the full model word; convenience for tests.
    pub fn joint_moment(&self, w: &Word) -> ModelResult<f64> {
        Ok(self.family.joint_moment(w)?)
    }
}

impl SumModel {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn base(&self) -> &OperatorModel {
        &self.base
    }

    pub fn family_n(&self) -> &FreeFamilySpec {
        &self.family_n
    }

    pub fn norm_upper_estimate(&self, safety: f64) -> ModelResult<f64> {
        norm_estimate_impl(&self.base, &self.family_n, safety)
    }

    pub fn cauchy_series(
        &self,
        b: &CMatrix,
        tol: f64,
        jmax: usize,
    ) -> ModelResult<(CMatrix, f64)> {
        series_impl(&self.base, &self.family_n, b, tol, jmax)
    }
}

/// Sufficient-condition membership test for the matrix-valued resolvent set.
#[derive(Clone, Debug, PartialEq)]
pub enum ResolventMembership {
    /// `||b^-1|| < 1 / norm-estimate` certifies invertibility of `b - X`.
    Member { certificate: &'static str },
    /// The sufficient condition fails; membership is undecided.
    Unknown,
}

pub fn resolvent_member(model: &OperatorModel, b: &CMatrix) -> ResolventMembership {
    let est = match model.norm_upper_estimate(1.1) {
        Ok(e) => e,
        Err(_) => return ResolventMembership::Unknown,
    };
    match b.inverse() {
        Ok(inv) if est > 0.0 && inv.op_norm() < 1.0 / est => {
            ResolventMembership::Member { certificate: "norm" }
        }
        Ok(_) => ResolventMembership::Unknown,
        Err(_) => ResolventMembership::Unknown,
    }
}

/// Weighted word-moment accumulator.
///
/// Computes `W(L) = sum_{|w| = L} tau(x_w) f(w_1) f(w_2) ... f(w_L)` for
/// factor matrices `f` chosen per letter and per position parity, via the
/// first-block recursion over noncrossing partitions. Gaps contribute whole
/// subsums, so the cost is polynomial in `L` instead of `d^L`.
///
/// `factors[p][j]` is the factor used for base component `j` at even (`p=0`)
/// or odd (`p=1`) absolute position; the series case uses identical parities.
fn weighted_word_sums(
    m: usize,
    factors: &[Vec<CMatrix>; 2],
    cumulant: &dyn Fn(usize, usize) -> f64, // (base component j, block size s)
    lmax: usize,
) -> Vec<CMatrix> {
    let dprime = factors[0].len();
    let mut w: Vec<[Option<CMatrix>; 2]> = Vec::with_capacity(lmax + 1);
    w.push([Some(CMatrix::identity(m)), Some(CMatrix::identity(m))]);

    // t_table[j][s][t][p]: ordered sum over gap splits of
    //   f_j W(g_1) f_j W(g_2) ... f_j W(g_s),  sum g_i = t,
    // with the first factor at parity p and parities advanced through the
    // gaps. Filled diagonally as W grows.
    let mut t_table: Vec<Vec<Vec<[Option<CMatrix>; 2]>>> = vec![Vec::new(); dprime];

    for l in 1..=lmax {
        // Extend T rows so that T[j][s][l - s][p] is available.
        for (j, rows) in t_table.iter_mut().enumerate() {
            for s in 1..=l {
                if rows.len() < s {
                    rows.push(Vec::new());
                }
                let t = l - s;
                while rows[s - 1].len() <= t {
                    let tt = rows[s - 1].len();
                    let mut entry: [Option<CMatrix>; 2] = [None, None];
                    for p in 0..2 {
                        let mut acc = CMatrix::zeros(m);
                        for g in 0..=tt {
                            // Gap of length g after the first block letter,
                            // then the remaining s-1 letters.
                            let wg = w[g][(p + 1) % 2].as_ref().expect("filled");
                            let rest_par = (p + 1 + g) % 2;
                            let rest = if s == 1 {
                                if tt - g == 0 {
                                    Some(CMatrix::identity(m))
                                } else {
                                    None
                                }
                            } else {
                                rows[s - 2][tt - g][rest_par].clone()
                            };
                            if let Some(rest) = rest {
                                acc = acc.add(&factors[p][j].mul(wg).mul(&rest));
                            }
                        }
                        entry[p] = Some(acc);
                    }
                    rows[s - 1].push(entry);
                }
            }
        }
        let mut wl: [Option<CMatrix>; 2] = [None, None];
        for (p, slot) in wl.iter_mut().enumerate() {
            let mut acc = CMatrix::zeros(m);
            for s in 1..=l {
                for j in 0..dprime {
                    let k = cumulant(j, s);
                    if k == 0.0 {
                        continue;
                    }
                    let t = t_table[j][s - 1][l - s][p].as_ref().expect("filled");
                    acc = acc.add(&t.scale(Complex64::new(k, 0.0)));
                }
            }
            *slot = Some(acc);
        }
        w.push(wl);
    }
    w.into_iter().map(|pair| pair.into_iter().next().unwrap().unwrap()).collect()
}

fn norm_estimate_impl(
    model: &OperatorModel,
    family: &FreeFamilySpec,
    safety: f64,
) -> ModelResult<f64> {
    if family.max_order() < 8 {
        return Err(MomentError::OrderExceeded { needed: 8, available: family.max_order() }.into());
    }
    if model.m == 1 && model.coeffs.len() == 1 {
        // Scalar single-component models reduce to the moment estimator of
        // the component law scaled by the coefficient; this uses every
        // available moment order.
        let coeff = model.coeffs[0].op_norm();
        let comp = family.component_moments(0, family.max_order());
        let est = norm_upper_estimate(&comp, safety)? * coeff;
        let floor = centered_alpha(model, family).op_norm().sqrt();
        return Ok(est.max(floor));
    }
    let eff = model.effective_coeffs();
    let eff_adj: Vec<CMatrix> = eff.iter().map(|a| a.adjoint()).collect();
    let factors = [eff_adj, eff];
    let kmax = (family.max_order() / 2).min(8);
    let sums = weighted_word_sums(
        model.m,
        &factors,
        &|j, s| family.base_cumulants()[j].cumulant(s),
        2 * kmax,
    );
    let mut best: f64 = 0.0;
    let mut prev = 1.0;
    for k in 1..=kmax {
        let mk = sums[2 * k].op_norm();
        best = best.max(mk.powf(1.0 / (2.0 * k as f64)));
        if k >= 2 && prev > 0.0 {
            best = best.max((mk / prev).sqrt());
        }
        prev = mk;
    }
    let floor = centered_alpha(model, family).op_norm().sqrt();
    Ok((safety * best).max(floor))
}

fn centered_alpha(model: &OperatorModel, family: &FreeFamilySpec) -> CMatrix {
    let sigma = family.sigma();
    let mut acc = CMatrix::zeros(model.m);
    for (k, ak) in model.coeffs.iter().enumerate() {
        let akst = ak.adjoint();
        for (l, al) in model.coeffs.iter().enumerate() {
            let s = sigma[k][l];
            if s == 0.0 {
                continue;
            }
            acc = acc.add(&akst.mul(al).scale(Complex64::new(s, 0.0)));
        }
    }
    acc
}

fn series_impl(
    model: &OperatorModel,
    family: &FreeFamilySpec,
    b: &CMatrix,
    tol: f64,
    jmax: usize,
) -> ModelResult<(CMatrix, f64)> {
    if b.dim() != model.m {
        return Err(ModelError::DimensionMismatch);
    }
    let b0 = b.sub(&model.a0);
    let binv = b0.inverse().map_err(|_| ModelError::Mat(MatError::Singular))?;
    let binv_norm = binv.op_norm();
    let anorm = norm_estimate_impl(model, family, 1.1)?;
    if anorm == 0.0 {
        return Ok((binv, 0.0));
    }
    let q = binv_norm * anorm;
    if q >= 1.0 {
        return Err(ModelError::Divergent { q, why: "geometric ratio at least 1".into() });
    }
    // Smallest truncation order whose geometric tail is below tol.
    let needed = ((tol * (1.0 - q) / binv_norm).ln() / q.ln() - 1.0).ceil().max(0.0) as usize;
    let limit = jmax.min(family.max_order());
    if needed > limit {
        return Err(ModelError::OrderExceeded { needed, available: limit });
    }
    let eff: Vec<CMatrix> = model.effective_coeffs().iter().map(|a| a.mul(&binv)).collect();
    let factors = [eff.clone(), eff];
    let sums = weighted_word_sums(
        model.m,
        &factors,
        &|j, s| family.base_cumulants()[j].cumulant(s),
        needed,
    );
    let mut acc = CMatrix::zeros(model.m);
    let mut layer_norms = Vec::with_capacity(needed + 1);
    for wl in &sums {
        let term = binv.mul(wl);
        layer_norms.push(term.op_norm());
        acc = acc.add(&term);
    }
    // The analytic tail bound uses a heuristic norm estimate; demand that the
    // computed layers actually decay geometrically (parity-aware) before
    // trusting it.
    let floor = tol * 1e-2;
    for j in 8..layer_norms.len() {
        let prev = layer_norms[j - 2];
        if layer_norms[j] > floor && layer_norms[j] > prev * 1.000001 {
            return Err(ModelError::Divergent {
                q,
                why: format!(
                    "layer {j} norm {} exceeds layer {} norm {}",
                    layer_norms[j],
                    j - 2,
                    prev
                ),
            });
        }
    }
    let tail = binv_norm * q.powi(needed as i32 + 1) / (1.0 - q);
    Ok((acc, tail))
}

/// JSON schema of an operator model.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub m: usize,
    #[serde(default)]
    pub a0: Option<CMatrix>,
    pub coeffs: Vec<CMatrix>,
    pub family: FamilyConfig,
}

impl ModelConfig {
    pub fn to_model(&self) -> ModelResult<OperatorModel> {
        let family = self.family.to_family()?;
        let a0 = self.a0.clone().unwrap_or_else(|| CMatrix::zeros(self.m));
        if a0.dim() != self.m {
            return Err(ModelError::DimensionMismatch);
        }
        OperatorModel::new(a0, self.coeffs.clone(), family)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freemoments::MomentSequence;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalar_semicircular(order: usize) -> OperatorModel {
        let fam = FreeFamilySpec::semicircular_components(&[1.0], order).unwrap();
        OperatorModel::scalar(fam).unwrap()
    }

    fn scalar_bernoulli(order: usize) -> OperatorModel {
        let fam =
            FreeFamilySpec::free_components(vec![MomentSequence::bernoulli_symmetric(order)])
                .unwrap();
        OperatorModel::scalar(fam).unwrap()
    }

    #[test]
    fn eta_examples() {
        let fam = FreeFamilySpec::free_components(vec![MomentSequence::semicircular(1.0, 8)])
            .unwrap();
        let model = OperatorModel::scalar(fam.clone()).unwrap();
        let eta = model.covariance_map();
        let b = CMatrix::scalar(1, c(0.7, -0.3));
        assert!(eta.apply(&b).unwrap().sub(&b).op_norm() < 1e-15);
        assert!((eta.bound() - 1.0).abs() < 1e-12);

        let flip = CMatrix::from_real(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let model2 = OperatorModel::centered(vec![flip], fam).unwrap();
        let eta2 = model2.covariance_map();
        let d = CMatrix::diag(&[c(2.0, 0.0), c(5.0, 0.0)]);
        let want = CMatrix::diag(&[c(5.0, 0.0), c(2.0, 0.0)]);
        assert!(eta2.apply(&d).unwrap().sub(&want).op_norm() < 1e-14);

        // Zero covariance gives the zero map and zero bound.
        let zero_fam = FreeFamilySpec::free_components(vec![MomentSequence::from_moments(
            vec![0.0; 8],
        )])
        .unwrap();
        let model3 = OperatorModel::scalar(zero_fam).unwrap();
        assert_eq!(model3.covariance_map().bound(), 0.0);
        assert_eq!(model3.covariance_map().apply(&b).unwrap().op_norm(), 0.0);
    }

    #[test]
    fn eta_bound_scales_with_coefficient() {
        let fam = FreeFamilySpec::free_components(vec![MomentSequence::semicircular(1.0, 8)])
            .unwrap();
        let model =
            OperatorModel::centered(vec![CMatrix::scalar(1, c(2.0, 0.0))], fam).unwrap();
        assert!((model.covariance_map().bound() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_examples() {
        let model = scalar_semicircular(8);
        assert!((model.alpha()[(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);

        let a = CMatrix::from_real(2, &[1.0, 2.0, 0.0, 1.0]).unwrap();
        let fam = FreeFamilySpec::free_components(vec![MomentSequence::semicircular(1.0, 8)])
            .unwrap();
        let model2 = OperatorModel::centered(vec![a.clone()], fam.clone()).unwrap();
        assert!(model2.alpha().sub(&a.adjoint().mul(&a)).op_norm() < 1e-14);

        let zero = OperatorModel::centered(vec![CMatrix::zeros(2)], fam).unwrap();
        assert_eq!(zero.alpha().op_norm(), 0.0);
    }

    #[test]
    fn series_matches_semicircle_closed_form() {
        let model = scalar_semicircular(96);
        let b = CMatrix::scalar(1, c(3.0, 0.0));
        let (g, tail) = model.cauchy_series(&b, 1e-10, 100).unwrap();
        let want = (3.0 - 5.0_f64.sqrt()) / 2.0;
        assert!(tail < 1e-10);
        assert!((g[(0, 0)].re - want).abs() < 2e-10, "{} vs {want}", g[(0, 0)].re);
        assert!(g[(0, 0)].im.abs() < 1e-14);
    }

    #[test]
    fn series_far_field() {
        let model = scalar_semicircular(16);
        let b = CMatrix::scalar(1, c(100.0, 0.0));
        let (g, _) = model.cauchy_series(&b, 1e-12, 16).unwrap();
        // 1/z + 1/z^3 + 2/z^5 to high accuracy.
        let want = 0.01 + 1e-6 + 2e-10;
        assert!((g[(0, 0)].re - want).abs() < 1e-13);
    }

    #[test]
    fn series_rejects_singular_b() {
        let model = scalar_semicircular(16);
        let b = CMatrix::zeros(1);
        assert!(matches!(
            model.cauchy_series(&b, 1e-8, 16),
            Err(ModelError::Mat(MatError::Singular))
        ));
    }

    #[test]
    fn series_divergent_inside_spectrum_estimate() {
        let model = scalar_semicircular(16);
        let b = CMatrix::scalar(1, c(1.0, 0.0));
        assert!(matches!(
            model.cauchy_series(&b, 1e-8, 16),
            Err(ModelError::Divergent { .. })
        ));
    }

    #[test]
    fn series_order_exceeded_when_jmax_small() {
        let model = scalar_semicircular(96);
        let b = CMatrix::scalar(1, c(3.0, 0.0));
        assert!(matches!(
            model.cauchy_series(&b, 1e-10, 16),
            Err(ModelError::OrderExceeded { .. })
        ));
    }

    #[test]
    fn scalar_reduction_matches_bernoulli_resolvent() {
        // G(z) = z / (z^2 - 1) for the symmetric Bernoulli law.
        let model = scalar_bernoulli(64);
        for z in [3.0, 5.0, -4.0] {
            let (g, _) = model.cauchy_series(&CMatrix::scalar(1, c(z, 0.0)), 1e-11, 80).unwrap();
            let want = z / (z * z - 1.0);
            assert!((g[(0, 0)].re - want).abs() < 1e-10, "z={z}");
        }
    }

    #[test]
    fn sum_model_n1_is_identity() {
        let model = scalar_bernoulli(32);
        let b = CMatrix::scalar(1, c(4.0, 0.0));
        let (g0, _) = model.cauchy_series(&b, 1e-11, 64).unwrap();
        let (g1, _) = model.sum(1).cauchy_series(&b, 1e-11, 64).unwrap();
        assert_eq!(g0[(0, 0)], g1[(0, 0)]);
    }

    #[test]
    fn sum_model_semicircular_is_stable() {
        let model = scalar_semicircular(96);
        let b = CMatrix::scalar(1, c(3.0, 0.0));
        let (g0, _) = model.cauchy_series(&b, 1e-11, 80).unwrap();
        for n in [2, 7, 64] {
            let (gn, _) = model.sum(n).cauchy_series(&b, 1e-11, 80).unwrap();
            assert!((g0[(0, 0)] - gn[(0, 0)]).norm() < 1e-11, "n={n}");
        }
    }

    #[test]
    fn matrix_series_agrees_with_eigen_decomposition() {
        // a1 = [[0,1],[1,0]] diagonalizes to +/- 1, so for b = z I the
        // transform is the average of scalar transforms at (z -+ s)-type
        // branches; both diagonal entries equal the scalar value.
        let fam = FreeFamilySpec::semicircular_components(&[1.0], 32).unwrap();
        let flip = CMatrix::from_real(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let model = OperatorModel::centered(vec![flip], fam).unwrap();
        let b = CMatrix::scalar(2, c(8.0, 0.0));
        let (g, _) = model.cauchy_series(&b, 1e-11, 40).unwrap();
        let scalar = scalar_semicircular(32);
        let (gs, _) = scalar.cauchy_series(&CMatrix::scalar(1, c(8.0, 0.0)), 1e-11, 40).unwrap();
        assert!((g[(0, 0)] - gs[(0, 0)]).norm() < 1e-11);
        assert!((g[(1, 1)] - gs[(0, 0)]).norm() < 1e-11);
        assert!(g[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn norm_estimate_floors_at_alpha() {
        let model = scalar_semicircular(16);
        let est = model.norm_upper_estimate(1.1).unwrap();
        assert!(est >= 1.0, "estimate {est} below alpha floor");
        assert!(est <= 2.3);
    }

    #[test]
    fn resolvent_membership_examples() {
        let model = scalar_bernoulli(16);
        let far = CMatrix::scalar(1, c(10.0, 0.0));
        assert_eq!(
            resolvent_member(&model, &far),
            ResolventMembership::Member { certificate: "norm" }
        );
        let near = CMatrix::scalar(1, c(0.5, 0.0));
        assert_eq!(resolvent_member(&model, &near), ResolventMembership::Unknown);
        let singular = CMatrix::zeros(1);
        assert_eq!(resolvent_member(&model, &singular), ResolventMembership::Unknown);
    }

    #[test]
    fn model_config_round_trip() {
        let j = r#"{
            "m": 1,
            "coeffs": [[[[1.0, 0.0]]]],
            "family": {"components": [{"kind": "semicircular", "variance": 1.0}]}
        }"#;
        let cfg: ModelConfig = serde_json::from_str(j).unwrap();
        let model = cfg.to_model().unwrap();
        assert_eq!(model.m(), 1);
        assert!(model.is_selfadjoint(1e-12));
    }
}
