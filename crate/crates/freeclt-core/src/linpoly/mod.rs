//! Noncommutative polynomials, self-adjoint linearization pencils, corner
//! recovery of scalar Cauchy transforms, and the diagonal rescaling identity.
//!
//! A pencil `(a_0, a_1 .. a_d)` linearizes `p` when, for Hermitian matrix
//! substitutions `A` of any size and `lambda` off the spectrum of `p(A)`,
//! `diag(lambda, 1, .., 1) ⊗ I - (a_0 ⊗ I + sum a_k ⊗ A_k)` is invertible
//! and the top-left block of its inverse equals `(lambda - p(A))^-1`. The
//! construction is validated numerically rather than trusted.

mod parse;

pub use parse::parse_poly;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::freemoments::{FreeFamilySpec, Word};
use crate::matlin::{annulus_contains, lambda_diag, CMatrix, MatError, OmegaParams};
use crate::opmodel::{CovarianceMap, ModelError, OperatorModel};
use crate::scsolver::{solve_cauchy, SemicircularSpec, SolveError};

#[derive(Debug, Error)]
pub enum PencilError {
    #[error("cannot linearize the zero polynomial")]
    ZeroPolynomial,
    #[error("polynomial is not self-adjoint")]
    NotSelfAdjoint,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("pencil failed numeric validation: {0}")]
    NotValidated(String),
    #[error("argument outside the evaluable domain: {0}")]
    DomainError(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mat(#[from] MatError),
}

pub type PencilResult<T> = Result<T, PencilError>;

/// Noncommutative polynomial in `d` generators, kept in canonical merged form
/// (sorted words, zero coefficients dropped).
#[derive(Clone, Debug, PartialEq)]
pub struct NcPoly {
    d: usize,
    terms: BTreeMap<Word, Complex64>,
}

impl NcPoly {
    pub fn zero(d: usize) -> Self {
        Self { d, terms: BTreeMap::new() }
    }

    pub fn constant(d: usize, c: Complex64) -> Self {
        let mut p = Self::zero(d);
        p.add_term(c, Word(vec![]));
        p
    }

    /// The generator `x_{k+1}` (0-based index `k`).
    pub fn var(d: usize, k: usize) -> Self {
        assert!(k < d, "generator index out of range");
        let mut p = Self::zero(d);
        p.add_term(Complex64::new(1.0, 0.0), Word(vec![k]));
        p
    }

    pub fn add_term(&mut self, c: Complex64, w: Word) {
        if c.norm() == 0.0 {
            return;
        }
        let entry = self.terms.entry(w).or_insert(Complex64::new(0.0, 0.0));
        *entry += c;
        if entry.norm() == 0.0 {
            let keys: Vec<Word> =
                self.terms.iter().filter(|(_, v)| v.norm() == 0.0).map(|(k, _)| k.clone()).collect();
            for k in keys {
                self.terms.remove(&k);
            }
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &Complex64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|w| w.len()).max().unwrap_or(0)
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut lens = self.terms.keys().map(|w| w.len());
        match lens.next() {
            None => true,
            Some(first) => lens.all(|l| l == first),
        }
    }

    pub fn add(&self, other: &NcPoly) -> NcPoly {
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(*c, w.clone());
        }
        out
    }

    pub fn neg(&self) -> NcPoly {
        let mut out = NcPoly::zero(self.d);
        for (w, c) in &self.terms {
            out.add_term(-c, w.clone());
        }
        out
    }

    pub fn sub(&self, other: &NcPoly) -> NcPoly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &NcPoly) -> NcPoly {
        let mut out = NcPoly::zero(self.d);
        for (w1, c1) in &self.terms {
            for (w2, c2) in &other.terms {
                let mut w = w1.0.clone();
                w.extend_from_slice(&w2.0);
                out.add_term(c1 * c2, Word(w));
            }
        }
        out
    }

    pub fn scale(&self, c: Complex64) -> NcPoly {
        let mut out = NcPoly::zero(self.d);
        for (w, coeff) in &self.terms {
            out.add_term(coeff * c, w.clone());
        }
        out
    }

    pub fn pow(&self, e: u32) -> NcPoly {
        let mut out = NcPoly::constant(self.d, Complex64::new(1.0, 0.0));
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Adjoint: conjugate coefficients, reverse words (generators are
    /// self-adjoint).
    pub fn adjoint(&self) -> NcPoly {
        let mut out = NcPoly::zero(self.d);
        for (w, c) in &self.terms {
            out.add_term(c.conj(), w.reversed());
        }
        out
    }

    pub fn is_selfadjoint(&self) -> bool {
        let adj = self.adjoint();
        if adj.terms.len() != self.terms.len() {
            return false;
        }
        self.terms.iter().all(|(w, c)| {
            adj.terms.get(w).is_some_and(|c2| (c - c2).norm() <= 1e-14 * c.norm().max(1.0))
        })
    }

    /// Evaluates at square-matrix substitutions (one per generator).
    pub fn eval_matrices(&self, subs: &[CMatrix]) -> PencilResult<CMatrix> {
        if subs.len() != self.d {
            return Err(PencilError::Parse("wrong number of substitution matrices".into()));
        }
        let n = subs.first().map(|a| a.dim()).unwrap_or(1);
        let mut acc = CMatrix::zeros(n);
        for (w, c) in &self.terms {
            let mut prod = CMatrix::scalar(n, *c);
            for &letter in &w.0 {
                prod = prod.mul(&subs[letter]);
            }
            acc = acc.add(&prod);
        }
        Ok(acc)
    }
}

/// Linearization pencil `(a_0, a_1 .. a_d)` of dimension `m`, tagged with the
/// degree of its source polynomial and a lazily computed validation result
/// for the rescaling identity.
#[derive(Clone, Debug)]
pub struct LinearPencil {
    a0: CMatrix,
    coeffs: Vec<CMatrix>,
    degree: usize,
    source: Option<NcPoly>,
    mu_residual: OnceLock<f64>,
}

impl LinearPencil {
    pub fn new(a0: CMatrix, coeffs: Vec<CMatrix>, degree: usize, source: Option<NcPoly>) -> Self {
        Self { a0, coeffs, degree, source, mu_residual: OnceLock::new() }
    }

    pub fn m(&self) -> usize {
        self.a0.dim()
    }

    pub fn a0(&self) -> &CMatrix {
        &self.a0
    }

    pub fn coeffs(&self) -> &[CMatrix] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn source(&self) -> Option<&NcPoly> {
        self.source.as_ref()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.a0.is_hermitian(tol) && self.coeffs.iter().all(|a| a.is_hermitian(tol))
    }

    /// `L(A) = a_0 ⊗ I + sum_k a_k ⊗ A_k` for substitutions of size `n`.
    pub fn apply(&self, subs: &[CMatrix]) -> CMatrix {
        let n = subs.first().map(|a| a.dim()).unwrap_or(1);
        let mut big = self.a0.kron(&CMatrix::identity(n));
        for (ak, sub) in self.coeffs.iter().zip(subs) {
            big = big.add(&ak.kron(sub));
        }
        big
    }

    /// Default exterior radius `|mu|^g / c*` with `|mu| = 2 (1 + sum ||a_k||)`.
    pub fn default_exterior_radius(&self, c_star: f64) -> f64 {
        let mu = 2.0 * (1.0 + self.coeffs.iter().map(|a| a.op_norm()).sum::<f64>());
        mu.powi(self.degree.max(1) as i32) / c_star
    }

    /// Residual of the rescaling identity on random Hermitian substitutions,
    /// computed once per pencil (trials 20, size 5, fixed seed). The result
    /// decides whether rescaled evaluation is admissible.
    pub fn mu_identity_residual(&self) -> PencilResult<f64> {
        if let Some(&r) = self.mu_residual.get() {
            return Ok(r);
        }
        let p = self
            .source
            .as_ref()
            .ok_or_else(|| PencilError::NotValidated("pencil has no source polynomial".into()))?;
        let r = validate_mu_identity(p, self, 20, 5, 0x5EED)?;
        let _ = self.mu_residual.set(r);
        Ok(r)
    }
}

/// Canonical monomial linearization.
///
/// Constant and degree-one terms sit in the `(0,0)` corner; every monomial of
/// degree `g >= 2` contributes a bidiagonal block of size `g - 1`: the first
/// letter (carrying the coefficient) in the top row, the middle letters on
/// the block superdiagonal, the last letter in the first column. The pencil
/// dimension is `1 + sum (g_j - 1)`, at most one plus the total monomial
/// length.
pub fn linearize(p: &NcPoly) -> PencilResult<LinearPencil> {
    if p.is_zero() {
        return Err(PencilError::ZeroPolynomial);
    }
    let d = p.d();
    let m = 1 + p.terms().map(|(w, _)| w.len().saturating_sub(1)).sum::<usize>();
    let mut a: Vec<CMatrix> = (0..=d).map(|_| CMatrix::zeros(m)).collect();
    let one = Complex64::new(1.0, 0.0);
    let mut r = 1;
    for (w, &c) in p.terms() {
        match w.len() {
            0 => a[0][(0, 0)] += c,
            1 => a[w.0[0] + 1][(0, 0)] += c,
            g => {
                a[w.0[0] + 1][(0, r)] += c;
                for t in 2..g {
                    a[w.0[t - 1] + 1][(r + t - 2, r + t - 1)] += one;
                }
                a[w.0[g - 1] + 1][(r + g - 2, 0)] += one;
                r += g - 1;
            }
        }
    }
    let a0 = a.remove(0);
    Ok(LinearPencil::new(a0, a, p.degree(), Some(p.clone())))
}

/// Hermitian linearization of a self-adjoint polynomial.
///
/// Returns the canonical pencil when its coefficients already come out
/// Hermitian; otherwise applies the doubling construction, where each
/// adjoint pair of monomials (or half of a palindromic monomial) occupies an
/// anti-diagonal pair of bidiagonal blocks. The doubled dimension can exceed
/// the canonical one for palindromic monomials of degree three and above.
pub fn hermitian_pencil(p: &NcPoly) -> PencilResult<LinearPencil> {
    if p.is_zero() {
        return Err(PencilError::ZeroPolynomial);
    }
    if !p.is_selfadjoint() {
        return Err(PencilError::NotSelfAdjoint);
    }
    let canonical = linearize(p)?;
    if canonical.is_hermitian(1e-14) {
        return Ok(canonical);
    }

    // Collect representatives: palindromes at half weight, one member of each
    // adjoint pair at full weight.
    let mut reps: Vec<(Complex64, Vec<usize>)> = Vec::new();
    let mut constant = Complex64::new(0.0, 0.0);
    let mut linear: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); p.d()];
    for (w, &c) in p.terms() {
        match w.len() {
            0 => constant = c,
            1 => linear[w.0[0]] = c,
            _ => {
                let rev = w.reversed();
                if *w == rev {
                    reps.push((c * 0.5, w.0.clone()));
                } else if w.0 < rev.0 {
                    reps.push((c, w.0.clone()));
                }
            }
        }
    }
    let m = 1 + reps.iter().map(|(_, w)| 2 * (w.len() - 1)).sum::<usize>();
    let mut a: Vec<CMatrix> = (0..=p.d()).map(|_| CMatrix::zeros(m)).collect();
    let one = Complex64::new(1.0, 0.0);
    a[0][(0, 0)] = constant;
    for (k, &c) in linear.iter().enumerate() {
        a[k + 1][(0, 0)] = c;
    }
    let mut r = 1;
    for (c, w) in &reps {
        let g = w.len();
        let h = g - 1;
        // Block layout: rows [r, r+h) hold the chain, rows [r+h, r+2h) its
        // mirror; the 2h x 2h constant block is [[I, -I], [-I, I]].
        for i in 0..h {
            a[0][(r + i, r + i)] += one;
            a[0][(r + h + i, r + h + i)] += one;
            a[0][(r + i, r + h + i)] -= one;
            a[0][(r + h + i, r + i)] -= one;
        }
        a[w[0] + 1][(0, r)] += *c;
        a[w[0] + 1][(r, 0)] += c.conj();
        a[w[g - 1] + 1][(0, r + 2 * h - 1)] += one;
        a[w[g - 1] + 1][(r + 2 * h - 1, 0)] += one;
        for t in 2..g {
            a[w[t - 1] + 1][(r + t - 1, r + h + t - 2)] += one;
            a[w[t - 1] + 1][(r + h + t - 2, r + t - 1)] += one;
        }
        r += 2 * h;
    }
    let a0 = a.remove(0);
    Ok(LinearPencil::new(a0, a, p.degree(), Some(p.clone())))
}

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let scale = 1.0 / (n as f64).sqrt();
    let mut m = CMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            m[(i, j)] = Complex64::new(re * scale, im * scale);
        }
    }
    m.hermitian_part()
}

/// Corner block of `(Lambda(lambda, mu) ⊗ I_n - L(A))^-1`.
fn corner_block(
    pencil: &LinearPencil,
    subs: &[CMatrix],
    lambda: Complex64,
    mu: Complex64,
) -> PencilResult<CMatrix> {
    let n = subs.first().map(|a| a.dim()).unwrap_or(1);
    let m = pencil.m();
    let lam = lambda_diag(lambda, mu, m)?;
    let big = lam.kron(&CMatrix::identity(n)).sub(&pencil.apply(subs));
    let inv = big.inverse()?;
    Ok(inv.block(n, 0, 0))
}

/// Max residual of the corner identity
/// `(lambda - p(A))^-1 = corner((Lambda(lambda,1) ⊗ I - L(A))^-1)`
/// over random Hermitian substitutions and random `lambda` with
/// `|Im lambda| >= 1`.
pub fn validate_pencil(
    p: &NcPoly,
    pencil: &LinearPencil,
    trials: usize,
    n: usize,
    seed: u64,
) -> PencilResult<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let subs: Vec<CMatrix> = (0..p.d()).map(|_| random_hermitian(n, &mut rng)).collect();
        let re: f64 = StandardNormal.sample(&mut rng);
        let im_mag: f64 = 1.0 + rand::Rng::gen::<f64>(&mut rng);
        let im = if rand::Rng::gen::<bool>(&mut rng) { im_mag } else { -im_mag };
        let lambda = Complex64::new(re, im);
        let pa = p.eval_matrices(&subs)?;
        let direct = CMatrix::scalar(n, lambda).sub(&pa).inverse()?;
        let corner = corner_block(pencil, &subs, lambda, Complex64::new(1.0, 0.0))?;
        worst = worst.max(direct.sub(&corner).op_norm());
    }
    Ok(worst)
}

/// Max residual of the rescaling identity
/// `mu^(g-1) (lambda mu^(g-1) - p(A))^-1 = corner((Lambda(lambda,mu) ⊗ I - L(A))^-1)`
/// over random substitutions and random `(lambda, mu)`.
pub fn validate_mu_identity(
    p: &NcPoly,
    pencil: &LinearPencil,
    trials: usize,
    n: usize,
    seed: u64,
) -> PencilResult<f64> {
    let g = pencil.degree().max(1) as i32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let subs: Vec<CMatrix> = (0..p.d()).map(|_| random_hermitian(n, &mut rng)).collect();
        let mu_mag = 1.5 + rand::Rng::gen::<f64>(&mut rng);
        let mu_arg = rand::Rng::gen::<f64>(&mut rng) * std::f64::consts::TAU;
        let mu = Complex64::from_polar(mu_mag, mu_arg);
        let re: f64 = StandardNormal.sample(&mut rng);
        let lambda = Complex64::new(re, 1.5 + rand::Rng::gen::<f64>(&mut rng));
        let target = lambda * mu.powi(g - 1);
        let pa = p.eval_matrices(&subs)?;
        let factor = mu.powi(g - 1);
        let direct =
            CMatrix::scalar(n, target).sub(&pa).inverse()?.scale(factor);
        let corner = corner_block(pencil, &subs, lambda, mu)?;
        worst = worst.max(direct.sub(&corner).op_norm());
    }
    Ok(worst)
}

/// Engine choice for pencil evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Semicircular fixed-point solve at the rescaling argument.
    FixedPoint,
    /// Truncated moment series; requires an exterior argument.
    Series,
}

/// Evaluation configuration for pencil transforms.
#[derive(Clone, Debug)]
pub struct CauchyEvalConfig {
    pub engine: Engine,
    pub tol: f64,
    /// Exterior radius gating the series engine.
    pub r_exterior: f64,
    /// Domain parameters used for annulus admissibility checks.
    pub omega: OmegaParams,
    pub jmax: usize,
    pub max_iter: usize,
}

impl CauchyEvalConfig {
    pub fn fixed_point(tol: f64) -> Self {
        Self {
            engine: Engine::FixedPoint,
            tol,
            r_exterior: 0.0,
            omega: OmegaParams::new(0.2, 0.9, 2.0, 0.1).expect("valid defaults"),
            jmax: 256,
            max_iter: 50_000,
        }
    }

    pub fn series(tol: f64, r_exterior: f64) -> Self {
        Self {
            engine: Engine::Series,
            tol,
            r_exterior,
            omega: OmegaParams::new(0.2, 0.9, 2.0, 0.1).expect("valid defaults"),
            jmax: 256,
            max_iter: 50_000,
        }
    }
}

/// Threshold below which the rescaling-identity residual admits a pencil.
pub const MU_VALIDATION_TOL: f64 = 1e-8;

/// Scalar Cauchy transform of `p` applied to the family, recovered from the
/// `(0,0)` entry of the matrix transform at `Lambda(lambda, 1)`.
///
/// The fixed-point engine solves the semicircular equation (the family must
/// be semicircular); the series engine sums moments of the family as given
/// and requires `|lambda| > r_exterior`. For pencils of degree at least two
/// the series route evaluates at a rescaled diagonal argument, which requires
/// the pencil to pass the rescaling-identity validation.
pub fn scalar_cauchy_from_pencil(
    pencil: &LinearPencil,
    family: &FreeFamilySpec,
    lambda: Complex64,
    cfg: &CauchyEvalConfig,
) -> PencilResult<Complex64> {
    match cfg.engine {
        Engine::FixedPoint => {
            if !family.is_semicircular() {
                return Err(PencilError::DomainError(
                    "fixed-point engine requires a semicircular family".into(),
                ));
            }
            let eta = CovarianceMap::new(pencil.coeffs.to_vec(), family.sigma().clone())?;
            let spec = SemicircularSpec::new(pencil.m(), pencil.a0.clone(), eta)?;
            let b = lambda_diag(lambda, Complex64::new(1.0, 0.0), pencil.m())?;
            let rep = solve_cauchy(&spec, &b, cfg.tol, cfg.max_iter)?;
            Ok(rep.w[(0, 0)])
        }
        Engine::Series => {
            if lambda.norm() <= cfg.r_exterior {
                return Err(PencilError::DomainError(format!(
                    "|lambda| = {} must exceed the exterior radius {}",
                    lambda.norm(),
                    cfg.r_exterior
                )));
            }
            let model =
                OperatorModel::new(pencil.a0.clone(), pencil.coeffs.to_vec(), family.clone())?;
            if pencil.m() == 1 {
                let b = CMatrix::scalar(1, lambda);
                let (gmat, _) = model.cauchy_series(&b, cfg.tol, cfg.jmax)?;
                return Ok(gmat[(0, 0)]);
            }
            // Dimension >= 2: the diagonal argument with unit tail makes the
            // raw series divergent, so route through the rescaled argument
            // with a balanced modulus choice.
            let g = pencil.degree().max(1);
            let est = model.norm_upper_estimate(1.1)?;
            let c_eff = cfg.omega.c;
            let mu_mag = (1.2 * lambda.norm() / c_eff).powf(1.0 / g as f64);
            if mu_mag <= est * 1.05 {
                return Err(PencilError::DomainError(format!(
                    "rescaled modulus {mu_mag} too small against norm estimate {est}"
                )));
            }
            let mu = Complex64::new(mu_mag, 0.0);
            let lam_small = lambda / mu.powi(g as i32 - 1);
            // Annulus parameters matched to the series convergence radius.
            let omega_series =
                OmegaParams::new(0.9, 0.9, c_eff, 1.0 / (est * 1.05)).map_err(PencilError::Mat)?;
            let mut series_cfg = cfg.clone();
            series_cfg.omega = omega_series;
            mu_rescaled_eval(pencil, family, lam_small, mu, g, &series_cfg)
        }
    }
}

/// Transform at a rescaled diagonal argument:
/// `G_p(lambda mu^(g-1)) = corner(G(Lambda(lambda, mu))) / mu^(g-1)`.
///
/// Requires the annulus admissibility of `(lambda, mu)` under `cfg.omega`
/// and a pencil that passed the rescaling-identity validation.
pub fn mu_rescaled_eval(
    pencil: &LinearPencil,
    family: &FreeFamilySpec,
    lambda: Complex64,
    mu: Complex64,
    g: usize,
    cfg: &CauchyEvalConfig,
) -> PencilResult<Complex64> {
    if pencil.m() > 1 {
        let admissible = annulus_contains(lambda, mu, &cfg.omega)
            .map_err(|e| PencilError::DomainError(e.to_string()))?;
        if !admissible {
            return Err(PencilError::DomainError(format!(
                "(lambda, mu) = ({lambda}, {mu}) violates the annulus condition"
            )));
        }
        let resid = pencil.mu_identity_residual()?;
        if resid > MU_VALIDATION_TOL {
            return Err(PencilError::NotValidated(format!(
                "rescaling-identity residual {resid} exceeds {MU_VALIDATION_TOL}"
            )));
        }
    }
    let b = lambda_diag(lambda, mu, pencil.m())?;
    let corner = match cfg.engine {
        Engine::FixedPoint => {
            let eta = CovarianceMap::new(pencil.coeffs.to_vec(), family.sigma().clone())?;
            let spec = SemicircularSpec::new(pencil.m(), pencil.a0.clone(), eta)?;
            let rep = solve_cauchy(&spec, &b, cfg.tol, cfg.max_iter)?;
            rep.w[(0, 0)]
        }
        Engine::Series => {
            let model =
                OperatorModel::new(pencil.a0.clone(), pencil.coeffs.to_vec(), family.clone())?;
            let (gmat, _) = model.cauchy_series(&b, cfg.tol, cfg.jmax)?;
            gmat[(0, 0)]
        }
    };
    Ok(corner / mu.powi(g as i32 - 1))
}
