//! Scalar free-probability combinatorics: moment/cumulant transforms over
//! noncrossing partitions, joint moments of free families with mixing, and
//! the cumulant rescaling of free i.i.d. partial sums.
//!
//! Conventions: a `MomentSequence` stores `m_1 ... m_J` (with `m_0 = 1`
//! implicit); letters of a [`Word`] are 0-based component indices.

use std::collections::HashMap;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matlin::CMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum MomentError {
    #[error("order exceeded: need {needed}, have {available}")]
    OrderExceeded { needed: usize, available: usize },
    #[error("invalid family: {0}")]
    InvalidFamily(String),
}

pub type MomentResult<T> = Result<T, MomentError>;

/// Moments `m_1 ... m_J` of a compactly supported real distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSequence {
    moments: Vec<f64>,
}

/// Free cumulants `k_1 ... k_J`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulantSequence {
    cumulants: Vec<f64>,
}

impl MomentSequence {
    pub fn from_moments(moments: Vec<f64>) -> Self {
        Self { moments }
    }

    /// Semicircular law of the given variance: even moments are Catalan
    /// numbers scaled by powers of the variance, odd moments vanish.
    pub fn semicircular(variance: f64, order: usize) -> Self {
        let mut m = vec![0.0; order];
        let mut catalan = 1.0; // C_0
        for k in 1..=order / 2 {
            // C_k = C_{k-1} * 2(2k-1)/(k+1)
            catalan *= 2.0 * (2.0 * k as f64 - 1.0) / (k as f64 + 1.0);
            m[2 * k - 1] = catalan * variance.powi(k as i32);
        }
        Self { moments: m }
    }

    /// Symmetric Bernoulli law with atoms at +1 and -1.
    pub fn bernoulli_symmetric(order: usize) -> Self {
        let m = (1..=order).map(|j| if j % 2 == 0 { 1.0 } else { 0.0 }).collect();
        Self { moments: m }
    }

    /// Two-atom law with atoms `(a, b)` and weights `(wa, 1 - wa)`; must be
    /// centered.
    pub fn two_atom(a: f64, b: f64, wa: f64, order: usize) -> MomentResult<Self> {
        if !(0.0 < wa && wa < 1.0) {
            return Err(MomentError::InvalidFamily("two_atom weight must lie in (0,1)".into()));
        }
        let wb = 1.0 - wa;
        let mean = wa * a + wb * b;
        if mean.abs() > 1e-12 {
            return Err(MomentError::InvalidFamily(format!(
                "two_atom law must be centered, got mean {mean}"
            )));
        }
        let m = (1..=order).map(|j| wa * a.powi(j as i32) + wb * b.powi(j as i32)).collect();
        Ok(Self { moments: m })
    }

    pub fn order(&self) -> usize {
        self.moments.len()
    }

    /// `m_j`, with `m_0 = 1`.
    pub fn moment(&self, j: usize) -> f64 {
        if j == 0 {
            1.0
        } else {
            self.moments[j - 1]
        }
    }

    pub fn moments(&self) -> &[f64] {
        &self.moments
    }

    pub fn is_centered(&self) -> bool {
        self.moments.first().is_none_or(|&m1| m1.abs() < 1e-12)
    }

    pub fn variance(&self) -> f64 {
        self.moment(2) - self.moment(1) * self.moment(1)
    }

    /// The Hankel matrix `(m_{i+j})_{0 <= i,j <= J/2}` of a genuine moment
    /// sequence is positive semidefinite.
    pub fn hankel_psd(&self, tol: f64) -> bool {
        let h = self.order() / 2;
        let mut data = Vec::with_capacity((h + 1) * (h + 1));
        for i in 0..=h {
            for j in 0..=h {
                data.push(self.moment(i + j));
            }
        }
        let hk = CMatrix::from_real(h + 1, &data).expect("finite moments");
        let (eigs, _) = crate::matlin::hermitian_eigen(&hk);
        eigs.iter().all(|&l| l >= -tol)
    }
}

impl CumulantSequence {
    pub fn from_cumulants(cumulants: Vec<f64>) -> Self {
        Self { cumulants }
    }

    pub fn order(&self) -> usize {
        self.cumulants.len()
    }

    /// `k_s` for `s >= 1`; orders beyond the stored length are zero.
    pub fn cumulant(&self, s: usize) -> f64 {
        if s == 0 || s > self.cumulants.len() {
            0.0
        } else {
            self.cumulants[s - 1]
        }
    }

    pub fn cumulants(&self) -> &[f64] {
        &self.cumulants
    }

    /// Rescaling of a free i.i.d. sum of `n` terms normalized by `sqrt(n)`:
    /// the order-`s` cumulant picks up the factor `n^(1 - s/2)`.
    pub fn clt_rescaled(&self, n: u64) -> CumulantSequence {
        if n == 1 {
            return self.clone();
        }
        let nf = n as f64;
        let cumulants = self
            .cumulants
            .iter()
            .enumerate()
            .map(|(idx, &k)| {
                let s = (idx + 1) as f64;
                k * nf.powf(1.0 - s / 2.0)
            })
            .collect();
        CumulantSequence { cumulants }
    }
}

/// Composition DP: `conv(s, t) = sum over (g_1..g_s >= 0, sum g_i = t) of
/// prod m_{g_i}`, the ordered-gap weight of the first-block recursion.
fn compositions_product<T>(s: usize, t: usize, moment: &dyn Fn(usize) -> T) -> T
where
    T: Zero + One + Clone + std::ops::Mul<Output = T> + std::ops::Add<Output = T>,
{
    let mut row: Vec<T> = vec![T::zero(); t + 1];
    row[0] = T::one();
    for _ in 0..s {
        let mut next = vec![T::zero(); t + 1];
        for g in 0..=t {
            if row[g].is_zero() {
                continue;
            }
            for extra in 0..=(t - g) {
                let add = row[g].clone() * moment(extra);
                next[g + extra] = next[g + extra].clone() + add;
            }
        }
        row = next;
    }
    row[t].clone()
}

fn moments_from_cumulants_generic<T>(cumulants: &[T]) -> Vec<T>
where
    T: Zero + One + Clone + std::ops::Mul<Output = T> + std::ops::Add<Output = T>,
{
    let order = cumulants.len();
    let mut m: Vec<T> = vec![T::one()]; // m_0
    for len in 1..=order {
        let mut acc = T::zero();
        for s in 1..=len {
            if cumulants[s - 1].is_zero() {
                continue;
            }
            let m_ref = &m;
            let conv = compositions_product(s, len - s, &|g: usize| m_ref[g].clone());
            acc = acc + cumulants[s - 1].clone() * conv;
        }
        m.push(acc);
    }
    m.remove(0);
    m
}

fn cumulants_from_moments_generic<T>(moments: &[T]) -> Vec<T>
where
    T: Zero
        + One
        + Clone
        + std::ops::Mul<Output = T>
        + std::ops::Add<Output = T>
        + std::ops::Sub<Output = T>,
{
    let order = moments.len();
    let mut m = vec![T::one()];
    m.extend_from_slice(moments);
    let mut k: Vec<T> = Vec::with_capacity(order);
    for len in 1..=order {
        let mut acc = m[len].clone();
        for s in 1..len {
            if k[s - 1].is_zero() {
                continue;
            }
            let m_ref = &m;
            let conv = compositions_product(s, len - s, &|g: usize| m_ref[g].clone());
            acc = acc - k[s - 1].clone() * conv;
        }
        k.push(acc);
    }
    k
}

/// Free cumulants from moments by inverting the noncrossing moment-cumulant
/// relation order by order.
pub fn cumulants_from_moments(m: &MomentSequence) -> CumulantSequence {
    CumulantSequence { cumulants: cumulants_from_moments_generic(&m.moments) }
}

/// Moments from free cumulants via the first-block recursion,
/// `m_L = sum_s k_s * sum_(gaps) prod m_(gap)`.
pub fn moments_from_cumulants(k: &CumulantSequence) -> MomentSequence {
    MomentSequence { moments: moments_from_cumulants_generic(&k.cumulants) }
}

/// Exact-rational transforms for reference computations in test suites.
pub mod exact {
    use num_bigint::BigInt;
    use num_rational::BigRational;

    pub type Rat = BigRational;

    pub fn rat(num: i64, den: i64) -> Rat {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    pub fn moments_from_cumulants(cumulants: &[Rat]) -> Vec<Rat> {
        super::moments_from_cumulants_generic(cumulants)
    }

    pub fn cumulants_from_moments(moments: &[Rat]) -> Vec<Rat> {
        super::cumulants_from_moments_generic(moments)
    }
}

/// Upper estimate of the operator norm from even moments:
/// `safety * max_k max( m_{2k}^(1/2k), sqrt(m_{2k} / m_{2k-2}) )`.
/// Both inner families increase to the true norm for compactly supported
/// laws, so with `safety > 1` the result exceeds the norm in the large-order
/// limit. This is an estimate, not a certified bound.
pub fn norm_upper_estimate(m: &MomentSequence, safety: f64) -> MomentResult<f64> {
    if safety < 1.0 {
        return Err(MomentError::InvalidFamily("safety factor must be >= 1".into()));
    }
    if m.order() < 8 {
        return Err(MomentError::OrderExceeded { needed: 8, available: m.order() });
    }
    let half = m.order() / 2;
    let mut best = 0.0_f64;
    for k in 1..=half {
        let m2k = m.moment(2 * k).max(0.0);
        best = best.max(m2k.powf(1.0 / (2.0 * k as f64)));
        if k >= 2 {
            let prev = m.moment(2 * k - 2);
            if prev > 0.0 {
                best = best.max((m2k / prev).sqrt());
            }
        }
    }
    Ok(safety * best)
}

/// Finite word over the letters `0 .. d-1` (component indices).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn reversed(&self) -> Word {
        let mut v = self.0.clone();
        v.reverse();
        Word(v)
    }
}

/// A `d`-tuple of variables `x^(k) = sum_j C_kj y_j` built from a free base
/// family `(y_j)` of centered laws and a real mixing matrix `C`. The joint
/// covariance is `Sigma = C diag(var y_j) C^T`.
#[derive(Clone, Debug)]
pub struct FreeFamilySpec {
    d: usize,
    base: Vec<MomentSequence>,
    base_cumulants: Vec<CumulantSequence>,
    mixing: Vec<Vec<f64>>,
    sigma: Vec<Vec<f64>>,
}

impl FreeFamilySpec {
    /// Family of the free base components themselves (identity mixing).
    pub fn free_components(base: Vec<MomentSequence>) -> MomentResult<Self> {
        let mixing = identity_mixing(base.len());
        Self::with_mixing(base, mixing)
    }

    /// General family with mixing matrix `C` (`d x d'`, rows are components).
    pub fn with_mixing(base: Vec<MomentSequence>, mixing: Vec<Vec<f64>>) -> MomentResult<Self> {
        let base_cumulants = base.iter().map(cumulants_from_moments).collect();
        Self::assemble(base, base_cumulants, mixing)
    }

    /// Family built directly from base free cumulants. Prefer this for laws
    /// whose cumulants are known exactly (semicircular in particular): the
    /// moment-to-cumulant inversion cancels catastrophically at high order,
    /// while the cumulant-to-moment direction is stable.
    pub fn with_mixing_cumulants(
        base_cumulants: Vec<CumulantSequence>,
        mixing: Vec<Vec<f64>>,
    ) -> MomentResult<Self> {
        let base = base_cumulants.iter().map(moments_from_cumulants).collect();
        Self::assemble(base, base_cumulants, mixing)
    }

    /// Free semicircular components of the given variances.
    pub fn semicircular_components(variances: &[f64], order: usize) -> MomentResult<Self> {
        let cums = variances
            .iter()
            .map(|&v| {
                let mut k = vec![0.0; order.max(2)];
                k[1] = v;
                CumulantSequence::from_cumulants(k)
            })
            .collect();
        Self::with_mixing_cumulants(cums, identity_mixing(variances.len()))
    }

    /// Semicircular family with a prescribed covariance, realized by mixing
    /// standard semicircular components with rows of the given square root.
    pub fn semicircular_with_mixing(
        mixing: Vec<Vec<f64>>,
        order: usize,
    ) -> MomentResult<Self> {
        let dprime = mixing.first().map(|r| r.len()).unwrap_or(0);
        let cums = (0..dprime)
            .map(|_| {
                let mut k = vec![0.0; order.max(2)];
                k[1] = 1.0;
                CumulantSequence::from_cumulants(k)
            })
            .collect();
        Self::with_mixing_cumulants(cums, mixing)
    }

    fn assemble(
        base: Vec<MomentSequence>,
        base_cumulants: Vec<CumulantSequence>,
        mixing: Vec<Vec<f64>>,
    ) -> MomentResult<Self> {
        if base.is_empty() {
            return Err(MomentError::InvalidFamily("base family must be non-empty".into()));
        }
        for (j, b) in base.iter().enumerate() {
            if !b.is_centered() {
                return Err(MomentError::InvalidFamily(format!(
                    "base component {j} is not centered"
                )));
            }
        }
        let dprime = base.len();
        let d = mixing.len();
        if d == 0 || mixing.iter().any(|row| row.len() != dprime) {
            return Err(MomentError::InvalidFamily(
                "mixing matrix must be d x d' with d' = number of base components".into(),
            ));
        }
        let vars: Vec<f64> = base.iter().map(|b| b.variance()).collect();
        let mut sigma = vec![vec![0.0; d]; d];
        for k in 0..d {
            for l in 0..d {
                sigma[k][l] = (0..dprime).map(|j| mixing[k][j] * mixing[l][j] * vars[j]).sum();
            }
        }
        Ok(Self { d, base, base_cumulants, mixing, sigma })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn sigma(&self) -> &Vec<Vec<f64>> {
        &self.sigma
    }

    pub fn mixing(&self) -> &Vec<Vec<f64>> {
        &self.mixing
    }

    pub fn base(&self) -> &[MomentSequence] {
        &self.base
    }

    pub fn base_cumulants(&self) -> &[CumulantSequence] {
        &self.base_cumulants
    }

    /// Largest word length for which joint moments are available.
    pub fn max_order(&self) -> usize {
        self.base.iter().map(|b| b.order()).min().unwrap_or(0)
    }

    /// True when every base law is semicircular (cumulants vanish beyond
    /// order two).
    pub fn is_semicircular(&self) -> bool {
        self.base_cumulants.iter().all(|c| {
            c.cumulants()
                .iter()
                .enumerate()
                .all(|(idx, &k)| idx + 1 == 2 || k.abs() < 1e-12)
        })
    }

    /// The family of normalized partial sums of `n` free copies: every
    /// order-`s` joint cumulant is scaled by `n^(1 - s/2)`; the covariance is
    /// unchanged.
    pub fn clt(&self, n: u64) -> FreeFamilySpec {
        if n == 1 {
            return self.clone();
        }
        let base_cumulants: Vec<CumulantSequence> =
            self.base_cumulants.iter().map(|c| c.clt_rescaled(n)).collect();
        let base: Vec<MomentSequence> =
            base_cumulants.iter().map(moments_from_cumulants).collect();
        FreeFamilySpec {
            d: self.d,
            base,
            base_cumulants,
            mixing: self.mixing.clone(),
            sigma: self.sigma.clone(),
        }
    }

    /// Joint free cumulant of the letters: mixed cumulants across distinct
    /// free base components vanish, so
    /// `k[l_1..l_s] = sum_j (prod_i C_{l_i, j}) k_s(y_j)`.
    pub fn joint_cumulant(&self, letters: &[usize]) -> f64 {
        let s = letters.len();
        let mut acc = 0.0;
        for (j, cum) in self.base_cumulants.iter().enumerate() {
            let ks = cum.cumulant(s);
            if ks == 0.0 {
                continue;
            }
            let mut coeff = 1.0;
            for &l in letters {
                coeff *= self.mixing[l][j];
                if coeff == 0.0 {
                    break;
                }
            }
            acc += coeff * ks;
        }
        acc
    }

    /// Cumulant sequence of the single component `x^(k)`.
    pub fn component_cumulants(&self, k: usize, order: usize) -> CumulantSequence {
        let cumulants = (1..=order)
            .map(|s| {
                let mut acc = 0.0;
                for (j, cum) in self.base_cumulants.iter().enumerate() {
                    acc += self.mixing[k][j].powi(s as i32) * cum.cumulant(s);
                }
                acc
            })
            .collect();
        CumulantSequence { cumulants }
    }

    /// Moment sequence of the single component `x^(k)`.
    pub fn component_moments(&self, k: usize, order: usize) -> MomentSequence {
        moments_from_cumulants(&self.component_cumulants(k, order))
    }

    /// Joint moment `tau(x^(w_1) ... x^(w_j))` by first-block recursion over
    /// noncrossing partitions, with memoization on contiguous subwords.
    pub fn joint_moment(&self, w: &Word) -> MomentResult<f64> {
        if w.is_empty() {
            return Ok(1.0);
        }
        if w.len() > self.max_order() {
            return Err(MomentError::OrderExceeded {
                needed: w.len(),
                available: self.max_order(),
            });
        }
        if let Some(&l) = w.0.first() {
            if w.0.iter().all(|&x| x == l) {
                // Constant words reduce to the univariate recursion, which
                // stays polynomial in the length.
                let cums = self.component_cumulants(l, w.len());
                let ms = moments_from_cumulants(&cums);
                return Ok(ms.moment(w.len()));
            }
        }
        let mut memo: HashMap<(usize, usize), f64> = HashMap::new();
        Ok(self.subword_moment(&w.0, 0, w.len(), &mut memo))
    }

    fn subword_moment(
        &self,
        w: &[usize],
        start: usize,
        end: usize,
        memo: &mut HashMap<(usize, usize), f64>,
    ) -> f64 {
        if start >= end {
            return 1.0;
        }
        if let Some(&v) = memo.get(&(start, end)) {
            return v;
        }
        let mut letters = Vec::with_capacity(end - start);
        letters.push(w[start]);
        let total = self.first_block_sum(w, end, start, &mut letters, 1.0, memo);
        memo.insert((start, end), total);
        total
    }

    /// Sums over all choices of the block containing the leftmost position;
    /// `letters` holds the block letters collected so far and `gaps` the
    /// product of moments of the gaps already closed.
    #[allow(clippy::too_many_arguments)]
    fn first_block_sum(
        &self,
        w: &[usize],
        end: usize,
        last: usize,
        letters: &mut Vec<usize>,
        gaps: f64,
        memo: &mut HashMap<(usize, usize), f64>,
    ) -> f64 {
        // Close the block here: trailing gap (last, end).
        let mut total = {
            let k = self.joint_cumulant(letters);
            if k == 0.0 {
                0.0
            } else {
                k * gaps * self.subword_moment(w, last + 1, end, memo)
            }
        };
        // Or extend the block with a later position.
        for next in (last + 1)..end {
            let gap = self.subword_moment(w, last + 1, next, memo);
            if gap == 0.0 {
                continue;
            }
            letters.push(w[next]);
            total += self.first_block_sum(w, end, next, letters, gaps * gap, memo);
            letters.pop();
        }
        total
    }
}

/// Distribution specs as they appear in configuration files.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    Semicircular { variance: f64 },
    Bernoulli {},
    TwoAtom { atoms: [f64; 2], weights: [f64; 2] },
    Moments { moments: Vec<f64> },
}

impl DistributionSpec {
    /// The skewed two-atom law shipped for rate experiments: atoms `2` and
    /// `-1/2` with weights `1/5` and `4/5` (mean 0, variance 1, third
    /// moment 1.5).
    pub fn skewed_two_atom() -> Self {
        DistributionSpec::TwoAtom { atoms: [2.0, -0.5], weights: [0.2, 0.8] }
    }

    pub fn to_moments(&self, order: usize) -> MomentResult<MomentSequence> {
        match self {
            DistributionSpec::Semicircular { variance } => {
                if *variance <= 0.0 {
                    return Err(MomentError::InvalidFamily("variance must be positive".into()));
                }
                Ok(MomentSequence::semicircular(*variance, order))
            }
            DistributionSpec::Bernoulli {} => Ok(MomentSequence::bernoulli_symmetric(order)),
            DistributionSpec::TwoAtom { atoms, weights } => {
                let wsum = weights[0] + weights[1];
                if (wsum - 1.0).abs() > 1e-12 {
                    return Err(MomentError::InvalidFamily(
                        "two_atom weights must sum to 1".into(),
                    ));
                }
                MomentSequence::two_atom(atoms[0], atoms[1], weights[0], order)
            }
            DistributionSpec::Moments { moments } => {
                if moments.len() < order {
                    return Err(MomentError::OrderExceeded {
                        needed: order,
                        available: moments.len(),
                    });
                }
                Ok(MomentSequence::from_moments(moments[..order].to_vec()))
            }
        }
    }
}

/// JSON schema of a free family: component distributions plus an optional
/// mixing matrix and moment order.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub components: Vec<DistributionSpec>,
    #[serde(default)]
    pub mixing: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub order: Option<usize>,
}

impl FamilyConfig {
    pub const DEFAULT_ORDER: usize = 16;

    pub fn to_family(&self) -> MomentResult<FreeFamilySpec> {
        let order = self.order.unwrap_or(Self::DEFAULT_ORDER);
        // Semicircular components are assembled from their exact cumulants;
        // the other laws have closed-form moments and a stable inversion.
        let mut base = Vec::with_capacity(self.components.len());
        let mut cums = Vec::with_capacity(self.components.len());
        for spec in &self.components {
            match spec {
                DistributionSpec::Semicircular { variance } => {
                    if *variance <= 0.0 {
                        return Err(MomentError::InvalidFamily(
                            "variance must be positive".into(),
                        ));
                    }
                    let mut k = vec![0.0; order.max(2)];
                    k[1] = *variance;
                    let k = CumulantSequence::from_cumulants(k);
                    base.push(moments_from_cumulants(&k));
                    cums.push(k);
                }
                other => {
                    let m = other.to_moments(order)?;
                    cums.push(cumulants_from_moments(&m));
                    base.push(m);
                }
            }
        }
        let mixing = self.mixing.clone().unwrap_or_else(|| identity_mixing(base.len()));
        FreeFamilySpec::assemble(base, cums, mixing)
    }
}

fn identity_mixing(d: usize) -> Vec<Vec<f64>> {
    (0..d).map(|k| (0..d).map(|j| if k == j { 1.0 } else { 0.0 }).collect()).collect()
}
