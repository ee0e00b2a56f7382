//! Convergence-rate experiments: exact transform differences between a free
//! CLT partial sum and its semicircular limit, the correction-term and
//! subordination diagnostics, polynomial rates through linearization, and a
//! random-matrix Monte Carlo oracle.

pub mod mc;

pub use mc::{mc_estimate, resolvent_identity_check};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freemoments::{FreeFamilySpec, MomentError};
use crate::linpoly::{
    linearize, scalar_cauchy_from_pencil, validate_pencil, CauchyEvalConfig, Engine, NcPoly,
    PencilError,
};
use crate::matlin::{
    in_omega, lambda_diag, sample_omega_point, CertifiedConstants, CMatrix, MatError, OmegaParams,
};
use crate::opmodel::{ModelError, OperatorModel};
use crate::scsolver::{solve_cauchy, SemicircularSpec, SolveError};

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid matrix size: {0}")]
    InvalidSize(String),
    #[error("grid point {0} failed domain validation")]
    GridValidation(String),
    #[error("index out of contract: {0}")]
    IndexContract(String),
    #[error("unsupported generative family: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Pencil(#[from] PencilError),
}

pub type LabResult<T> = Result<T, LabError>;

/// Grid specification for the argument sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// Real multiples of the inverse-norm bound: `z = f / kappa*` for
    /// log-spaced factors `f` in `[start_factor, stop_factor]`.
    ScalarRay { start_factor: f64, stop_factor: f64, count: usize },
    /// Diagonal rescaling family `Lambda(lambda, mu)`.
    Lambda { lambdas: Vec<[f64; 2]>, mu: [f64; 2] },
    /// Rejection-free random domain points.
    RandomOmega { count: usize },
}

/// One measured row of a rate sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateRow {
    pub n: u64,
    pub b_id: String,
    pub norm_b: f64,
    /// `||G_s(b) - G_{S_n}(b)||`.
    pub diff: f64,
    /// `sqrt(n) * diff / ||b||`.
    pub scaled: f64,
    /// Norm of the correction term `b G_n - 1 - eta(G_n) G_n`.
    pub theta_norm: f64,
    /// `||G(Lambda_n(b)) - G_n(b)||`.
    pub subord_resid: f64,
}

/// Rate experiment over a model, a list of `n`, and a validated grid.
#[derive(Clone, Debug)]
pub struct RateExperiment {
    pub model: OperatorModel,
    pub n_list: Vec<u64>,
    pub grid: Vec<(String, CMatrix)>,
    pub params: OmegaParams,
    pub constants: CertifiedConstants,
    pub tol: f64,
    pub jmax: usize,
}

/// Aggregate outcome of a sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateSummary {
    pub rows: Vec<RateRow>,
    pub failures: Vec<String>,
    pub slope: f64,
    pub slope_ci: f64,
    pub max_scaled: f64,
}

/// Norm estimates entering the domain radius: the semicircular limit, every
/// partial sum in the sweep, and the leave-one-out sums (distributed as the
/// `n - 1` sum shrunk by `sqrt(1 - 1/n)`).
pub fn reference_norm_estimates(model: &OperatorModel, n_list: &[u64]) -> LabResult<Vec<f64>> {
    let mut ests = Vec::new();
    let spec = SemicircularSpec::from_model(model)?;
    ests.push(spec.norm_estimate()?);
    for &n in n_list {
        ests.push(model.sum(n).norm_upper_estimate(1.1)?);
        if n >= 2 {
            let shrink = (1.0 - 1.0 / n as f64).sqrt();
            ests.push(shrink * model.sum(n - 1).norm_upper_estimate(1.1)?);
        }
    }
    Ok(ests)
}

/// Inverse-norm bound `kappa* = theta* / max(reference norms)` shared by all
/// `n` in the sweep.
pub fn uniform_kappa_star(
    model: &OperatorModel,
    n_list: &[u64],
    theta_star: f64,
) -> LabResult<f64> {
    let ests = reference_norm_estimates(model, n_list)?;
    let worst = ests.iter().fold(0.0_f64, |m, &e| m.max(e));
    if worst <= 0.0 {
        return Err(LabError::InvalidSize("degenerate model: zero norm estimates".into()));
    }
    Ok(theta_star / worst)
}

/// Per-`n` inverse-norm bound with the full budget `theta`.
pub fn kappa_n(model: &OperatorModel, n: u64, theta: f64) -> LabResult<f64> {
    let ests = reference_norm_estimates(model, &[n])?;
    let worst = ests.iter().fold(0.0_f64, |m, &e| m.max(e));
    Ok(theta / worst)
}

impl RateExperiment {
    /// Builds an experiment with a validated grid: every point must satisfy
    /// the conservative domain test with `kappa*` and `c*`.
    pub fn new(
        model: OperatorModel,
        n_list: Vec<u64>,
        grid_spec: &GridSpec,
        params: OmegaParams,
        constants: CertifiedConstants,
        tol: f64,
        jmax: usize,
        seed: u64,
    ) -> LabResult<Self> {
        let kappa_star = uniform_kappa_star(&model, &n_list, constants.theta_star)?;
        let star_params =
            OmegaParams::new(constants.theta_star, params.sigma, constants.c_star, kappa_star)?;
        let m = model.m();
        let mut grid: Vec<(String, CMatrix)> = Vec::new();
        match grid_spec {
            GridSpec::ScalarRay { start_factor, stop_factor, count } => {
                if *count == 0 || *start_factor <= 1.0 || stop_factor <= start_factor {
                    return Err(LabError::GridValidation("bad ray factors".into()));
                }
                for i in 0..*count {
                    let t = if *count == 1 { 0.0 } else { i as f64 / (*count - 1) as f64 };
                    let f = start_factor * (stop_factor / start_factor).powf(t);
                    let z = f / kappa_star;
                    grid.push((format!("ray:{z:.6}"), CMatrix::scalar(m, Complex64::new(z, 0.0))));
                }
            }
            GridSpec::Lambda { lambdas, mu } => {
                let mu = Complex64::new(mu[0], mu[1]);
                for l in lambdas {
                    let lambda = Complex64::new(l[0], l[1]);
                    let b = lambda_diag(lambda, mu, m)?;
                    grid.push((format!("lam:({lambda},{mu})"), b));
                }
            }
            GridSpec::RandomOmega { count } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for i in 0..*count {
                    let b = sample_omega_point(&mut rng, m, &star_params);
                    grid.push((format!("rand:{i}"), b));
                }
            }
        }
        for (id, b) in &grid {
            if !in_omega(b, &star_params) {
                return Err(LabError::GridValidation(id.clone()));
            }
        }
        Ok(Self { model, n_list, grid, params, constants, tol, jmax })
    }

    pub fn star_params(&self) -> LabResult<OmegaParams> {
        let kappa_star = uniform_kappa_star(&self.model, &self.n_list, self.constants.theta_star)?;
        Ok(OmegaParams::new(
            self.constants.theta_star,
            self.params.sigma,
            self.constants.c_star,
            kappa_star,
        )?)
    }
}

/// Transform of the partial sum at `b` by the moment series.
pub fn transform_sum(
    model: &OperatorModel,
    n: u64,
    b: &CMatrix,
    tol: f64,
    jmax: usize,
) -> LabResult<CMatrix> {
    Ok(model.sum(n).cauchy_series(b, tol, jmax)?.0)
}

/// Transform of the semicircular limit at `b` by the fixed-point solver.
pub fn transform_limit(model: &OperatorModel, b: &CMatrix, tol: f64) -> LabResult<CMatrix> {
    let spec = SemicircularSpec::from_model(model)?;
    Ok(solve_cauchy(&spec, b, tol, 100_000)?.w)
}

/// Correction term of the sum transform against the semicircular equation:
/// `Theta_n(b) = (b - a0) G_n(b) - 1 - eta(G_n(b)) G_n(b)`. Vanishes
/// identically (to engine tolerance) for semicircular input models.
pub fn theta_n(
    model: &OperatorModel,
    n: u64,
    b: &CMatrix,
    tol: f64,
    jmax: usize,
) -> LabResult<CMatrix> {
    let gn = transform_sum(model, n, b, tol, jmax)?;
    theta_from_transform(model, b, &gn)
}

fn theta_from_transform(
    model: &OperatorModel,
    b: &CMatrix,
    gn: &CMatrix,
) -> LabResult<CMatrix> {
    let eta = model.covariance_map();
    let b0 = b.sub(model.a0());
    let lhs = b0.mul(gn);
    let rhs = CMatrix::identity(model.m()).add(&eta.apply(gn)?.mul(gn));
    Ok(lhs.sub(&rhs))
}

/// Recentered argument `Lambda_n(b) = b - Theta_n(b) G_n(b)^-1`, at which the
/// limit transform matches the sum transform.
pub fn lambda_n(
    model: &OperatorModel,
    n: u64,
    b: &CMatrix,
    tol: f64,
    jmax: usize,
) -> LabResult<CMatrix> {
    let gn = transform_sum(model, n, b, tol, jmax)?;
    let theta = theta_from_transform(model, b, &gn)?;
    let gn_inv = gn.inverse().map_err(|_| LabError::Mat(MatError::Singular))?;
    Ok(b.sub(&theta.mul(&gn_inv)))
}

/// Subordination residual `||G(Lambda_n(b)) - G_n(b)||`; both sides are
/// computed independently.
pub fn subordination_check(
    model: &OperatorModel,
    n: u64,
    b: &CMatrix,
    tol: f64,
    jmax: usize,
) -> LabResult<f64> {
    let gn = transform_sum(model, n, b, tol, jmax)?;
    let theta = theta_from_transform(model, b, &gn)?;
    let gn_inv = gn.inverse().map_err(|_| LabError::Mat(MatError::Singular))?;
    let ln = b.sub(&theta.mul(&gn_inv));
    let g_at_ln = transform_limit(model, &ln, tol)?;
    Ok(g_at_ln.sub(&gn).op_norm())
}

/// Runs the full sweep. Per-point engine failures are reported in
/// `failures` without aborting; the slope is fitted on `log(median diff)`
/// against `log n` using only `n >= 16` to avoid pre-asymptotic bias.
pub fn run_rate(e: &RateExperiment) -> LabResult<RateSummary> {
    let tasks: Vec<(u64, String, CMatrix)> = e
        .n_list
        .iter()
        .flat_map(|&n| e.grid.iter().map(move |(id, b)| (n, id.clone(), b.clone())))
        .collect();
    let results: Vec<Result<RateRow, String>> = tasks
        .par_iter()
        .map(|(n, id, b)| {
            let row = (|| -> LabResult<RateRow> {
                let gn = transform_sum(&e.model, *n, b, e.tol, e.jmax)?;
                let gs = transform_limit(&e.model, b, e.tol)?;
                let diff = gs.sub(&gn).op_norm();
                let norm_b = b.op_norm();
                let theta = theta_from_transform(&e.model, b, &gn)?;
                let gn_inv = gn.inverse().map_err(|_| LabError::Mat(MatError::Singular))?;
                let ln = b.sub(&theta.mul(&gn_inv));
                let g_at_ln = transform_limit(&e.model, &ln, e.tol)?;
                let subord = g_at_ln.sub(&gn).op_norm();
                Ok(RateRow {
                    n: *n,
                    b_id: id.clone(),
                    norm_b,
                    diff,
                    scaled: (*n as f64).sqrt() * diff / norm_b,
                    theta_norm: theta.op_norm(),
                    subord_resid: subord,
                })
            })();
            row.map_err(|err| format!("n={n} {id}: {err}"))
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(e),
        }
    }
    let (slope, slope_ci) = fit_slope_from_rows(&rows, |r| r.diff);
    let max_scaled = rows.iter().map(|r| r.scaled).fold(0.0, f64::max);
    Ok(RateSummary { rows, failures, slope, slope_ci, max_scaled })
}

/// Median of a non-empty slice.
pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn fit_slope_from_rows<F: Fn(&RateRow) -> f64>(rows: &[RateRow], value: F) -> (f64, f64) {
    let mut by_n: std::collections::BTreeMap<u64, Vec<f64>> = std::collections::BTreeMap::new();
    for r in rows {
        by_n.entry(r.n).or_default().push(value(r));
    }
    let pts: Vec<(f64, f64)> = by_n
        .into_iter()
        .filter(|(n, _)| *n >= 16)
        .filter_map(|(n, mut vals)| {
            let med = median(&mut vals);
            if med > 0.0 && med.is_finite() {
                Some(((n as f64).ln(), med.ln()))
            } else {
                None
            }
        })
        .collect();
    fit_log_slope(&pts)
}

/// Least-squares slope of `y` on `x` with a 95% half-width from the
/// residual variance. Returns NaN slope for fewer than two points.
pub fn fit_log_slope(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len();
    if n < 2 {
        return (f64::NAN, f64::NAN);
    }
    let nf = n as f64;
    let xbar = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let ybar = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx = pts.iter().map(|p| (p.0 - xbar).powi(2)).sum::<f64>();
    let sxy = pts.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum::<f64>();
    let slope = sxy / sxx;
    if n == 2 {
        return (slope, 0.0);
    }
    let intercept = ybar - slope * xbar;
    let ss_res = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>();
    let se = (ss_res / (nf - 2.0) / sxx).sqrt();
    (slope, 1.96 * se)
}

/// Spearman rank correlation.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rank = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; v.len()];
        for (pos, &i) in idx.iter().enumerate() {
            r[i] = pos as f64;
        }
        r
    };
    let rx = rank(xs);
    let ry = rank(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

/// One measured row of a polynomial rate sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolyRateRow {
    pub n: u64,
    pub z: [f64; 2],
    pub g_limit: [f64; 2],
    pub g_sum: [f64; 2],
    pub diff: f64,
}

/// Semicircular family with the same covariance as the given family.
pub fn semicircular_family_like(
    family: &FreeFamilySpec,
    order: usize,
) -> LabResult<FreeFamilySpec> {
    let d = family.d();
    let sigma = family.sigma();
    let mut data = Vec::with_capacity(d * d);
    for row in sigma {
        for &v in row {
            data.push(v);
        }
    }
    let sig = CMatrix::from_real(d, &data)?;
    let (eigs, v) = crate::matlin::hermitian_eigen(&sig);
    let mut mixing: Vec<Vec<f64>> = vec![Vec::new(); d];
    for (idx, &l) in eigs.iter().enumerate() {
        if l <= 1e-14 {
            continue;
        }
        for k in 0..d {
            mixing[k].push(v[(k, idx)].re * l.sqrt());
        }
    }
    if mixing[0].is_empty() {
        for row in mixing.iter_mut() {
            row.push(0.0);
        }
    }
    Ok(FreeFamilySpec::semicircular_with_mixing(mixing, order)?)
}

/// Polynomial rate sweep: `|G_P(z) - G_{P_n}(z)|` on an exterior grid, with
/// the limit computed by the fixed-point engine over the matched semicircular
/// family and the finite-`n` value by the series engine over the rescaled
/// family. The pencil must pass validation first.
pub fn poly_rate(
    p: &NcPoly,
    family: &FreeFamilySpec,
    n_list: &[u64],
    z_grid: &[Complex64],
    cfg: &CauchyEvalConfig,
) -> LabResult<(Vec<PolyRateRow>, f64, f64)> {
    let pencil = linearize(p)?;
    let resid = validate_pencil(p, &pencil, 20, 5, 0xBEEF)?;
    if resid > 1e-10 {
        return Err(LabError::Pencil(PencilError::NotValidated(format!(
            "corner-identity residual {resid}"
        ))));
    }
    let order = family.max_order();
    let sc_family = semicircular_family_like(family, order.max(64))?;
    let fixed_cfg = CauchyEvalConfig { engine: Engine::FixedPoint, ..cfg.clone() };
    let series_cfg = CauchyEvalConfig { engine: Engine::Series, ..cfg.clone() };

    let tasks: Vec<(u64, Complex64)> = n_list
        .iter()
        .flat_map(|&n| z_grid.iter().map(move |&z| (n, z)))
        .collect();
    let rows: Vec<PolyRateRow> = tasks
        .par_iter()
        .map(|&(n, z)| -> LabResult<PolyRateRow> {
            let g_limit = scalar_cauchy_from_pencil(&pencil, &sc_family, z, &fixed_cfg)?;
            let fam_n = family.clt(n);
            let g_sum = scalar_cauchy_from_pencil(&pencil, &fam_n, z, &series_cfg)?;
            Ok(PolyRateRow {
                n,
                z: [z.re, z.im],
                g_limit: [g_limit.re, g_limit.im],
                g_sum: [g_sum.re, g_sum.im],
                diff: (g_limit - g_sum).norm(),
            })
        })
        .collect::<LabResult<Vec<_>>>()?;

    let mut by_n: std::collections::BTreeMap<u64, Vec<f64>> = std::collections::BTreeMap::new();
    for r in &rows {
        by_n.entry(r.n).or_default().push(r.diff);
    }
    let pts: Vec<(f64, f64)> = by_n
        .into_iter()
        .filter(|(n, _)| *n >= 16)
        .filter_map(|(n, mut vals)| {
            let med = median(&mut vals);
            (med > 0.0).then(|| ((n as f64).ln(), med.ln()))
        })
        .collect();
    let (slope, ci) = fit_log_slope(&pts);
    Ok((rows, slope, ci))
}
