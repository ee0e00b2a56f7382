//! Subcommand implementations. Each returns `Ok(())` or a [`CmdError`]
//! mapping onto the exit-code scheme: 1 configuration/validation,
//! 2 numerical non-convergence, 3 property-assertion failure.

use std::fs;
use std::path::Path;

use freeclt_core::cltlab::{
    mc_estimate, poly_rate, run_rate, uniform_kappa_star, RateExperiment,
    RateRow, RateSummary,
};
use freeclt_core::linpoly::{
    linearize, parse_poly, scalar_cauchy_from_pencil, validate_mu_identity, validate_pencil,
    CauchyEvalConfig, LinearPencil,
};
use freeclt_core::matlin::{CertifiedConstants, CMatrix, OmegaParams};
use freeclt_core::opmodel::OperatorModel;
use freeclt_core::scsolver::{solve_cauchy, SemicircularSpec, SolveError};
use freeclt_core::spectra::{
    cdf_from_density, density_from_cauchy, empirical_lipschitz, kolmogorov, oracle_cdf,
    oracle_density, Cdf, OracleKind, DEFAULT_EPS_SCHEDULE,
};
use freeclt_core::Complex64;

use crate::config::*;
use crate::output::{g17, matrix17, string_array, JsonObject};

#[derive(Debug)]
pub enum CmdError {
    Config(String),
    Numerical(String),
    Assertion(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Config(_) => 1,
            CmdError::Numerical(_) => 2,
            CmdError::Assertion(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CmdError::Config(m) | CmdError::Numerical(m) | CmdError::Assertion(m) => m,
        }
    }
}

pub type CmdResult = Result<(), CmdError>;

fn config_err<E: std::fmt::Display>(e: E) -> CmdError {
    CmdError::Config(e.to_string())
}

fn numerical_err<E: std::fmt::Display>(e: E) -> CmdError {
    CmdError::Numerical(e.to_string())
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CmdError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CmdError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CmdError::Config(format!("invalid config {}: {e}", path.display())))
}

fn write_out(out_dir: &Path, name: &str, content: &str, verbose: bool) -> Result<(), CmdError> {
    fs::create_dir_all(out_dir)
        .map_err(|e| CmdError::Config(format!("cannot create {}: {e}", out_dir.display())))?;
    let path = out_dir.join(name);
    fs::write(&path, content)
        .map_err(|e| CmdError::Config(format!("cannot write {}: {e}", path.display())))?;
    if verbose {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

pub fn cmd_solve(config_path: &Path, out_dir: &Path, verbose: bool) -> CmdResult {
    let cfg: SolveConfig = read_config(config_path)?;
    let m = cfg.spec.m;
    let a0 = cfg.spec.a0.clone().unwrap_or_else(|| CMatrix::zeros(m));
    let eta = freeclt_core::opmodel::CovarianceMap::new(cfg.spec.coeffs.clone(), cfg.spec.sigma.clone())
        .map_err(config_err)?;
    let spec = SemicircularSpec::new(m, a0, eta).map_err(config_err)?;
    if cfg.b.dim() != m {
        return Err(CmdError::Config("b has the wrong dimension".into()));
    }
    if !(cfg.tol > 0.0) {
        return Err(CmdError::Config("tol must be positive".into()));
    }
    let report = match solve_cauchy(&spec, &cfg.b, cfg.tol, cfg.max_iter) {
        Ok(r) => r,
        Err(e @ SolveError::NoConvergence { .. }) => return Err(numerical_err(e)),
        Err(e @ SolveError::Singular) => return Err(numerical_err(e)),
        Err(e) => return Err(config_err(e)),
    };
    let json = JsonObject::new()
        .raw("w", matrix17(&report.w))
        .int("iterations", report.iterations as u64)
        .num("residual", report.residual)
        .boolean("certified", report.certified)
        .string("domain_note", &report.domain_note)
        .render();
    write_out(out_dir, "solve_report.json", &json, verbose)
}

fn rate_rows_csv(rows: &[RateRow]) -> String {
    let mut out = String::from("n,b_id,norm_b,diff,scaled,theta_norm,subord_resid\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.n,
            r.b_id,
            g17(r.norm_b),
            g17(r.diff),
            g17(r.scaled),
            g17(r.theta_norm),
            g17(r.subord_resid)
        ));
    }
    out
}

fn check_rate_assertions(
    assertions: &RateAssertions,
    summary: &RateSummary,
) -> Result<(), CmdError> {
    if let Some(max_diff) = assertions.max_diff {
        if let Some(row) = summary.rows.iter().find(|r| r.diff >= max_diff) {
            return Err(CmdError::Assertion(format!(
                "diff {} at n={} {} exceeds max_diff {max_diff}",
                row.diff, row.n, row.b_id
            )));
        }
    }
    if assertions.bounded_scaled_trend == Some(true) {
        let mut by_n: std::collections::BTreeMap<u64, f64> = Default::default();
        for r in &summary.rows {
            let e = by_n.entry(r.n).or_insert(0.0);
            *e = e.max(r.scaled);
        }
        let seq: Vec<f64> = by_n.values().copied().collect();
        if seq.len() >= 4 {
            let first3 = seq.iter().take(3).fold(0.0_f64, |m, &v| m.max(v));
            let last = *seq.last().unwrap();
            if last > 1.2 * first3 {
                return Err(CmdError::Assertion(format!(
                    "scaled differences trend upward: last {last} vs first-three max {first3}"
                )));
            }
        }
    }
    if let Some([lo, hi]) = assertions.slope_range {
        if !(lo..=hi).contains(&summary.slope) {
            return Err(CmdError::Assertion(format!(
                "slope {} outside [{lo}, {hi}]",
                summary.slope
            )));
        }
    }
    Ok(())
}

pub fn cmd_clt_rate(
    config_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
    verbose: bool,
) -> CmdResult {
    let cfg: RateConfig = read_config(config_path)?;
    let model = cfg.model.to_model().map_err(config_err)?;
    if cfg.n_list.is_empty() || cfg.n_list.contains(&0) {
        return Err(CmdError::Config("n_list must contain positive entries".into()));
    }
    let seed = seed_override.or(cfg.seed).unwrap_or(0);
    let kappa = uniform_kappa_star(&model, &cfg.n_list, cfg.params.theta).map_err(config_err)?;
    let params = OmegaParams::new(cfg.params.theta, cfg.params.sigma, cfg.params.c, kappa)
        .map_err(config_err)?;
    let constants = CertifiedConstants::derive(&params, cfg.params.gamma).map_err(config_err)?;
    let experiment = RateExperiment::new(
        model,
        cfg.n_list.clone(),
        &cfg.grid,
        params,
        constants,
        cfg.tol,
        cfg.jmax,
        seed,
    )
    .map_err(config_err)?;
    let summary = run_rate(&experiment).map_err(numerical_err)?;
    if summary.rows.is_empty() {
        return Err(CmdError::Numerical(format!(
            "every grid point failed: {:?}",
            summary.failures
        )));
    }
    // Domain membership is tested with strict inequalities; report points
    // whose margin sits inside the floating-point guard band.
    let star = experiment.star_params().map_err(config_err)?;
    let borderline: Vec<String> = experiment
        .grid
        .iter()
        .filter_map(|(id, b)| {
            let (m_kappa, m_cond) = freeclt_core::matlin::omega_margins(b, &star)?;
            let scale = freeclt_core::matlin::OMEGA_GUARD_BAND;
            (m_kappa < scale * star.kappa || m_cond < scale * star.c).then(|| id.clone())
        })
        .collect();
    write_out(out_dir, "rows.csv", &rate_rows_csv(&summary.rows), verbose)?;
    let json = JsonObject::new()
        .num("slope", summary.slope)
        .num("slope_ci", summary.slope_ci)
        .num("max_scaled", summary.max_scaled)
        .raw("failures", string_array(&summary.failures))
        .raw("borderline_points", string_array(&borderline))
        .render();
    write_out(out_dir, "summary.json", &json, verbose)?;
    if let Some(assertions) = &cfg.assertions {
        check_rate_assertions(assertions, &summary)?;
    }
    Ok(())
}

pub fn cmd_poly(config_path: &Path, out_dir: &Path, verbose: bool) -> CmdResult {
    let cfg: PolyConfig = read_config(config_path)?;
    let family = cfg.family.to_family().map_err(config_err)?;
    let p = parse_poly(&cfg.polynomial, family.d()).map_err(config_err)?;
    let pencil = linearize(&p).map_err(config_err)?;
    let r = cfg.r_exterior.unwrap_or_else(|| pencil.default_exterior_radius(1.7));
    let z_grid: Vec<Complex64> = match &cfg.z_grid {
        ZGrid::Ray { start, stop, count } => {
            if *count == 0 || *start <= 0.0 || stop <= start {
                return Err(CmdError::Config("bad ray grid".into()));
            }
            (0..*count)
                .map(|i| {
                    let t = if *count == 1 { 0.0 } else { i as f64 / (*count - 1) as f64 };
                    Complex64::new(start * (stop / start).powf(t), 0.0)
                })
                .collect()
        }
        ZGrid::List { points } => {
            points.iter().map(|p| Complex64::new(p[0], p[1])).collect()
        }
    };
    for z in &z_grid {
        if z.norm() <= r {
            return Err(CmdError::Config(format!(
                "grid point {z} inside the exterior radius {r}"
            )));
        }
    }
    let eval_cfg = CauchyEvalConfig::series(cfg.tol, r);
    let (rows, slope, slope_ci) =
        poly_rate(&p, &family, &cfg.n_list, &z_grid, &eval_cfg).map_err(numerical_err)?;
    let mut csv =
        String::from("n,z_re,z_im,g_limit_re,g_limit_im,g_sum_re,g_sum_im,diff\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.n,
            g17(row.z[0]),
            g17(row.z[1]),
            g17(row.g_limit[0]),
            g17(row.g_limit[1]),
            g17(row.g_sum[0]),
            g17(row.g_sum[1]),
            g17(row.diff)
        ));
    }
    write_out(out_dir, "poly_rows.csv", &csv, verbose)?;
    let json = JsonObject::new()
        .num("slope", slope)
        .num("slope_ci", slope_ci)
        .num("r_exterior", r)
        .render();
    write_out(out_dir, "summary.json", &json, verbose)?;
    if let Some(assertions) = &cfg.assertions {
        if let Some([lo, hi]) = assertions.slope_range {
            if !(lo..=hi).contains(&slope) {
                return Err(CmdError::Assertion(format!("slope {slope} outside [{lo}, {hi}]")));
            }
        }
        if let Some(max_diff) = assertions.max_diff {
            if let Some(row) = rows.iter().find(|r| r.diff >= max_diff) {
                return Err(CmdError::Assertion(format!(
                    "diff {} at n={} exceeds max_diff {max_diff}",
                    row.diff, row.n
                )));
            }
        }
    }
    Ok(())
}

pub fn cmd_density(config_path: &Path, out_dir: &Path, verbose: bool) -> CmdResult {
    let cfg: DensityConfig = read_config(config_path)?;
    if cfg.points < 2 || !(cfg.xmax > cfg.xmin) {
        return Err(CmdError::Config("need at least two ascending grid points".into()));
    }
    let grid: Vec<f64> = (0..cfg.points)
        .map(|i| cfg.xmin + (cfg.xmax - cfg.xmin) * i as f64 / (cfg.points - 1) as f64)
        .collect();
    let eps = cfg.eps_schedule.clone().unwrap_or_else(|| DEFAULT_EPS_SCHEDULE.to_vec());

    let evaluator: Box<dyn Fn(Complex64) -> Result<Complex64, String> + Sync> = match &cfg.target {
        DensityTarget::Semicircle { variance } => {
            if *variance <= 0.0 {
                return Err(CmdError::Config("variance must be positive".into()));
            }
            let spec = SemicircularSpec::scalar(*variance).map_err(config_err)?;
            let tol = cfg.tol;
            Box::new(move |z| {
                solve_cauchy(&spec, &CMatrix::scalar(1, z), tol, 200_000)
                    .map(|r| r.w[(0, 0)])
                    .map_err(|e| e.to_string())
            })
        }
        DensityTarget::Poly { polynomial, family } => {
            let family = family.to_family().map_err(config_err)?;
            if !family.is_semicircular() {
                return Err(CmdError::Config(
                    "density recovery evaluates the limiting object; the family must be semicircular"
                        .into(),
                ));
            }
            let p = parse_poly(polynomial, family.d()).map_err(config_err)?;
            let pencil = linearize(&p).map_err(config_err)?;
            let eval_cfg = CauchyEvalConfig::fixed_point(cfg.tol);
            Box::new(move |z| {
                scalar_cauchy_from_pencil(&pencil, &family, z, &eval_cfg)
                    .map_err(|e| e.to_string())
            })
        }
    };

    let density = density_from_cauchy(evaluator, &grid, &eps).map_err(numerical_err)?;
    let cdf = cdf_from_density(&density).map_err(numerical_err)?;

    let mut density_csv = String::from("x,density\n");
    for (x, v) in density.x.iter().zip(&density.values) {
        density_csv.push_str(&format!("{},{}\n", g17(*x), g17(*v)));
    }
    write_out(out_dir, "density.csv", &density_csv, verbose)?;
    let mut cdf_csv = String::from("x,cdf\n");
    for (x, v) in cdf.x.iter().zip(&cdf.values) {
        cdf_csv.push_str(&format!("{},{}\n", g17(*x), g17(*v)));
    }
    write_out(out_dir, "cdf.csv", &cdf_csv, verbose)?;

    let mut json = JsonObject::new()
        .num("mass", density.mass())
        .num("empirical_lipschitz_t0.05", empirical_lipschitz(&cdf, 0.05));
    if let Some(oracle_name) = &cfg.oracle {
        let variance = match &cfg.target {
            DensityTarget::Semicircle { variance } => *variance,
            _ => 1.0,
        };
        let kind = OracleKind::parse(oracle_name, variance).map_err(config_err)?;
        let sup = density.sup_error(|x| oracle_density(&kind, x));
        let analytic = Cdf {
            x: grid.clone(),
            values: grid.iter().map(|&x| oracle_cdf(&kind, x)).collect(),
        };
        let ks = kolmogorov(&cdf, &analytic);
        json = json.num("sup_error_vs_oracle", sup).num("kolmogorov_vs_oracle", ks);
    }
    write_out(out_dir, "summary.json", &json.render(), verbose)
}

pub fn cmd_check_linearization(config_path: &Path, out_dir: &Path, verbose: bool) -> CmdResult {
    let cfg: CheckLinConfig = read_config(config_path)?;
    if cfg.trials == 0 || cfg.size < 2 {
        return Err(CmdError::Config("need trials >= 1 and size >= 2".into()));
    }
    let p = parse_poly(&cfg.polynomial, cfg.d).map_err(config_err)?;
    let pencil = match &cfg.pencil_override {
        Some(o) => LinearPencil::new(o.a0.clone(), o.coeffs.clone(), o.degree, Some(p.clone())),
        None => linearize(&p).map_err(config_err)?,
    };
    let seed = cfg.seed.unwrap_or(0x517E);
    let resid =
        validate_pencil(&p, &pencil, cfg.trials, cfg.size, seed).map_err(numerical_err)?;
    let mu_resid = validate_mu_identity(&p, &pencil, cfg.trials.min(25), cfg.size, seed)
        .map_err(numerical_err)?;
    let pass = resid < cfg.threshold;
    let json = JsonObject::new()
        .num("residual", resid)
        .num("mu_identity_residual", mu_resid)
        .num("threshold", cfg.threshold)
        .boolean("pass", pass)
        .int("pencil_dim", pencil.m() as u64)
        .render();
    write_out(out_dir, "check.json", &json, verbose)?;
    if !pass {
        return Err(CmdError::Assertion(format!(
            "pencil residual {resid} exceeds threshold {}",
            cfg.threshold
        )));
    }
    Ok(())
}

pub fn cmd_mc(
    config_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
    verbose: bool,
) -> CmdResult {
    let cfg: McConfig = read_config(config_path)?;
    let model: OperatorModel = cfg.model.to_model().map_err(config_err)?;
    if cfg.n == 0 {
        return Err(CmdError::Config("n must be positive".into()));
    }
    let seed = seed_override.or(cfg.seed).unwrap_or(0);
    let (estimate, stderr) = mc_estimate(
        &model,
        &cfg.model.family,
        cfg.n,
        &cfg.b,
        cfg.size,
        cfg.samples,
        seed,
    )
    .map_err(|e| match e {
        freeclt_core::cltlab::LabError::InvalidSize(_)
        | freeclt_core::cltlab::LabError::Unsupported(_) => config_err(e),
        other => numerical_err(other),
    })?;
    let mut json = JsonObject::new()
        .raw("estimate", matrix17(&estimate))
        .num("stderr", stderr)
        .int("size", cfg.size as u64)
        .int("samples", cfg.samples as u64)
        .int("seed", seed);
    if cfg.compare_series {
        let (series, tail) = model
            .sum(cfg.n)
            .cauchy_series(&cfg.b, cfg.tol, cfg.jmax)
            .map_err(numerical_err)?;
        let diff = estimate.sub(&series).op_norm();
        json = json
            .raw("series", matrix17(&series))
            .num("series_tail_bound", tail)
            .num("diff", diff);
    }
    write_out(out_dir, "mc.json", &json.render(), verbose)
}
