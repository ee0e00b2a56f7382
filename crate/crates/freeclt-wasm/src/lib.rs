//! Browser demo bindings: three interactive views onto the toolkit.
//!
//! Every export takes plain parameters and returns a JSON string, so the
//! page needs no framework and no generated TypeScript glue beyond the
//! standard `wasm-bindgen` module loader.

use freeclt_core::cltlab::{fit_log_slope, transform_limit, transform_sum};
use freeclt_core::freemoments::{DistributionSpec, FamilyConfig, FreeFamilySpec};
use freeclt_core::linpoly::{linearize, parse_poly, scalar_cauchy_from_pencil, CauchyEvalConfig};
use freeclt_core::matlin::CMatrix;
use freeclt_core::opmodel::OperatorModel;
use freeclt_core::scsolver::{solve_cauchy, SemicircularSpec};
use freeclt_core::spectra::{density_from_cauchy, oracle_density, OracleKind};
use freeclt_core::Complex64;
use wasm_bindgen::prelude::wasm_bindgen;

fn err_json(msg: &str) -> String {
    format!("{{\"error\": {}}}", serde_json_escape(msg))
}

fn serde_json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn num_array(values: &[f64]) -> String {
    let cells: Vec<String> = values.iter().map(|v| format!("{v:.12e}")).collect();
    format!("[{}]", cells.join(","))
}

/// Spectral density of `p(s_1, .., s_d)` over free standard semicircular
/// variables, recovered by boundary evaluation of the pencil transform.
/// Generators are `x1 .. x{d}`; the oracle column is filled for the two
/// laws with closed forms (`x1` and `x1^2`).
#[wasm_bindgen]
pub fn poly_density(poly: &str, d: usize, xmin: f64, xmax: f64, points: usize) -> String {
    if points < 2 || !(xmax > xmin) {
        return err_json("need at least two ascending grid points");
    }
    let p = match parse_poly(poly, d.max(1)) {
        Ok(p) => p,
        Err(e) => return err_json(&e.to_string()),
    };
    let pencil = match linearize(&p) {
        Ok(p) => p,
        Err(e) => return err_json(&e.to_string()),
    };
    let family = match FreeFamilySpec::semicircular_components(&vec![1.0; d.max(1)], 64) {
        Ok(f) => f,
        Err(e) => return err_json(&e.to_string()),
    };
    let cfg = CauchyEvalConfig::fixed_point(1e-9);
    let grid: Vec<f64> = (0..points)
        .map(|i| xmin + (xmax - xmin) * i as f64 / (points - 1) as f64)
        .collect();
    let density = match density_from_cauchy(
        |z| scalar_cauchy_from_pencil(&pencil, &family, z, &cfg).map_err(|e| e.to_string()),
        &grid,
        &[1e-2, 5e-3],
    ) {
        Ok(d) => d,
        Err(e) => return err_json(&e.to_string()),
    };
    let oracle: Option<Vec<f64>> = match poly.trim() {
        "x1" => Some(
            grid.iter()
                .map(|&x| oracle_density(&OracleKind::Semicircle { variance: 1.0 }, x))
                .collect(),
        ),
        "x1^2" => Some(grid.iter().map(|&x| oracle_density(&OracleKind::ScSquare, x)).collect()),
        _ => None,
    };
    let oracle_field = match &oracle {
        Some(v) => format!(",\"oracle\":{}", num_array(v)),
        None => String::new(),
    };
    format!(
        "{{\"x\":{},\"density\":{},\"pencil_dim\":{}{}}}",
        num_array(&grid),
        num_array(&density.values),
        pencil.m(),
        oracle_field
    )
}

/// Transform-difference decay of free central-limit partial sums:
/// `||G_s(b) - G_(S_n)(b)||` at a fixed exterior argument, for `n` doubling
/// up to `n_max`, with the fitted log-log slope.
#[wasm_bindgen]
pub fn rate_curve(family: &str, z: f64, n_max: u64) -> String {
    let spec = match family {
        "bernoulli" => DistributionSpec::Bernoulli {},
        "skewed" => DistributionSpec::skewed_two_atom(),
        "semicircular" => DistributionSpec::Semicircular { variance: 1.0 },
        other => return err_json(&format!("unknown family {other:?}")),
    };
    let cfg = FamilyConfig { components: vec![spec], mixing: None, order: Some(48) };
    let family = match cfg.to_family() {
        Ok(f) => f,
        Err(e) => return err_json(&e.to_string()),
    };
    let model = match OperatorModel::scalar(family) {
        Ok(m) => m,
        Err(e) => return err_json(&e.to_string()),
    };
    if !(z > 2.5) {
        return err_json("the argument must sit outside the spectra, z > 2.5");
    }
    let b = CMatrix::scalar(1, Complex64::new(z, 0.0));
    let limit = match transform_limit(&model, &b, 1e-12) {
        Ok(g) => g,
        Err(e) => return err_json(&e.to_string()),
    };
    let mut ns = Vec::new();
    let mut diffs = Vec::new();
    let mut n = 2u64;
    while n <= n_max.max(2) {
        match transform_sum(&model, n, &b, 1e-12, 48) {
            Ok(gn) => {
                ns.push(n as f64);
                diffs.push(gn.sub(&limit).op_norm());
            }
            Err(e) => return err_json(&e.to_string()),
        }
        n *= 2;
    }
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(&diffs)
        .filter(|(_, &d)| d > 0.0)
        .map(|(n, d)| (n.ln(), d.ln()))
        .collect();
    let (slope, _) = fit_log_slope(&pts);
    format!(
        "{{\"n\":{},\"diff\":{},\"slope\":{}}}",
        num_array(&ns),
        num_array(&diffs),
        if slope.is_finite() { format!("{slope:.6}") } else { "null".to_string() }
    )
}

/// One fixed-point solve of `b w = 1 + eta(w) w` for the scalar semicircle,
/// reporting the value, iteration count, residual, and certification.
#[wasm_bindgen]
pub fn solve_point(re: f64, im: f64, variance: f64) -> String {
    if !(variance > 0.0) {
        return err_json("variance must be positive");
    }
    let spec = match SemicircularSpec::scalar(variance) {
        Ok(s) => s,
        Err(e) => return err_json(&e.to_string()),
    };
    let b = CMatrix::scalar(1, Complex64::new(re, im));
    match solve_cauchy(&spec, &b, 1e-12, 200_000) {
        Ok(rep) => format!(
            "{{\"w_re\":{:.15e},\"w_im\":{:.15e},\"iterations\":{},\"residual\":{:.3e},\"certified\":{},\"note\":{}}}",
            rep.w[(0, 0)].re,
            rep.w[(0, 0)].im,
            rep.iterations,
            rep.residual,
            rep.certified,
            serde_json_escape(&rep.domain_note)
        ),
        Err(e) => err_json(&e.to_string()),
    }
}
