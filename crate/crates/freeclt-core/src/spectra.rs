//! Stieltjes inversion to densities and CDFs, closed-form density oracles,
//! and the Kolmogorov distance between distribution functions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("evaluator failed at {count} grid points (first at x = {first_x}: {first_err})")]
    EvaluatorFailure { count: usize, first_x: f64, first_err: String },
    #[error("recovered density carries mass {mass}, below 0.5; inversion is broken")]
    NegativeMass { mass: f64 },
    #[error("unknown oracle kind {0:?}")]
    UnknownKind(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

pub type SpectraResult<T> = Result<T, SpectraError>;

/// Density samples on an ascending grid, recovered with a given epsilon
/// schedule.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridDensity {
    pub x: Vec<f64>,
    pub values: Vec<f64>,
    pub eps_schedule: Vec<f64>,
}

/// Cumulative distribution function samples: nondecreasing values in [0, 1].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Cdf {
    pub x: Vec<f64>,
    pub values: Vec<f64>,
}

/// Default epsilon schedule for boundary evaluation.
pub const DEFAULT_EPS_SCHEDULE: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Recovers a density from a Cauchy-transform evaluator by boundary values:
/// `rho(x) = -(1/pi) lim Im G(x + i eps)`, with the limit taken by linear
/// Richardson extrapolation over the two smallest epsilons of the schedule
/// (a single-entry schedule uses the raw value). Negative round-off values
/// are clamped to zero. Evaluator failures abort with a per-point report.
pub fn density_from_cauchy<F>(
    evaluator: F,
    grid: &[f64],
    eps_schedule: &[f64],
) -> SpectraResult<GridDensity>
where
    F: Fn(Complex64) -> Result<Complex64, String>,
{
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SpectraError::InvalidGrid("grid must be strictly ascending".into()));
    }
    let mut eps: Vec<f64> = eps_schedule.to_vec();
    if eps.is_empty() || eps.iter().any(|&e| e <= 0.0) {
        return Err(SpectraError::InvalidGrid("epsilon schedule must be positive".into()));
    }
    eps.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let pair = if eps.len() >= 2 {
        Some((eps[eps.len() - 2], eps[eps.len() - 1]))
    } else {
        None
    };

    let mut values = Vec::with_capacity(grid.len());
    let mut failures: Vec<(f64, String)> = Vec::new();
    for &x in grid {
        let sample = |e: f64| -> Result<f64, String> {
            let g = evaluator(Complex64::new(x, e))?;
            Ok(-g.im / std::f64::consts::PI)
        };
        let rho = match pair {
            Some((e1, e2)) => match (sample(e1), sample(e2)) {
                (Ok(f1), Ok(f2)) => Ok(f2 + (f2 - f1) * e2 / (e1 - e2)),
                (Err(e), _) | (_, Err(e)) => Err(e),
            },
            None => sample(eps[0]),
        };
        match rho {
            Ok(v) => values.push(v.max(0.0)),
            Err(err) => {
                failures.push((x, err));
                values.push(0.0);
            }
        }
    }
    if !failures.is_empty() {
        let (first_x, first_err) = failures[0].clone();
        return Err(SpectraError::EvaluatorFailure { count: failures.len(), first_x, first_err });
    }
    Ok(GridDensity { x: grid.to_vec(), values, eps_schedule: eps })
}

impl GridDensity {
    /// Trapezoid mass of the recovered density.
    pub fn mass(&self) -> f64 {
        trapezoid_cumulative(&self.x, &self.values).last().copied().unwrap_or(0.0)
    }

    /// Largest absolute deviation from a reference density on the grid.
    pub fn sup_error<F: Fn(f64) -> f64>(&self, oracle: F) -> f64 {
        self.x
            .iter()
            .zip(&self.values)
            .map(|(&x, &v)| (v - oracle(x)).abs())
            .fold(0.0, f64::max)
    }

    /// Moment of the recovered density by trapezoid quadrature.
    pub fn moment(&self, k: u32) -> f64 {
        let weighted: Vec<f64> = self
            .x
            .iter()
            .zip(&self.values)
            .map(|(&x, &v)| x.powi(k as i32) * v)
            .collect();
        trapezoid_cumulative(&self.x, &weighted).last().copied().unwrap_or(0.0)
    }
}

fn trapezoid_cumulative(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..x.len() {
        acc += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
        out.push(acc);
    }
    out
}

/// Integrates a density into a CDF (trapezoid rule), renormalized to end at
/// one. A total mass below 0.5 signals a broken density and is rejected.
pub fn cdf_from_density(d: &GridDensity) -> SpectraResult<Cdf> {
    let cum = trapezoid_cumulative(&d.x, &d.values);
    let mass = cum.last().copied().unwrap_or(0.0);
    if mass < 0.5 {
        return Err(SpectraError::NegativeMass { mass });
    }
    let values = cum.into_iter().map(|v| (v / mass).clamp(0.0, 1.0)).collect();
    Ok(Cdf { x: d.x.clone(), values })
}

impl Cdf {
    /// Unit step at the given point, on a minimal three-point grid.
    pub fn unit_step(at: f64) -> Cdf {
        Cdf { x: vec![at - 1e-9, at, at + 1e-9], values: vec![0.0, 1.0, 1.0] }
    }

    /// Piecewise-linear evaluation with flat extension outside the grid.
    pub fn eval(&self, x: f64) -> f64 {
        if self.x.is_empty() {
            return 0.0;
        }
        if x <= self.x[0] {
            return self.values[0];
        }
        if x >= *self.x.last().unwrap() {
            return *self.values.last().unwrap();
        }
        let idx = match self.x.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(i) => return self.values[i],
            Err(i) => i,
        };
        let (x0, x1) = (self.x[idx - 1], self.x[idx]);
        let (y0, y1) = (self.values[idx - 1], self.values[idx]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// Kolmogorov distance: `sup_x |F1(x) - F2(x)|`, evaluated on the merged
/// knot set with linear interpolation (the supremum of a piecewise-linear
/// difference is attained at a knot).
pub fn kolmogorov(f1: &Cdf, f2: &Cdf) -> f64 {
    let mut knots: Vec<f64> = f1.x.iter().chain(f2.x.iter()).copied().collect();
    knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    knots.dedup();
    knots
        .iter()
        .map(|&x| (f1.eval(x) - f2.eval(x)).abs())
        .fold(0.0, f64::max)
}

/// Closed-form density oracles used by the test and reporting pipelines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OracleKind {
    /// Semicircle law of the given variance, support `[-2 sqrt(v), 2 sqrt(v)]`.
    Semicircle { variance: f64 },
    /// Law of the square of a standard semicircular variable: moments are the
    /// Catalan numbers, density `sqrt(4 - x) / (2 pi sqrt(x))` on `(0, 4]`.
    ScSquare,
    /// Two-atom law; density vanishes off the atoms.
    TwoAtom { atoms: [f64; 2], weights: [f64; 2] },
}

impl OracleKind {
    pub fn parse(name: &str, variance: f64) -> SpectraResult<OracleKind> {
        match name {
            "semicircle" => Ok(OracleKind::Semicircle { variance }),
            "sc_square" => Ok(OracleKind::ScSquare),
            other => Err(SpectraError::UnknownKind(other.to_string())),
        }
    }
}

/// Pointwise oracle density.
pub fn oracle_density(kind: &OracleKind, x: f64) -> f64 {
    match kind {
        OracleKind::Semicircle { variance } => {
            let v = *variance;
            let supp = 4.0 * v - x * x;
            if supp <= 0.0 {
                0.0
            } else {
                supp.sqrt() / (2.0 * std::f64::consts::PI * v)
            }
        }
        OracleKind::ScSquare => {
            if x <= 0.0 || x > 4.0 {
                0.0
            } else {
                (4.0 - x).sqrt() / (2.0 * std::f64::consts::PI * x.sqrt())
            }
        }
        OracleKind::TwoAtom { .. } => 0.0,
    }
}

/// Closed-form CDF for oracles with continuous densities; atoms give steps.
pub fn oracle_cdf(kind: &OracleKind, x: f64) -> f64 {
    match kind {
        OracleKind::Semicircle { variance } => {
            let r = 2.0 * variance.sqrt();
            if x <= -r {
                0.0
            } else if x >= r {
                1.0
            } else {
                let u = x / r;
                0.5 + (u * (1.0 - u * u).sqrt() + u.asin()) / std::f64::consts::PI
            }
        }
        OracleKind::ScSquare => {
            if x <= 0.0 {
                0.0
            } else if x >= 4.0 {
                1.0
            } else {
                // Substituting x = 4 sin^2(t) integrates the density in
                // closed form: F(x) = (2/pi) asin(sqrt(x)/2)
                //                     + sqrt(x (4 - x)) / (2 pi).
                let theta = (x.sqrt() / 2.0).asin();
                (2.0 / std::f64::consts::PI) * theta
                    + (x * (4.0 - x)).sqrt() / (2.0 * std::f64::consts::PI)
            }
        }
        OracleKind::TwoAtom { atoms, weights } => {
            let mut acc = 0.0;
            for (a, w) in atoms.iter().zip(weights.iter()) {
                if x >= *a {
                    acc += w;
                }
            }
            acc
        }
    }
}

/// Grid maximum of `|G1 - G2|` over a polar mesh of the region
/// `{Im z > 0, |z| > R}`, truncated at an outer radius.
pub fn sup_on_upper_exterior<F, G>(
    g1: F,
    g2: G,
    r: f64,
    r_max: f64,
    radial: usize,
    angular: usize,
) -> SpectraResult<f64>
where
    F: Fn(Complex64) -> Result<Complex64, String>,
    G: Fn(Complex64) -> Result<Complex64, String>,
{
    if !(r > 0.0) || r_max <= r || radial < 2 || angular < 2 {
        return Err(SpectraError::InvalidGrid("bad polar mesh".into()));
    }
    let mut worst = 0.0_f64;
    let mut failures = 0usize;
    let mut first: Option<(f64, String)> = None;
    for i in 0..radial {
        let rho = r * 1.001 + (r_max - r * 1.001) * i as f64 / (radial - 1) as f64;
        for j in 1..angular {
            let th = std::f64::consts::PI * j as f64 / angular as f64;
            let z = Complex64::from_polar(rho, th);
            match (g1(z), g2(z)) {
                (Ok(a), Ok(b)) => worst = worst.max((a - b).norm()),
                (Err(e), _) | (_, Err(e)) => {
                    failures += 1;
                    if first.is_none() {
                        first = Some((z.re, e));
                    }
                }
            }
        }
    }
    if failures > 0 {
        let (first_x, first_err) = first.unwrap();
        return Err(SpectraError::EvaluatorFailure { count: failures, first_x, first_err });
    }
    Ok(worst)
}

/// Empirical modulus of continuity of a CDF: the largest increment over
/// windows of width `t` on the grid, divided by `t`. Reported, not asserted.
pub fn empirical_lipschitz(cdf: &Cdf, t: f64) -> f64 {
    let mut worst = 0.0_f64;
    for (i, &xi) in cdf.x.iter().enumerate() {
        let target = xi + t;
        let fi = cdf.values[i];
        let ft = cdf.eval(target);
        worst = worst.max((ft - fi).abs() / t);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scsolver::scalar_semicircle_cauchy;

    #[test]
    fn semicircle_density_recovery_center() {
        let grid: Vec<f64> = (-25..=25).map(|i| i as f64 / 10.0).collect();
        let d = density_from_cauchy(
            |z| scalar_semicircle_cauchy(1.0, z).map_err(|e| e.to_string()),
            &grid,
            &DEFAULT_EPS_SCHEDULE,
        )
        .unwrap();
        let at0 = d.values[grid.iter().position(|&x| x == 0.0).unwrap()];
        assert!((at0 - 1.0 / std::f64::consts::PI).abs() < 1e-4, "rho(0) = {at0}");
        let at3_idx = grid.iter().position(|&x| x == 2.5).unwrap();
        assert!(d.values[at3_idx] < 1e-3);
    }

    #[test]
    fn richardson_beats_raw_evaluation() {
        let grid: Vec<f64> = (-401..=401).map(|i| i as f64 * 2.5 / 401.0).collect();
        let eval = |z| scalar_semicircle_cauchy(1.0, z).map_err(|e: crate::scsolver::SolveError| e.to_string());
        let oracle = |x: f64| oracle_density(&OracleKind::Semicircle { variance: 1.0 }, x);
        let single = density_from_cauchy(eval, &grid, &[1e-2]).unwrap().sup_error(oracle);
        let pair = density_from_cauchy(eval, &grid, &[1e-2, 5e-3]).unwrap().sup_error(oracle);
        let full =
            density_from_cauchy(eval, &grid, &DEFAULT_EPS_SCHEDULE).unwrap().sup_error(oracle);
        assert!(pair < single, "pair {pair} vs single {single}");
        assert!(full < pair, "full {full} vs pair {pair}");
    }

    #[test]
    fn cdf_examples() {
        // Uniform density 1/2 on [0, 2]: F(1) = 0.5.
        let x: Vec<f64> = (0..=200).map(|i| i as f64 / 100.0).collect();
        let values = vec![0.5; x.len()];
        let d = GridDensity { x, values, eps_schedule: vec![] };
        let cdf = cdf_from_density(&d).unwrap();
        assert!((cdf.eval(1.0) - 0.5).abs() < 1e-12);
        assert_eq!(cdf.values.first().copied().unwrap(), 0.0);
        assert_eq!(cdf.values.last().copied().unwrap(), 1.0);

        let zero = GridDensity {
            x: vec![0.0, 1.0],
            values: vec![0.0, 0.0],
            eps_schedule: vec![],
        };
        assert!(matches!(cdf_from_density(&zero), Err(SpectraError::NegativeMass { .. })));
    }

    #[test]
    fn kolmogorov_examples() {
        let s0 = Cdf::unit_step(0.0);
        assert_eq!(kolmogorov(&s0, &s0), 0.0);
        let s1 = Cdf::unit_step(1.0);
        assert!((kolmogorov(&s0, &s1) - 1.0).abs() < 1e-12);
        // Symmetry and triangle inequality on a third step.
        let s2 = Cdf::unit_step(0.5);
        let d01 = kolmogorov(&s0, &s1);
        let d02 = kolmogorov(&s0, &s2);
        let d21 = kolmogorov(&s2, &s1);
        assert_eq!(d01, kolmogorov(&s1, &s0));
        assert!(d01 <= d02 + d21 + 1e-12);
    }

    #[test]
    fn oracle_values() {
        let sc = OracleKind::Semicircle { variance: 1.0 };
        assert!((oracle_density(&sc, 0.0) - 1.0 / std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(oracle_density(&sc, 5.0), 0.0);
        assert!(
            (oracle_density(&OracleKind::ScSquare, 2.0) - 1.0 / (2.0 * std::f64::consts::PI))
                .abs()
                < 1e-15
        );
        assert!(OracleKind::parse("nope", 1.0).is_err());
    }

    #[test]
    fn oracle_cdf_sanity() {
        let sc = OracleKind::Semicircle { variance: 1.0 };
        assert!((oracle_cdf(&sc, 0.0) - 0.5).abs() < 1e-12);
        assert_eq!(oracle_cdf(&sc, 2.0), 1.0);
        assert!((oracle_cdf(&OracleKind::ScSquare, 4.0) - 1.0).abs() < 1e-12);
        let atoms = OracleKind::TwoAtom { atoms: [2.0, -0.5], weights: [0.2, 0.8] };
        assert!((oracle_cdf(&atoms, 0.0) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn evaluator_failure_reported() {
        let r = density_from_cauchy(
            |_z| Err::<Complex64, String>("boom".into()),
            &[0.0, 1.0],
            &DEFAULT_EPS_SCHEDULE,
        );
        match r {
            Err(SpectraError::EvaluatorFailure { count, .. }) => assert_eq!(count, 2),
            other => panic!("expected failure report, got {other:?}"),
        }
    }
}
