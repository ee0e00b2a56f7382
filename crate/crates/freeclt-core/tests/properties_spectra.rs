//! Density/CDF pipeline properties: quadrature moments against the moment
//! engine, metric axioms of the Kolmogorov distance, and the reported
//! modulus of continuity.

use freeclt_core::freemoments::{FreeFamilySpec, Word};
use freeclt_core::scsolver::scalar_semicircle_cauchy;
use freeclt_core::spectra::{
    cdf_from_density, density_from_cauchy, empirical_lipschitz, kolmogorov, sup_on_upper_exterior,
    Cdf, OracleKind, DEFAULT_EPS_SCHEDULE,
};
use freeclt_core::Complex64;
use proptest::prelude::*;

fn mp_transform(z: Complex64) -> Complex64 {
    // Stieltjes transform of the square of a standard semicircular variable:
    // the branch of (z - sqrt(z^2 - 4z)) / (2z) vanishing at infinity.
    let root = (z * z - z * 4.0).sqrt();
    let g1 = (z - root) / (z * 2.0);
    let g2 = (z + root) / (z * 2.0);
    if g1.norm() <= g2.norm() {
        g1
    } else {
        g2
    }
}

#[test]
fn recovered_moments_match_the_moment_engine() {
    // Semicircle on a covering grid.
    let grid: Vec<f64> = (0..=600).map(|i| -3.0 + 6.0 * i as f64 / 600.0).collect();
    let density = density_from_cauchy(
        |z| scalar_semicircle_cauchy(1.0, z).map_err(|e| e.to_string()),
        &grid,
        &DEFAULT_EPS_SCHEDULE,
    )
    .unwrap();
    let fam = FreeFamilySpec::semicircular_components(&[1.0], 12).unwrap();
    for k in 0..=6u32 {
        let engine = fam.joint_moment(&Word(vec![0; k as usize])).unwrap();
        let quad = density.moment(k);
        assert!((quad - engine).abs() < 1e-2, "semicircle moment {k}: {quad} vs {engine}");
    }

    // Square of a semicircular variable; moments are the engine values of
    // even words. The density has an inverse-square-root spike at zero and
    // the boundary smoothing leaks some mass below it, so the grid is dense
    // around the origin and extends slightly past the support.
    let mut grid2: Vec<f64> = (0..1000).map(|i| -0.3 + 0.5 * i as f64 / 1000.0).collect();
    grid2.extend((0..=880).map(|i| 0.2 + 4.4 * i as f64 / 880.0));
    let density2 = density_from_cauchy(
        |z| Ok::<Complex64, String>(mp_transform(z)),
        &grid2,
        &DEFAULT_EPS_SCHEDULE,
    )
    .unwrap();
    for k in 0..=6u32 {
        let engine = fam.joint_moment(&Word(vec![0; 2 * k as usize])).unwrap();
        let quad = density2.moment(k);
        assert!(
            (quad - engine).abs() < 1e-2 * engine.max(1.0),
            "square-law moment {k}: {quad} vs {engine}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn kolmogorov_metric_axioms(
        xs1 in proptest::collection::vec(-5.0f64..5.0, 3..12),
        xs2 in proptest::collection::vec(-5.0f64..5.0, 3..12),
        xs3 in proptest::collection::vec(-5.0f64..5.0, 3..12),
    ) {
        let make = |mut xs: Vec<f64>| -> Cdf {
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            xs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
            let n = xs.len();
            let values = (0..n).map(|i| (i + 1) as f64 / n as f64).collect();
            Cdf { x: xs, values }
        };
        let f1 = make(xs1);
        let f2 = make(xs2);
        let f3 = make(xs3);
        let d12 = kolmogorov(&f1, &f2);
        let d21 = kolmogorov(&f2, &f1);
        prop_assert_eq!(d12.to_bits(), d21.to_bits(), "symmetry must be exact");
        let d13 = kolmogorov(&f1, &f3);
        let d32 = kolmogorov(&f3, &f2);
        prop_assert!(d12 <= d13 + d32 + 1e-12, "triangle: {} > {} + {}", d12, d13, d32);
        prop_assert!(kolmogorov(&f1, &f1) == 0.0);
    }
}

#[test]
fn exterior_sup_helper_sees_known_difference() {
    // Two semicircle transforms of different variance differ by about
    // (v2 - v1)/z^3 high up; the helper must report a positive sup of the
    // right magnitude and no failures.
    let sup = sup_on_upper_exterior(
        |z| scalar_semicircle_cauchy(1.0, z).map_err(|e| e.to_string()),
        |z| scalar_semicircle_cauchy(1.5, z).map_err(|e| e.to_string()),
        4.0,
        40.0,
        24,
        16,
    )
    .unwrap();
    assert!(sup > 1e-4 && sup < 1e-1, "sup {sup}");
}

#[test]
fn lipschitz_report_for_semicircle_cdf() {
    let grid: Vec<f64> = (0..=400).map(|i| -2.2 + 4.4 * i as f64 / 400.0).collect();
    let density = density_from_cauchy(
        |z| scalar_semicircle_cauchy(1.0, z).map_err(|e| e.to_string()),
        &grid,
        &DEFAULT_EPS_SCHEDULE,
    )
    .unwrap();
    let cdf = cdf_from_density(&density).unwrap();
    let rho = empirical_lipschitz(&cdf, 0.05);
    // The density peaks at 1/pi, so the empirical modulus sits close below.
    assert!(rho < 0.4, "modulus of continuity {rho}");
    assert!(rho > 0.2, "modulus of continuity {rho}");
    let _ = OracleKind::parse("semicircle", 1.0).unwrap();
}
