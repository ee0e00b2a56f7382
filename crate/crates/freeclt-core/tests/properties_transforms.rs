//! Properties of the truncated-series transform and the fixed-point solver:
//! norm mapping bounds, invertibility of transform values, covariance-map
//! structure, solver diagnostics, and oracle agreement.

use freeclt_core::freemoments::{DistributionSpec, FamilyConfig, FreeFamilySpec};
use freeclt_core::matlin::{hermitian_eigen, sample_omega_point, CMatrix, OmegaParams};
use freeclt_core::opmodel::OperatorModel;
use freeclt_core::scsolver::{
    certify_domain, convergence_steps, scalar_semicircle_cauchy, solve_cauchy, SemicircularSpec,
};
use freeclt_core::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn skewed_scalar_model() -> OperatorModel {
    let cfg = FamilyConfig {
        components: vec![DistributionSpec::skewed_two_atom()],
        mixing: None,
        order: Some(32),
    };
    OperatorModel::scalar(cfg.to_family().unwrap()).unwrap()
}

fn two_dim_semicircular_model() -> OperatorModel {
    let fam = FreeFamilySpec::semicircular_components(&[1.0, 1.0], 32).unwrap();
    let sx = CMatrix::from_real(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
    let sz = CMatrix::from_real(2, &[1.0, 0.0, 0.0, -1.0]).unwrap();
    OperatorModel::centered(vec![sx, sz], fam).unwrap()
}

#[test]
fn transform_norm_mapping_and_invertibility() {
    let theta = 0.2;
    let sigma = 0.9;
    let cc = 2.0;
    for model in [skewed_scalar_model(), two_dim_semicircular_model()] {
        let est = model.norm_upper_estimate(1.1).unwrap();
        let params = OmegaParams::new(theta, sigma, cc, theta / est).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0x44);
        for _ in 0..500 {
            let b = sample_omega_point(&mut rng, model.m(), &params);
            let (g, _) = model.cauchy_series(&b, 1e-11, 48).unwrap();
            let cap = theta / (1.0 - theta) / est;
            assert!(g.op_norm() < cap, "||G|| = {} exceeds {cap}", g.op_norm());
            let ginv = g.inverse().expect("transform value must be invertible on the domain");
            let inv_cap = b.op_norm() / (1.0 - sigma);
            assert!(ginv.op_norm() < inv_cap, "||G^-1|| = {} exceeds {inv_cap}", ginv.op_norm());
        }
    }
}

#[test]
fn covariance_map_is_linear_and_positive() {
    let model = two_dim_semicircular_model();
    let eta = model.covariance_map();
    let mut rng = ChaCha8Rng::seed_from_u64(0x55);
    for _ in 0..100 {
        let x = random_matrix(2, &mut rng);
        let y = random_matrix(2, &mut rng);
        let alpha = c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        let lhs = eta.apply(&x.scale(alpha).add(&y)).unwrap();
        let rhs = eta.apply(&x).unwrap().scale(alpha).add(&eta.apply(&y).unwrap());
        assert!(lhs.sub(&rhs).op_norm() < 1e-12 * (1.0 + rhs.op_norm()));

        // Positivity on PSD inputs.
        let h = x.mul(&x.adjoint());
        let out = eta.apply(&h).unwrap();
        assert!(out.is_hermitian(1e-10));
        let (eigs, _) = hermitian_eigen(&out);
        assert!(eigs.iter().all(|&l| l >= -1e-10), "eta broke positivity: {eigs:?}");

        // Norm bound from the coefficient estimate.
        let bnd = eta.bound();
        assert!(eta.apply(&x).unwrap().op_norm() <= bnd * x.op_norm() * (1.0 + 1e-12));
    }
}

fn random_matrix(m: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let data: Vec<Complex64> =
        (0..m * m).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
    CMatrix::from_vec(m, data).unwrap()
}

#[test]
fn solver_steps_decay_geometrically_on_certified_inputs() {
    let model = two_dim_semicircular_model();
    let spec = SemicircularSpec::from_model(&model).unwrap();
    let est = spec.norm_estimate().unwrap();
    let params = OmegaParams::default_for_norm(est).unwrap();
    let alpha_norm = spec.alpha().op_norm();
    let mut rng = ChaCha8Rng::seed_from_u64(0x66);
    let mut tested = 0;
    while tested < 25 {
        let b = sample_omega_point(&mut rng, 2, &params);
        if !certify_domain(&spec, &b, &params, alpha_norm).unwrap() {
            continue;
        }
        tested += 1;
        let steps = convergence_steps(&spec, &b, 1e-13, 10_000).unwrap();
        let tail = &steps[steps.len().saturating_sub(10)..];
        for w in tail.windows(2) {
            if w[0] > 1e-300 {
                assert!(w[1] / w[0] < 1.0, "non-contracting step pair {w:?}");
            }
        }
    }
}

#[test]
fn solver_matches_scalar_oracle_on_certified_points() {
    let spec = SemicircularSpec::scalar(1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x77);
    for _ in 0..100 {
        // |z| > 1 / kappa with kappa about 0.09 for the unit semicircle.
        let modulus = 12.0 + 20.0 * rng.gen::<f64>();
        let phase = rng.gen::<f64>() * std::f64::consts::TAU;
        let z = Complex64::from_polar(modulus, phase);
        let rep = solve_cauchy(&spec, &CMatrix::scalar(1, z), 1e-13, 20_000).unwrap();
        let want = scalar_semicircle_cauchy(1.0, z).unwrap();
        assert!((rep.w[(0, 0)] - want).norm() < 1e-11, "z = {z}");
        assert!(rep.residual < 1e-12);
    }
}

#[test]
fn series_agrees_with_solver_for_semicircular_sum() {
    // The same object evaluated along two routes: truncated moment series of
    // the n-fold sum, and the fixed-point solve of the limit; semicircular
    // families make these equal for every n.
    let model = two_dim_semicircular_model();
    let spec = SemicircularSpec::from_model(&model).unwrap();
    let est = model.norm_upper_estimate(1.1).unwrap();
    let params = OmegaParams::new(0.2, 0.9, 2.0, 0.2 / est).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x88);
    for n in [1u64, 5, 32] {
        let b = sample_omega_point(&mut rng, 2, &params);
        let (series, tail) = model.sum(n).cauchy_series(&b, 1e-11, 48).unwrap();
        let solved = solve_cauchy(&spec, &b, 1e-12, 50_000).unwrap();
        let diff = series.sub(&solved.w).op_norm();
        assert!(diff < (1e-10_f64).max(tail * 2.0), "n = {n}: diff {diff}");
    }
}

#[test]
fn scaled_resolvent_inclusion_on_matrix_models() {
    // For invertible scalar-side b and any matrix substitution A, points
    // lambda with |lambda| > ||b^-1 A|| keep lambda*b - A invertible.
    let mut rng = ChaCha8Rng::seed_from_u64(0x99);
    for _ in 0..50 {
        let n = 12;
        let a = random_matrix(n, &mut rng).hermitian_part();
        let b_small = random_matrix(n, &mut rng).add(&CMatrix::scalar(n, c(1.5, 0.0)));
        let b_inv = match b_small.inverse() {
            Ok(i) => i,
            Err(_) => continue,
        };
        let bound = b_inv.mul(&a).op_norm();
        let lambda = c(bound * 1.3 + 0.1, 0.2);
        let shifted = b_small.scale(lambda).sub(&a);
        assert!(shifted.inverse().is_ok(), "scaled point left the resolvent set");
    }
}
