//! Cross-module invariants as property tests.

use std::sync::Arc;

use ckn::analysis::{
    best_constant, lambda_fs, map_points_to_theta, min_envelope, symmetric_theta_curve, theta_coordinates,
};
use ckn::continuation::BranchPoint;
use ckn::model::{
    build_grid, evaluate_norms, evaluate_q, theta_critical, CylinderGrid, Field, MeasureMode, ProblemParams,
};
use ckn::symmetric::{mu_fs, soliton_norms};
use proptest::prelude::*;

fn small_grid(p: f64) -> Arc<CylinderGrid> {
    let params = ProblemParams::new(5, p, 1.0, MeasureMode::Surface).unwrap();
    Arc::new(build_grid(4.0, 24, 10, params).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn threshold_identity(p in 2.05f64..3.3, d in 3usize..8, frac in 0.0f64..=1.0) {
        prop_assume!(d <= 2 || p < 2.0 * d as f64 / (d as f64 - 2.0));
        let lower = theta_critical(p, d).unwrap();
        let theta = lower + frac * (1.0 - lower);
        let m = mu_fs(p, d).unwrap();
        let a = lambda_fs(p, theta, d).unwrap();
        let b = theta * m - (1.0 - theta) * m * (p - 2.0) / (p + 2.0);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn reduced_j_matches_direct_quotient(
        p in 2.2f64..3.2,
        frac in 0.0f64..=1.0,
        mu in 0.5f64..10.0,
        a in 0.1f64..0.6,
        b in 0.5f64..2.0,
    ) {
        let g = small_grid(p);
        let lower = theta_critical(p, 5).unwrap();
        let theta = lower + frac * (1.0 - lower);
        let u = Field::from_fn(Arc::clone(&g), |s, phi| (1.0 + a * phi.cos()) / (b * s).cosh());
        let n = evaluate_norms(&u).unwrap();
        let (lambda, j) = theta_coordinates(mu, &n, theta, p);
        let q = evaluate_q(&u, lambda, theta).unwrap();
        prop_assert!((j - q).abs() <= 1e-10 * q);
    }

    #[test]
    fn theta_one_collapse_and_positivity(p in 2.2f64..3.2, mu in 0.3f64..20.0, frac in 0.0f64..=1.0) {
        let params = ProblemParams::new(5, p, 1.0, MeasureMode::Surface).unwrap();
        let mut pt = BranchPoint::symmetric(mu, &params).unwrap();
        pt.symmetric = false;
        let one = map_points_to_theta(&[pt.clone()], &params, 1.0, "n").unwrap();
        prop_assert!((one.points[0].lambda - mu).abs() <= 1e-12 * mu);
        prop_assert!((one.points[0].j - pt.z.powf((p - 2.0) / p)).abs() <= 1e-10 * one.points[0].j);
        let lower = theta_critical(p, 5).unwrap();
        let theta = lower + frac * (1.0 - lower);
        let c = map_points_to_theta(&[pt], &params, theta, "n").unwrap();
        prop_assert!(c.points[0].j > 0.0);
    }

    #[test]
    fn symmetric_lambda_is_linear(p in 2.2f64..3.2, mu in 0.1f64..30.0, frac in 0.0f64..=1.0) {
        let params = ProblemParams::new(5, p, 1.0, MeasureMode::Surface).unwrap();
        let lower = theta_critical(p, 5).unwrap();
        let theta = lower + frac * (1.0 - lower);
        let c = symmetric_theta_curve(&[mu], theta, &params).unwrap();
        let expected = mu * (theta - (1.0 - theta) * (p - 2.0) / (p + 2.0));
        prop_assert!((c.points[0].lambda - expected).abs() <= 1e-12 * mu);
    }

    #[test]
    fn envelope_is_a_lower_bound(p in 2.3f64..3.0, shift in -0.5f64..0.5) {
        let params = ProblemParams::new(5, p, 1.0, MeasureMode::Surface).unwrap();
        let m = mu_fs(p, 5).unwrap();
        let mus: Vec<f64> = (0..30).map(|k| 0.2 * m + 0.1 * m * k as f64).collect();
        let a = symmetric_theta_curve(&mus, 0.9, &params).unwrap();
        let mut b = a.clone();
        for pt in &mut b.points {
            pt.lambda += shift;
            pt.j *= 0.99;
        }
        let grid: Vec<f64> = (0..50).map(|k| 0.5 + 0.2 * k as f64).collect();
        let env = min_envelope(&[a.clone(), b.clone()], &grid).unwrap();
        let single = min_envelope(std::slice::from_ref(&a), &grid).unwrap();
        for e in &env.points {
            for c in [&a, &b] {
                if let Some(w) = c.points.windows(2).find(|w| w[0].lambda <= e.lambda && e.lambda <= w[1].lambda) {
                    let t = (e.lambda - w[0].lambda) / (w[1].lambda - w[0].lambda);
                    let j = w[0].j + t * (w[1].j - w[0].j);
                    prop_assert!(e.j_min <= j + 1e-12 * j);
                }
            }
        }
        prop_assert!(single.switches.is_empty());
    }

    #[test]
    fn measure_modes_differ_by_sphere_mass(p in 2.2f64..3.2, mu in 0.3f64..20.0) {
        let s = soliton_norms(mu, p, 5, MeasureMode::Surface).unwrap();
        let q = soliton_norms(mu, p, 5, MeasureMode::Probability).unwrap();
        let area = ckn::model::sphere_area(5);
        prop_assert!((s.z - area * q.z).abs() <= 1e-12 * s.z);
        prop_assert!((s.t() - q.t()).abs() <= 1e-12 * s.t());
    }

    #[test]
    fn best_constant_is_decreasing(a in 0.01f64..100.0, b in 0.01f64..100.0) {
        prop_assume!(a < b);
        prop_assert!(best_constant(a) > best_constant(b));
    }
}
