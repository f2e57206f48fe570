//! Cross-module invariants checked on random inputs.

use std::f64::consts::PI;

use proptest::prelude::*;

use scvlab_core::cauchy::{power_series, solve_dbar_1d, TorusGrid};
use scvlab_core::grid::{build_uniform_grid, DomainSpec, ScalarField};
use scvlab_core::hormander::{lp_closed_form, lp_iteration};
use scvlab_core::hulls::{poly_hull_membership, CompactSample};
use scvlab_core::psh::submean_test;
use scvlab_core::wirtinger::cr_residual_where;
use scvlab_core::{Certificate, C64};

/// No regression files: integration tests have no lib.rs next to them.
fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn complex() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| C64::new(a, b))
}

fn poly_eval(coeffs: &[C64], z: C64) -> C64 {
    coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * z + c)
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn disc_distance_plus_radius(cx in -1.0..1.0f64, cy in -1.0..1.0f64, r in 0.1..2.0f64, t in 0.0..1.0f64, a in 0.0..6.0f64) {
        let center = C64::new(cx, cy);
        let d = DomainSpec::disc(center, r);
        let z = center + C64::from_polar(t * r * 0.999, a);
        let dist = d.boundary_distance(&[z]).unwrap();
        prop_assert!((dist + (z - center).norm() - r).abs() < 1e-12);
    }

    #[test]
    fn grid_weights_sum_to_area(r in 0.3..2.0f64, n in 16usize..48) {
        let g = build_uniform_grid(&DomainSpec::disc(C64::new(0.1, -0.2), r), n).unwrap();
        let total: f64 = g.weights().iter().sum();
        prop_assert!((total - PI * r * r).abs() < 1e-10 * r * r);
    }

    #[test]
    fn power_series_recovers_polynomial(coeffs in prop::collection::vec(complex(), 1..8), r in 0.2..1.5f64) {
        let torus = TorusGrid::new(vec![C64::new(0.0, 0.0)], vec![r], 64).unwrap();
        let values: Vec<C64> = torus.points().iter().map(|z| poly_eval(&coeffs, z[0])).collect();
        let series = power_series(&torus, &values, 10).unwrap();
        for (k, a) in series.coeffs.iter().enumerate() {
            let expected = coeffs.get(k).copied().unwrap_or_default();
            prop_assert!((a - expected).norm() < 1e-11 * (1.0 + r.powi(-(k as i32))));
        }
    }

    #[test]
    fn log_modulus_of_polynomial_is_submean(roots in prop::collection::vec(complex(), 1..4), p in complex()) {
        let u = |z: C64| roots.iter().map(|w| (z - w).norm().ln()).sum::<f64>();
        let cert = submean_test(&u, &[0.5 * p], &[0.05, 0.2, 0.4], 256).unwrap();
        prop_assert!(cert.pass, "{:?}", cert);
    }

    #[test]
    fn compact_lies_in_its_hull(r in 0.2..0.9f64, seed in 0u64..1000) {
        let k = CompactSample::circle(C64::new(0.0, 0.0), r, 64).unwrap();
        let res = poly_hull_membership(&k, &k.points, 4, 20, seed).unwrap();
        prop_assert!(res.retained.iter().all(|&b| b));
    }

    #[test]
    fn lp_iteration_matches_closed_form(a0 in 0.01..100.0f64, c0 in 0.1..10.0f64, p in 0.1..2.0f64) {
        let seq = lp_iteration(a0, c0, p, 30).unwrap();
        for (n, a) in seq.iter().enumerate() {
            let exact = lp_closed_form(a0, c0, p, n);
            prop_assert!(((a - exact) / exact).abs() < 1e-12);
        }
    }

    #[test]
    fn certificate_serialization_is_stable(lhs in -1e3..1e3f64, rhs in -1e3..1e3f64) {
        let c = Certificate::upper_bound("x", lhs, rhs, 0.0).with_param("v", lhs);
        let a = serde_json::to_string(&c).unwrap();
        let b = serde_json::to_string(&c.clone()).unwrap();
        prop_assert_eq!(&a, &b);
        let v: serde_json::Value = serde_json::from_str(&a).unwrap();
        prop_assert_eq!(v["lhs"].as_f64().unwrap(), lhs);
        prop_assert_eq!(c.pass, rhs >= lhs);
    }
}

proptest! {
    #![proptest_config(config(6))]

    /// `u - zbar q(z)` is holomorphic when `∂u/∂zbar = q(z)` for holomorphic `q`.
    #[test]
    fn dbar_solution_differs_from_particular_by_holomorphic(coeffs in prop::collection::vec(complex(), 1..4)) {
        let g = build_uniform_grid(&DomainSpec::disc(C64::new(0.0, 0.0), 1.0), 64).unwrap();
        let phi = ScalarField::sample(&g, |z| poly_eval(&coeffs, z[0])).unwrap();
        let sol = solve_dbar_1d(&phi).unwrap();
        let particular = ScalarField::sample(&g, |z| z[0].conj() * poly_eval(&coeffs, z[0])).unwrap();
        let diff = sol.u.sub(&particular).unwrap();
        let scale = coeffs.iter().map(|c| c.norm()).sum::<f64>();
        let defect = cr_residual_where(&diff, |k| g.coord(k, 0).norm() <= 0.9).unwrap();
        prop_assert!(defect <= 1e-2 * scale, "{defect}");
    }
}
