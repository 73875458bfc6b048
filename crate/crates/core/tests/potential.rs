mod common;

use std::f64::consts::PI;

use common::*;
use sphereflow::config::preset;
use sphereflow::harmonics::{build_grid, n_coeffs, SpectralField};
use sphereflow::metric::ConformalMetric;
use sphereflow::potential::{solve_potential, solve_with_deviation, velocity, weak_form_sides};
use sphereflow::Error;

#[test]
fn round_metric_has_zero_potential() {
    let m = ConformalMetric::round(build_grid(16).unwrap(), 0.7).unwrap();
    let (xi, report) = solve_potential(&m).unwrap();
    assert!(xi.max_abs() < 1e-14);
    assert!(report.residual_inf < 1e-12);
    assert!(velocity(&m, &xi).unwrap().max_norm_can() < 1e-13);
}

#[test]
fn manufactured_source_on_unit_sphere() {
    let g = build_grid(16).unwrap();
    let m = ConformalMetric::new(SpectralField::zeros(16), g.clone()).unwrap();
    let source = g.synthesize_values(&SpectralField::mode(16, 2, 0, 1.0)).unwrap();
    let (xi, report) = solve_with_deviation(&m, &source).unwrap();
    let expect = SpectralField::mode(16, 2, 0, -1.0 / 6.0);
    assert!(max_abs_diff(xi.coeffs(), expect.coeffs()) < 1e-14);
    assert!(report.residual_inf < 1e-13);
    assert!(!report.saturated);
}

#[test]
fn velocity_scales_with_constant_conformal_factor() {
    let g = build_grid(12).unwrap();
    let xi = SpectralField::mode(12, 3, 1, 1.0);
    let flat = ConformalMetric::new(SpectralField::zeros(12), g.clone()).unwrap();
    let c: f64 = -0.25;
    let scaled = ConformalMetric::new(SpectralField::constant(12, c), g).unwrap();
    let a = velocity(&flat, &xi).unwrap();
    let b = velocity(&scaled, &xi).unwrap();
    let e = (-2.0 * c).exp();
    for k in 0..a.theta.len() {
        assert!((b.theta[k] - e * a.theta[k]).abs() < 1e-14);
        assert!((b.phi[k] - e * a.phi[k]).abs() < 1e-14);
    }
}

#[test]
fn unbalanced_source_is_rejected() {
    let g = build_grid(8).unwrap();
    let m = ConformalMetric::new(SpectralField::zeros(8), g.clone()).unwrap();
    let source = vec![1.0; g.len()];
    assert!(matches!(solve_with_deviation(&m, &source), Err(Error::Solvability { .. })));
}

#[test]
fn top_heavy_source_is_flagged() {
    let g = build_grid(12).unwrap();
    let m = ConformalMetric::new(SpectralField::zeros(12), g.clone()).unwrap();
    let source = g.synthesize_values(&SpectralField::mode(12, 11, 3, 1.0)).unwrap();
    let (_, report) = solve_with_deviation(&m, &source).unwrap();
    assert!(report.saturated);
    assert!(report.top_third_energy > 0.99);
}

/// Axisymmetric oracle: with `s(θ) = e^{2u}(R − r)`, `sin θ ξ'(θ) = ∫_0^θ s sin`, so ξ is
/// obtained by two nested composite Simpson integrations on 512 panels.
fn axisymmetric_potential(s: impl Fn(f64) -> f64, theta: f64) -> f64 {
    let simpson = |f: &dyn Fn(f64) -> f64, b: f64| {
        let n = 512;
        let h = b / n as f64;
        let mut acc = f(0.0) + f(b);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        acc * h / 3.0
    };
    let flux = |t: f64| simpson(&|x: f64| s(x) * x.sin(), t);
    let slope = |t: f64| if t == 0.0 { 0.0 } else { flux(t) / t.sin() };
    simpson(&slope, theta)
}

#[test]
fn y20_potential_matches_axisymmetric_quadrature_oracle() {
    let eps = 0.05;
    let cfg = preset("y20", 2.0 * PI, eps, 32).unwrap();
    let m = cfg.initial_metric().unwrap();
    let (xi, _) = solve_potential(&m).unwrap();
    let g = m.grid().clone();

    let c = m.u().get(0, 0) / (4.0 * PI).sqrt();
    let r = 8.0 * PI / (2.0 * PI);
    let y20 = |t: f64| (5.0 / (16.0 * PI)).sqrt() * (3.0 * t.cos().powi(2) - 1.0);
    let u = |t: f64| c + eps * y20(t);
    // e^{2u} R = 2 − 2Δu with Δu = −6 ε Y_20
    let s = |t: f64| 2.0 + 12.0 * eps * y20(t) - r * (2.0 * u(t)).exp();

    let ring: Vec<f64> = g.theta().iter().map(|&t| axisymmetric_potential(s, t)).collect();
    let oracle: Vec<f64> = (0..g.len()).map(|k| ring[k / g.nlon()]).collect();
    let shift = -g.integrate_product(&oracle, m.e2u()) / m.volume();
    let oracle: Vec<f64> = oracle.iter().map(|v| v + shift).collect();

    let got = g.synthesize_values(&xi).unwrap();
    let rel = max_abs_diff(&got, &oracle) / max_abs(&oracle);
    assert!(rel < 1e-5, "relative error {rel:e}");
}

#[test]
fn weak_form_holds_for_random_test_functions() {
    let m = preset("mixed", 2.0 * PI, 0.05, 32).unwrap().initial_metric().unwrap();
    let (xi, report) = solve_potential(&m).unwrap();
    assert!(report.residual_inf <= 1e-8 * m.curvature_deviation() + 1e-12);
    assert!(report.normalization.abs() < 1e-12);
    for seed in 0..5 {
        let f = random_field(32, 8, seed);
        let (lhs, rhs) = weak_form_sides(&m, &xi, &f).unwrap();
        let scale = f.norm() * m.curvature_deviation() * m.volume();
        assert!((lhs - rhs).abs() <= 1e-6 * scale, "seed {seed}: {lhs} vs {rhs}");
    }
    assert_eq!(n_coeffs(8), 81);
}
