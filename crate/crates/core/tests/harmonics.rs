mod common;

use std::f64::consts::PI;

use common::*;
use sphereflow::harmonics::{
    analyze, build_grid, gradient_can, integrate, laplacian_can, lm_index, poisson_solve_can, synthesize,
    ScalarField, SpectralField,
};

#[test]
fn small_grid_shape_and_area() {
    let g = build_grid(4).unwrap();
    assert_eq!((g.nlat(), g.nlon()), (5, 10));
    let total: f64 = (0..g.len()).map(|k| g.node_weight(k / g.nlon())).sum();
    assert!((total - 4.0 * PI).abs() < 1e-13);
}

#[test]
fn closed_form_harmonics_are_orthonormal_at_l32() {
    let g = build_grid(32).unwrap();
    let y32 = ScalarField::from_fn(g.clone(), |p| y_closed(3, 2, p));
    let y42 = ScalarField::from_fn(g.clone(), |p| y_closed(4, 2, p));
    let self_ip = integrate(&y32, &y32);
    let cross = integrate(&y32, &y42);
    assert!((self_ip - 1.0).abs() < 1e-10, "{self_ip}");
    assert!(cross.abs() < 1e-10, "{cross}");
    assert!((integrate(&y42, &y42) - 1.0).abs() < 1e-10);
}

#[test]
fn synthesized_modes_match_closed_forms() {
    let g = build_grid(12).unwrap();
    let modes = [
        (0, 0),
        (1, -1),
        (1, 0),
        (1, 1),
        (2, -2),
        (2, -1),
        (2, 0),
        (2, 1),
        (2, 2),
        (3, 0),
        (3, 1),
        (3, 2),
        (4, 2),
    ];
    for (l, m) in modes {
        let f = synthesize(&SpectralField::mode(12, l, m, 1.0), &g).unwrap();
        let expect: Vec<f64> = g.nodes().into_iter().map(|p| y_closed(l, m, p)).collect();
        assert!(max_abs_diff(f.values(), &expect) < 1e-13, "mode ({l},{m})");
    }
}

#[test]
fn constant_analyzes_to_leading_coefficient() {
    let g = build_grid(8).unwrap();
    let c = analyze(&ScalarField::constant(g, 1.0)).unwrap();
    assert!((c.get(0, 0) - (4.0 * PI).sqrt()).abs() < 1e-13);
    assert!(c.coeffs()[1..].iter().all(|v| v.abs() < 1e-13));
}

#[test]
fn round_trip_random_field_l16() {
    let g = build_grid(16).unwrap();
    let f = random_field(16, 16, 7);
    let values = synthesize(&f, &g).unwrap();
    let back = analyze(&values).unwrap();
    assert!(max_abs_diff(back.coeffs(), f.coeffs()) < 1e-12);
    let again = synthesize(&back, &g).unwrap();
    assert!(max_abs_diff(again.values(), values.values()) < 1e-12);
}

#[test]
fn laplacian_examples() {
    for m in -1..=1 {
        let f = SpectralField::mode(8, 1, m, 1.0);
        assert_eq!(laplacian_can(&f).coeffs(), f.scaled(-2.0).coeffs());
    }
    for m in -2..=2 {
        let f = SpectralField::mode(8, 2, m, 1.0);
        assert_eq!(laplacian_can(&f).coeffs(), f.scaled(-6.0).coeffs());
    }
    let c = SpectralField::constant(8, 3.0);
    assert!(laplacian_can(&c).coeffs().iter().all(|v| *v == 0.0));
}

#[test]
fn poisson_examples() {
    let xi = poisson_solve_can(&SpectralField::mode(8, 2, 0, 1.0), None).unwrap();
    assert!(max_abs_diff(xi.coeffs(), SpectralField::mode(8, 2, 0, -1.0 / 6.0).coeffs()) < 1e-15);

    let zero = poisson_solve_can(&SpectralField::zeros(8), None).unwrap();
    assert!(zero.coeffs().iter().all(|v| *v == 0.0));

    let mut s = SpectralField::mode(8, 1, 1, 1.0);
    s.set(3, 0, 1.0);
    let xi = poisson_solve_can(&s, None).unwrap();
    assert!((xi.get(1, 1) + 0.5).abs() < 1e-15);
    assert!((xi.get(3, 0) + 1.0 / 12.0).abs() < 1e-15);
    assert_eq!(xi.get(0, 0), 0.0);

    assert!(poisson_solve_can(&SpectralField::constant(8, 1.0), None).is_err());
}

#[test]
fn gradient_of_constant_and_vertical_coordinate() {
    let g = build_grid(10).unwrap();
    let grad = gradient_can(&SpectralField::constant(10, 2.5), &g).unwrap();
    assert!(grad.max_norm_can() < 1e-13);

    // z = sqrt(4π/3) Y_10; ∇z = tangential part of e_z, of length sin θ
    let z = SpectralField::mode(10, 1, 0, (4.0 * PI / 3.0).sqrt());
    let grad = gradient_can(&z, &g).unwrap();
    let norms = grad.norm_can();
    for k in 0..g.len() {
        let p = g.node(k);
        let v = grad.cartesian(k);
        let expect = [-p[2] * p[0], -p[2] * p[1], 1.0 - p[2] * p[2]];
        for i in 0..3 {
            assert!((v[i] - expect[i]).abs() < 1e-13);
        }
        let s = (1.0 - p[2] * p[2]).sqrt();
        assert!((norms[k] - s).abs() < 1e-13);
    }
}

#[test]
fn gradient_y22_matches_finite_differences() {
    let g = build_grid(16).unwrap();
    let grad = gradient_can(&SpectralField::mode(16, 2, 2, 1.0), &g).unwrap();
    let f = |t: f64, p: f64| y_closed(2, 2, cart(t, p));
    let mut worst = 0.0f64;
    for k in 0..g.len() {
        let (i, j) = (k / g.nlon(), k % g.nlon());
        let (gt, gp) = fd_gradient(&f, g.theta()[i], g.phi()[j]);
        worst = worst.max((grad.theta[k] - gt).abs()).max((grad.phi[k] - gp).abs());
    }
    assert!(worst < 1e-6, "worst {worst:e}");
}

#[test]
fn integration_examples() {
    let g = build_grid(8).unwrap();
    let one = ScalarField::constant(g.clone(), 1.0);
    assert!((integrate(&one, &one) - 4.0 * PI).abs() < 1e-13);
    let y20 = synthesize(&SpectralField::mode(8, 2, 0, 1.0), &g).unwrap();
    assert!(integrate(&y20, &one).abs() < 1e-14);
    assert!((integrate(&y20.mul(&y20), &one) - 1.0).abs() < 1e-13);
}

#[test]
fn index_layout() {
    assert_eq!(lm_index(0, 0), 0);
    assert_eq!(lm_index(1, -1), 1);
    assert_eq!(lm_index(2, 0), 6);
    assert_eq!(lm_index(3, 3), 15);
}
