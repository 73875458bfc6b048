use std::f64::consts::PI;

use sphereflow::archive::run;
use sphereflow::config::preset;
use sphereflow::harmonics::{build_grid, SpectralField};
use sphereflow::metric::ConformalMetric;
use sphereflow::transport::{build_atlas, default_sample_points, TransportOptions};
use sphereflow::verify::{first_eigenvalue, lichnerowicz_check, pushforward_from_images, pushforward_test};

#[test]
fn round_pushforward_is_exact() {
    let fr = run(&preset("round", 2.0 * PI, 0.0, 16).unwrap()).unwrap();
    let traj = &fr.trajectory;
    let pts = default_sample_points(traj.grid(), 0, 0);
    let atlas = build_atlas(traj, &pts, &TransportOptions::default()).unwrap();
    let report = pushforward_test(traj, &atlas).unwrap();
    assert!(report.worst_error <= 1e-9);
    let one = &report.entries[0];
    assert_eq!(one.function, "one");
    assert!((one.direct - 2.0 * PI).abs() < 1e-9);
}

#[test]
fn y20_pushforward_within_tolerance() {
    let fr = run(&preset("y20", 2.0 * PI, 0.05, 32).unwrap()).unwrap();
    let traj = &fr.trajectory;
    let pts = default_sample_points(traj.grid(), 0, 0);
    let atlas = build_atlas(traj, &pts, &TransportOptions::default()).unwrap();
    let report = pushforward_test(traj, &atlas).unwrap();
    let mass = &report.entries[0];
    assert!(mass.error <= 1e-9, "mass error {:e}", mass.error);
    assert!(report.worst_error <= 1e-3, "worst {:e}", report.worst_error);
    // Identity images compare the round measure with ν_0, which differ.
    let wrong = pushforward_from_images(traj, &traj.grid().nodes()).unwrap();
    assert!(wrong.worst_error > 1e-3);
    // Atlases that do not start at the grid nodes are rejected.
    let shifted = build_atlas(traj, &pts[1..], &TransportOptions::default()).unwrap();
    assert!(pushforward_test(traj, &shifted).is_err());
}

#[test]
fn round_spectrum_examples() {
    let g = build_grid(12).unwrap();
    let unit = ConformalMetric::new(SpectralField::zeros(12), g.clone()).unwrap();
    assert!((first_eigenvalue(&unit, 8).unwrap() - 2.0).abs() < 1e-10);
    let rho: f64 = 0.6;
    let m = ConformalMetric::round(g, rho).unwrap();
    let report = lichnerowicz_check(&m, None).unwrap();
    assert!((report.lambda1.unwrap() - 2.0 / (rho * rho)).abs() < 1e-10);
    assert_eq!(report.verdict, Some(true));
}

#[test]
fn near_round_preset_spectrum() {
    let m = preset("y20", 2.0 * PI, 0.01, 32).unwrap().initial_metric().unwrap();
    let report = lichnerowicz_check(&m, None).unwrap();
    let l1 = report.lambda1.unwrap();
    assert!(l1 >= 2.0 && (l1 / 4.0 - 1.0).abs() < 0.05, "λ1 = {l1}");
}

#[test]
fn check_is_skipped_below_curvature_two() {
    let m = ConformalMetric::round(build_grid(8).unwrap(), 1.5).unwrap();
    let report = lichnerowicz_check(&m, None).unwrap();
    assert!(report.lambda1.is_none() && report.verdict.is_none());
    assert!(report.skipped.is_some());
}
