mod common;

use std::f64::consts::PI;
use std::sync::OnceLock;

use common::*;
use sphereflow::archive::{run, FlowRun};
use sphereflow::config::preset;
use sphereflow::flow::{
    continuity_residual, fitted_decay_rate, run_flow, track_min_r, FlowConfig, FlowTrajectory,
    RATE_FIT_WINDOW,
};
use sphereflow::harmonics::{build_grid, SpectralField};
use sphereflow::metric::ConformalMetric;
use sphereflow::verify::linearized_decay_oracle;
use sphereflow::Error;

fn y20_run() -> &'static FlowRun {
    static RUN: OnceLock<FlowRun> = OnceLock::new();
    RUN.get_or_init(|| run(&preset("y20", 2.0 * PI, 0.05, 32).unwrap()).unwrap())
}

fn y31_run() -> &'static FlowRun {
    static RUN: OnceLock<FlowRun> = OnceLock::new();
    RUN.get_or_init(|| run(&preset("y31", 2.0 * PI, 0.05, 32).unwrap()).unwrap())
}

#[test]
fn constant_conformal_factor_is_stationary() {
    let g = build_grid(16).unwrap();
    let m = ConformalMetric::new(SpectralField::constant(16, -0.4), g).unwrap();
    let traj = run_flow(&m, &FlowConfig::default()).unwrap();
    assert_eq!(traj.len(), 1);
    assert_eq!(traj.t_final(), 0.0);
    assert!(traj.final_residual() < 1e-13);
}

#[test]
fn y20_converges_at_linearized_rate() {
    let traj = &y20_run().trajectory;
    traj.ensure_converged().unwrap();
    let r = traj.r();
    let rate = fitted_decay_rate(traj, RATE_FIT_WINDOW.0, RATE_FIT_WINDOW.1).unwrap();
    let oracle = linearized_decay_oracle(2, r).unwrap();
    assert!((rate / oracle - 1.0).abs() < 0.1, "rate {rate} oracle {oracle}");
}

#[test]
fn y31_converges_at_linearized_rate() {
    let traj = &y31_run().trajectory;
    traj.ensure_converged().unwrap();
    let rate = fitted_decay_rate(traj, RATE_FIT_WINDOW.0, RATE_FIT_WINDOW.1).unwrap();
    let oracle = linearized_decay_oracle(3, traj.r()).unwrap();
    assert!((rate / oracle - 1.0).abs() < 0.1, "rate {rate} oracle {oracle}");
}

#[test]
fn checkpoints_preserve_volume_and_increase_in_time() {
    let traj = &y20_run().trajectory;
    let v0 = traj.volume();
    for w in traj.checkpoints.windows(2) {
        assert!(w[1].t > w[0].t);
    }
    for cp in &traj.checkpoints {
        assert!((cp.diagnostics.volume / v0 - 1.0).abs() < 1e-6);
        assert!((cp.diagnostics.total_curvature / (8.0 * PI) - 1.0).abs() < 1e-6);
    }
    assert!(traj.final_residual() <= traj.tol_conv);
}

#[test]
fn curvature_floor_examples() {
    let g = build_grid(16).unwrap();
    let rho = 0.5f64.sqrt();
    let traj = run_flow(&ConformalMetric::round(g.clone(), rho).unwrap(), &FlowConfig::default()).unwrap();
    let c = track_min_r(&traj).unwrap();
    assert!((c - 2.0 / (rho * rho)).abs() < 1e-12);
    assert!((c - traj.r()).abs() < 1e-12);

    let traj = &y20_run().trajectory;
    let min_r0 = traj.checkpoints[0].diagnostics.min_r;
    assert!(track_min_r(traj).unwrap() >= 0.9 * min_r0);

    // R = e^{-2u}(2 + 12 Y_20) has negative minimum.
    let bad = FlowTrajectory::from_parts(
        g,
        vec![(0.0, SpectralField::mode(16, 2, 0, 1.0), SpectralField::zeros(16))],
        1e-9,
        true,
        false,
    )
    .unwrap();
    assert!(matches!(track_min_r(&bad), Err(Error::NonPositiveCurvatureFloor { .. })));
}

#[test]
fn continuity_residuals_for_mass_and_degree_two() {
    let traj = &y20_run().trajectory;
    let one = SpectralField::constant(32, 1.0);
    for c in continuity_residual(traj, &one).unwrap() {
        assert!(c.source_form <= 1e-6 && c.flux_form <= 1e-6, "{c:?}");
    }
    let f = SpectralField::mode(32, 2, 0, 1.0);
    let res0 = traj.checkpoints[0].diagnostics.residual_inf;
    let worst = continuity_residual(traj, &f)
        .unwrap()
        .iter()
        .map(|c| c.source_form.max(c.flux_form))
        .fold(0.0, f64::max);
    assert!(worst <= 1e-4 * f.norm() * res0, "worst {worst:e}");
}

#[test]
fn continuity_residual_vanishes_on_round_trajectory() {
    let g = build_grid(12).unwrap();
    let m = ConformalMetric::round(g, 0.8).unwrap();
    let mut traj = run_flow(&m, &FlowConfig::default()).unwrap();
    sphereflow::potential::fill_potentials(&mut traj).unwrap();
    for c in continuity_residual(&traj, &SpectralField::mode(12, 1, 0, 1.0)).unwrap() {
        assert!(c.source_form < 1e-12 && c.flux_form < 1e-12);
    }
}

#[test]
fn hermite_interpolation_reproduces_checkpoints() {
    let traj = &y20_run().trajectory;
    for k in [0, traj.len() / 2, traj.len() - 1] {
        let cp = &traj.checkpoints[k];
        assert!(max_abs_diff(traj.u_at(cp.t).coeffs(), cp.u.coeffs()) < 1e-14);
        assert!(max_abs_diff(traj.xi_at(cp.t).coeffs(), cp.xi.coeffs()) < 1e-14);
    }
}

#[test]
fn y31_late_tail_follows_the_degree_two_mode() {
    // The quadratic term feeds O(ε²) content into degree 2, which decays at the slower
    // degree-2 rate; deep into convergence it dominates ‖R − r‖_∞.
    let traj = &y31_run().trajectory;
    let late = fitted_decay_rate(traj, 1e-3, 1e-7).unwrap();
    let slow = linearized_decay_oracle(2, traj.r()).unwrap();
    assert!((late / slow - 1.0).abs() < 0.1, "late rate {late}");
}

#[test]
fn decay_oracle_examples() {
    assert_eq!(linearized_decay_oracle(1, 4.0).unwrap(), 0.0);
    assert_eq!(linearized_decay_oracle(2, 4.0).unwrap(), -8.0);
    assert_eq!(linearized_decay_oracle(3, 2.0).unwrap(), -10.0);
    assert!(linearized_decay_oracle(0, 2.0).is_err());
}
