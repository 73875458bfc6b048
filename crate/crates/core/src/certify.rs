//! Contraction certificate: the multiscale curvature criterion along the flow, the decay
//! monitors for `∇²ξ_t` and `M_t`, and the resulting Lipschitz bounds.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{flow_velocity, track_min_r, FlowTrajectory};
use crate::harmonics::SpectralField;
use crate::metric::{ConformalMetric, SymmetricBilinearField};
use crate::transport::{lipschitz_measured, TransportAtlas};

/// Relative slack allowed between measured and proven quantities.
pub const NUMERICAL_SLACK: f64 = 0.05;

/// `M = ∇²ξ − ½ (R − r) g`.
pub fn m_field(m: &ConformalMetric, xi: &SpectralField) -> Result<SymmetricBilinearField> {
    let h = m.hessian_g(xi)?;
    let r = m.mean_curvature_r();
    let half_dev: Vec<f64> = m.curvature_values().iter().map(|c| 0.5 * (c - r)).collect();
    Ok(h.add_scaled(-1.0, &m.metric_form(&half_dev)))
}

/// Smallest admissible `λ̇` at one instant, in the two algebraically equivalent forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaDot {
    /// From `2∇²ξ − ∂_t g ≥ −λ̇ g`, with `∂_t g` taken from the flow velocity of `u`.
    pub proposition: f64,
    /// From `∇²ξ + Ric ≥ ½ (r − λ̇) g`.
    pub corollary: f64,
}

fn lambda_dot_parts(
    m: &ConformalMetric,
    xi: &SpectralField,
    du: &SpectralField,
) -> Result<(LambdaDot, SymmetricBilinearField)> {
    let h = m.hessian_g(xi)?;
    let grid = m.grid();
    let r = m.mean_curvature_r();

    // ∂_t g = 2 (du/dt) g
    let udot = grid.synthesize_values(du)?;
    let two_udot: Vec<f64> = udot.iter().map(|v| 2.0 * v).collect();
    let prop_form = h.scaled(2.0).add_scaled(-1.0, &m.metric_form(&two_udot));
    let prop_min = m.min_eigenvalue_rel(&prop_form).min();

    // Ric = (R/2) g in two dimensions.
    let half_r: Vec<f64> = m.curvature_values().iter().map(|c| 0.5 * c).collect();
    let cor_form = h.add_scaled(1.0, &m.metric_form(&half_r));
    let cor_min = m.min_eigenvalue_rel(&cor_form).min();

    Ok((
        LambdaDot {
            proposition: (-prop_min).max(0.0),
            corollary: (r - 2.0 * cor_min).max(0.0),
        },
        h,
    ))
}

/// `λ̇` at time `t` from the interpolated trajectory.
pub fn lambda_dot(traj: &FlowTrajectory, t: f64) -> Result<LambdaDot> {
    let m = ConformalMetric::new(traj.u_at(t), traj.grid().clone())?;
    let xi = traj.xi_at(t);
    let du = flow_velocity(&m, traj.dealias)?;
    Ok(lambda_dot_parts(&m, &xi, &du)?.0)
}

/// Tensor diagnostics at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointTensors {
    pub t: f64,
    /// `sup_x |∇²ξ|_g`.
    pub sup_hess: f64,
    /// `sup_x |M|_g`.
    pub sup_m: f64,
    pub lambda_dot: LambdaDot,
    /// Smallest admissible rate for the trace-free form `2∇²ξ + (r − R) g = 2M`.
    pub lambda_dot_tracefree: f64,
    /// `sup_x |tr_g M|`, zero up to the Poisson residual.
    pub max_trace_m: f64,
    /// `‖R − r‖_∞`.
    pub residual_inf: f64,
}

/// Evaluates [`CheckpointTensors`] at every checkpoint (in parallel, ordered output).
pub fn analyze_checkpoints(traj: &FlowTrajectory) -> Result<Vec<CheckpointTensors>> {
    if !traj.potentials_filled {
        return Err(Error::Config("trajectory potentials have not been solved".into()));
    }
    let out: Vec<Result<CheckpointTensors>> = (0..traj.len())
        .into_par_iter()
        .map(|k| {
            let cp = &traj.checkpoints[k];
            let m = traj.metric_at_checkpoint(k)?;
            let (ld, h) = lambda_dot_parts(&m, &cp.xi, &cp.du)?;
            let r = m.mean_curvature_r();
            let half_dev: Vec<f64> = m.curvature_values().iter().map(|c| 0.5 * (c - r)).collect();
            let mf = h.add_scaled(-1.0, &m.metric_form(&half_dev));
            let tracefree_min = m.min_eigenvalue_rel(&mf.scaled(2.0)).min();
            Ok(CheckpointTensors {
                t: cp.t,
                sup_hess: m.sup_norm_rel(&h),
                sup_m: m.sup_norm_rel(&mf),
                lambda_dot: ld,
                lambda_dot_tracefree: (-tracefree_min).max(0.0),
                max_trace_m: m.trace_rel(&mf).iter().fold(0.0, |a, v| a.max(v.abs())),
                residual_inf: m.curvature_deviation(),
            })
        })
        .collect();
    out.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub t: f64,
    pub sup_hess: f64,
    pub sup_m: f64,
    pub hess_envelope: f64,
    pub m_envelope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayMonitor {
    pub c: f64,
    pub slack: f64,
    pub series: Vec<DecayPoint>,
    /// Both sup-norms stay below `value_0 · e^{−C t} · (1 + slack)` at every checkpoint.
    pub verdict: bool,
    /// First checkpoint time where the envelope is exceeded.
    pub first_violation: Option<f64>,
}

/// Checks `sup|∇²ξ_t|` and `sup|M_t|` against the envelope `value_0 · e^{−C t}`.
pub fn hessian_decay_monitor(traj: &FlowTrajectory, c: f64) -> Result<DecayMonitor> {
    let tensors = analyze_checkpoints(traj)?;
    Ok(decay_monitor_from(&tensors, c))
}

pub fn decay_monitor_from(tensors: &[CheckpointTensors], c: f64) -> DecayMonitor {
    let slack = NUMERICAL_SLACK;
    let (h0, m0) = tensors
        .first()
        .map_or((0.0, 0.0), |p| (p.sup_hess, p.sup_m));
    let mut first_violation = None;
    let series = tensors
        .iter()
        .map(|p| {
            let decay = (-c * p.t).exp();
            let point = DecayPoint {
                t: p.t,
                sup_hess: p.sup_hess,
                sup_m: p.sup_m,
                hess_envelope: h0 * decay,
                m_envelope: m0 * decay,
            };
            // Absolute floor for roundoff-level values near convergence.
            let floor = 1e-12;
            let bad = point.sup_hess > point.hess_envelope * (1.0 + slack) + floor
                || point.sup_m > point.m_envelope * (1.0 + slack) + floor;
            if bad && first_violation.is_none() {
                first_violation = Some(p.t);
            }
            point
        })
        .collect();
    DecayMonitor {
        c,
        slack,
        series,
        verdict: first_violation.is_none(),
        first_violation,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "L")]
    pub l_max: usize,
    pub nlat: usize,
    pub nlon: usize,
    pub quadrature: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub tol_conv: f64,
    pub ode_tol: Option<f64>,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub manifest_hash: Option<String>,
    pub config_hash: Option<String>,
    pub grid: GridSpec,
    pub tolerances: Tolerances,
    pub checkpoints: usize,
    pub t_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionCertificate {
    pub volume: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    /// Trapezoid rule over checkpoints of the proposition-form `λ̇`.
    pub lambda_dot_integral: f64,
    /// Analytic bound `6Λ e^{−C t_f} / C` on the integral beyond the final checkpoint.
    pub lambda_dot_tail: f64,
    /// Same integral for the trace-free form, tail included.
    pub lambda_dot_tracefree_integral: f64,
    pub rho: f64,
    /// `ρ e^{3Λ/C}`.
    pub bound_paper: f64,
    /// `ρ e^{∫λ̇}` (integral plus tail).
    pub bound_flowwise: f64,
    /// `ρ e^{½∫λ̇}`.
    pub bound_flowwise_half: f64,
    /// `ρ e^{½∫λ̇_tracefree}`.
    pub bound_tracefree: f64,
    pub condition12_threshold: f64,
    pub condition12: bool,
    pub measured: Option<f64>,
    /// `measured ≤ bound_flowwise_half · (1 + slack)` and `bound_flowwise_half ≤ bound_flowwise`.
    pub ordering_ok: Option<bool>,
    /// Largest disagreement between the proposition and corollary forms of `λ̇`.
    pub lambda_dot_form_gap: f64,
    pub decay_verdict: bool,
    pub provenance: Provenance,
}

/// Builds the certificate for a converged trajectory with solved potentials.
pub fn certify(
    traj: &FlowTrajectory,
    atlas: Option<&TransportAtlas>,
    manifest_hash: Option<String>,
    config_hash: Option<String>,
) -> Result<ContractionCertificate> {
    traj.ensure_converged()?;
    let c = track_min_r(traj)?;
    let tensors = analyze_checkpoints(traj)?;
    let first = &tensors[0];
    let lambda = first.sup_hess.max(first.sup_m);

    let trapezoid = |f: &dyn Fn(&CheckpointTensors) -> f64| -> f64 {
        tensors
            .windows(2)
            .map(|w| 0.5 * (w[1].t - w[0].t) * (f(&w[0]) + f(&w[1])))
            .sum()
    };
    let integral = trapezoid(&|p| p.lambda_dot.proposition);
    let tail = 6.0 * lambda * (-c * traj.t_final()).exp() / c;
    let tracefree_integral = trapezoid(&|p| p.lambda_dot_tracefree) + tail;
    let gap = tensors
        .iter()
        .map(|p| (p.lambda_dot.proposition - p.lambda_dot.corollary).abs())
        .fold(0.0, f64::max);

    let v = traj.volume();
    let rho = traj.rho();
    let total = integral + tail;
    let bound_flowwise = rho * total.exp();
    let bound_flowwise_half = rho * (0.5 * total).exp();
    let threshold = c / 6.0 * (4.0 * PI / v).ln();
    let measured = atlas.map(lipschitz_measured).transpose()?;
    let ordering_ok = measured.map(|mu| {
        mu <= bound_flowwise_half * (1.0 + NUMERICAL_SLACK) && bound_flowwise_half <= bound_flowwise
    });
    let monitor = decay_monitor_from(&tensors, c);
    let grid = traj.grid();

    Ok(ContractionCertificate {
        volume: v,
        c,
        lambda,
        lambda_dot_integral: integral,
        lambda_dot_tail: tail,
        lambda_dot_tracefree_integral: tracefree_integral,
        rho,
        bound_paper: rho * (3.0 * lambda / c).exp(),
        bound_flowwise,
        bound_flowwise_half,
        bound_tracefree: rho * (0.5 * tracefree_integral).exp(),
        condition12_threshold: threshold,
        condition12: lambda <= threshold,
        measured,
        ordering_ok,
        lambda_dot_form_gap: gap,
        decay_verdict: monitor.verdict,
        provenance: Provenance {
            manifest_hash,
            config_hash,
            grid: GridSpec {
                l_max: grid.l_max(),
                nlat: grid.nlat(),
                nlon: grid.nlon(),
                quadrature: "gauss-legendre x equispaced longitude".into(),
            },
            tolerances: Tolerances {
                tol_conv: traj.tol_conv,
                ode_tol: atlas.map(|a| a.ode_tol),
                slack: NUMERICAL_SLACK,
            },
            checkpoints: traj.len(),
            t_final: traj.t_final(),
        },
    })
}
