//! Volume-normalized Ricci flow `∂_t u = (r − R)/2` with explicit RK4, a step monitor,
//! checkpointing and time interpolation of the stored trajectory.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{SpectralField, SphereGrid};
use crate::metric::ConformalMetric;

/// Interpolation rule recorded in trajectory manifests.
pub const INTERPOLATION_RULE: &str =
    "u: cubic Hermite with slopes (r-R)/2; xi: cubic Lagrange through four neighbouring checkpoints";

/// RK4 stability limit on the imaginary-free negative real axis, `|λ dt| ≤ 2.785`.
const RK4_REAL_STABILITY: f64 = 2.785;

/// Default spacing in time between stored checkpoints.
pub const DEFAULT_CHECKPOINT_SPACING: f64 = 0.004;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    /// Initial step; `None` picks half the RK4 diffusive stability limit.
    pub dt_init: Option<f64>,
    /// A step is rejected when `‖R−r‖_∞` grows by more than this factor.
    pub safety: f64,
    pub t_max: f64,
    /// Convergence threshold on `‖R−r‖_∞`; `None` means `1e-9 · r`.
    pub tol_conv: Option<f64>,
    /// Accepted steps per stored checkpoint; `None` spaces checkpoints about
    /// [`DEFAULT_CHECKPOINT_SPACING`] apart.
    pub checkpoint_every: Option<usize>,
    pub dealias: bool,
    /// Rejections tolerated in a row before giving up.
    pub max_rejections: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            dt_init: None,
            safety: 2.0,
            t_max: 40.0,
            tol_conv: None,
            checkpoint_every: None,
            dealias: true,
            max_rejections: 40,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        if let Some(dt) = self.dt_init {
            positive("dt_init", dt)?;
        }
        if let Some(tol) = self.tol_conv {
            positive("tol_conv", tol)?;
        }
        positive("t_max", self.t_max)?;
        if !(self.safety > 1.0) {
            return Err(Error::Config(format!("safety must exceed 1, got {}", self.safety)));
        }
        if self.checkpoint_every == Some(0) {
            return Err(Error::Config("checkpoint_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Highest degree kept after a nonlinear product (2/3 rule).
pub fn dealias_cutoff(l_max: usize) -> usize {
    2 * l_max / 3
}

/// Largest stable RK4 step for the linearized flow at `m`.
pub fn stability_limit(m: &ConformalMetric, dealias: bool) -> f64 {
    let l = if dealias {
        dealias_cutoff(m.grid().l_max())
    } else {
        m.grid().l_max()
    } as f64;
    let max_inv = m.e2u().iter().fold(0.0f64, |a, w| a.max(1.0 / w));
    RK4_REAL_STABILITY / (max_inv * l * (l + 1.0))
}

/// `(r − R)/2` of `m` as coefficients, optionally dealiased.
pub fn flow_velocity(m: &ConformalMetric, dealias: bool) -> Result<SpectralField> {
    let r = m.mean_curvature_r();
    let vals: Vec<f64> = m.curvature_values().iter().map(|c| 0.5 * (r - c)).collect();
    let mut coeffs = m.grid().analyze_values(&vals)?;
    if dealias {
        coeffs.truncate_above(dealias_cutoff(m.grid().l_max()));
    }
    Ok(coeffs)
}

/// One RK4 step of the flow without any acceptance test.
pub fn rk4_step(m: &ConformalMetric, dt: f64, dealias: bool) -> Result<ConformalMetric> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let grid = m.grid().clone();
    let u0 = m.u();
    let k1 = flow_velocity(m, dealias)?;
    let m2 = ConformalMetric::new(u0.axpy(0.5 * dt, &k1)?, grid.clone())?;
    let k2 = flow_velocity(&m2, dealias)?;
    let m3 = ConformalMetric::new(u0.axpy(0.5 * dt, &k2)?, grid.clone())?;
    let k3 = flow_velocity(&m3, dealias)?;
    let m4 = ConformalMetric::new(u0.axpy(dt, &k3)?, grid.clone())?;
    let k4 = flow_velocity(&m4, dealias)?;
    let mut u = u0.clone();
    let c = u.coeffs_mut();
    let (k1, k2, k3, k4) = (k1.coeffs(), k2.coeffs(), k3.coeffs(), k4.coeffs());
    for i in 0..c.len() {
        c[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    ConformalMetric::new(u, grid)
}

#[derive(Debug, Clone)]
pub enum StepOutcome {
    Accepted(ConformalMetric),
    /// The monitor tripped; retry with `next_dt`.
    Rejected {
        next_dt: f64,
        residual_before: f64,
        residual_after: f64,
    },
}

/// One monitored step: rejected (with the step halved) when `‖R−r‖_∞` grows by more
/// than `cfg.safety` or the new state is not finite.
pub fn step(m: &ConformalMetric, dt: f64, cfg: &FlowConfig) -> Result<StepOutcome> {
    let before = m.curvature_deviation();
    let reject = |after: f64| StepOutcome::Rejected {
        next_dt: 0.5 * dt,
        residual_before: before,
        residual_after: after,
    };
    let next = match rk4_step(m, dt, cfg.dealias) {
        Ok(next) => next,
        Err(Error::Config(_)) if dt > 0.0 => return Ok(reject(f64::INFINITY)),
        Err(e) => return Err(e),
    };
    let after = next.curvature_deviation();
    // Roundoff-level residuals may fluctuate freely.
    let floor = 1e3 * f64::EPSILON * m.mean_curvature_r();
    if !after.is_finite() || (after > cfg.safety * before && after > floor) {
        return Ok(reject(after));
    }
    Ok(StepOutcome::Accepted(next))
}

/// Scalar diagnostics stored with each checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointDiagnostics {
    pub volume: f64,
    pub r: f64,
    pub min_r: f64,
    pub max_r: f64,
    /// `‖R − r‖_∞`.
    pub residual_inf: f64,
    /// `∫ R dν`.
    pub total_curvature: f64,
    /// `sup_x |∇²ξ|_g`, filled together with the potential.
    pub sup_hess_xi: Option<f64>,
}

impl CheckpointDiagnostics {
    pub fn of(m: &ConformalMetric) -> Self {
        Self {
            volume: m.volume(),
            r: m.mean_curvature_r(),
            min_r: m.min_curvature(),
            max_r: m.max_curvature(),
            residual_inf: m.curvature_deviation(),
            total_curvature: m.total_curvature(),
            sup_hess_xi: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowCheckpoint {
    pub t: f64,
    pub u: SpectralField,
    /// `du/dt = (r − R)/2` at this checkpoint (interpolation slope).
    pub du: SpectralField,
    /// Curvature potential; zero until filled.
    pub xi: SpectralField,
    pub diagnostics: CheckpointDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowEvent {
    pub t: f64,
    pub kind: String,
    pub detail: String,
}

/// Time-ordered checkpoints of a flow run.
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    grid: Arc<SphereGrid>,
    pub checkpoints: Vec<FlowCheckpoint>,
    pub events: Vec<FlowEvent>,
    pub potentials_filled: bool,
    pub tol_conv: f64,
    pub dealias: bool,
    pub steps_taken: usize,
    pub rejections: usize,
}

impl FlowTrajectory {
    /// Assembles a trajectory from checkpoints, recomputing interpolation slopes from `u`.
    pub fn from_parts(
        grid: Arc<SphereGrid>,
        times_u_xi: Vec<(f64, SpectralField, SpectralField)>,
        tol_conv: f64,
        dealias: bool,
        potentials_filled: bool,
    ) -> Result<Self> {
        if times_u_xi.is_empty() {
            return Err(Error::Empty("trajectory has no checkpoints"));
        }
        let mut checkpoints = Vec::with_capacity(times_u_xi.len());
        let mut last_t = f64::NEG_INFINITY;
        for (t, u, xi) in times_u_xi {
            if !(t > last_t) {
                return Err(Error::Config("checkpoint times must increase strictly".into()));
            }
            last_t = t;
            let m = ConformalMetric::new(u, grid.clone())?;
            checkpoints.push(make_checkpoint(t, &m, dealias)?);
            checkpoints.last_mut().expect("pushed").xi = xi.resized(grid.l_max());
        }
        Ok(Self {
            grid,
            checkpoints,
            events: Vec::new(),
            potentials_filled,
            tol_conv,
            dealias,
            steps_taken: 0,
            rejections: 0,
        })
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }
    pub fn len(&self) -> usize {
        self.checkpoints.len()
    }
    pub fn is_empty(&self) -> bool {
        self.checkpoints.is_empty()
    }
    pub fn times(&self) -> Vec<f64> {
        self.checkpoints.iter().map(|c| c.t).collect()
    }
    pub fn t_final(&self) -> f64 {
        self.checkpoints.last().map_or(0.0, |c| c.t)
    }
    pub fn volume(&self) -> f64 {
        self.checkpoints[0].diagnostics.volume
    }
    /// `r = 8π / volume` from the initial volume.
    pub fn r(&self) -> f64 {
        8.0 * std::f64::consts::PI / self.volume()
    }
    /// Radius `ρ = √(volume / 4π)` of the limiting round sphere.
    pub fn rho(&self) -> f64 {
        (self.volume() / (4.0 * std::f64::consts::PI)).sqrt()
    }

    pub fn final_residual(&self) -> f64 {
        self.checkpoints.last().map_or(f64::INFINITY, |c| c.diagnostics.residual_inf)
    }

    /// Fails unless the last checkpoint meets the convergence tolerance.
    pub fn ensure_converged(&self) -> Result<()> {
        let residual = self.final_residual();
        if residual <= self.tol_conv {
            Ok(())
        } else {
            Err(Error::TrajectoryNotConverged {
                residual,
                tol: self.tol_conv,
            })
        }
    }

    pub fn metric_at_checkpoint(&self, k: usize) -> Result<ConformalMetric> {
        ConformalMetric::new(self.checkpoints[k].u.clone(), self.grid.clone())
    }

    /// Index `k` with `t_k ≤ t ≤ t_{k+1}` (clamped to the stored range).
    pub fn segment(&self, t: f64) -> usize {
        let n = self.checkpoints.len();
        if n < 2 {
            return 0;
        }
        let k = self.checkpoints.partition_point(|c| c.t <= t);
        k.saturating_sub(1).min(n - 2)
    }

    /// `u(t)` by cubic Hermite interpolation with exact flow slopes.
    pub fn u_at(&self, t: f64) -> SpectralField {
        let n = self.checkpoints.len();
        if n == 1 || t <= self.checkpoints[0].t {
            return self.checkpoints[0].u.clone();
        }
        if t >= self.t_final() {
            return self.checkpoints[n - 1].u.clone();
        }
        let k = self.segment(t);
        let (a, b) = (&self.checkpoints[k], &self.checkpoints[k + 1]);
        let h = b.t - a.t;
        let s = (t - a.t) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let coeffs = (0..a.u.coeffs().len())
            .map(|i| {
                h00 * a.u.coeffs()[i]
                    + h10 * h * a.du.coeffs()[i]
                    + h01 * b.u.coeffs()[i]
                    + h11 * h * b.du.coeffs()[i]
            })
            .collect();
        SpectralField::from_coeffs(a.u.l_max(), coeffs).expect("same bandlimit")
    }

    /// Indices of the (up to) four checkpoints used for Lagrange interpolation at `t`,
    /// and their weights.
    pub fn lagrange_stencil(&self, t: f64) -> Vec<(usize, f64)> {
        let times: Vec<f64> = self.checkpoints.iter().map(|c| c.t).collect();
        lagrange_weights(&times, t)
    }

    /// `ξ(t)` by cubic Lagrange interpolation through neighbouring checkpoints.
    pub fn xi_at(&self, t: f64) -> SpectralField {
        let stencil = self.lagrange_stencil(t);
        let mut out = SpectralField::zeros(self.grid.l_max());
        for (k, w) in stencil {
            for (o, x) in out.coeffs_mut().iter_mut().zip(self.checkpoints[k].xi.coeffs()) {
                *o += w * x;
            }
        }
        out
    }
}

/// Weights of the cubic Lagrange interpolant through the four nodes around `t`
/// (fewer when the sequence is shorter). Clamped to the node range.
pub fn lagrange_weights(times: &[f64], t: f64) -> Vec<(usize, f64)> {
    let n = times.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 || t <= times[0] {
        return vec![(0, 1.0)];
    }
    if t >= times[n - 1] {
        return vec![(n - 1, 1.0)];
    }
    let k = times.partition_point(|&s| s <= t).saturating_sub(1).min(n - 2);
    let width = 4.min(n);
    let start = (k as isize - 1).clamp(0, (n - width) as isize) as usize;
    let idx: Vec<usize> = (start..start + width).collect();
    idx.iter()
        .map(|&i| {
            let mut w = 1.0;
            for &j in &idx {
                if j != i {
                    w *= (t - times[j]) / (times[i] - times[j]);
                }
            }
            (i, w)
        })
        .collect()
}

fn make_checkpoint(t: f64, m: &ConformalMetric, dealias: bool) -> Result<FlowCheckpoint> {
    Ok(FlowCheckpoint {
        t,
        u: m.u().clone(),
        du: flow_velocity(m, dealias)?,
        xi: SpectralField::zeros(m.grid().l_max()),
        diagnostics: CheckpointDiagnostics::of(m),
    })
}

/// Runs the flow from `m0` until `‖R−r‖_∞ ≤ tol_conv`.
pub fn run_flow(m0: &ConformalMetric, cfg: &FlowConfig) -> Result<FlowTrajectory> {
    cfg.validate()?;
    let grid = m0.grid().clone();
    let r = m0.mean_curvature_r();
    let tol_conv = cfg.tol_conv.unwrap_or(1e-9 * r);
    let mut events = Vec::new();

    if m0.min_curvature() <= 0.0 {
        log::warn!(
            "initial metric has min R = {:.4e} <= 0; outside the positive-curvature regime",
            m0.min_curvature()
        );
        events.push(FlowEvent {
            t: 0.0,
            kind: "curvature_sign_loss".into(),
            detail: format!("min R = {:.6e}", m0.min_curvature()),
        });
    }
    let l1 = m0.u().degree_energy(1).sqrt();
    if l1 > 1e-12 {
        log::warn!("initial u carries degree-1 content ({l1:.3e}); these modes are neutral");
        events.push(FlowEvent {
            t: 0.0,
            kind: "degree_one_content".into(),
            detail: format!("{l1:.6e}"),
        });
    }

    let mut dt = cfg.dt_init.unwrap_or_else(|| 0.5 * stability_limit(m0, cfg.dealias));
    let every = cfg
        .checkpoint_every
        .unwrap_or_else(|| ((DEFAULT_CHECKPOINT_SPACING / dt).round() as usize).max(1));

    let mut m = m0.clone();
    let mut t = 0.0;
    let mut checkpoints = vec![make_checkpoint(0.0, &m, cfg.dealias)?];
    let mut steps = 0usize;
    let mut since_checkpoint = 0usize;
    let mut rejections = 0usize;
    let mut consecutive = 0usize;
    let mut sign_lost = m0.min_curvature() <= 0.0;

    while m.curvature_deviation() > tol_conv {
        if t >= cfg.t_max {
            return Err(Error::NotConverged {
                t,
                t_max: cfg.t_max,
                residual: m.curvature_deviation(),
            });
        }
        match step(&m, dt, cfg)? {
            StepOutcome::Accepted(next) => {
                m = next;
                t += dt;
                steps += 1;
                since_checkpoint += 1;
                consecutive = 0;
                if !sign_lost && m.min_curvature() <= 0.0 {
                    sign_lost = true;
                    events.push(FlowEvent {
                        t,
                        kind: "curvature_sign_loss".into(),
                        detail: format!("min R = {:.6e}", m.min_curvature()),
                    });
                }
                let converged = m.curvature_deviation() <= tol_conv;
                if since_checkpoint >= every || converged {
                    checkpoints.push(make_checkpoint(t, &m, cfg.dealias)?);
                    since_checkpoint = 0;
                }
            }
            StepOutcome::Rejected {
                next_dt,
                residual_before,
                residual_after,
            } => {
                rejections += 1;
                consecutive += 1;
                log::debug!(
                    "step rejected at t={t:.5}: residual {residual_before:.3e} -> {residual_after:.3e}, dt -> {next_dt:.3e}"
                );
                events.push(FlowEvent {
                    t,
                    kind: "step_rejected".into(),
                    detail: format!("dt halved to {next_dt:.6e}"),
                });
                dt = next_dt;
                if consecutive > cfg.max_rejections {
                    return Err(Error::StepCollapse { t, dt });
                }
            }
        }
    }

    Ok(FlowTrajectory {
        grid,
        checkpoints,
        events,
        potentials_filled: false,
        tol_conv,
        dealias: cfg.dealias,
        steps_taken: steps,
        rejections,
    })
}

/// Number of Hermite samples per checkpoint interval used by [`track_min_r`].
const MIN_R_REFINEMENT: usize = 3;

/// Smallest scalar curvature over the trajectory, including interpolated states between
/// checkpoints. Fails when the floor is not positive.
pub fn track_min_r(traj: &FlowTrajectory) -> Result<f64> {
    if traj.is_empty() {
        return Err(Error::Empty("trajectory has no checkpoints"));
    }
    let mut c = traj
        .checkpoints
        .iter()
        .map(|cp| cp.diagnostics.min_r)
        .fold(f64::INFINITY, f64::min);
    for w in traj.checkpoints.windows(2) {
        for j in 1..=MIN_R_REFINEMENT {
            let t = w[0].t + (w[1].t - w[0].t) * j as f64 / (MIN_R_REFINEMENT + 1) as f64;
            let m = ConformalMetric::new(traj.u_at(t), traj.grid.clone())?;
            c = c.min(m.min_curvature());
        }
    }
    if c <= 0.0 {
        return Err(Error::NonPositiveCurvatureFloor { c });
    }
    Ok(c)
}

/// Residuals of the continuity equation for a fixed test function at each checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuityResidual {
    pub t: f64,
    /// `d/dt ∫ f dν` by finite differences over checkpoints.
    pub mass_rate: f64,
    /// `|d/dt ∫ f dν − ∫ f (r − R) dν|`.
    pub source_form: f64,
    /// `|d/dt ∫ f dν − ∫ ⟨∇f, ∇ξ⟩_g dν|`.
    pub flux_form: f64,
}

/// Five-point Lagrange derivative weights at `times[k]`.
fn derivative_weights(times: &[f64], k: usize) -> Vec<(usize, f64)> {
    let n = times.len();
    let width = 5.min(n);
    let start = (k as isize - 2).clamp(0, (n - width) as isize) as usize;
    let idx: Vec<usize> = (start..start + width).collect();
    let x = times[k];
    idx.iter()
        .map(|&i| {
            // d/dx of the Lagrange basis polynomial l_i at x.
            let mut total = 0.0;
            for &j in &idx {
                if j == i {
                    continue;
                }
                let mut term = 1.0 / (times[i] - times[j]);
                for &q in &idx {
                    if q != i && q != j {
                        term *= (x - times[q]) / (times[i] - times[q]);
                    }
                }
                total += term;
            }
            (i, total)
        })
        .collect()
}

/// Continuity-equation residuals for test function `f` at every checkpoint.
///
/// Requires at least two checkpoints and filled potentials for the flux form.
pub fn continuity_residual(traj: &FlowTrajectory, f: &SpectralField) -> Result<Vec<ContinuityResidual>> {
    let grid = traj.grid.clone();
    let fv = grid.synthesize_values(f)?;
    let (ft, fp) = grid.gradient_values(f)?;
    let times = traj.times();
    let n = times.len();
    let mut mass = Vec::with_capacity(n);
    let mut source = Vec::with_capacity(n);
    let mut flux = Vec::with_capacity(n);
    for (k, cp) in traj.checkpoints.iter().enumerate() {
        let m = traj.metric_at_checkpoint(k)?;
        mass.push(grid.integrate_product(&fv, m.e2u()));
        let r = m.mean_curvature_r();
        let dens: Vec<f64> = m
            .curvature_values()
            .iter()
            .zip(m.e2u())
            .map(|(c, w)| (r - c) * w)
            .collect();
        source.push(grid.integrate_product(&fv, &dens));
        // ⟨∇f,∇ξ⟩_g dν = ⟨∇f,∇ξ⟩_can dA in two dimensions.
        let (xt, xp) = grid.gradient_values(&cp.xi)?;
        let dots: Vec<f64> = (0..fv.len()).map(|i| ft[i] * xt[i] + fp[i] * xp[i]).collect();
        flux.push(grid.integrate_values(&dots));
    }
    if n < 2 {
        return Ok(vec![ContinuityResidual {
            t: times[0],
            mass_rate: 0.0,
            source_form: source[0].abs(),
            flux_form: flux[0].abs(),
        }]);
    }
    Ok((0..n)
        .map(|k| {
            let rate: f64 = derivative_weights(&times, k)
                .into_iter()
                .map(|(i, w)| w * mass[i])
                .sum();
            ContinuityResidual {
                t: times[k],
                mass_rate: rate,
                source_form: (rate - source[k]).abs(),
                flux_form: (rate - flux[k]).abs(),
            }
        })
        .collect())
}

/// Residual window, relative to the initial residual, used for rate fits. The upper end
/// skips the initial transient; below the lower end the slow degree-2 mode generated by
/// the quadratic term can dominate odd-degree initial data.
pub const RATE_FIT_WINDOW: (f64, f64) = (1e-1, 1e-3);

/// Least-squares slope of `log ‖R−r‖_∞` against `t` over checkpoints whose residual lies
/// between `lo · R_0` and `hi · R_0`, where `R_0` is the initial residual.
pub fn fitted_decay_rate(traj: &FlowTrajectory, hi: f64, lo: f64) -> Option<f64> {
    let r0 = traj.checkpoints.first()?.diagnostics.residual_inf;
    let pts: Vec<(f64, f64)> = traj
        .checkpoints
        .iter()
        .filter(|c| {
            let x = c.diagnostics.residual_inf;
            x <= hi * r0 && x >= lo * r0 && x > 0.0
        })
        .map(|c| (c.t, c.diagnostics.residual_inf.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::build_grid;

    #[test]
    fn round_metric_is_a_fixed_point() {
        let g = build_grid(12).unwrap();
        let m = ConformalMetric::round(g, 0.8).unwrap();
        let next = rk4_step(&m, 1e-3, true).unwrap();
        for (a, b) in next.u().coeffs().iter().zip(m.u().coeffs()) {
            assert!((a - b).abs() < 1e-14);
        }
        let traj = run_flow(&m, &FlowConfig::default()).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.t_final(), 0.0);
    }

    #[test]
    fn small_y20_step_reduces_deviation() {
        let g = build_grid(16).unwrap();
        let m = ConformalMetric::new(SpectralField::mode(16, 2, 0, 1e-4), g).unwrap();
        let dt = 0.5 * stability_limit(&m, true);
        let next = rk4_step(&m, dt, true).unwrap();
        assert!(next.curvature_deviation() < m.curvature_deviation());
    }

    #[test]
    fn oversized_step_is_rejected() {
        let g = build_grid(16).unwrap();
        let m = ConformalMetric::new(SpectralField::mode(16, 4, 0, 0.02), g).unwrap();
        let dt = 20.0 * stability_limit(&m, false);
        let cfg = FlowConfig {
            dealias: false,
            ..FlowConfig::default()
        };
        match step(&m, dt, &cfg).unwrap() {
            StepOutcome::Rejected { next_dt, .. } => assert_eq!(next_dt, 0.5 * dt),
            StepOutcome::Accepted(_) => panic!("monitor should trip"),
        }
    }

    #[test]
    fn lagrange_weights_reproduce_cubics() {
        let times = [0.0, 0.1, 0.25, 0.3, 0.5, 0.7];
        let p = |t: f64| 1.0 - 2.0 * t + 3.0 * t * t - t * t * t;
        for &t in &[0.0, 0.05, 0.26, 0.31, 0.69, 0.7] {
            let v: f64 = lagrange_weights(&times, t).iter().map(|(i, w)| w * p(times[*i])).sum();
            assert!((v - p(t)).abs() < 1e-13, "t={t}");
        }
    }

    #[test]
    fn derivative_weights_are_exact_for_quartics() {
        let times = [0.0, 0.1, 0.25, 0.3, 0.5, 0.7];
        let p = |t: f64| t.powi(4) - t * t + 2.0;
        let dp = |t: f64| 4.0 * t.powi(3) - 2.0 * t;
        for k in 0..times.len() {
            let d: f64 = derivative_weights(&times, k).iter().map(|(i, w)| w * p(times[*i])).sum();
            assert!((d - dp(times[k])).abs() < 1e-11);
        }
    }

    #[test]
    fn negative_curvature_floor_is_an_error() {
        let g = build_grid(12).unwrap();
        let m = ConformalMetric::new(SpectralField::mode(12, 2, 0, 1.5), g.clone()).unwrap();
        assert!(m.min_curvature() < 0.0);
        let traj = FlowTrajectory::from_parts(
            g,
            vec![(0.0, m.u().clone(), SpectralField::zeros(12))],
            1e-9,
            true,
            false,
        )
        .unwrap();
        assert!(matches!(
            track_min_r(&traj),
            Err(Error::NonPositiveCurvatureFloor { .. })
        ));
    }
}
