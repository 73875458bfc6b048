//! Curvature potential `ξ` solving `Δ_g ξ = R − r`, solved in the conformal form
//! `Δ_can ξ = e^{2u}(R − r)` and normalized by `∫ ξ dν = 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowTrajectory;
use crate::harmonics::{poisson_solve_can, SpectralField, TangentVectorField};
use crate::metric::ConformalMetric;

/// Tolerance on `|∫ (R − r) dν|` relative to `max(1, ∫ |R − r| dν)`.
pub const BALANCE_TOL: f64 = 1e-8;

/// Fraction of source energy in the top third of degrees above which accuracy is suspect.
pub const SATURATION_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSolveReport {
    /// `‖Δ_g ξ − (R − r)‖_∞` on the grid.
    pub residual_inf: f64,
    /// `|∫ (R − r) dν|` before recentering.
    pub source_mean: f64,
    /// `∫ ξ dν` after normalization.
    pub normalization: f64,
    /// Share of the conformal source's spectral energy above degree `2L/3`.
    pub top_third_energy: f64,
    pub saturated: bool,
}

/// Solves for the curvature potential of `m`.
pub fn solve_potential(m: &ConformalMetric) -> Result<(SpectralField, PotentialSolveReport)> {
    let r = m.mean_curvature_r();
    let deviation: Vec<f64> = m.curvature_values().iter().map(|c| c - r).collect();
    solve_with_deviation(m, &deviation)
}

/// Solves `Δ_g ξ = s` for a prescribed right-hand side `s` given at the grid nodes.
pub fn solve_with_deviation(
    m: &ConformalMetric,
    deviation: &[f64],
) -> Result<(SpectralField, PotentialSolveReport)> {
    let grid = m.grid();
    if deviation.len() != grid.len() {
        return Err(Error::Config(format!(
            "source has {} values, grid has {}",
            deviation.len(),
            grid.len()
        )));
    }
    let e2u = m.e2u();
    let mean_integral = grid.integrate_product(deviation, e2u);
    let abs_dev: Vec<f64> = deviation.iter().map(|d| d.abs()).collect();
    let scale = grid.integrate_product(&abs_dev, e2u).max(1.0);
    let tol = BALANCE_TOL * scale;
    if mean_integral.abs() > tol {
        return Err(Error::Solvability {
            mean: mean_integral,
            tol,
        });
    }
    let mu = mean_integral / m.volume();
    let source: Vec<f64> = deviation
        .iter()
        .zip(e2u)
        .map(|(d, w)| w * (d - mu))
        .collect();
    let mut s = grid.analyze_values(&source)?;
    // The recentered source integrates to zero up to roundoff.
    s.coeffs_mut()[0] = 0.0;

    let l = grid.l_max();
    let total: f64 = s.coeffs().iter().map(|c| c * c).sum();
    let top: f64 = (2 * l / 3 + 1..=l).map(|d| s.degree_energy(d)).sum();
    let top_third_energy = if total > 0.0 { top / total } else { 0.0 };
    let saturated = top_third_energy > SATURATION_FRACTION;
    if saturated {
        log::warn!(
            "potential source saturates the bandlimit: {:.2}% of energy above degree {}",
            100.0 * top_third_energy,
            2 * l / 3
        );
    }

    let mut xi = poisson_solve_can(&s, None)?;
    let xi_vals = grid.synthesize_values(&xi)?;
    let shift = -grid.integrate_product(&xi_vals, e2u) / m.volume();
    xi.coeffs_mut()[0] += shift * (4.0 * std::f64::consts::PI).sqrt();

    let lap = m.laplacian_g_values(&xi)?;
    let residual_inf = lap
        .iter()
        .zip(deviation)
        .fold(0.0f64, |a, (l, d)| a.max((l - d).abs()));
    let xi_vals = grid.synthesize_values(&xi)?;
    let normalization = grid.integrate_product(&xi_vals, e2u);
    Ok((
        xi,
        PotentialSolveReport {
            residual_inf,
            source_mean: mean_integral.abs(),
            normalization,
            top_third_energy,
            saturated,
        },
    ))
}

/// Advection field `∇_g ξ = e^{-2u} ∇_can ξ`.
pub fn velocity(m: &ConformalMetric, xi: &SpectralField) -> Result<TangentVectorField> {
    m.gradient_g(xi)
}

/// Both sides of the weak continuity identity `∫ ⟨∇f, ∇ξ⟩_g dν = ∫ f (r − R) dν`.
pub fn weak_form_sides(m: &ConformalMetric, xi: &SpectralField, f: &SpectralField) -> Result<(f64, f64)> {
    let grid = m.grid();
    let (ft, fp) = grid.gradient_values(f)?;
    let (xt, xp) = grid.gradient_values(xi)?;
    // e^{-2u} from the metric pairing cancels e^{2u} from dν.
    let dots: Vec<f64> = (0..grid.len()).map(|k| ft[k] * xt[k] + fp[k] * xp[k]).collect();
    let lhs = grid.integrate_values(&dots);
    let fv = grid.synthesize_values(f)?;
    let r = m.mean_curvature_r();
    let dens: Vec<f64> = m
        .curvature_values()
        .iter()
        .zip(m.e2u())
        .map(|(c, w)| (r - c) * w)
        .collect();
    Ok((lhs, grid.integrate_product(&fv, &dens)))
}

/// Solves the potential at every checkpoint and records `sup |∇²ξ|_g`.
pub fn fill_potentials(traj: &mut FlowTrajectory) -> Result<Vec<PotentialSolveReport>> {
    let solved: Vec<Result<(SpectralField, PotentialSolveReport, f64)>> = (0..traj.len())
        .into_par_iter()
        .map(|k| {
            let m = traj.metric_at_checkpoint(k)?;
            let (xi, report) = solve_potential(&m)?;
            let sup_hess = m.sup_norm_rel(&m.hessian_g(&xi)?);
            Ok((xi, report, sup_hess))
        })
        .collect();
    let mut reports = Vec::with_capacity(solved.len());
    for (cp, res) in traj.checkpoints.iter_mut().zip(solved) {
        let (xi, report, sup_hess) = res?;
        cp.xi = xi;
        cp.diagnostics.sup_hess_xi = Some(sup_hess);
        reports.push(report);
    }
    traj.potentials_filled = true;
    Ok(reports)
}
