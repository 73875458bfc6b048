//! Amplitude ladders over a preset family at fixed volume and bandlimit.

use serde::{Deserialize, Serialize};

use crate::archive::run;
use crate::certify::certify;
use crate::config::preset;
use crate::error::{Error, Result};
use crate::flow::FlowConfig;

/// Default amplitude ladder.
pub const DEFAULT_LADDER: [f64; 4] = [0.005, 0.01, 0.02, 0.05];

/// `max(Λ/ε) ≤ LAMBDA_RATIO_BOUND · min(Λ/ε)` is accepted as "Λ/ε bounded".
pub const LAMBDA_RATIO_BOUND: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub lambda_over_eps: f64,
    pub min_r0: f64,
    pub condition12: bool,
    pub bound_paper: f64,
    pub t_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub family: String,
    pub volume: f64,
    #[serde(rename = "L")]
    pub l_max: usize,
    pub rows: Vec<SweepRow>,
    pub lambda_nondecreasing: bool,
    pub c_nonincreasing: bool,
    /// `max(Λ/ε) / min(Λ/ε)` over the ladder.
    pub lambda_over_eps_spread: f64,
    pub lambda_over_eps_bounded: bool,
}

/// Runs flow and certificate (without transport) for each amplitude, in the given order.
pub fn epsilon_sweep(
    family: &str,
    volume: f64,
    ladder: &[f64],
    l_max: usize,
    flow: &FlowConfig,
) -> Result<SweepTable> {
    if ladder.is_empty() {
        return Err(Error::Empty("amplitude ladder"));
    }
    let mut rows = Vec::with_capacity(ladder.len());
    for &eps in ladder {
        let mut cfg = preset(family, volume, eps, l_max)?;
        cfg.flow = flow.clone();
        let flow_run = run(&cfg)?;
        let cert = certify(&flow_run.trajectory, None, None, Some(cfg.hash()))?;
        rows.push(SweepRow {
            eps,
            lambda: cert.lambda,
            c: cert.c,
            lambda_over_eps: if eps != 0.0 { cert.lambda / eps } else { 0.0 },
            min_r0: flow_run.trajectory.checkpoints[0].diagnostics.min_r,
            condition12: cert.condition12,
            bound_paper: cert.bound_paper,
            t_final: flow_run.trajectory.t_final(),
        });
    }
    let lambda_nondecreasing = rows.windows(2).all(|w| w[1].lambda >= w[0].lambda);
    let c_nonincreasing = rows.windows(2).all(|w| w[1].c <= w[0].c);
    let ratios: Vec<f64> = rows.iter().filter(|r| r.eps != 0.0).map(|r| r.lambda_over_eps).collect();
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    Ok(SweepTable {
        family: family.to_string(),
        volume,
        l_max,
        rows,
        lambda_nondecreasing,
        c_nonincreasing,
        lambda_over_eps_spread: spread,
        lambda_over_eps_bounded: spread <= LAMBDA_RATIO_BOUND,
    })
}
