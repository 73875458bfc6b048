//! Flow runs and their on-disk trajectory archives.
//!
//! An archive directory holds `manifest.json`, `config.json`, `diagnostics.csv`, the
//! initial metric (`initial_metric.f64` with its header and metric sidecar) and one
//! `ckpt_NNNNN.f64` per checkpoint containing the coefficients of `u` followed by those of
//! `ξ`, little-endian `f64`, real orthonormal l-major order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::flow::{run_flow, CheckpointDiagnostics, FlowEvent, FlowTrajectory, INTERPOLATION_RULE};
use crate::harmonics::io::{decode_f64s, encode_f64s};
use crate::harmonics::{build_grid, n_coeffs, write_spectral_field, SpectralField};
use crate::metric::ConformalMetric;
use crate::potential::{fill_potentials, PotentialSolveReport};
use crate::report::diagnostics_csv;

pub const MANIFEST: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;

/// A completed flow with solved potentials.
#[derive(Debug, Clone)]
pub struct FlowRun {
    pub config: RunConfig,
    pub trajectory: FlowTrajectory,
    pub potential_reports: Vec<PotentialSolveReport>,
}

/// Builds the initial metric, runs the flow and solves the potential at every checkpoint.
pub fn run(config: &RunConfig) -> Result<FlowRun> {
    let m0 = config.initial_metric()?;
    let mut trajectory = run_flow(&m0, &config.flow)?;
    let potential_reports = fill_potentials(&mut trajectory)?;
    Ok(FlowRun {
        config: config.clone(),
        trajectory,
        potential_reports,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCheckpoint {
    pub index: usize,
    pub t: f64,
    pub file: String,
    pub diagnostics: CheckpointDiagnostics,
    pub potential: Option<PotentialSolveReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config_hash: String,
    pub preset: Option<String>,
    #[serde(rename = "L")]
    pub l_max: usize,
    pub nlat: usize,
    pub nlon: usize,
    pub convention: String,
    pub payload_layout: String,
    pub interpolation: String,
    pub tol_conv: f64,
    pub dealias: bool,
    pub volume: f64,
    pub r: f64,
    pub rho: f64,
    pub t_final: f64,
    pub steps: usize,
    pub rejections: usize,
    pub potentials_filled: bool,
    pub events: Vec<FlowEvent>,
    pub checkpoints: Vec<ManifestCheckpoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MetricSidecar {
    volume: f64,
    description: String,
    config_hash: String,
}

fn archive_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Archive {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// SHA-256 of a byte string, hex encoded.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes the archive for `run` into `dir` (created if needed); returns the manifest hash.
pub fn write_archive(dir: &Path, run: &FlowRun) -> Result<String> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let traj = &run.trajectory;
    let grid = traj.grid();
    let hash = run.config.hash();

    let mut checkpoints = Vec::with_capacity(traj.len());
    for (k, cp) in traj.checkpoints.iter().enumerate() {
        let file = format!("ckpt_{k:05}.f64");
        let mut values = cp.u.coeffs().to_vec();
        values.extend_from_slice(cp.xi.coeffs());
        let path = dir.join(&file);
        fs::write(&path, encode_f64s(&values)).map_err(|e| Error::io(&path, e))?;
        checkpoints.push(ManifestCheckpoint {
            index: k,
            t: cp.t,
            file,
            diagnostics: cp.diagnostics,
            potential: run.potential_reports.get(k).copied(),
        });
    }

    let m0 = traj.metric_at_checkpoint(0)?;
    write_spectral_field(&dir.join("initial_metric.f64"), m0.u())?;
    let sidecar = MetricSidecar {
        volume: m0.volume(),
        description: format!(
            "initial log-conformal factor u of g = exp(2u) g_can ({})",
            run.config.preset.as_deref().unwrap_or("custom")
        ),
        config_hash: hash.clone(),
    };
    write_text(
        &dir.join("initial_metric.metric.json"),
        &(serde_json::to_string_pretty(&sidecar)? + "\n"),
    )?;

    write_text(
        &dir.join("config.json"),
        &(serde_json::to_string_pretty(&run.config)? + "\n"),
    )?;
    write_text(&dir.join("diagnostics.csv"), &diagnostics_csv(traj, &hash))?;

    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        config_hash: hash,
        preset: run.config.preset.clone(),
        l_max: grid.l_max(),
        nlat: grid.nlat(),
        nlon: grid.nlon(),
        convention: crate::harmonics::io::CONVENTION.into(),
        payload_layout: format!(
            "u then xi, {} little-endian f64 each, {}",
            n_coeffs(grid.l_max()),
            crate::harmonics::io::ORDERING
        ),
        interpolation: INTERPOLATION_RULE.into(),
        tol_conv: traj.tol_conv,
        dealias: traj.dealias,
        volume: traj.volume(),
        r: traj.r(),
        rho: traj.rho(),
        t_final: traj.t_final(),
        steps: traj.steps_taken,
        rejections: traj.rejections,
        potentials_filled: traj.potentials_filled,
        events: traj.events.clone(),
        checkpoints,
    };
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    write_text(&dir.join(MANIFEST), &text)?;
    Ok(sha256_hex(text.as_bytes()))
}

#[derive(Debug, Clone)]
pub struct LoadedArchive {
    pub dir: PathBuf,
    pub config: RunConfig,
    pub manifest: Manifest,
    pub manifest_hash: String,
    pub trajectory: FlowTrajectory,
}

/// Reads an archive written by [`write_archive`].
pub fn read_archive(dir: &Path) -> Result<LoadedArchive> {
    let mpath = dir.join(MANIFEST);
    if !mpath.is_file() {
        return Err(archive_err(dir, "no manifest.json found"));
    }
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(archive_err(
            &mpath,
            format!("unsupported format version {}", manifest.format_version),
        ));
    }
    let cpath = dir.join("config.json");
    let ctext = fs::read_to_string(&cpath).map_err(|e| Error::io(&cpath, e))?;
    let config: RunConfig = serde_json::from_str(&ctext)?;
    if config.hash() != manifest.config_hash {
        return Err(archive_err(&cpath, "config hash does not match the manifest"));
    }

    let grid = build_grid(manifest.l_max)?;
    let n = n_coeffs(manifest.l_max);
    let mut parts = Vec::with_capacity(manifest.checkpoints.len());
    for cp in &manifest.checkpoints {
        let path = dir.join(&cp.file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let values = decode_f64s(&bytes, &path)?;
        if values.len() != 2 * n {
            return Err(archive_err(
                &path,
                format!("expected {} values, found {}", 2 * n, values.len()),
            ));
        }
        let u = SpectralField::from_coeffs(manifest.l_max, values[..n].to_vec())?;
        let xi = SpectralField::from_coeffs(manifest.l_max, values[n..].to_vec())?;
        parts.push((cp.t, u, xi));
    }
    let mut trajectory = FlowTrajectory::from_parts(
        grid,
        parts,
        manifest.tol_conv,
        manifest.dealias,
        manifest.potentials_filled,
    )?;
    for (cp, stored) in trajectory.checkpoints.iter_mut().zip(&manifest.checkpoints) {
        cp.diagnostics.sup_hess_xi = stored.diagnostics.sup_hess_xi;
    }
    trajectory.events = manifest.events.clone();
    trajectory.steps_taken = manifest.steps;
    trajectory.rejections = manifest.rejections;
    Ok(LoadedArchive {
        dir: dir.to_path_buf(),
        config,
        manifest_hash: sha256_hex(text.as_bytes()),
        manifest,
        trajectory,
    })
}

/// Initial metric stored in an archive.
pub fn initial_metric(archive: &LoadedArchive) -> Result<ConformalMetric> {
    archive.trajectory.metric_at_checkpoint(0)
}
