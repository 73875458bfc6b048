//! Run configuration, preset catalog and initial-metric construction.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::harmonics::{build_grid, read_spectral_field, SpectralField};
use crate::metric::ConformalMetric;
use crate::transport::TransportOptions;

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 4] = ["round", "y20", "y31", "mixed"];

/// Default number of quasi-uniform points added to the grid nodes in transport atlases.
pub const DEFAULT_EXTRA_POINTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationTerm {
    pub l: usize,
    pub m: i64,
    pub amplitude: f64,
}

/// Shape of `u` before volume normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    Terms { terms: Vec<PerturbationTerm> },
    /// Coefficient payload written by `write_spectral_field`.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Preset name, when the configuration came from the catalog.
    pub preset: Option<String>,
    /// Volume of the initial metric, in `(0, 4π)`.
    pub volume: f64,
    pub perturbation: Perturbation,
    #[serde(rename = "L")]
    pub bandlimit: usize,
    pub flow: FlowConfig,
    pub transport: TransportOptions,
    /// Quasi-uniform points added to the grid nodes when building an atlas.
    pub extra_points: usize,
    /// Not part of the configuration hash.
    pub output_dir: Option<PathBuf>,
    pub emit_svg: bool,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(volume: f64, terms: Vec<PerturbationTerm>, bandlimit: usize) -> Self {
        Self {
            preset: None,
            volume,
            perturbation: Perturbation::Terms { terms },
            bandlimit,
            flow: FlowConfig::default(),
            transport: TransportOptions::default(),
            extra_points: DEFAULT_EXTRA_POINTS,
            output_dir: None,
            emit_svg: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.volume > 0.0 && self.volume < 4.0 * PI) {
            return Err(Error::Config(format!(
                "volume must lie strictly inside (0, 4π), got {}",
                self.volume
            )));
        }
        if self.bandlimit < crate::harmonics::MIN_BANDLIMIT {
            return Err(Error::Config(format!(
                "bandlimit L={} is below the minimum {}",
                self.bandlimit,
                crate::harmonics::MIN_BANDLIMIT
            )));
        }
        if let Perturbation::Terms { terms } = &self.perturbation {
            for t in terms {
                if t.m.unsigned_abs() as usize > t.l {
                    return Err(Error::Config(format!("invalid harmonic order m={} for l={}", t.m, t.l)));
                }
                if !t.amplitude.is_finite() {
                    return Err(Error::Config("perturbation amplitude is not finite".into()));
                }
                self.check_degree(t.l)?;
            }
        }
        self.flow.validate()?;
        self.transport.validate()
    }

    fn check_degree(&self, l: usize) -> Result<()> {
        if 3 * l > self.bandlimit {
            return Err(Error::Config(format!(
                "perturbation degree {l} exceeds L/3 = {} (dealiasing headroom)",
                self.bandlimit as f64 / 3.0
            )));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form with `output_dir` cleared.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        let bytes = serde_json::to_vec(&canonical).expect("configuration serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Unnormalized perturbation as coefficients at the run bandlimit.
    pub fn perturbation_field(&self) -> Result<SpectralField> {
        match &self.perturbation {
            Perturbation::Terms { terms } => {
                let mut f = SpectralField::zeros(self.bandlimit);
                for t in terms {
                    let cur = f.get(t.l, t.m);
                    f.set(t.l, t.m, cur + t.amplitude);
                }
                Ok(f)
            }
            Perturbation::File { path } => {
                let f = read_spectral_field(path)?;
                self.check_degree(f.effective_degree(0.0))?;
                Ok(f.resized(self.bandlimit))
            }
        }
    }

    /// Initial metric: the perturbation shifted by the constant that makes its volume exact.
    pub fn initial_metric(&self) -> Result<ConformalMetric> {
        self.validate()?;
        let grid = build_grid(self.bandlimit)?;
        let p = self.perturbation_field()?;
        let raw = ConformalMetric::new(p.clone(), grid.clone())?;
        // ∫ e^{2(p + c)} dA = e^{2c} ∫ e^{2p} dA
        let shift = 0.5 * (self.volume / raw.volume()).ln();
        let mut u = p;
        u.coeffs_mut()[0] += shift * (4.0 * PI).sqrt();
        ConformalMetric::new(u, grid)
    }
}

fn term(l: usize, m: i64, amplitude: f64) -> PerturbationTerm {
    PerturbationTerm { l, m, amplitude }
}

/// Catalog entry `name` with volume `v`, amplitude `eps` and bandlimit `l_max`.
///
/// * `round`: no perturbation.
/// * `y20`: `ε Y_{2,0}`.
/// * `y31`: `ε Y_{3,1}`.
/// * `mixed`: `ε (Y_{2,0} + ½ Y_{3,1} + ½ Y_{2,−2})`.
pub fn preset(name: &str, volume: f64, eps: f64, l_max: usize) -> Result<RunConfig> {
    let terms = match name {
        "round" => vec![],
        "y20" => vec![term(2, 0, eps)],
        "y31" => vec![term(3, 1, eps)],
        "mixed" => vec![term(2, 0, eps), term(3, 1, 0.5 * eps), term(2, -2, 0.5 * eps)],
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    let mut cfg = RunConfig::new(volume, terms, l_max);
    cfg.preset = Some(name.to_string());
    cfg.validate()?;
    Ok(cfg)
}
