use std::path::PathBuf;

/// Errors raised by the simulator, the transport integrator and the certifier.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("bandlimit mismatch: expected L={expected}, got L={found}")]
    BandlimitMismatch { expected: usize, found: usize },

    #[error("Poisson source is not centered: mean coefficient {mean:.3e} exceeds tolerance {tol:.3e}")]
    Solvability { mean: f64, tol: f64 },

    #[error("flow did not converge before t_max={t_max}: ||R-r||_inf={residual:.3e} at t={t:.4}")]
    NotConverged { t: f64, t_max: f64, residual: f64 },

    #[error("time step collapsed to {dt:.3e} at t={t:.4} after repeated rejections")]
    StepCollapse { t: f64, dt: f64 },

    #[error("trajectory is not converged: final ||R-r||_inf={residual:.3e} > tol={tol:.3e}")]
    TrajectoryNotConverged { residual: f64, tol: f64 },

    #[error("curvature floor is not positive (C={c:.6e}); no certificate can be issued")]
    NonPositiveCurvatureFloor { c: f64 },

    #[error("characteristic integration failed: worst local error {worst_error:.3e} at s={s:.6}")]
    Integration { worst_error: f64, s: f64 },

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("malformed archive {path}: {reason}")]
    Archive { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::BandlimitMismatch { .. } => "bandlimit_mismatch",
            Error::Solvability { .. } => "solvability",
            Error::NotConverged { .. } => "not_converged",
            Error::StepCollapse { .. } => "step_collapse",
            Error::TrajectoryNotConverged { .. } => "trajectory_not_converged",
            Error::NonPositiveCurvatureFloor { .. } => "curvature_floor",
            Error::Integration { .. } => "integration",
            Error::UnknownPreset(_) => "unknown_preset",
            Error::Empty(_) => "empty",
            Error::Archive { .. } => "archive",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
