//! Spectral simulation of the volume-normalized Ricci flow on nearly round 2-spheres,
//! the transport map generated by its curvature potential, and a numerical contraction
//! certificate for that map.

pub mod archive;
pub mod certify;
pub mod config;
pub mod error;
pub mod flow;
pub mod harmonics;
pub mod metric;
pub mod potential;
pub mod report;
pub mod sweep;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
