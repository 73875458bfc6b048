//! On-disk format for [`SpectralField`]: a JSON header next to a flat little-endian `f64`
//! payload holding the coefficients in l-major order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{n_coeffs, SpectralField};
use crate::error::{Error, Result};

pub const CONVENTION: &str = "real-orthonormal";
pub const ORDERING: &str = "l-major, m from -l to l";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralHeader {
    pub convention: String,
    #[serde(rename = "L")]
    pub l_max: usize,
    pub ordering: String,
    /// Payload file name, relative to the header's directory.
    pub payload: String,
    pub count: usize,
}

fn header_path(payload: &Path) -> PathBuf {
    payload.with_extension("json")
}

pub(crate) fn encode_f64s(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub(crate) fn decode_f64s(bytes: &[u8], path: &Path) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::Archive {
            path: path.to_path_buf(),
            reason: format!("payload length {} is not a multiple of 8", bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Writes `field` to `payload` (binary) and its header to `payload` with a `.json` extension.
pub fn write_spectral_field(payload: &Path, field: &SpectralField) -> Result<()> {
    fs::write(payload, encode_f64s(field.coeffs())).map_err(|e| Error::io(payload, e))?;
    let header = SpectralHeader {
        convention: CONVENTION.into(),
        l_max: field.l_max(),
        ordering: ORDERING.into(),
        payload: payload
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        count: field.coeffs().len(),
    };
    let hp = header_path(payload);
    let text = serde_json::to_string_pretty(&header)?;
    fs::write(&hp, text + "\n").map_err(|e| Error::io(&hp, e))
}

/// Reads a field written by [`write_spectral_field`], validating the header.
pub fn read_spectral_field(payload: &Path) -> Result<SpectralField> {
    let hp = header_path(payload);
    let text = fs::read_to_string(&hp).map_err(|e| Error::io(&hp, e))?;
    let header: SpectralHeader = serde_json::from_str(&text)?;
    let bad = |reason: String| Error::Archive {
        path: hp.clone(),
        reason,
    };
    if header.convention != CONVENTION || header.ordering != ORDERING {
        return Err(bad(format!(
            "unsupported convention '{}' / ordering '{}'",
            header.convention, header.ordering
        )));
    }
    if header.count != n_coeffs(header.l_max) {
        return Err(bad(format!(
            "count {} does not match L={}",
            header.count, header.l_max
        )));
    }
    let bytes = fs::read(payload).map_err(|e| Error::io(payload, e))?;
    let coeffs = decode_f64s(&bytes, payload)?;
    if coeffs.len() != header.count {
        return Err(bad(format!(
            "payload holds {} values, header says {}",
            coeffs.len(),
            header.count
        )));
    }
    SpectralField::from_coeffs(header.l_max, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.f64");
        let coeffs: Vec<f64> = (0..n_coeffs(5)).map(|k| (k as f64).sin() / 3.0).collect();
        let field = SpectralField::from_coeffs(5, coeffs).unwrap();
        write_spectral_field(&path, &field).unwrap();
        let back = read_spectral_field(&path).unwrap();
        assert_eq!(back, field);
        let header: SpectralHeader =
            serde_json::from_str(&fs::read_to_string(dir.path().join("u.json")).unwrap()).unwrap();
        assert_eq!(header.l_max, 5);
        assert_eq!(header.count, 36);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.f64");
        write_spectral_field(&path, &SpectralField::zeros(4)).unwrap();
        fs::write(&path, [0u8; 16]).unwrap();
        assert!(matches!(read_spectral_field(&path), Err(Error::Archive { .. })));
    }
}
