//! Raw IQ capture files: interleaved complex `f32` little-endian samples
//! with a TOML sidecar `<file>.toml` holding capture metadata.

use std::path::{Path, PathBuf};

use beamsearch_core::ssb_phy::{IqBuffer, Origin};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{io_runtime, BenchError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IqMeta {
    pub sample_rate: Option<f64>,
    pub center_frequency: Option<f64>,
    pub notes: Option<String>,
}

impl IqMeta {
    /// Fields of `over` take precedence over `self`.
    pub fn overridden_by(self, over: &IqMeta) -> IqMeta {
        IqMeta {
            sample_rate: over.sample_rate.or(self.sample_rate),
            center_frequency: over.center_frequency.or(self.center_frequency),
            notes: over.notes.clone().or(self.notes),
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".toml");
    PathBuf::from(s)
}

pub fn write_iq(path: &Path, buf: &IqBuffer, meta: &IqMeta) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 * buf.len());
    for z in &buf.samples {
        bytes.extend_from_slice(&(z.re as f32).to_le_bytes());
        bytes.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| io_runtime(&path.display().to_string(), e))?;
    let side = toml::to_string(meta).map_err(|e| BenchError::Runtime(e.to_string()))?;
    std::fs::write(sidecar_path(path), side).map_err(|e| io_runtime("sidecar", e))
}

/// Reads samples and metadata. Override fields win over the sidecar; the
/// sidecar may be absent only if the overrides supply the sample rate.
pub fn ingest_iq(path: &Path, overrides: &IqMeta) -> Result<(IqBuffer, IqMeta)> {
    let bytes = std::fs::read(path).map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?;
    if bytes.len() % 8 != 0 {
        return Err(BenchError::Data(format!(
            "{} bytes is not a whole number of complex f32 samples",
            bytes.len()
        )));
    }
    let side = sidecar_path(path);
    let meta = match std::fs::read_to_string(&side) {
        Ok(text) => toml::from_str::<IqMeta>(&text).map_err(|e| BenchError::Data(format!("sidecar {}: {e}", side.display())))?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => IqMeta::default(),
        Err(e) => return Err(BenchError::Data(format!("sidecar {}: {e}", side.display()))),
    }
    .overridden_by(overrides);
    let rate = meta
        .sample_rate
        .ok_or_else(|| BenchError::Data(format!("no sample rate: {} missing or incomplete and no override", side.display())))?;
    let samples = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[0..4].try_into().expect("4 bytes"));
            let im = f32::from_le_bytes(c[4..8].try_into().expect("4 bytes"));
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    let buf = IqBuffer::new(samples, rate, Origin::File).map_err(|e| BenchError::Data(e.to_string()))?;
    Ok((buf, meta))
}
