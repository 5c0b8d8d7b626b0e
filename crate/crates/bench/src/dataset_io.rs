//! Binary dataset files.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `BSDS`                            |
//! | 4      | 2    | version (1)                             |
//! | 6      | 2    | features per record (288)               |
//! | 8      | 2    | lmax                                    |
//! | 10     | 1    | source (0 simulated, 1 captured)        |
//! | 11     | 1    | reserved, 0                             |
//! | 12     | 2    | N_ID^cell                               |
//! | 14     | 2    | reserved, 0                             |
//! | 16     | 8    | snr_db as f64, NaN when unknown         |
//! | 24     | 8    | record count                            |
//!
//! followed by `count` records of 288 `f32` features, a label byte and a
//! flags byte ([`FLAG_CRC_OK`], [`FLAG_CRC_LABEL`]).

use std::path::Path;

use beamsearch_core::detect::{DmrsFeatureVector, FeatureSource, FEATURE_LEN};
use sha2::{Digest, Sha256};

use crate::error::{io_runtime, BenchError, Result};

pub const MAGIC: &[u8; 4] = b"BSDS";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 32;
pub const RECORD_LEN: usize = 4 * FEATURE_LEN + 2;

/// PBCH CRC passed when decoded under the recorded label.
pub const FLAG_CRC_OK: u8 = 1;
/// Label came from CRC-verified correlation detection rather than ground truth.
pub const FLAG_CRC_LABEL: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetHeader {
    pub lmax: usize,
    pub source: FeatureSource,
    pub nid_cell: u16,
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub header: DatasetHeader,
    /// Labeled vectors with single-precision values.
    pub vectors: Vec<DmrsFeatureVector>,
    pub flags: Vec<u8>,
}

impl DatasetFile {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let h = &self.header;
        let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * self.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(FEATURE_LEN as u16).to_le_bytes());
        out.extend_from_slice(&(h.lmax as u16).to_le_bytes());
        out.push(match h.source {
            FeatureSource::Sim => 0,
            FeatureSource::Capture => 1,
        });
        out.push(0);
        out.extend_from_slice(&h.nid_cell.to_le_bytes());
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&h.snr_db.unwrap_or(f64::NAN).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for (v, &f) in self.vectors.iter().zip(&self.flags) {
            if v.x.len() != FEATURE_LEN {
                return Err(BenchError::Data(format!("vector with {} features", v.x.len())));
            }
            let label = v.label.ok_or_else(|| BenchError::Data("unlabeled vector".into()))?;
            for &x in &v.x {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
            out.push(label as u8);
            out.push(f);
        }
        Ok(out)
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        let bad = |m: String| Err(BenchError::Data(m));
        if b.len() < HEADER_LEN {
            return bad(format!("{} bytes is shorter than the header", b.len()));
        }
        if &b[0..4] != MAGIC {
            return bad("bad magic".into());
        }
        let u16_at = |o: usize| u16::from_le_bytes([b[o], b[o + 1]]);
        let version = u16_at(4);
        if version != VERSION {
            return bad(format!("unsupported version {version}"));
        }
        let nf = u16_at(6) as usize;
        if nf != FEATURE_LEN {
            return bad(format!("{nf} features per record, expected {FEATURE_LEN}"));
        }
        let lmax = u16_at(8) as usize;
        if lmax == 0 || lmax > 64 {
            return bad(format!("lmax {lmax}"));
        }
        let source = match b[10] {
            0 => FeatureSource::Sim,
            1 => FeatureSource::Capture,
            s => return bad(format!("unknown source {s}")),
        };
        let nid_cell = u16_at(12);
        let snr = f64::from_le_bytes(b[16..24].try_into().expect("8 bytes"));
        let count = u64::from_le_bytes(b[24..32].try_into().expect("8 bytes")) as usize;
        let body = &b[HEADER_LEN..];
        if body.len() != count.saturating_mul(RECORD_LEN) {
            return bad(format!("{} body bytes for {count} records", body.len()));
        }
        let snr_db = (!snr.is_nan()).then_some(snr);
        let mut vectors = Vec::with_capacity(count);
        let mut flags = Vec::with_capacity(count);
        for rec in body.chunks_exact(RECORD_LEN) {
            let x: Vec<f64> = rec[..4 * FEATURE_LEN]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect();
            let label = rec[4 * FEATURE_LEN] as usize;
            if label >= lmax {
                return bad(format!("label {label} outside lmax {lmax}"));
            }
            vectors.push(DmrsFeatureVector {
                x,
                label: Some(label),
                snr_db,
                source,
            });
            flags.push(rec[4 * FEATURE_LEN + 1]);
        }
        Ok(Self {
            header: DatasetHeader {
                lmax,
                source,
                nid_cell,
                snr_db,
            },
            vectors,
            flags,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| io_runtime(&path.display().to_string(), e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let b = std::fs::read(path).map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&b)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
