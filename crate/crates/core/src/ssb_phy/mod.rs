//! SS/PBCH block resource grid, OFDM (de)modulation and PBCH recovery.

mod grid;
mod ofdm;
mod pbch;

pub use grid::{
    dmrs_positions, grid_assemble, re_kind, ReKind, SsbGrid, PBCH_DATA_RES, SSB_SUBCARRIERS,
    SSB_SYMBOLS, SSS_SYMBOL,
};
pub use ofdm::{ofdm_demodulate, ofdm_modulate, Ofdm, RxSymbols};
pub use pbch::{
    channel_estimate, crc24, equalize, pbch_recover, PbchPayload, PAYLOAD_BITS, PBCH_BLOCK_BITS,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerology and buffering parameters of the downlink frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameConfig {
    pub sample_rate: f64,
    pub scs: f64,
    pub fft_size: usize,
    pub cp_len: usize,
    pub lmax: usize,
    /// SSB burst period in milliseconds.
    pub ssb_period_ms: f64,
    /// OFDM symbol offsets of the `lmax` SSBs within the burst.
    pub burst_positions: Vec<usize>,
    /// Seconds of samples per cell-search buffer.
    pub buffer_duration: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            sample_rate: 30_720_000.0,
            scs: 30_000.0,
            fft_size: 1024,
            cp_len: 72,
            lmax: 8,
            ssb_period_ms: 20.0,
            burst_positions: vec![4, 8, 16, 20, 32, 36, 44, 48],
            buffer_duration: 0.02,
        }
    }
}

impl FrameConfig {
    pub fn symbol_len(&self) -> usize {
        self.fft_size + self.cp_len
    }

    /// Samples spanned by one 4-symbol SSB.
    pub fn ssb_len(&self) -> usize {
        SSB_SYMBOLS * self.symbol_len()
    }

    pub fn buffer_samples(&self) -> usize {
        (self.sample_rate * self.buffer_duration).round() as usize
    }

    pub fn period_samples(&self) -> usize {
        (self.sample_rate * self.ssb_period_ms * 1e-3).round() as usize
    }

    /// First sample of the SSB transmitted in burst slot `slot`.
    pub fn slot_start(&self, slot: usize) -> usize {
        self.burst_positions[slot] * self.symbol_len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.scs > 0.0) {
            return Err(Error::Frame("sample rate and SCS must be positive".into()));
        }
        let ratio = self.sample_rate / self.scs;
        if ratio.fract() != 0.0 || ratio as usize != self.fft_size {
            return Err(Error::Frame(format!(
                "fft_size {} != sample_rate / scs = {}",
                self.fft_size, ratio
            )));
        }
        if self.fft_size < SSB_SUBCARRIERS {
            return Err(Error::Frame("fft_size smaller than the SSB bandwidth".into()));
        }
        if self.lmax == 0 || self.burst_positions.len() != self.lmax {
            return Err(Error::Frame(format!(
                "{} burst positions for lmax {}",
                self.burst_positions.len(),
                self.lmax
            )));
        }
        for w in self.burst_positions.windows(2) {
            if w[1] < w[0] + SSB_SYMBOLS {
                return Err(Error::Frame(format!(
                    "burst positions {} and {} overlap or are unordered",
                    w[0], w[1]
                )));
            }
        }
        if self.buffer_samples() < self.period_samples() {
            return Err(Error::Frame(
                "buffer shorter than one SSB period".into(),
            ));
        }
        let last = *self.burst_positions.last().unwrap_or(&0);
        if (last + SSB_SYMBOLS) * self.symbol_len() > self.buffer_samples() {
            return Err(Error::Frame("burst does not fit in the buffer".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Simulated,
    File,
}

/// Complex baseband samples with their sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct IqBuffer {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    pub origin: Origin,
}

impl IqBuffer {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64, origin: Origin) -> Result<Self> {
        if samples.is_empty() || !(sample_rate > 0.0) {
            return Err(Error::Frame(
                "IQ buffer needs samples and a positive sample rate".into(),
            ));
        }
        Ok(Self {
            samples,
            sample_rate,
            origin,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_frame_is_valid() {
        let cfg = FrameConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.buffer_samples(), 614_400);
        assert_eq!(cfg.symbol_len(), 1096);
    }

    #[test]
    fn frame_rejects_bad_fft_size() {
        let cfg = FrameConfig {
            fft_size: 2048,
            ..FrameConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn frame_rejects_overlapping_burst() {
        let mut cfg = FrameConfig::default();
        cfg.burst_positions[1] = 6;
        assert!(cfg.validate().is_err());
        cfg.burst_positions.pop();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn frame_rejects_short_buffer() {
        let cfg = FrameConfig {
            buffer_duration: 0.005,
            ..FrameConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn iq_buffer_rejects_empty() {
        assert!(IqBuffer::new(vec![], 1.0, Origin::Simulated).is_err());
        assert!(IqBuffer::new(vec![Complex64::new(0.0, 0.0)], 0.0, Origin::File).is_err());
    }
}
