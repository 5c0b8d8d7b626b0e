use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

use super::grid::{SsbGrid, SSB_SUBCARRIERS, SSB_SYMBOLS};
use super::{FrameConfig, IqBuffer, Origin};

/// The three PBCH-bearing frequency rows (SSB symbols 1, 2, 3), 240 values each.
pub type RxSymbols = [Vec<Complex64>; 3];

/// CP-OFDM modulator/demodulator for the 240 SSB subcarriers centered on DC.
///
/// Grid subcarrier `k` maps to FFT bin `k - 120`. The modulator uses an
/// unscaled inverse FFT and the demodulator divides by `fft_size`, so a
/// resource element round-trips with unit gain.
#[derive(Clone)]
pub struct Ofdm {
    fft_size: usize,
    cp_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Ofdm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ofdm")
            .field("fft_size", &self.fft_size)
            .field("cp_len", &self.cp_len)
            .finish()
    }
}

impl Ofdm {
    pub fn new(cfg: &FrameConfig) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            fft_size: cfg.fft_size,
            cp_len: cfg.cp_len,
            forward: planner.plan_fft_forward(cfg.fft_size),
            inverse: planner.plan_fft_inverse(cfg.fft_size),
        }
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn symbol_len(&self) -> usize {
        self.fft_size + self.cp_len
    }

    /// FFT bin carrying SSB subcarrier `k`.
    pub fn bin(&self, k: usize) -> usize {
        (k as isize - (SSB_SUBCARRIERS / 2) as isize).rem_euclid(self.fft_size as isize) as usize
    }

    /// One OFDM symbol (CP included) carrying `row` on the SSB subcarriers.
    pub fn modulate_symbol(&self, row: &[Complex64]) -> Vec<Complex64> {
        let mut bins = vec![Complex64::new(0.0, 0.0); self.fft_size];
        for (k, &x) in row.iter().enumerate() {
            bins[self.bin(k)] = x;
        }
        self.inverse.process(&mut bins);
        let mut out = Vec::with_capacity(self.symbol_len());
        out.extend_from_slice(&bins[self.fft_size - self.cp_len..]);
        out.extend_from_slice(&bins);
        out
    }

    /// Full-band spectrum of `fft_size` samples, scaled by `1 / fft_size`.
    pub fn spectrum(&self, samples: &[Complex64]) -> Vec<Complex64> {
        let mut bins = samples[..self.fft_size].to_vec();
        self.forward.process(&mut bins);
        let scale = 1.0 / self.fft_size as f64;
        bins.iter_mut().for_each(|b| *b *= scale);
        bins
    }

    /// Inverse of [`Ofdm::spectrum`]: `fft_size` time samples without CP.
    pub fn synthesize(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        let mut bins = spectrum.to_vec();
        self.inverse.process(&mut bins);
        bins
    }

    /// The 240 SSB subcarriers of the `fft_size` samples in `samples`.
    pub fn demodulate_symbol(&self, samples: &[Complex64]) -> Vec<Complex64> {
        let bins = self.spectrum(samples);
        (0..SSB_SUBCARRIERS).map(|k| bins[self.bin(k)]).collect()
    }

    /// Time-domain samples of one SSB: four CP-OFDM symbols.
    pub fn modulate_ssb(&self, grid: &SsbGrid) -> Vec<Complex64> {
        grid.re.iter().flat_map(|row| self.modulate_symbol(row)).collect()
    }

    /// All four SSB rows of the SSB whose first CP starts at `n_ssb`.
    pub fn demodulate_ssb(&self, samples: &[Complex64], n_ssb: usize) -> Result<Vec<Vec<Complex64>>> {
        let end = n_ssb + SSB_SYMBOLS * self.symbol_len();
        if end > samples.len() {
            return Err(Error::OutOfBuffer {
                start: n_ssb,
                end,
                len: samples.len(),
            });
        }
        Ok((0..SSB_SYMBOLS)
            .map(|l| {
                let start = n_ssb + self.cp_len + self.symbol_len() * l;
                self.demodulate_symbol(&samples[start..start + self.fft_size])
            })
            .collect())
    }
}

/// Builds a buffer of `cfg.buffer_samples()` samples carrying each grid at
/// its OFDM symbol offset; silence elsewhere.
pub fn ofdm_modulate(grids: &[(SsbGrid, usize)], cfg: &FrameConfig) -> Result<IqBuffer> {
    let ofdm = Ofdm::new(cfg);
    let len = cfg.buffer_samples();
    let sym = cfg.symbol_len();
    let mut spans: Vec<usize> = grids.iter().map(|g| g.1).collect();
    spans.sort_unstable();
    for w in spans.windows(2) {
        if w[1] < w[0] + SSB_SYMBOLS {
            return Err(Error::Overlap {
                first: w[0],
                second: w[1],
            });
        }
    }
    let mut samples = vec![Complex64::new(0.0, 0.0); len];
    for (grid, symbol) in grids {
        let start = symbol * sym;
        let end = start + cfg.ssb_len();
        if end > len {
            return Err(Error::OutOfBuffer { start, end, len });
        }
        samples[start..end].copy_from_slice(&ofdm.modulate_ssb(grid));
    }
    IqBuffer::new(samples, cfg.sample_rate, Origin::Simulated)
}

/// Frequency rows of SSB symbols 1..3 for the SSB starting at sample `n_ssb`.
pub fn ofdm_demodulate(buf: &IqBuffer, n_ssb: usize, cfg: &FrameConfig) -> Result<RxSymbols> {
    let ofdm = Ofdm::new(cfg);
    let mut rows = ofdm.demodulate_ssb(&buf.samples, n_ssb)?;
    let r3 = rows.pop().unwrap();
    let r2 = rows.pop().unwrap();
    let r1 = rows.pop().unwrap();
    Ok([r1, r2, r3])
}
