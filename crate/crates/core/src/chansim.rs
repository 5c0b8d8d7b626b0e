//! Reproducible channel impairments for simulated SSB reception.
//!
//! A [`ChannelScenario`] fixes one static frequency response per beam, the
//! DMRS SNR, a timing offset and a carrier frequency offset. [`apply`] runs a
//! transmitted buffer through it with noise drawn from a per-trial stream.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::nr_seq::CellIdentity;
use crate::ssb_phy::{dmrs_positions, FrameConfig, IqBuffer, Ofdm, RxSymbols, SsbGrid, SSB_SUBCARRIERS, SSB_SYMBOLS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    AwgnOnly,
    BeamSignature,
}

// Stream reserved for drawing the beam signatures; trials use streams 1..
const SIGNATURE_STREAM: u64 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelScenario {
    pub seed: u64,
    pub mode: ChannelMode,
    /// `lmax` responses over the 240 SSB subcarriers, mean power 1 each.
    pub beam_signatures: Vec<Vec<Complex64>>,
    /// SNR on the DMRS resource elements; `f64::INFINITY` disables noise.
    pub snr_db: f64,
    pub timing_offset: usize,
    pub cfo_hz: f64,
}

/// Draws the per-beam responses of a scenario.
///
/// In beam-signature mode each beam gets `taps` i.i.d. complex Gaussian taps
/// at sample delays `0..taps`, evaluated on the SSB subcarrier bins of the
/// FFT and scaled to unit mean power.
pub fn scenario_build(
    seed: u64,
    cfg: &FrameConfig,
    mode: ChannelMode,
    snr_db: f64,
    taps: usize,
) -> Result<ChannelScenario> {
    if taps == 0 {
        return Err(Error::Scenario("at least one tap required".into()));
    }
    if taps > cfg.cp_len {
        return Err(Error::Scenario(format!(
            "{taps} taps exceed the cyclic prefix of {} samples",
            cfg.cp_len
        )));
    }
    if snr_db.is_nan() {
        return Err(Error::Scenario("SNR is NaN".into()));
    }
    let beam_signatures = match mode {
        ChannelMode::AwgnOnly => vec![vec![Complex64::new(1.0, 0.0); SSB_SUBCARRIERS]; cfg.lmax],
        ChannelMode::BeamSignature => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(SIGNATURE_STREAM);
            let n = cfg.fft_size as f64;
            (0..cfg.lmax)
                .map(|_| {
                    let h: Vec<Complex64> = (0..taps).map(|_| complex_gaussian(&mut rng)).collect();
                    let mut resp: Vec<Complex64> = (0..SSB_SUBCARRIERS)
                        .map(|k| {
                            let f = k as f64 - (SSB_SUBCARRIERS / 2) as f64;
                            h.iter()
                                .enumerate()
                                .map(|(d, t)| t * Complex64::from_polar(1.0, -2.0 * PI * f * d as f64 / n))
                                .sum()
                        })
                        .collect();
                    let p = resp.iter().map(|z| z.norm_sqr()).sum::<f64>() / SSB_SUBCARRIERS as f64;
                    let s = 1.0 / p.sqrt();
                    resp.iter_mut().for_each(|z| *z *= s);
                    resp
                })
                .collect()
        }
    };
    Ok(ChannelScenario {
        seed,
        mode,
        beam_signatures,
        snr_db,
        timing_offset: 0,
        cfo_hz: 0.0,
    })
}

/// Unit-variance circular complex Gaussian sample.
pub fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// One SSB in a buffer: its first sample and the beam that sent it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduledSsb {
    pub start: usize,
    pub issb: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub cell: CellIdentity,
    pub ssbs: Vec<ScheduledSsb>,
}

impl ChannelScenario {
    pub fn lmax(&self) -> usize {
        self.beam_signatures.len()
    }

    pub fn with_snr(&self, snr_db: f64) -> Self {
        Self {
            snr_db,
            ..self.clone()
        }
    }

    /// Noise-free received grid: every RE scaled by the beam's response.
    pub fn filter_grid(&self, grid: &SsbGrid) -> SsbGrid {
        let sig = &self.beam_signatures[grid.issb];
        let mut out = grid.clone();
        for row in out.re.iter_mut() {
            row.iter_mut().zip(sig).for_each(|(z, h)| *z *= h);
        }
        out
    }

    /// Mean signal power on the DMRS REs of beam `issb` after filtering.
    pub fn dmrs_power(&self, issb: usize, v: usize) -> f64 {
        let sig = &self.beam_signatures[issb];
        let pos = dmrs_positions(v);
        pos.iter().map(|&(_, k)| sig[k].norm_sqr()).sum::<f64>() / pos.len() as f64
    }

    /// Runs `buf` through the scenario. `trial` selects the noise stream so
    /// that trials are independent and individually reproducible.
    pub fn apply(&self, buf: &IqBuffer, schedule: &Schedule, cfg: &FrameConfig, trial: u64) -> Result<IqBuffer> {
        let len = buf.len();
        let ofdm = Ofdm::new(cfg);
        let sym = cfg.symbol_len();
        let mut samples = buf.samples.clone();

        for s in &schedule.ssbs {
            let end = s.start + cfg.ssb_len();
            if end > len {
                return Err(Error::OutOfBuffer { start: s.start, end, len });
            }
            if s.issb >= self.lmax() {
                return Err(Error::Scenario(format!("beam {} beyond lmax {}", s.issb, self.lmax())));
            }
            if self.mode == ChannelMode::AwgnOnly {
                continue;
            }
            let sig = &self.beam_signatures[s.issb];
            for l in 0..SSB_SYMBOLS {
                let body = s.start + l * sym + cfg.cp_len;
                let mut spec = ofdm.spectrum(&samples[body..body + cfg.fft_size]);
                let mut filtered = vec![Complex64::new(0.0, 0.0); cfg.fft_size];
                for (k, h) in sig.iter().enumerate() {
                    let b = ofdm.bin(k);
                    filtered[b] = spec[b] * h;
                }
                std::mem::swap(&mut spec, &mut filtered);
                let time = ofdm.synthesize(&spec);
                let sym_start = s.start + l * sym;
                samples[sym_start..sym_start + cfg.cp_len].copy_from_slice(&time[cfg.fft_size - cfg.cp_len..]);
                samples[body..body + cfg.fft_size].copy_from_slice(&time);
            }
        }

        if self.timing_offset > 0 {
            let k = self.timing_offset.min(len);
            samples.rotate_right(k);
            samples[..k].iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        }

        if self.cfo_hz != 0.0 {
            let w = 2.0 * PI * self.cfo_hz / buf.sample_rate;
            for (n, z) in samples.iter_mut().enumerate() {
                *z *= Complex64::from_polar(1.0, w * n as f64);
            }
        }

        if self.snr_db.is_finite() && !schedule.ssbs.is_empty() {
            let v = schedule.cell.v();
            let p_sig = schedule
                .ssbs
                .iter()
                .map(|s| self.dmrs_power(s.issb, v))
                .sum::<f64>()
                / schedule.ssbs.len() as f64;
            let per_re = p_sig / 10f64.powf(self.snr_db / 10.0);
            // demodulation divides by N, so time-domain variance is N per RE variance
            let sigma = (per_re * cfg.fft_size as f64).sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(trial.wrapping_add(1));
            for z in samples.iter_mut() {
                *z += complex_gaussian(&mut rng) * sigma;
            }
        }

        IqBuffer::new(samples, buf.sample_rate, buf.origin)
    }
}

/// SNR in dB over the DMRS REs of `rx` against the noise-free `reference`
/// grid; `f64::INFINITY` when the residual is at rounding level.
pub fn snr_measure(reference: &SsbGrid, rx: &RxSymbols) -> f64 {
    let (mut sig, mut noise) = (0.0, 0.0);
    for (l, k) in dmrs_positions(reference.cell.v()) {
        let x = reference.re[l][k];
        sig += x.norm_sqr();
        noise += (rx[l - 1][k] - x).norm_sqr();
    }
    if noise <= sig * 1e-24 {
        return f64::INFINITY;
    }
    10.0 * (sig / noise).log10()
}
