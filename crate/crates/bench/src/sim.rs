//! Per-trial link simulation and dataset capture.

use beamsearch_core::chansim::{scenario_build, ChannelScenario, Schedule, ScheduledSsb};
use beamsearch_core::detect::{cell_search, correlate_detect, dmrs_extract, pss_peaks, refine_timing, sss_detect, DmrsFeatureVector, FeatureSource};
use beamsearch_core::nr_seq::{pci_compose, CellIdentity};
use beamsearch_core::ssb_phy::{grid_assemble, ofdm_demodulate, FrameConfig, IqBuffer, Ofdm, Origin, PbchPayload, RxSymbols};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, LabelSource, Timing};
use crate::dataset_io::{DatasetFile, DatasetHeader, FLAG_CRC_LABEL, FLAG_CRC_OK};
use crate::error::{BenchError, Result};

const PAYLOAD_SALT: u64 = 0x9e37_79b9_7f4a_7c15;
/// Zero samples ahead of the SSB in each simulated buffer.
const LEAD: usize = 512;

/// Noise-stream bases keep independent uses of one scenario seed apart.
pub fn stream_base(purpose: u64, index: u64) -> u64 {
    (purpose << 48) | (index << 32)
}

pub const STREAM_SWEEP: u64 = 1;
pub const STREAM_CAPTURE: u64 = 2;
pub const STREAM_SELECTOR_TRAIN: u64 = 3;
pub const STREAM_SELECTOR_TEST: u64 = 4;

/// One received SSB after demodulation.
#[derive(Debug, Clone)]
pub struct Reception {
    pub issb: usize,
    pub cell: CellIdentity,
    pub rf: RxSymbols,
    /// Single-precision DMRS features labeled with the true index.
    pub features: DmrsFeatureVector,
    pub corr_issb: usize,
    /// PBCH CRC under the true index.
    pub crc_ok: bool,
    lmax: usize,
}

impl Reception {
    /// PBCH CRC outcome when decoding under beam hypothesis `issb`.
    pub fn crc_under(&self, issb: usize) -> bool {
        beamsearch_core::ssb_phy::pbch_recover(&self.rf, issb, self.cell, self.lmax).crc_ok
    }
}

/// Transmits single SSBs through a fixed channel scenario and receives them.
pub struct Simulator {
    pub cfg: FrameConfig,
    pub cell: CellIdentity,
    pub scenario: ChannelScenario,
    pub timing: Timing,
    ofdm: Ofdm,
    seed: u64,
}

impl Simulator {
    pub fn new(exp: &ExperimentConfig, snr_db: f64) -> Result<Self> {
        let cfg = exp.frame.clone();
        let mut scenario = scenario_build(exp.seed, &cfg, exp.scenario.mode, snr_db, exp.scenario.taps)?;
        scenario.timing_offset = exp.scenario.timing_offset;
        scenario.cfo_hz = exp.scenario.cfo_hz;
        let n = exp.scenario.nid_cell;
        Ok(Self {
            cell: CellIdentity::from_nid_cell(n)?,
            ofdm: Ofdm::new(&cfg),
            cfg,
            scenario,
            timing: exp.scenario.timing,
            seed: exp.seed,
        })
    }

    pub fn with_snr(&self, snr_db: f64) -> Self {
        Self {
            cfg: self.cfg.clone(),
            cell: self.cell,
            scenario: self.scenario.with_snr(snr_db),
            timing: self.timing,
            ofdm: Ofdm::new(&self.cfg),
            seed: self.seed,
        }
    }

    pub fn lmax(&self) -> usize {
        self.cfg.lmax
    }

    /// Sends beam `issb` with a random PBCH payload; `trial` selects the
    /// payload and noise streams.
    pub fn receive(&self, issb: usize, trial: u64) -> Result<Reception> {
        let cfg = &self.cfg;
        let lmax = cfg.lmax;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ PAYLOAD_SALT);
        rng.set_stream(trial);
        let grid = grid_assemble(issb, self.cell, lmax, &PbchPayload::random(&mut rng))?;
        let tail = cfg.symbol_len() + self.scenario.timing_offset;
        let mut samples = vec![Complex64::new(0.0, 0.0); LEAD];
        samples.extend(self.ofdm.modulate_ssb(&grid));
        samples.extend(std::iter::repeat(Complex64::new(0.0, 0.0)).take(tail));
        let tx = IqBuffer::new(samples, cfg.sample_rate, Origin::Simulated)?;
        let schedule = Schedule {
            cell: self.cell,
            ssbs: vec![ScheduledSsb { start: LEAD, issb }],
        };
        let rx = self.scenario.apply(&tx, &schedule, cfg, trial)?;
        let (n_ssb, cell) = match self.timing {
            Timing::Known => (LEAD + self.scenario.timing_offset, self.cell),
            Timing::Search => {
                let r = cell_search(&rx, cfg)?;
                (r.n_ssb, r.cell)
            }
        };
        let rf = ofdm_demodulate(&rx, n_ssb, cfg)?;
        let mut features = dmrs_extract(&rf, cell.v()).quantized();
        features.label = Some(issb);
        features.snr_db = Some(self.scenario.snr_db);
        let (corr_issb, _) = correlate_detect(&features, cell, lmax)?;
        let crc_ok = beamsearch_core::ssb_phy::pbch_recover(&rf, issb, cell, lmax).crc_ok;
        Ok(Reception {
            issb,
            cell,
            rf,
            features,
            corr_issb,
            crc_ok,
            lmax,
        })
    }

    /// `n` receptions cycling through the beams, trial streams `base..base+n`.
    pub fn receive_many(&self, n: usize, base: u64) -> Result<Vec<Reception>> {
        (0..n)
            .into_par_iter()
            .map(|t| self.receive(t % self.lmax(), base + t as u64))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaptureStats {
    pub attempted: usize,
    pub labeled: usize,
}

impl CaptureStats {
    pub fn label_rate(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            self.labeled as f64 / self.attempted as f64
        }
    }
}

/// Simulated capture: `n` balanced receptions at `snr_db`, labeled by ground
/// truth or by CRC-verified correlation, with the configured amplitude
/// scales cycled over the kept vectors.
pub fn capture_dataset(exp: &ExperimentConfig, snr_db: f64, n: usize, base: u64) -> Result<(DatasetFile, CaptureStats)> {
    let sim = Simulator::new(exp, snr_db)?;
    let recs = sim.receive_many(n, base)?;
    let scales = &exp.capture.power_scales;
    let mut vectors = Vec::with_capacity(n);
    let mut flags = Vec::with_capacity(n);
    for r in recs {
        let (label, flag) = match exp.capture.source {
            LabelSource::Sim => (r.issb, if r.crc_ok { FLAG_CRC_OK } else { 0 }),
            LabelSource::Capture => {
                if r.corr_issb == r.issb && r.crc_ok || r.corr_issb != r.issb && r.crc_under(r.corr_issb) {
                    (r.corr_issb, FLAG_CRC_OK | FLAG_CRC_LABEL)
                } else {
                    continue;
                }
            }
        };
        let scale = scales[vectors.len() % scales.len()];
        let mut v = if scale == 1.0 { r.features } else { r.features.scaled(scale).quantized() };
        v.label = Some(label);
        if exp.capture.source == LabelSource::Capture {
            v.source = FeatureSource::Capture;
        }
        vectors.push(v);
        flags.push(flag);
    }
    let stats = CaptureStats {
        attempted: n,
        labeled: vectors.len(),
    };
    let file = DatasetFile {
        header: DatasetHeader {
            lmax: exp.frame.lmax,
            source: match exp.capture.source {
                LabelSource::Sim => FeatureSource::Sim,
                LabelSource::Capture => FeatureSource::Capture,
            },
            nid_cell: exp.scenario.nid_cell,
            snr_db: Some(snr_db),
        },
        vectors,
        flags,
    };
    Ok((file, stats))
}

/// One SSB found in a recorded buffer.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FoundSsb {
    pub n_ssb: usize,
    pub nid_cell: u16,
    pub pss_metric: f64,
    pub sss_metric: f64,
    pub corr_issb: usize,
    pub crc_ok: bool,
}

/// Locates every SSB of the strongest cell in `buf` and decodes its beam
/// index by correlation with PBCH CRC verification.
pub fn scan_buffer(buf: &IqBuffer, cfg: &FrameConfig) -> Result<(Vec<FoundSsb>, Vec<DmrsFeatureVector>)> {
    let hits = pss_peaks(buf, cfg)?;
    let mut found = Vec::new();
    let mut vectors = Vec::new();
    for h in hits {
        if h.n_ssb + cfg.ssb_len() > buf.len() {
            continue;
        }
        let (nid1, _) = sss_detect(buf, h.n_ssb, h.nid2, cfg)?;
        let cell = pci_compose(nid1, h.nid2)?;
        let n_ssb = refine_timing(buf, h.n_ssb, cell, cfg, 3);
        let (nid1, sss_metric) = sss_detect(buf, n_ssb, h.nid2, cfg)?;
        let cell = pci_compose(nid1, h.nid2)?;
        let rf = ofdm_demodulate(buf, n_ssb, cfg)?;
        let mut v = dmrs_extract(&rf, cell.v()).quantized();
        v.source = FeatureSource::Capture;
        let (corr_issb, _) = correlate_detect(&v, cell, cfg.lmax)?;
        let crc_ok = beamsearch_core::ssb_phy::pbch_recover(&rf, corr_issb, cell, cfg.lmax).crc_ok;
        found.push(FoundSsb {
            n_ssb,
            nid_cell: cell.nid_cell(),
            pss_metric: h.metric,
            sss_metric,
            corr_issb,
            crc_ok,
        });
        vectors.push(v);
    }
    Ok((found, vectors))
}

/// Dataset from a recorded buffer: CRC-verified correlation labels only.
pub fn capture_from_buffer(buf: &IqBuffer, cfg: &FrameConfig) -> Result<(DatasetFile, CaptureStats, Vec<FoundSsb>)> {
    let (found, vectors) = scan_buffer(buf, cfg)?;
    let nid_cell = found
        .first()
        .map(|f| f.nid_cell)
        .ok_or_else(|| BenchError::Data("no SSB found".into()))?;
    let mut kept = Vec::new();
    let mut flags = Vec::new();
    for (f, mut v) in found.iter().zip(vectors) {
        if f.crc_ok && f.nid_cell == nid_cell {
            v.label = Some(f.corr_issb);
            kept.push(v);
            flags.push(FLAG_CRC_OK | FLAG_CRC_LABEL);
        }
    }
    let stats = CaptureStats {
        attempted: found.len(),
        labeled: kept.len(),
    };
    let file = DatasetFile {
        header: DatasetHeader {
            lmax: cfg.lmax,
            source: FeatureSource::Capture,
            nid_cell,
            snr_db: None,
        },
        vectors: kept,
        flags,
    };
    Ok((file, stats, found))
}
