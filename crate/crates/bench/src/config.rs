use std::path::Path;

use beamsearch_core::chansim::ChannelMode;
use beamsearch_core::detect::SelectorConfig;
use beamsearch_core::ssb_phy::FrameConfig;
use beamsearch_learn::{ModelKind, TrainParams};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// A detector under evaluation: the correlation baseline or a learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Corr,
    Mlp,
    Logreg,
    Svc,
    Forest,
    Vote,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 6] = [
        DetectorKind::Corr,
        DetectorKind::Mlp,
        DetectorKind::Logreg,
        DetectorKind::Svc,
        DetectorKind::Forest,
        DetectorKind::Vote,
    ];

    pub fn learner(self) -> Option<ModelKind> {
        match self {
            DetectorKind::Corr => None,
            DetectorKind::Mlp => Some(ModelKind::Mlp),
            DetectorKind::Logreg => Some(ModelKind::Logreg),
            DetectorKind::Svc => Some(ModelKind::Svc),
            DetectorKind::Forest => Some(ModelKind::Forest),
            DetectorKind::Vote => Some(ModelKind::Vote),
        }
    }

    pub fn name(self) -> &'static str {
        self.learner().map_or("corr", ModelKind::name)
    }
}

/// How the receiver finds the SSB in each simulated buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Timing {
    /// Demodulate at the true SSB start (PSS/SSS assumed acquired).
    Known,
    /// Run PSS/SSS cell search on every buffer.
    Search,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub mode: ChannelMode,
    /// Taps of each beam's static channel in beam-signature mode.
    pub taps: usize,
    pub timing_offset: usize,
    pub cfo_hz: f64,
    pub nid_cell: u16,
    pub timing: Timing,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            mode: ChannelMode::BeamSignature,
            taps: 8,
            timing_offset: 0,
            cfo_hz: 0.0,
            nid_cell: 0,
            timing: Timing::Known,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    /// Ground-truth beam index.
    Sim,
    /// Correlation decision, kept only when the PBCH CRC verifies it.
    Capture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaptureSpec {
    pub trials: usize,
    pub snr_db: f64,
    pub source: LabelSource,
    /// Amplitude gains cycled over consecutive vectors.
    pub power_scales: Vec<f64>,
}

impl Default for CaptureSpec {
    fn default() -> Self {
        Self {
            trials: 800,
            snr_db: 0.0,
            source: LabelSource::Sim,
            power_scales: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorRun {
    pub label: String,
    pub train_snr_db: f64,
    pub test_snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectorSpec {
    pub window: usize,
    pub threshold: f64,
    pub hysteresis: f64,
    pub model: ModelKind,
    pub training_size: usize,
    /// SSB arrivals per run, one per SSB period.
    pub steps: usize,
    /// Runs without a trained learner.
    pub untrained: bool,
    /// Learner success is judged by the PBCH CRC, which needs roughly
    /// 10 dB per RE to pass reliably; test SNRs should sit above that.
    pub runs: Vec<SelectorRun>,
}

impl SelectorSpec {
    pub fn selector(&self) -> SelectorConfig {
        SelectorConfig {
            window: self.window,
            threshold: self.threshold,
            hysteresis: self.hysteresis,
        }
    }

    /// Train-low/test-high and train-high/test-low over one SNR pair.
    pub fn both_orderings(low: f64, high: f64) -> Vec<SelectorRun> {
        vec![
            SelectorRun {
                label: "train_low_test_high".into(),
                train_snr_db: low,
                test_snr_db: high,
            },
            SelectorRun {
                label: "train_high_test_low".into(),
                train_snr_db: high,
                test_snr_db: low,
            },
        ]
    }
}

impl Default for SelectorSpec {
    fn default() -> Self {
        let s = SelectorConfig::default();
        Self {
            window: s.window,
            threshold: s.threshold,
            hysteresis: s.hysteresis,
            model: ModelKind::Svc,
            training_size: 70,
            steps: 1000,
            untrained: false,
            runs: vec![
                SelectorRun {
                    label: "train_low_test_high".into(),
                    train_snr_db: -12.0,
                    test_snr_db: 20.0,
                },
                SelectorRun {
                    label: "train_high_test_low".into(),
                    train_snr_db: 20.0,
                    test_snr_db: 14.0,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub models: Vec<DetectorKind>,
    /// SNR points in dB, measured on the DMRS resource elements.
    pub sweep: Vec<f64>,
    pub training_sizes: Vec<usize>,
    pub trials_per_point: usize,
    /// Divide features by the dataset's sqrt(N_p) before training.
    pub normalize: bool,
    pub frame: FrameConfig,
    pub scenario: ScenarioSpec,
    pub capture: CaptureSpec,
    pub train: TrainParams,
    pub selector: SelectorSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            models: vec![DetectorKind::Corr, DetectorKind::Mlp, DetectorKind::Svc],
            sweep: vec![-6.0, -5.0, -4.0, -3.0, -2.0],
            training_sizes: vec![70, 700, 1400, 14000],
            trials_per_point: 1000,
            normalize: true,
            frame: FrameConfig::default(),
            scenario: ScenarioSpec::default(),
            capture: CaptureSpec::default(),
            train: TrainParams::default(),
            selector: SelectorSpec::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| BenchError::Runtime(format!("serializing config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        let bad = |m: String| Err(BenchError::Config(m));
        if self.models.is_empty() {
            return bad("at least one model required".into());
        }
        if self.trials_per_point < 100 {
            return bad(format!("trials_per_point {} below 100", self.trials_per_point));
        }
        if self.sweep.iter().any(|s| s.is_nan()) {
            return bad("NaN SNR point".into());
        }
        if self.training_sizes.is_empty() || self.training_sizes.contains(&0) {
            return bad("training sizes must be non-empty and positive".into());
        }
        if self.frame.lmax > 8 {
            return bad(format!("lmax {} exceeds the supported 8 beams", self.frame.lmax));
        }
        if self.scenario.nid_cell > beamsearch_core::nr_seq::MAX_NID_CELL {
            return bad(format!("nid_cell {} out of range", self.scenario.nid_cell));
        }
        if self.scenario.taps == 0 || self.scenario.taps > self.frame.cp_len {
            return bad(format!("taps {} outside 1..={}", self.scenario.taps, self.frame.cp_len));
        }
        if self.capture.power_scales.is_empty() || self.capture.power_scales.iter().any(|s| !(*s > 0.0)) {
            return bad("power_scales must be non-empty and positive".into());
        }
        let s = &self.selector;
        if s.window == 0 || !(s.threshold > 0.0 && s.threshold < 1.0) {
            return bad("selector window must be positive and threshold in (0, 1)".into());
        }
        Ok(())
    }

    /// Maximum training size over the sweep.
    pub fn max_training_size(&self) -> usize {
        self.training_sizes.iter().copied().max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let c = ExperimentConfig::default();
        let text = c.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = ExperimentConfig::from_toml("seed = 9\nmodels = [\"corr\"]\n[scenario]\nmode = \"awgn_only\"\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.scenario.mode, ChannelMode::AwgnOnly);
        assert_eq!(c.frame, FrameConfig::default());
    }

    #[test]
    fn rejects_invalid() {
        for bad in ["models = []", "trials_per_point = 50", "[frame]\nfft_size = 512", "unknown = 1\nmodels = [\"svm\"]"] {
            assert!(matches!(ExperimentConfig::from_toml(bad), Err(BenchError::Config(_))), "{bad}");
        }
    }
}
