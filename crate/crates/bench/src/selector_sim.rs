//! Time-series simulation of the detection selector.

use beamsearch_core::detect::{Branch, SelectorConfig, SelectorState};
use beamsearch_learn::Detector;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, SelectorRun};
use crate::error::Result;
use crate::sim::{capture_dataset, stream_base, Simulator, STREAM_SELECTOR_TEST, STREAM_SELECTOR_TRAIN};

/// What the receiver knows about one SSB arrival.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub true_issb: usize,
    pub corr_issb: usize,
    pub learner_issb: Option<usize>,
    /// PBCH CRC under the learner's hypothesis.
    pub learner_crc: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorStep {
    pub step: usize,
    pub time_ms: f64,
    pub true_issb: usize,
    pub corr_issb: usize,
    /// -1 when no learner output exists.
    pub learner_issb: i64,
    pub learner_crc: bool,
    pub active: Branch,
    pub chosen_issb: usize,
    pub correct: bool,
    pub cumulative_detection: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorTrace {
    pub label: String,
    pub train_snr_db: Option<f64>,
    pub test_snr_db: f64,
    /// First 1-based step after which the learner is active.
    pub switch_step: Option<usize>,
    pub steps: Vec<SelectorStep>,
}

impl SelectorTrace {
    pub fn final_detection(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.cumulative_detection)
    }
}

/// Feeds arrivals through a fresh selector, one per SSB period.
pub fn trace_arrivals(cfg: SelectorConfig, period_ms: f64, arrivals: impl IntoIterator<Item = Arrival>) -> (Option<usize>, Vec<SelectorStep>) {
    let mut sel = SelectorState::new(cfg);
    let mut switch_step = None;
    let mut hits = 0usize;
    let mut steps = Vec::new();
    for (i, a) in arrivals.into_iter().enumerate() {
        let chosen = sel.step(a.corr_issb, a.learner_issb, a.learner_crc);
        let active = sel.active();
        if switch_step.is_none() && active == Branch::Learner {
            switch_step = Some(i + 1);
        }
        let correct = chosen == a.true_issb;
        hits += correct as usize;
        steps.push(SelectorStep {
            step: i + 1,
            time_ms: i as f64 * period_ms,
            true_issb: a.true_issb,
            corr_issb: a.corr_issb,
            learner_issb: a.learner_issb.map_or(-1, |l| l as i64),
            learner_crc: a.learner_crc.unwrap_or(false),
            active,
            chosen_issb: chosen,
            correct,
            cumulative_detection: hits as f64 / (i + 1) as f64,
        });
    }
    (switch_step, steps)
}

/// Trains the configured learner at the run's training SNR and streams
/// `steps` SSBs at its test SNR.
pub fn run_selector(exp: &ExperimentConfig, run: &SelectorRun, index: u64) -> Result<SelectorTrace> {
    let spec = &exp.selector;
    let detector = if spec.untrained {
        None
    } else {
        let (file, _) = capture_dataset(exp, run.train_snr_db, spec.training_size, stream_base(STREAM_SELECTOR_TRAIN, index))?;
        Some(Detector::fit(spec.model, &file.vectors, exp.frame.lmax, exp.normalize, &exp.train.clone().seeded(exp.seed))?)
    };
    let sim = Simulator::new(exp, run.test_snr_db)?;
    let recs = sim.receive_many(spec.steps, stream_base(STREAM_SELECTOR_TEST, index))?;
    let arrivals = recs
        .iter()
        .map(|r| {
            let learner = detector.as_ref().map(|d| d.predict(&r.features)).transpose()?;
            Ok(Arrival {
                true_issb: r.issb,
                corr_issb: r.corr_issb,
                learner_issb: learner,
                learner_crc: learner.map(|l| if l == r.issb { r.crc_ok } else { r.crc_under(l) }),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (switch_step, steps) = trace_arrivals(spec.selector(), exp.frame.ssb_period_ms, arrivals);
    Ok(SelectorTrace {
        label: run.label.clone(),
        train_snr_db: detector.is_some().then_some(run.train_snr_db),
        test_snr_db: run.test_snr_db,
        switch_step,
        steps,
    })
}

pub fn run_selector_sim(exp: &ExperimentConfig) -> Result<Vec<SelectorTrace>> {
    exp.validate()?;
    exp.selector
        .runs
        .iter()
        .enumerate()
        .map(|(i, run)| run_selector(exp, run, i as u64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arrivals(n: usize, learner: Option<bool>) -> Vec<Arrival> {
        (0..n)
            .map(|t| Arrival {
                true_issb: t % 8,
                corr_issb: (t + 1) % 8,
                learner_issb: learner.map(|_| t % 8),
                learner_crc: learner,
            })
            .collect()
    }

    #[test]
    fn perfect_learner_switches_when_window_fills() {
        let cfg = SelectorConfig::default();
        let (switch, steps) = trace_arrivals(cfg, 20.0, arrivals(300, Some(true)));
        // the smallest full window with successes/W >= threshold is the first one
        let expected = (1..=300).find(|&n| n >= cfg.window && (n.min(cfg.window) as f64) / cfg.window as f64 >= cfg.threshold);
        assert_eq!(switch, expected);
        assert_eq!(switch, Some(100));
        assert!(steps[..100].iter().all(|s| !s.correct));
        assert!(steps[100..].iter().all(|s| s.correct));
        assert_eq!(steps[99].time_ms, 99.0 * 20.0);
    }

    #[test]
    fn no_learner_output_keeps_correlation() {
        let (switch, steps) = trace_arrivals(SelectorConfig::default(), 20.0, arrivals(500, None));
        assert_eq!(switch, None);
        assert!(steps.iter().all(|s| s.active == Branch::Correlation && s.chosen_issb == s.corr_issb));
    }
}
