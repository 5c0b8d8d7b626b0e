use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Correlation,
    Learner,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectorConfig {
    pub window: usize,
    pub threshold: f64,
    pub hysteresis: f64,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            window: 100,
            threshold: 0.95,
            hysteresis: 0.05,
        }
    }
}

/// Chooses between the correlation detector and the learning block.
///
/// The learner's hypotheses are scored in the background (its CRC outcome
/// is fed back even while correlation output is emitted). The learner takes
/// over once a full window succeeds at `threshold` or better, and hands back
/// when the windowed rate drops below `threshold - hysteresis`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectorState {
    pub config: SelectorConfig,
    window: VecDeque<bool>,
    successes: usize,
    active: Branch,
}

impl SelectorState {
    pub fn new(config: SelectorConfig) -> Self {
        Self {
            config,
            window: VecDeque::with_capacity(config.window),
            successes: 0,
            active: Branch::Correlation,
        }
    }

    pub fn active(&self) -> Branch {
        self.active
    }

    /// Learner success rate over the current window (0 when empty).
    pub fn rate(&self) -> f64 {
        if self.window.is_empty() {
            0.0
        } else {
            self.successes as f64 / self.window.len() as f64
        }
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    /// Emits the SSB index for this arrival and folds in the learner's CRC
    /// outcome.
    pub fn step(
        &mut self,
        corr_issb: usize,
        learner_issb: Option<usize>,
        crc_feedback: Option<bool>,
    ) -> usize {
        let chosen = match (self.active, learner_issb) {
            (Branch::Learner, Some(l)) => l,
            _ => corr_issb,
        };
        if let (Some(_), Some(ok)) = (learner_issb, crc_feedback) {
            if self.window.len() == self.config.window {
                if self.window.pop_front() == Some(true) {
                    self.successes -= 1;
                }
            }
            self.window.push_back(ok);
            self.successes += ok as usize;
            let rate = self.rate();
            match self.active {
                Branch::Correlation
                    if self.window.len() == self.config.window && rate >= self.config.threshold =>
                {
                    self.active = Branch::Learner;
                }
                Branch::Learner if rate < self.config.threshold - self.config.hysteresis => {
                    self.active = Branch::Correlation;
                }
                _ => {}
            }
        }
        chosen
    }
}

impl Default for SelectorState {
    fn default() -> Self {
        Self::new(SelectorConfig::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_state_uses_correlation() {
        let mut s = SelectorState::default();
        assert_eq!(s.active(), Branch::Correlation);
        assert_eq!(s.step(4, Some(2), Some(true)), 4);
        assert_eq!(s.step(4, None, None), 4);
    }

    #[test]
    fn switches_after_full_window_then_falls_back() {
        let mut s = SelectorState::default();
        for i in 0..100 {
            assert_eq!(s.active(), Branch::Correlation, "step {i}");
            assert_eq!(s.step(1, Some(2), Some(true)), 1);
        }
        assert_eq!(s.active(), Branch::Learner);
        assert_eq!(s.step(1, Some(2), Some(false)), 2);

        // Fallback happens at the first failure count f with
        // (100 - f) / 100 < 0.95 - 0.05, computed in integers: f > 10.
        let expected = (0..=100).find(|f| (100 - f) * 100 < 90 * 100).unwrap();
        assert_eq!(expected, 11);
        let mut fell_back_at = None;
        for f in 2..=30 {
            s.step(1, Some(2), Some(false));
            if s.active() == Branch::Correlation && fell_back_at.is_none() {
                fell_back_at = Some(f);
            }
        }
        assert_eq!(fell_back_at, Some(expected));
    }

    #[test]
    fn never_learner_before_window_fills() {
        let mut s = SelectorState::new(SelectorConfig {
            window: 10,
            threshold: 0.5,
            hysteresis: 0.1,
        });
        for _ in 0..9 {
            s.step(0, Some(1), Some(true));
            assert_eq!(s.active(), Branch::Correlation);
        }
        s.step(0, Some(1), Some(true));
        assert_eq!(s.active(), Branch::Learner);
    }

    #[test]
    fn absent_learner_never_switches() {
        let mut s = SelectorState::default();
        for _ in 0..1000 {
            assert_eq!(s.step(3, None, Some(true)), 3);
        }
        assert_eq!(s.window_len(), 0);
        assert_eq!(s.active(), Branch::Correlation);
    }
}
