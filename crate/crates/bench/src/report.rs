//! Trial records and their aggregation into fail-probability tables.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::stats::wilson;

/// One detection attempt on one test vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub snr_db: f64,
    pub model: String,
    /// Training vectors behind the decision; 0 for the correlation detector.
    pub train_size: usize,
    pub trial: usize,
    pub true_issb: usize,
    pub detected_issb: usize,
    pub correct: bool,
    pub crc_ok: bool,
    /// Simulated arrival time, one SSB period per trial.
    pub timestamp_ms: f64,
}

/// Aggregate over one `(snr_db, model, train_size)` point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub snr_db: f64,
    pub model: String,
    pub train_size: usize,
    pub trials: usize,
    pub fails: usize,
    /// Mean over beams of the per-beam fail fraction.
    pub fail_prob: f64,
    /// Wilson 95% interval on the pooled fail count.
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

impl PointSummary {
    pub fn interval_width(&self) -> f64 {
        self.wilson_hi - self.wilson_lo
    }
}

/// Groups records in first-appearance order of their key.
pub fn aggregate(records: &[TrialRecord]) -> Vec<PointSummary> {
    let mut order: Vec<(u64, String, usize)> = Vec::new();
    let mut groups: BTreeMap<(u64, String, usize), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        let key = (r.snr_db.to_bits(), r.model.clone(), r.train_size);
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let fails = g.iter().filter(|r| !r.correct).count();
            let mut per_beam: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
            for r in g {
                let e = per_beam.entry(r.true_issb).or_default();
                e.0 += !r.correct as usize;
                e.1 += 1;
            }
            let fail_prob = per_beam.values().map(|(f, n)| *f as f64 / *n as f64).sum::<f64>() / per_beam.len() as f64;
            let (wilson_lo, wilson_hi) = wilson(fails, g.len());
            PointSummary {
                snr_db: f64::from_bits(key.0),
                model: key.1,
                train_size: key.2,
                trials: g.len(),
                fails,
                fail_prob,
                wilson_lo,
                wilson_hi,
            }
        })
        .collect()
}

pub fn render_table(points: &[PointSummary]) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "{:>8}  {:<7} {:>6} {:>7} {:>6}  {:>9}  {:>19}",
        "snr_db", "model", "train", "trials", "fails", "fail_prob", "wilson95"
    )
    .unwrap();
    for p in points {
        writeln!(
            s,
            "{:>8.2}  {:<7} {:>6} {:>7} {:>6}  {:>9.4}  [{:.4}, {:.4}]",
            p.snr_db, p.model, p.train_size, p.trials, p.fails, p.fail_prob, p.wilson_lo, p.wilson_hi
        )
        .unwrap();
    }
    s
}
