//! SNR and training-size sweeps.

use std::path::Path;
use std::time::Instant;

use beamsearch_core::detect::DmrsFeatureVector;
use beamsearch_learn::{Dataset, Detector};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::dataset_io::{DatasetFile, FLAG_CRC_OK};
use crate::error::{io_runtime, BenchError, Result};
use crate::report::{aggregate, PointSummary, TrialRecord};
use crate::sim::{capture_dataset, stream_base, STREAM_SWEEP};

/// Wall-clock cost of one sweep point; kept out of the CSV outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointTiming {
    pub snr_db: f64,
    pub model: String,
    pub train_size: usize,
    pub train_seconds: f64,
    pub eval_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub records: Vec<TrialRecord>,
    pub points: Vec<PointSummary>,
    pub timings: Vec<PointTiming>,
}

impl SweepOutput {
    pub fn point(&self, snr_db: f64, model: &str, train_size: usize) -> Option<&PointSummary> {
        self.points
            .iter()
            .find(|p| p.snr_db == snr_db && p.model == model && p.train_size == train_size)
    }
}

/// Vectors needed per SNR point so that the 70% side covers the largest
/// training size and the 30% side covers the evaluation trials.
pub fn dataset_size(exp: &ExperimentConfig) -> usize {
    let need = ((exp.max_training_size() as f64 / 0.7).ceil() as usize).max((exp.trials_per_point as f64 / 0.3).ceil() as usize);
    let unit = 10 * exp.frame.lmax;
    need.div_ceil(unit) * unit
}

/// Evaluates every configured detector on a dataset's stratified split.
pub fn evaluate_dataset(exp: &ExperimentConfig, file: &DatasetFile, snr_db: f64) -> Result<SweepOutput> {
    let lmax = file.header.lmax;
    let labels: Vec<usize> = file.vectors.iter().map(|v| v.label.expect("labeled")).collect();
    let index = Dataset::new(ndarray::Array2::zeros((labels.len(), 0)), labels, lmax)?;
    let split = index.stratified_split(0.7, exp.seed);
    if split.test.len() < exp.trials_per_point {
        return Err(BenchError::Data(format!(
            "test split of {} vectors is smaller than trials_per_point {}",
            split.test.len(),
            exp.trials_per_point
        )));
    }
    let test = index.stratified_sample(&split.test, exp.trials_per_point, exp.seed);
    let test_vectors: Vec<DmrsFeatureVector> = test.iter().map(|&i| file.vectors[i].clone()).collect();
    let test_x = Dataset::from_vectors(&test_vectors, lmax)?.x;
    let cell = beamsearch_core::nr_seq::CellIdentity::from_nid_cell(file.header.nid_cell)?;
    let period = exp.frame.ssb_period_ms;

    let mut records = Vec::new();
    let mut timings = Vec::new();
    let emit = |model: &str, train_size: usize, detected: &[usize], records: &mut Vec<TrialRecord>| {
        for (t, (&i, &d)) in test.iter().zip(detected).enumerate() {
            let truth = index.y[i];
            let correct = d == truth;
            records.push(TrialRecord {
                snr_db,
                model: model.to_string(),
                train_size,
                trial: t,
                true_issb: truth,
                detected_issb: d,
                correct,
                // a wrong hypothesis fails the CRC except with probability 2^-24
                crc_ok: correct && file.flags[i] & FLAG_CRC_OK != 0,
                timestamp_ms: t as f64 * period,
            });
        }
    };

    for &kind in &exp.models {
        match kind.learner() {
            None => {
                let start = Instant::now();
                let detected: Vec<usize> = test_vectors
                    .iter()
                    .map(|v| beamsearch_core::detect::correlate_detect(v, cell, lmax).map(|r| r.0))
                    .collect::<std::result::Result<_, _>>()?;
                timings.push(PointTiming {
                    snr_db,
                    model: kind.name().into(),
                    train_size: 0,
                    train_seconds: 0.0,
                    eval_seconds: start.elapsed().as_secs_f64(),
                });
                emit(kind.name(), 0, &detected, &mut records);
            }
            Some(model) => {
                for &size in &exp.training_sizes {
                    let start = Instant::now();
                    let train_idx = index.stratified_sample(&split.train, size, exp.seed);
                    let train: Vec<DmrsFeatureVector> = train_idx.iter().map(|&i| file.vectors[i].clone()).collect();
                    let det = Detector::fit(model, &train, lmax, exp.normalize, &exp.train.clone().seeded(exp.seed))?;
                    let trained = start.elapsed().as_secs_f64();
                    let start = Instant::now();
                    let detected = det.predict_batch(&test_x);
                    timings.push(PointTiming {
                        snr_db,
                        model: kind.name().into(),
                        train_size: train.len(),
                        train_seconds: trained,
                        eval_seconds: start.elapsed().as_secs_f64(),
                    });
                    emit(kind.name(), train.len(), &detected, &mut records);
                }
            }
        }
    }
    let points = aggregate(&records);
    Ok(SweepOutput { records, points, timings })
}

/// Captures one dataset per SNR point and evaluates every detector on it.
pub fn run_sweep(exp: &ExperimentConfig) -> Result<SweepOutput> {
    exp.validate()?;
    let n = dataset_size(exp);
    let mut out = SweepOutput {
        records: Vec::new(),
        points: Vec::new(),
        timings: Vec::new(),
    };
    for (k, &snr) in exp.sweep.iter().enumerate() {
        let (file, _) = capture_dataset(exp, snr, n, stream_base(STREAM_SWEEP, k as u64))?;
        let part = evaluate_dataset(exp, &file, snr)?;
        out.records.extend(part.records);
        out.points.extend(part.points);
        out.timings.extend(part.timings);
    }
    Ok(out)
}

/// Writes `trials.csv`, `table.csv`, `summary.json` and `config.toml`.
pub fn write_sweep(out: &SweepOutput, exp: &ExperimentConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_runtime("creating output directory", e))?;
    write_csv(&dir.join("trials.csv"), &out.records)?;
    write_csv(&dir.join("table.csv"), &out.points)?;
    let summary = serde_json::json!({
        "points": out.points,
        "timings": out.timings,
    });
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary).expect("json"))
        .map_err(|e| io_runtime("summary.json", e))?;
    std::fs::write(dir.join("config.toml"), exp.to_toml()?).map_err(|e| io_runtime("config.toml", e))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| BenchError::Runtime(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r).map_err(|e| BenchError::Runtime(e.to_string()))?;
    }
    w.flush().map_err(|e| io_runtime(&path.display().to_string(), e))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?;
    r.deserialize().map(|row| row.map_err(|e| BenchError::Data(e.to_string()))).collect()
}
