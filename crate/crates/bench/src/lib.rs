//! Experiment harness: dataset capture and storage, IQ file ingestion,
//! SNR and training-size sweeps, selector simulations and reports.

pub mod config;
pub mod dataset_io;
pub mod error;
pub mod iq;
pub mod report;
pub mod selector_sim;
pub mod sim;
pub mod stats;
pub mod sweep;

pub use config::{CaptureSpec, DetectorKind, ExperimentConfig, LabelSource, ScenarioSpec, SelectorRun, SelectorSpec, Timing};
pub use dataset_io::{DatasetFile, DatasetHeader, FLAG_CRC_LABEL, FLAG_CRC_OK};
pub use error::{BenchError, Result};
pub use report::{aggregate, render_table, PointSummary, TrialRecord};
pub use selector_sim::{run_selector, run_selector_sim, trace_arrivals, Arrival, SelectorStep, SelectorTrace};
pub use sim::{capture_dataset, capture_from_buffer, scan_buffer, CaptureStats, FoundSsb, Simulator};
pub use sweep::{evaluate_dataset, run_sweep, write_sweep, SweepOutput};
