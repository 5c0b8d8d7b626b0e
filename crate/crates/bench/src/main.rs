use std::path::{Path, PathBuf};
use std::process::ExitCode;

use beamsearch_bench::config::{DetectorKind, LabelSource, SelectorRun};
use beamsearch_bench::dataset_io::{sha256_hex, DatasetFile};
use beamsearch_bench::error::{io_runtime, BenchError, Result};
use beamsearch_bench::iq::{ingest_iq, IqMeta};
use beamsearch_bench::report::{aggregate, render_table, TrialRecord};
use beamsearch_bench::sim::{capture_dataset, capture_from_buffer, stream_base, STREAM_CAPTURE};
use beamsearch_bench::sweep::{read_csv, run_sweep, write_csv, write_sweep};
use beamsearch_bench::{run_selector_sim, scan_buffer, ExperimentConfig};
use beamsearch_core::chansim::ChannelMode;
use beamsearch_learn::{Detector, ModelFile, ModelKind, Provenance};
use clap::{Args, Parser, Subcommand};

/// Blind SSB index detection experiments.
#[derive(Parser)]
#[command(name = "beamsearch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML); defaults apply to missing keys.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Channel mode: awgn_only, beam_signature, ...
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    nid_cell: Option<u16>,
    /// Skip feature normalization.
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Capture a labeled DMRS dataset from simulation or an IQ recording.
    Capture {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Label by ground truth (sim) or CRC-verified correlation (capture).
        #[arg(long)]
        source: Option<String>,
        /// Read SSBs from an IQ file instead of simulating.
        #[arg(long)]
        iq: Option<PathBuf>,
        #[arg(long)]
        sample_rate: Option<f64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Train a detector on a dataset file and save it as JSON.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "svc")]
        model: ModelKind,
        /// Report accuracy on this dataset after training.
        #[arg(long)]
        eval: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Fail probability across SNR points, models and training sizes.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated SNR points in dB.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        snr: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        training_sizes: Option<Vec<usize>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Stream SSBs through the detection selector over time.
    SelectorSim {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        train_snr: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        test_snr: Option<f64>,
        /// Run both orderings of (train_snr, test_snr).
        #[arg(long)]
        both: bool,
        #[arg(long)]
        model: Option<ModelKind>,
        #[arg(long)]
        training_size: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        untrained: bool,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Scan an IQ recording for SSBs and decode their beam indices.
    Ingest {
        #[command(flatten)]
        common: Common,
        iq: PathBuf,
        #[arg(long)]
        sample_rate: Option<f64>,
        #[arg(long)]
        center_frequency: Option<f64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Re-aggregate a trials.csv into a fail-probability table.
    Report {
        trials: PathBuf,
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_enum<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| BenchError::Config(format!("unknown {what} '{s}'")))
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut exp = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        exp.seed = s;
    }
    if let Some(m) = &c.mode {
        exp.scenario.mode = parse_enum::<ChannelMode>("channel mode", m)?;
    }
    if let Some(n) = c.nid_cell {
        exp.scenario.nid_cell = n;
    }
    if c.no_normalize {
        exp.normalize = false;
    }
    Ok(exp)
}

fn output_dir(out: &Path) -> Result<PathBuf> {
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf();
    std::fs::create_dir_all(&dir).map_err(|e| io_runtime("creating output directory", e))?;
    Ok(dir)
}

fn write_resolved(exp: &ExperimentConfig, dir: &Path) -> Result<()> {
    exp.validate()?;
    std::fs::write(dir.join("resolved_config.toml"), exp.to_toml()?).map_err(|e| io_runtime("resolved_config.toml", e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value).expect("serializable")).map_err(|e| io_runtime(&path.display().to_string(), e))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Capture {
            common,
            snr,
            trials,
            source,
            iq,
            sample_rate,
            out,
        } => {
            let mut exp = load_config(&common)?;
            if let Some(s) = snr {
                exp.capture.snr_db = s;
            }
            if let Some(t) = trials {
                exp.capture.trials = t;
            }
            if let Some(s) = source {
                exp.capture.source = parse_enum::<LabelSource>("label source", &s)?;
            }
            let dir = output_dir(&out)?;
            write_resolved(&exp, &dir)?;
            let (file, stats) = match iq {
                Some(path) => {
                    let over = IqMeta {
                        sample_rate,
                        ..IqMeta::default()
                    };
                    let (buf, _) = ingest_iq(&path, &over)?;
                    let (file, stats, _) = capture_from_buffer(&buf, &exp.frame)?;
                    (file, stats)
                }
                None => capture_dataset(&exp, exp.capture.snr_db, exp.capture.trials, stream_base(STREAM_CAPTURE, 0))?,
            };
            if exp.capture.source == LabelSource::Capture && stats.label_rate() < 0.5 {
                eprintln!(
                    "warning: only {}/{} vectors carry CRC-verified labels",
                    stats.labeled, stats.attempted
                );
            }
            file.write(&out)?;
            println!("wrote {} vectors to {}", file.len(), out.display());
        }
        Command::Train {
            common,
            dataset,
            model,
            eval,
            out,
        } => {
            let exp = load_config(&common)?;
            let dir = output_dir(&out)?;
            write_resolved(&exp, &dir)?;
            let bytes = std::fs::read(&dataset).map_err(|e| BenchError::Data(format!("{}: {e}", dataset.display())))?;
            let file = DatasetFile::from_bytes(&bytes)?;
            let det = Detector::fit(model, &file.vectors, file.header.lmax, exp.normalize, &exp.train.clone().seeded(exp.seed))?;
            if let Some(path) = eval {
                let test = DatasetFile::read(&path)?;
                let mut hits = 0;
                for v in &test.vectors {
                    hits += (Some(det.predict(v)?) == v.label) as usize;
                }
                println!("accuracy {}/{} on {}", hits, test.len(), path.display());
            }
            let provenance = Provenance {
                dataset_sha256: Some(sha256_hex(&bytes)),
                n_train: file.len(),
                snr_db: file.header.snr_db,
                seed: exp.seed,
            };
            ModelFile::new(det, provenance).save(&out)?;
            println!("wrote {} model to {}", model, out.display());
        }
        Command::Sweep {
            common,
            snr,
            models,
            training_sizes,
            trials,
            out,
        } => {
            let mut exp = load_config(&common)?;
            if let Some(s) = snr {
                exp.sweep = s;
            }
            if let Some(m) = models {
                exp.models = m.iter().map(|s| parse_enum::<DetectorKind>("model", s)).collect::<Result<_>>()?;
            }
            if let Some(t) = training_sizes {
                exp.training_sizes = t;
            }
            if let Some(t) = trials {
                exp.trials_per_point = t;
            }
            std::fs::create_dir_all(&out).map_err(|e| io_runtime("creating output directory", e))?;
            write_resolved(&exp, &out)?;
            let res = run_sweep(&exp)?;
            write_sweep(&res, &exp, &out)?;
            print!("{}", render_table(&res.points));
        }
        Command::SelectorSim {
            common,
            train_snr,
            test_snr,
            both,
            model,
            training_size,
            steps,
            untrained,
            out,
        } => {
            let mut exp = load_config(&common)?;
            let s = &mut exp.selector;
            if let (Some(a), Some(b)) = (train_snr, test_snr) {
                s.runs = if both {
                    beamsearch_bench::SelectorSpec::both_orderings(a.min(b), a.max(b))
                } else {
                    vec![SelectorRun {
                        label: "custom".into(),
                        train_snr_db: a,
                        test_snr_db: b,
                    }]
                };
            } else if train_snr.is_some() || test_snr.is_some() {
                return Err(BenchError::Config("--train-snr and --test-snr go together".into()));
            }
            if let Some(m) = model {
                s.model = m;
            }
            if let Some(n) = training_size {
                s.training_size = n;
            }
            if let Some(n) = steps {
                s.steps = n;
            }
            s.untrained |= untrained;
            std::fs::create_dir_all(&out).map_err(|e| io_runtime("creating output directory", e))?;
            write_resolved(&exp, &out)?;
            let traces = run_selector_sim(&exp)?;
            for t in &traces {
                write_csv(&out.join(format!("selector_{}.csv", t.label)), &t.steps)?;
                println!(
                    "{:<22} switch_step {:>6}  final detection {:.4}",
                    t.label,
                    t.switch_step.map_or("never".to_string(), |s| s.to_string()),
                    t.final_detection()
                );
            }
            let summary: Vec<_> = traces
                .iter()
                .map(|t| {
                    serde_json::json!({
                        "label": t.label,
                        "train_snr_db": t.train_snr_db,
                        "test_snr_db": t.test_snr_db,
                        "switch_step": t.switch_step,
                        "final_detection": t.final_detection(),
                    })
                })
                .collect();
            write_json(&out.join("selector_summary.json"), &summary)?;
        }
        Command::Ingest {
            common,
            iq,
            sample_rate,
            center_frequency,
            out,
        } => {
            let exp = load_config(&common)?;
            std::fs::create_dir_all(&out).map_err(|e| io_runtime("creating output directory", e))?;
            write_resolved(&exp, &out)?;
            let over = IqMeta {
                sample_rate,
                center_frequency,
                notes: None,
            };
            let (buf, meta) = ingest_iq(&iq, &over)?;
            let (found, _) = scan_buffer(&buf, &exp.frame)?;
            for f in &found {
                println!(
                    "n_ssb {:>9}  nid_cell {:>4}  issb {}  crc {}",
                    f.n_ssb, f.nid_cell, f.corr_issb, f.crc_ok
                );
            }
            write_json(
                &out.join("ingest.json"),
                &serde_json::json!({ "samples": buf.len(), "meta": meta, "ssbs": found }),
            )?;
            if let Ok((file, _, _)) = capture_from_buffer(&buf, &exp.frame) {
                if !file.is_empty() {
                    file.write(&out.join("dataset.bsds"))?;
                }
            }
        }
        Command::Report { trials, out } => {
            let records: Vec<TrialRecord> = read_csv(&trials)?;
            let points = aggregate(&records);
            if let Some(path) = out {
                write_csv(&path, &points)?;
            }
            print!("{}", render_table(&points));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
