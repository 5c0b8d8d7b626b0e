use beamsearch_bench::config::{ExperimentConfig, LabelSource};
use beamsearch_bench::dataset_io::{DatasetFile, FLAG_CRC_LABEL, FLAG_CRC_OK};
use beamsearch_bench::iq::{ingest_iq, write_iq, IqMeta};
use beamsearch_bench::sim::{capture_dataset, capture_from_buffer, scan_buffer};
use beamsearch_core::chansim::{complex_gaussian, ChannelMode};
use beamsearch_core::nr_seq::pci_compose;
use beamsearch_core::ssb_phy::{grid_assemble, ofdm_modulate, FrameConfig, PbchPayload};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn beam_config() -> ExperimentConfig {
    let mut exp = ExperimentConfig::default();
    exp.scenario.mode = ChannelMode::BeamSignature;
    exp
}

#[test]
fn capture_is_balanced_across_beams() {
    let (file, stats) = capture_dataset(&beam_config(), -3.0, 800, 0).unwrap();
    assert_eq!((file.len(), stats.labeled, stats.attempted), (800, 800, 800));
    let mut counts = [0usize; 8];
    file.vectors.iter().for_each(|v| counts[v.label.unwrap()] += 1);
    assert_eq!(counts, [100; 8]);
    assert_eq!(file.header.snr_db, Some(-3.0));
}

#[test]
fn noiseless_capture_is_fully_crc_verified() {
    // ground-truth labels through beam channels, correlation labels on a
    // flat channel
    let mut exp = beam_config();
    let (file, stats) = capture_dataset(&exp, f64::INFINITY, 64, 0).unwrap();
    assert_eq!(stats.label_rate(), 1.0);
    assert!(file.flags.iter().all(|f| f & FLAG_CRC_OK != 0));

    exp.scenario.mode = ChannelMode::AwgnOnly;
    exp.capture.source = LabelSource::Capture;
    let (file, stats) = capture_dataset(&exp, f64::INFINITY, 64, 0).unwrap();
    assert_eq!(stats.label_rate(), 1.0);
    assert!(file.flags.iter().all(|&f| f == FLAG_CRC_OK | FLAG_CRC_LABEL));
}

#[test]
fn correlation_labels_miss_rotated_beams() {
    let mut exp = beam_config();
    exp.capture.source = LabelSource::Capture;
    let (file, stats) = capture_dataset(&exp, f64::INFINITY, 64, 0).unwrap();
    assert!(stats.label_rate() < 1.0);
    let truth = capture_dataset(&beam_config(), f64::INFINITY, 64, 0).unwrap().0;
    // whatever survives carries the true index
    let kept: Vec<_> = truth
        .vectors
        .iter()
        .filter(|t| file.vectors.iter().any(|v| v.x == t.x))
        .collect();
    assert_eq!(kept.len(), file.len());
    for v in &file.vectors {
        let t = truth.vectors.iter().find(|t| t.x == v.x).unwrap();
        assert_eq!(t.label, v.label);
    }
}

#[test]
fn capture_mode_keeps_only_verified_labels() {
    let mut exp = beam_config();
    exp.capture.source = LabelSource::Capture;
    let (file, stats) = capture_dataset(&exp, 4.0, 400, 0).unwrap();
    assert!(stats.labeled < stats.attempted);
    assert_eq!(file.len(), stats.labeled);
    assert!(file.flags.iter().all(|&f| f == FLAG_CRC_OK | FLAG_CRC_LABEL));
}

#[test]
fn written_dataset_reads_back_identically() {
    let (file, _) = capture_dataset(&beam_config(), -5.0, 80, 7).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.bsds");
    file.write(&path).unwrap();
    let back = DatasetFile::read(&path).unwrap();
    assert_eq!(back, file);
}

#[test]
fn capture_streams_are_reproducible_and_distinct() {
    let exp = beam_config();
    let a = capture_dataset(&exp, -4.0, 40, 0).unwrap().0;
    let b = capture_dataset(&exp, -4.0, 40, 0).unwrap().0;
    let c = capture_dataset(&exp, -4.0, 40, 1 << 32).unwrap().0;
    assert_eq!(a, b);
    assert_ne!(a.vectors, c.vectors);
}

#[test]
fn recorded_burst_is_scanned_and_labeled() {
    let cfg = FrameConfig::default();
    let cell = pci_compose(123, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let grids: Vec<_> = (0..8)
        .map(|i| (grid_assemble(i, cell, 8, &PbchPayload::random(&mut rng)).unwrap(), cfg.burst_positions[i]))
        .collect();
    let mut buf = ofdm_modulate(&grids, &cfg).unwrap();
    // 20 dB on the SSB resource elements
    let sd = (cfg.fft_size as f64 / 100.0).sqrt();
    buf.samples.iter_mut().for_each(|z| *z += complex_gaussian(&mut rng) * sd);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("burst.iq");
    write_iq(&path, &buf, &IqMeta::default()).unwrap();
    let over = IqMeta {
        sample_rate: Some(cfg.sample_rate),
        ..IqMeta::default()
    };
    let (rec, _) = ingest_iq(&path, &over).unwrap();

    let (found, vectors) = scan_buffer(&rec, &cfg).unwrap();
    assert_eq!(found.len(), 8);
    assert_eq!(vectors.len(), 8);
    for (i, f) in found.iter().enumerate() {
        assert_eq!(f.nid_cell, cell.nid_cell());
        assert_eq!(f.corr_issb, i);
        assert!(f.crc_ok);
        assert!(f.n_ssb.abs_diff(cfg.slot_start(i)) <= 2);
    }
    let (file, stats, _) = capture_from_buffer(&rec, &cfg).unwrap();
    assert_eq!(stats.labeled, 8);
    assert_eq!(file.header.nid_cell, cell.nid_cell());
    let labels: Vec<usize> = file.vectors.iter().map(|v| v.label.unwrap()).collect();
    assert_eq!(labels, (0..8).collect::<Vec<_>>());
}
