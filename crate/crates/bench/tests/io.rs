use beamsearch_bench::dataset_io::{DatasetFile, DatasetHeader, HEADER_LEN, RECORD_LEN};
use beamsearch_bench::iq::{ingest_iq, sidecar_path, write_iq, IqMeta};
use beamsearch_bench::BenchError;
use beamsearch_core::detect::{DmrsFeatureVector, FeatureSource, FEATURE_LEN};
use beamsearch_core::ssb_phy::{IqBuffer, Origin};
use num_complex::Complex64;
use proptest::prelude::*;

fn file_from(values: Vec<f32>, labels: Vec<u8>, snr: Option<f64>) -> DatasetFile {
    let vectors = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| DmrsFeatureVector {
            x: values[i * FEATURE_LEN..(i + 1) * FEATURE_LEN].iter().map(|&v| v as f64).collect(),
            label: Some(l as usize),
            snr_db: snr,
            source: FeatureSource::Capture,
        })
        .collect();
    DatasetFile {
        header: DatasetHeader {
            lmax: 8,
            source: FeatureSource::Capture,
            nid_cell: 517,
            snr_db: snr,
        },
        flags: labels.iter().map(|l| l % 4).collect(),
        vectors,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dataset_round_trip_is_bit_identical(
        n in 0usize..6,
        seed in any::<u64>(),
        snr in proptest::option::of(-20.0f64..30.0),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f32> = (0..n * FEATURE_LEN).map(|_| rng.gen_range(-1e3f32..1e3)).collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..8)).collect();
        let file = file_from(values, labels, snr);
        let bytes = file.to_bytes().unwrap();
        prop_assert_eq!(bytes.len(), HEADER_LEN + n * RECORD_LEN);
        let back = DatasetFile::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &file);
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
    }
}

#[test]
fn damaged_dataset_files_are_data_errors() {
    let file = file_from(vec![0.5; 2 * FEATURE_LEN], vec![1, 7], Some(-3.0));
    let good = file.to_bytes().unwrap();
    let mut magic = good.clone();
    magic[0] = b'X';
    let mut features = good.clone();
    features[6] = 10;
    let mut label = good.clone();
    label[HEADER_LEN + 4 * FEATURE_LEN] = 8;
    let truncated = good[..good.len() - 1].to_vec();
    for bad in [magic, features, label, truncated, good[..10].to_vec()] {
        assert!(matches!(DatasetFile::from_bytes(&bad), Err(BenchError::Data(_))));
    }
}

fn ramp(n: usize) -> IqBuffer {
    let samples = (0..n).map(|i| Complex64::new(i as f64 * 0.25, -(i as f64) * 0.5)).collect();
    IqBuffer::new(samples, 30.72e6, Origin::Simulated).unwrap()
}

#[test]
fn iq_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cap.iq");
    let meta = IqMeta {
        sample_rate: Some(30.72e6),
        center_frequency: Some(3.5e9),
        notes: Some("rooftop".into()),
    };
    let buf = ramp(1000);
    write_iq(&path, &buf, &meta).unwrap();
    let (back, got) = ingest_iq(&path, &IqMeta::default()).unwrap();
    assert_eq!(back.samples, buf.samples);
    assert_eq!(back.origin, Origin::File);
    assert_eq!(got, meta);
}

#[test]
fn odd_length_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cap.iq");
    write_iq(&path, &ramp(4), &IqMeta::default()).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    bytes.pop();
    std::fs::write(&path, bytes).unwrap();
    let over = IqMeta {
        sample_rate: Some(1e6),
        ..IqMeta::default()
    };
    assert!(matches!(ingest_iq(&path, &over), Err(BenchError::Data(_))));
}

#[test]
fn missing_sidecar_needs_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cap.iq");
    write_iq(&path, &ramp(16), &IqMeta::default()).unwrap();
    std::fs::remove_file(sidecar_path(&path)).unwrap();
    assert!(matches!(ingest_iq(&path, &IqMeta::default()), Err(BenchError::Data(_))));
    let over = IqMeta {
        sample_rate: Some(15.36e6),
        ..IqMeta::default()
    };
    let (buf, meta) = ingest_iq(&path, &over).unwrap();
    assert_eq!(buf.sample_rate, 15.36e6);
    assert_eq!(meta.sample_rate, Some(15.36e6));
}

#[test]
fn overrides_beat_sidecar_and_bad_sidecar_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cap.iq");
    let meta = IqMeta {
        sample_rate: Some(30.72e6),
        ..IqMeta::default()
    };
    write_iq(&path, &ramp(16), &meta).unwrap();
    let over = IqMeta {
        sample_rate: Some(7.68e6),
        ..IqMeta::default()
    };
    assert_eq!(ingest_iq(&path, &over).unwrap().0.sample_rate, 7.68e6);
    std::fs::write(sidecar_path(&path), "sample_rate = \"fast\"\n").unwrap();
    assert!(matches!(ingest_iq(&path, &IqMeta::default()), Err(BenchError::Data(_))));
    std::fs::write(sidecar_path(&path), "rate = 1.0\n").unwrap();
    assert!(matches!(ingest_iq(&path, &over), Err(BenchError::Data(_))));
}
