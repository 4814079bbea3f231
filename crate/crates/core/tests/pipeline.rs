use cybersick_core::checkpoint::{load_checkpoint, save_checkpoint};
use cybersick_core::data::{generate_synthetic, load_manifest, read_feature_file, SyntheticSpec};
use cybersick_core::reduce::ReductionConfig;
use cybersick_core::train::{run_cross_validation, PreparedData, TrainConfig};

fn small_spec() -> SyntheticSpec {
    SyntheticSpec {
        session_count: 40,
        frames_per_sample: 10,
        feature_dim: 6,
        seed: 9,
        ..Default::default()
    }
}

#[test]
fn synthetic_files_reload_identically() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, ds) = generate_synthetic(&small_spec(), dir.path()).unwrap();
    let (again, ds2) = load_manifest(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(manifest, again);
    assert_eq!(ds.samples.len(), 40);
    for (a, b) in ds.samples.iter().zip(&ds2.samples) {
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.label, b.label);
    }
    let first = &manifest.sessions[0];
    let seq = read_feature_file(&dir.path().join(&first.feature_file)).unwrap();
    assert_eq!(seq.dim(), 6);
}

#[test]
fn cross_validation_end_to_end_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let (_, ds) = generate_synthetic(&small_spec(), dir.path()).unwrap();
    let reduction = ReductionConfig {
        window: 2,
        ..Default::default()
    };
    let data = PreparedData::from_dataset(&ds, &reduction).unwrap();
    let cfg = TrainConfig {
        folds: 2,
        epochs: 4,
        hidden_size: 6,
        batch_size: 8,
        reduction,
        ..Default::default()
    };
    let a = run_cross_validation(&data, &cfg, 1).unwrap();
    let b = run_cross_validation(&data, &cfg, 2).unwrap();
    assert_eq!(a.report().to_json(), b.report().to_json());
    assert_eq!(a.metrics_csv(), b.metrics_csv());
    let tested: usize = a.folds.iter().map(|f| f.report.sample_count).sum();
    assert_eq!(tested, 40);

    let path = dir.path().join("ck/fold_1.ssm");
    save_checkpoint(&path, &a.folds[0].training.model, None).unwrap();
    let (model, meta) = load_checkpoint(&path).unwrap();
    assert!(meta.is_none());
    assert_eq!(model, a.folds[0].training.model);
}
