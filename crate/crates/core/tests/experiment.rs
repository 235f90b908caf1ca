use std::fs;
use std::path::{Path, PathBuf};

use csi_har::experiment::{
    run_train, write_synth, ExperimentConfig, CHECKPOINT_DIR, HISTORY_FILE, RESOLVED_CONFIG_FILE,
};
use csi_har::training::load_checkpoint;
use csi_har::Error;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn toy() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::load(config_path("toy_cnn_gru.json")).unwrap();
    cfg.training.max_epochs = 3;
    cfg.resolve_seeds(None);
    cfg
}

#[test]
fn shipped_configs_parse_and_validate() {
    for name in ["ntu_fi_bilstm.json", "ntu_fi_cnn_gru.json", "toy_cnn_gru.json"] {
        let cfg = ExperimentConfig::load(config_path(name)).unwrap();
        cfg.validate().unwrap();
    }
    let ntu = ExperimentConfig::load(config_path("ntu_fi_bilstm.json")).unwrap();
    assert_eq!(ntu.feature_shape().unwrap(), (33, 14));
}

#[test]
fn training_writes_artifacts_and_reruns_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let first = run_train(&toy(), &dir.path().join("a"), |_| {}).unwrap();
    for name in [RESOLVED_CONFIG_FILE, HISTORY_FILE, CHECKPOINT_DIR] {
        assert!(dir.path().join("a").join(name).exists(), "{name}");
    }
    assert_eq!(first.outcome.history.epochs.len(), 3);

    let mut resolved = ExperimentConfig::load(&first.resolved_config).unwrap();
    let before = resolved.clone();
    resolved.resolve_seeds(None);
    assert_eq!(resolved, before);
    let second = run_train(&resolved, &dir.path().join("b"), |_| {}).unwrap();
    assert_eq!(fs::read(&first.history).unwrap(), fs::read(&second.history).unwrap());
    assert_eq!(
        fs::read(&first.resolved_config).unwrap(),
        fs::read(&second.resolved_config).unwrap()
    );
    let (a, b) = (load_checkpoint(&first.checkpoint).unwrap(), load_checkpoint(&second.checkpoint).unwrap());
    assert_eq!(a, b);
}

#[test]
fn seed_override_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut other = ExperimentConfig::load(config_path("toy_cnn_gru.json")).unwrap();
    other.training.max_epochs = 3;
    other.resolve_seeds(Some(77));
    let a = run_train(&toy(), &dir.path().join("a"), |_| {}).unwrap();
    let b = run_train(&other, &dir.path().join("b"), |_| {}).unwrap();
    assert_ne!(a.outcome.history, b.outcome.history);
}

#[test]
fn stored_raw_dataset_trains_like_the_inline_generator() {
    let dir = tempfile::tempdir().unwrap();
    let inline = toy();
    let raw = dir.path().join("raw");
    write_synth(inline.synth.as_ref().unwrap(), &raw).unwrap();
    let mut stored = inline.clone();
    stored.synth = None;
    stored.dataset_path = Some(raw);
    stored.validate().unwrap();
    let a = run_train(&inline, &dir.path().join("a"), |_| {}).unwrap();
    let b = run_train(&stored, &dir.path().join("b"), |_| {}).unwrap();
    assert_eq!(a.outcome.history, b.outcome.history);
}

#[test]
fn dataset_source_must_be_unambiguous() {
    let mut cfg = toy();
    cfg.dataset_path = Some("elsewhere".into());
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    cfg.dataset_path = None;
    cfg.synth = None;
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
}

#[test]
fn unknown_config_fields_are_rejected() {
    let text = fs::read_to_string(config_path("toy_cnn_gru.json")).unwrap();
    let bad = text.replacen("\"seed\": 3", "\"seed\": 3, \"sed\": 4", 1);
    assert_ne!(bad, text);
    assert!(ExperimentConfig::from_json(&bad).is_err());
}
