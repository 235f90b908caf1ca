mod common;

use std::fs;

use csi_har::data::{synth_generate, CsiSample, Dataset, Split, SynthConfig};
use csi_har::models::{build_model, model_forward, BiLstmConfig, ConvBlock, Model, ModelConfig, ModelKind, ParamStore};
use csi_har::tensor::Tensor;
use csi_har::training::{
    adam_step, batch_gradients, cross_entropy, evaluate_samples, load_checkpoint, resume,
    save_checkpoint, train, AdamState, EarlyStopping, StopReason, TrainConfig,
};
use csi_har::Error;
use proptest::prelude::*;

fn toy_data(seed: u64, per_class_train: usize, per_class_val: usize) -> Dataset {
    synth_generate(&SynthConfig {
        name: "toy".into(),
        n_classes: 3,
        per_class_train,
        per_class_val,
        per_class_test: 0,
        channels: 4,
        time: 32,
        sample_rate_hz: 32.0,
        noise_std: 0.3,
        seed,
        base_freq_hz: 2.0,
        class_names: None,
        channel_layout: None,
    })
    .unwrap()
}

fn toy_model(kind: ModelKind, seed: u64) -> Model {
    let mut cfg = ModelConfig::new(kind, 4, 32, 3).with_seed(seed);
    cfg.bilstm = BiLstmConfig { layers: 1, hidden: 8 };
    cfg.cnn_gru.blocks = vec![ConvBlock { out_channels: 6, kernel: 3, stride: 1, pool: 2 }];
    cfg.cnn_gru.gru_hidden = 8;
    build_model(&cfg).unwrap()
}

fn toy_config(max_epochs: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: 0.01,
        batch_size: 8,
        max_epochs,
        shuffle_seed: Some(17),
        ..TrainConfig::default()
    }
}

fn scalar_store(v: f64) -> ParamStore {
    ParamStore::new(vec![("theta".into(), Tensor::scalar(v))])
}

#[test]
fn adam_three_step_trace() {
    let cfg = TrainConfig { learning_rate: 0.1, ..TrainConfig::default() };
    let mut p = scalar_store(0.5);
    let mut state = AdamState::new(&p);
    for g in [1.0, -1.0, 1.0] {
        adam_step(&mut p, &[Tensor::scalar(g)], &mut state, &cfg).unwrap();
    }
    // m̂ = 1, −1/19, 91/271 and v̂ = 1 at every step
    let eps = cfg.epsilon;
    let want = 0.5 - 0.1 * (1.0 - 1.0 / 19.0 + 91.0 / 271.0) / (1.0 + eps);
    let got = p.tensors()[0].item().unwrap();
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    assert_eq!(state.t, 3);
}

#[test]
fn adam_first_step_is_sign_sized() {
    let cfg = TrainConfig::default();
    let mut p = scalar_store(2.0);
    let mut state = AdamState::new(&p);
    adam_step(&mut p, &[Tensor::scalar(3.0)], &mut state, &cfg).unwrap();
    let delta = p.tensors()[0].item().unwrap() - 2.0;
    assert!((delta + 0.001 * 3.0 / (3.0 + 1e-8)).abs() < 1e-15);
}

#[test]
fn adam_zero_rate_or_zero_gradient_keeps_parameters() {
    let zero_lr = TrainConfig { learning_rate: 0.0, ..TrainConfig::default() };
    let mut p = scalar_store(1.25);
    let mut s = AdamState::new(&p);
    adam_step(&mut p, &[Tensor::scalar(4.0)], &mut s, &zero_lr).unwrap();
    assert_eq!(p.tensors()[0].item().unwrap(), 1.25);

    let mut p = scalar_store(1.25);
    let mut s = AdamState::new(&p);
    for _ in 0..10 {
        adam_step(&mut p, &[Tensor::scalar(0.0)], &mut s, &TrainConfig::default()).unwrap();
    }
    assert_eq!(p.tensors()[0].item().unwrap(), 1.25);
}

#[test]
fn adam_refuses_nan_gradients_by_name() {
    let mut p = scalar_store(0.0);
    let mut s = AdamState::new(&p);
    let err = adam_step(&mut p, &[Tensor::scalar(f64::NAN)], &mut s, &TrainConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Numerical(ref m) if m.contains("theta")), "{err}");
    assert_eq!(s.t, 0);
    assert_eq!(p.tensors()[0].item().unwrap(), 0.0);
}

#[test]
fn cross_entropy_reference_values() {
    let uniform = Tensor::full(&[2, 6], 1.0 / 6.0);
    assert!((cross_entropy(&uniform, &[0, 5]).unwrap() - 6f64.ln()).abs() < 1e-12);
    let onehot = Tensor::new(&[1, 3], vec![0.0, 1.0, 0.0]).unwrap();
    assert!(cross_entropy(&onehot, &[1]).unwrap() < 1e-9);
    assert!(cross_entropy(&onehot, &[3]).is_err());
    let unnormalized = Tensor::new(&[1, 2], vec![0.5, 0.6]).unwrap();
    assert!(cross_entropy(&unnormalized, &[0]).is_err());
}

#[test]
fn full_batch_gradient_is_the_mean_of_partition_gradients() {
    let data = toy_data(1, 4, 1);
    let train_set = data.split(Split::Train).unwrap();
    for kind in [ModelKind::Bilstm, ModelKind::CnnGru] {
        let model = toy_model(kind, 2);
        let all: Vec<&CsiSample> = train_set.iter().collect();
        let (full_loss, full) = batch_gradients(&model, &all).unwrap();
        let mut mean: Vec<Tensor> = full.iter().map(|t| Tensor::zeros(t.shape())).collect();
        let mut loss = 0.0;
        for part in all.chunks(4) {
            let (l, g) = batch_gradients(&model, part).unwrap();
            let w = part.len() as f64 / all.len() as f64;
            loss += w * l;
            for (m, gi) in mean.iter_mut().zip(&g) {
                for (a, b) in m.data_mut().iter_mut().zip(gi.data()) {
                    *a += w * b;
                }
            }
        }
        assert!((loss - full_loss).abs() < 1e-9);
        for (a, b) in mean.iter().zip(&full) {
            assert!(a.max_abs_diff(b) < 1e-9, "{kind:?}");
        }
    }
}

#[test]
fn single_epoch_run() {
    let data = toy_data(2, 4, 2);
    let out = train(toy_model(ModelKind::CnnGru, 1), &data, &toy_config(1)).unwrap();
    assert_eq!(out.history.epochs.len(), 1);
    assert_eq!(out.history.stop_reason, Some(StopReason::MaxEpochs));
    assert_eq!(out.history.best_epoch, 1);
}

#[test]
fn identical_seeds_give_identical_runs() {
    let data = toy_data(3, 5, 2);
    let a = train(toy_model(ModelKind::Bilstm, 4), &data, &toy_config(3)).unwrap();
    let b = train(toy_model(ModelKind::Bilstm, 4), &data, &toy_config(3)).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.checkpoint, b.checkpoint);
    let other = train(toy_model(ModelKind::Bilstm, 4), &data, &TrainConfig { shuffle_seed: Some(18), ..toy_config(3) }).unwrap();
    assert_ne!(a.history, other.history);
}

#[test]
fn resuming_matches_the_uninterrupted_run() {
    let data = toy_data(4, 5, 2);
    for kind in [ModelKind::Bilstm, ModelKind::CnnGru] {
        let full = train(toy_model(kind, 5), &data, &toy_config(5)).unwrap();
        let first = train(toy_model(kind, 5), &data, &toy_config(2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(&first.checkpoint, dir.path().join("ck")).unwrap();
        let loaded = load_checkpoint(dir.path().join("ck")).unwrap();
        let rest = resume(&loaded, &data, &toy_config(5)).unwrap();
        assert_eq!(rest.history, full.history, "{kind:?}");
        assert_eq!(rest.checkpoint, full.checkpoint, "{kind:?}");
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let data = toy_data(5, 3, 2);
    let out = train(toy_model(ModelKind::CnnGru, 6), &data, &toy_config(2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck");
    save_checkpoint(&out.checkpoint, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back, out.checkpoint);
    let x = Tensor::from_fn(&[3, 4, 32], |i| ((i * 13) % 7) as f64 - 3.0);
    let a = model_forward(&out.checkpoint.model, &x).unwrap();
    let b = model_forward(&back.model, &x).unwrap();
    assert_eq!(a, b);
}

#[test]
fn checkpoint_with_mismatched_classes_is_refused() {
    let data = toy_data(6, 3, 1);
    let out = train(toy_model(ModelKind::CnnGru, 7), &data, &toy_config(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck");
    save_checkpoint(&out.checkpoint, &path).unwrap();
    let manifest = path.join("manifest.json");
    let mut json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    json["config"]["n_classes"] = serde_json::json!(4);
    json["classes"] = serde_json::json!(["a", "b", "c", "d"]);
    fs::write(&manifest, json.to_string()).unwrap();
    let err = load_checkpoint(&path).unwrap_err();
    assert!(err.to_string().contains("head"), "{err}");

    json["version"] = serde_json::json!(7);
    fs::write(&manifest, json.to_string()).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Version { found: 7, .. })));
}

#[test]
fn truncated_parameters_are_an_integrity_error() {
    let data = toy_data(6, 3, 1);
    let out = train(toy_model(ModelKind::Bilstm, 7), &data, &toy_config(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck");
    save_checkpoint(&out.checkpoint, &path).unwrap();
    let bin = path.join("params.bin");
    let bytes = fs::read(&bin).unwrap();
    fs::write(&bin, &bytes[..bytes.len() - 8]).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Integrity { .. })));
}

#[test]
fn best_checkpoint_has_the_lowest_validation_loss() {
    let data = toy_data(7, 6, 3);
    let cfg = TrainConfig { learning_rate: 0.05, early_stop_patience: 3, ..toy_config(30) };
    let out = train(toy_model(ModelKind::CnnGru, 8), &data, &cfg).unwrap();
    let min = out.history.epochs.iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min);
    let best = out.history.best().unwrap();
    assert!(best.val_loss <= min + cfg.min_delta);
    let (loss, _, _) = evaluate_samples(&out.checkpoint.model, data.split(Split::Val).unwrap()).unwrap();
    assert!((loss - best.val_loss).abs() < 1e-12);
}

#[test]
fn patience_trace() {
    let mut stop = EarlyStopping::new(3, 1e-6);
    let mut stopped = None;
    for (i, loss) in [1.0, 0.9, 0.95, 0.96, 0.97].into_iter().enumerate() {
        stop.observe(i + 1, loss);
        if stop.should_stop() {
            stopped = Some(i + 1);
            break;
        }
    }
    assert_eq!(stopped, Some(5));
    assert_eq!(stop.best_epoch(), Some(2));
}

proptest! {
    #[test]
    fn stopper_keeps_the_minimum(losses in proptest::collection::vec(0.0f64..10.0, 1..40), delta in 0.0f64..0.01) {
        let mut stop = EarlyStopping::new(1000, delta);
        for (i, &l) in losses.iter().enumerate() {
            stop.observe(i + 1, l);
        }
        let min = losses.iter().cloned().fold(f64::INFINITY, f64::min);
        let best = stop.best_loss().unwrap();
        prop_assert!(best <= min + delta);
        prop_assert_eq!(losses[stop.best_epoch().unwrap() - 1], best);
    }
}

fn memorize(kind: ModelKind) -> f64 {
    let mut data = toy_data(8, 17, 1);
    let fifty: Vec<CsiSample> = data.split(Split::Train).unwrap().iter().take(50).cloned().collect();
    assert_eq!(fifty.len(), 50);
    data.set_split(Split::Train, fifty.clone()).unwrap();
    data.set_split(Split::Val, fifty.clone()).unwrap();
    let cfg = TrainConfig { learning_rate: 0.01, batch_size: 10, max_epochs: 200, early_stop_patience: 200, ..toy_config(200) };
    let out = train(toy_model(kind, 9), &data, &cfg).unwrap();
    evaluate_samples(&out.checkpoint.model, &fifty).unwrap().0
}

#[test]
fn bilstm_memorizes_fifty_samples() {
    let loss = memorize(ModelKind::Bilstm);
    assert!(loss < 0.05, "{loss}");
}

#[test]
fn cnn_gru_memorizes_fifty_samples() {
    let loss = memorize(ModelKind::CnnGru);
    assert!(loss < 0.05, "{loss}");
}

#[test]
fn divergence_keeps_the_last_good_state() {
    let mut data = toy_data(9, 3, 1);
    let mut bad: Vec<CsiSample> = data.split(Split::Train).unwrap().to_vec();
    bad[0].data[0] = f32::NAN;
    data.set_split(Split::Train, bad).unwrap();
    let model = toy_model(ModelKind::CnnGru, 10);
    let out = train(model.clone(), &data, &toy_config(3)).unwrap();
    assert_eq!(out.history.stop_reason, Some(StopReason::Diverged));
    assert!(out.history.failure.is_some());
    assert!(out.history.epochs.is_empty());
    assert_eq!(out.checkpoint.model, model);
}

#[test]
fn empty_validation_split_is_a_config_error() {
    let mut data = toy_data(10, 2, 1);
    data.set_split(Split::Val, Vec::new()).unwrap();
    let err = train(toy_model(ModelKind::CnnGru, 1), &data, &toy_config(1)).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}
