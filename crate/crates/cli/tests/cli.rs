use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use csi_har::data::{save_dataset, synth_generate, Split, SynthConfig};
use serde_json::json;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_csi-har"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn toy_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/toy_cnn_gru.json")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Toy experiment with a shorter schedule, written to `dir/exp.json`.
fn short_config(dir: &Path, epochs: usize) -> PathBuf {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(toy_config()).unwrap()).unwrap();
    v["training"]["max_epochs"] = json!(epochs);
    v["output_dir"] = json!(p(&dir.join("default_out")));
    let path = dir.join("exp.json");
    fs::write(&path, v.to_string()).unwrap();
    path
}

#[test]
fn synth_is_deterministic_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = p(&toy_config()).to_string();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    assert_eq!(code(&run(&["synth", "--config", &cfg, "--out", p(&a), "--quiet"])), 0);
    assert_eq!(code(&run(&["synth", "--config", &cfg, "--out", p(&b), "--quiet"])), 0);
    assert_eq!(code(&run(&["synth", "--config", &cfg, "--out", p(&c), "--seed", "99", "--quiet"])), 0);
    for f in ["manifest.json", "train.bin", "val.bin", "test.bin"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(fs::read(a.join("train.bin")).unwrap(), fs::read(c.join("train.bin")).unwrap());

    let out = run(&["inspect", p(&a)]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("dataset      toy"), "{text}");
}

#[test]
fn train_eval_compare_round() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), 6);
    let run_a = dir.path().join("run_a");
    let out = run(&["train", "--config", p(&cfg), "--out", p(&run_a), "--quiet"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    for f in ["config.resolved.json", "history.csv", "checkpoint/manifest.json"] {
        assert!(run_a.join(f).exists(), "{f}");
    }

    let run_b = dir.path().join("run_b");
    let resolved = run_a.join("config.resolved.json");
    assert_eq!(code(&run(&["train", "--config", p(&resolved), "--out", p(&run_b), "--quiet"])), 0);
    assert_eq!(fs::read(run_a.join("history.csv")).unwrap(), fs::read(run_b.join("history.csv")).unwrap());

    let ckpt = run_a.join("checkpoint");
    let inspect = run(&["inspect", p(&ckpt)]);
    assert!(String::from_utf8_lossy(&inspect.stdout).contains("model        cnn_gru"));

    let eval_val = dir.path().join("eval_val");
    let eval_test = dir.path().join("eval_test");
    let e = run(&["eval", "--checkpoint", p(&ckpt), "--config", p(&cfg), "--out", p(&eval_val), "--quiet"]);
    assert_eq!(code(&e), 0, "{}", String::from_utf8_lossy(&e.stderr));
    let e = run(&[
        "eval", "--checkpoint", p(&ckpt), "--config", p(&cfg), "--split", "test", "--out", p(&eval_test), "--quiet",
    ]);
    assert_eq!(code(&e), 0);
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(eval_val.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["split"], "val");
    assert_eq!(metrics["samples"], 18);
    let csv = fs::read_to_string(eval_val.join("confusion.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);

    let cmp_dir = dir.path().join("cmp");
    let c = run(&[
        "compare",
        p(&eval_val.join("metrics.json")),
        p(&eval_test.join("metrics.json")),
        "--out",
        p(&cmp_dir),
    ]);
    assert_eq!(code(&c), 0);
    let table = String::from_utf8_lossy(&c.stdout);
    let header = table.lines().next().unwrap();
    for h in ["Accuracy(%)", "Precision(%)", "Recall(%)", "F1-Score(%)"] {
        assert!(header.contains(h), "{header}");
    }
    assert!(cmp_dir.join("comparison.csv").exists());

    let mut other: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(eval_test.join("metrics.json")).unwrap()).unwrap();
    other["class.0.name"] = json!("Box");
    let renamed = dir.path().join("renamed.json");
    fs::write(&renamed, other.to_string()).unwrap();
    assert_eq!(code(&run(&["compare", p(&eval_val.join("metrics.json")), p(&renamed)])), 2);

    let missing_split = dir.path().join("missing");
    let raw = dir.path().join("raw");
    let mut synth = SynthConfig { per_class_test: 0, ..SynthConfig::ntu_fi_replica(0) };
    synth.name = "no-test".into();
    synth.n_classes = 3;
    synth.class_names = None;
    synth.channel_layout = None;
    synth.per_class_train = 1;
    synth.per_class_val = 1;
    synth.channels = 6;
    synth.time = 160;
    save_dataset(&synth_generate(&synth).unwrap(), &raw).unwrap();
    let e = run(&[
        "eval", "--checkpoint", p(&ckpt), "--dataset", p(&raw), "--split", "test", "--out", p(&missing_split),
    ]);
    assert_eq!(code(&e), 2, "{}", String::from_utf8_lossy(&e.stderr));
}

#[test]
fn bench_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), 1);
    let out = run(&[
        "bench", "--config", p(&cfg), "--precision", "f32", "--out", p(dir.path()), "--quiet",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("bench_cnn_gru_f32.json")).unwrap()).unwrap();
    assert_eq!(v["bench_repetitions"], 30);
    assert_eq!(v["bench_precision"], "f32");
    assert_eq!(code(&run(&["bench", "--config", p(&cfg), "--repetitions", "10"])), 2);
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&[])), 2);
    assert_eq!(code(&run(&["train"])), 2);
    assert_eq!(code(&run(&["bench", "--config", "x.json", "--precision", "f16"])), 2);
    assert_eq!(code(&run(&["train", "--config", p(&dir.path().join("absent.json"))])), 2);

    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(toy_config()).unwrap()).unwrap();
    v["dataset_path"] = json!(p(dir.path()));
    let both = dir.path().join("both.json");
    fs::write(&both, v.to_string()).unwrap();
    let out = run(&["train", "--config", p(&both), "--out", p(&dir.path().join("o"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("both"));

    let missing = dir.path().join("nope");
    let out = run(&["eval", "--checkpoint", p(&missing), "--config", p(&toy_config()), "--out", p(dir.path())]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unwritable_output_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = run(&["synth", "--config", p(&toy_config()), "--out", p(&blocker.join("ds")), "--quiet"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn corrupted_dataset_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds");
    assert_eq!(code(&run(&["synth", "--config", p(&toy_config()), "--out", p(&ds), "--quiet"])), 0);
    let bin = ds.join("val.bin");
    let bytes = fs::read(&bin).unwrap();
    fs::write(&bin, &bytes[..bytes.len() / 2]).unwrap();
    assert_eq!(code(&run(&["inspect", p(&ds)])), 3);
}

#[test]
fn divergence_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let mut ds = synth_generate(&SynthConfig {
        name: "poisoned".into(),
        n_classes: 2,
        per_class_train: 3,
        per_class_val: 1,
        per_class_test: 0,
        channels: 2,
        time: 16,
        sample_rate_hz: 32.0,
        noise_std: 0.1,
        seed: 1,
        base_freq_hz: 2.0,
        class_names: None,
        channel_layout: None,
    })
    .unwrap();
    let mut train = ds.split(Split::Train).unwrap().to_vec();
    train[2].data[5] = f32::NAN;
    ds.set_split(Split::Train, train).unwrap();
    let data_dir = dir.path().join("data");
    save_dataset(&ds, &data_dir).unwrap();
    let cfg = json!({
        "dataset_path": p(&data_dir),
        "model": { "kind": "bilstm", "bilstm": { "layers": 1, "hidden": 4 } },
        "training": { "max_epochs": 3, "batch_size": 2 },
        "seed": 5
    });
    let cfg_path = dir.path().join("exp.json");
    fs::write(&cfg_path, cfg.to_string()).unwrap();
    let out = run(&["train", "--config", p(&cfg_path), "--out", p(&dir.path().join("run")), "--quiet"]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
    assert!(dir.path().join("run/checkpoint/manifest.json").exists());
}
