use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use csi_har::data::{load_dataset, Split, SynthConfig, MANIFEST_FILE};
use csi_har::eval::{
    benchmark_inference, compare, evaluate, export_report, read_report, Benchmark, ReportFormat,
};
use csi_har::experiment::{apply_remaining, prepare_dataset, run_train, write_prepared, write_synth, ExperimentConfig};
use csi_har::models::{build_model, Model, ModelConfig, ModelKind};
use csi_har::training::{load_checkpoint, StopReason};
use csi_har::{Error, Result};

#[derive(Parser)]
#[command(name = "csi-har", version, about = "WiFi CSI activity recognition workbench")]
struct Cli {
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Replica {
    NtuFi,
    UtHar,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Bilstm,
    CnnGru,
}

impl From<Kind> for ModelKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Bilstm => ModelKind::Bilstm,
            Kind::CnnGru => ModelKind::CnnGru,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Synth {
        /// Generator config, or an experiment file with a `synth` block.
        #[arg(long, required_unless_present = "replica")]
        config: Option<PathBuf>,
        /// Built-in replica settings instead of a config file.
        #[arg(long, conflicts_with = "config")]
        replica: Option<Replica>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Describe a dataset or checkpoint directory.
    Inspect { path: PathBuf },
    /// Write the experiment's preprocessed dataset.
    Preprocess {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the experiment's model.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint on one split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset directory; raw data gets the checkpoint's preprocessing.
        #[arg(long, required_unless_present = "config")]
        dataset: Option<PathBuf>,
        /// Experiment whose dataset source to evaluate on.
        #[arg(long, conflicts_with = "dataset")]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "val")]
        split: String,
        #[arg(long)]
        out: PathBuf,
        /// Also time single-sample inference and record it in the report.
        #[arg(long)]
        bench: bool,
        #[arg(long, value_enum, default_value = "f64")]
        precision: Precision,
    },
    /// Time single-sample inference and report the memory footprint.
    Bench {
        #[arg(long, required_unless_present = "checkpoint")]
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "config")]
        checkpoint: Option<PathBuf>,
        /// Benchmark the default model of this kind on the same input.
        #[arg(long, value_enum)]
        kind: Option<Kind>,
        #[arg(long, value_enum, default_value = "f64")]
        precision: Precision,
        #[arg(long, default_value_t = 30)]
        repetitions: usize,
        #[arg(long, default_value_t = 5)]
        warmup: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two metrics reports side by side (deltas are B − A).
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} {} not found", path.display())))
    }
}

fn load_experiment(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    require(path, "config file")?;
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.resolve_seeds(seed);
    cfg.validate()?;
    Ok(cfg)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_synth(config: Option<PathBuf>, replica: Option<Replica>, out: &Path, seed: Option<u64>, quiet: bool) -> Result<()> {
    let mut synth = match (config, replica) {
        (_, Some(Replica::NtuFi)) => SynthConfig::ntu_fi_replica(0),
        (_, Some(Replica::UtHar)) => SynthConfig::ut_har_replica(0),
        (Some(path), None) => {
            require(&path, "config file")?;
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            match serde_json::from_str::<SynthConfig>(&text) {
                Ok(s) => s,
                Err(direct) => {
                    let exp = ExperimentConfig::from_json(&text).map_err(|_| Error::json(&path, direct))?;
                    let mut s = exp
                        .synth
                        .ok_or_else(|| Error::Config(format!("{} has no synth block", path.display())))?;
                    s.seed = exp.seed;
                    s
                }
            }
        }
        (None, None) => return Err(Error::Config("synth needs --config or --replica".into())),
    };
    if let Some(s) = seed {
        synth.seed = s;
    }
    write_synth(&synth, out)?;
    if !quiet {
        let ds = load_dataset(out)?;
        println!("wrote {} to {}", ds.name, out.display());
        print!("{}", ds.counts_table());
    }
    Ok(())
}

fn cmd_inspect(path: &Path) -> Result<()> {
    require(path, "path")?;
    if path.join("params.bin").exists() {
        let ckpt = load_checkpoint(path)?;
        let cfg = ckpt.model.config();
        println!("checkpoint   {}", path.display());
        println!("model        {}", cfg.kind.as_str());
        println!("input        {} x {}", cfg.input_channels, cfg.input_time);
        println!("classes      {}", ckpt.classes.join(", "));
        println!("parameters   {}", ckpt.model.param_count());
        println!("best epoch   {}", ckpt.epoch);
        if let Some(r) = ckpt.history.stop_reason {
            println!("stopped      {}", serde_json::to_string(&r).unwrap_or_default().trim_matches('"'));
        }
        let steps: Vec<&str> = ckpt.pipeline.iter().map(|s| s.name()).collect();
        println!("pipeline     {}", if steps.is_empty() { "-".into() } else { steps.join(" -> ") });
        return Ok(());
    }
    let ds = load_dataset(path)?;
    println!("dataset      {}", ds.name);
    println!("shape        {:?} ({} channels x {} steps)", ds.shape.dims(), ds.shape.channels(), ds.shape.time());
    println!("provenance   {}", serde_json::to_string(&ds.provenance).unwrap_or_default());
    let steps: Vec<&str> = ds.preprocessing.iter().map(|s| s.name()).collect();
    println!("pipeline     {}", if steps.is_empty() { "-".into() } else { steps.join(" -> ") });
    println!();
    print!("{}", ds.counts_table());
    Ok(())
}

fn cmd_train(config: &Path, out: Option<PathBuf>, seed: Option<u64>, quiet: bool) -> Result<i32> {
    let cfg = load_experiment(config, seed)?;
    let out = out
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set output_dir".into()))?;
    let artifacts = run_train(&cfg, &out, |r| {
        if !quiet {
            println!(
                "epoch {:>3}  train_loss {:.4}  val_loss {:.4}  val_acc {:.2}%",
                r.epoch, r.train_loss, r.val_loss, r.val_acc
            );
        }
    })?;
    let h = &artifacts.outcome.history;
    if h.stop_reason == Some(StopReason::Diverged) {
        eprintln!(
            "error: training diverged ({}); best checkpoint from epoch {} kept in {}",
            h.failure.as_deref().unwrap_or("non-finite value"),
            h.best_epoch,
            artifacts.checkpoint.display()
        );
        return Ok(4);
    }
    if !quiet {
        let best = h.best();
        println!(
            "best epoch {} (val_loss {:.4}, val_acc {:.2}%), checkpoint in {}",
            h.best_epoch,
            best.map_or(f64::NAN, |b| b.val_loss),
            best.map_or(f64::NAN, |b| b.val_acc),
            artifacts.checkpoint.display()
        );
    }
    Ok(0)
}

fn run_bench(model: &Model, precision: Precision, repetitions: usize, warmup: usize) -> Result<Benchmark> {
    match precision {
        Precision::F32 => benchmark_inference::<f32>(model, repetitions, warmup),
        Precision::F64 => benchmark_inference::<f64>(model, repetitions, warmup),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    checkpoint: &Path,
    dataset: Option<PathBuf>,
    config: Option<PathBuf>,
    seed: Option<u64>,
    split: &str,
    out: &Path,
    bench: bool,
    precision: Precision,
    quiet: bool,
) -> Result<()> {
    require(checkpoint, "checkpoint")?;
    let split: Split = split.parse()?;
    let ckpt = load_checkpoint(checkpoint)?;
    let data = match (dataset, config) {
        (Some(path), _) => {
            require(&path.join(MANIFEST_FILE), "dataset")?;
            apply_remaining(load_dataset(&path)?, &ckpt.pipeline)?
        }
        (None, Some(path)) => {
            let cfg = load_experiment(&path, seed)?;
            if cfg.preprocessing != ckpt.pipeline {
                return Err(Error::Config(
                    "experiment preprocessing differs from the checkpoint's".into(),
                ));
            }
            prepare_dataset(&cfg)?
        }
        (None, None) => return Err(Error::Config("eval needs --dataset or --config".into())),
    };
    if data.classes != ckpt.classes {
        return Err(Error::Config(format!(
            "dataset classes {:?} differ from checkpoint classes {:?}",
            data.classes, ckpt.classes
        )));
    }
    let samples = data
        .split(split)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::Config(format!("dataset {} has no {split} split", data.name)))?;
    let mut report = evaluate(&ckpt.model, samples, &data.classes, &data.name, split.as_str())?;
    if bench {
        report.benchmark = Some(run_bench(&ckpt.model, precision, 30, 5)?);
    }
    export_report(&report, out.join("metrics.json"), ReportFormat::Json)?;
    export_report(&report, out.join("confusion.csv"), ReportFormat::Csv)?;
    if !quiet {
        let m = &report.metrics;
        println!(
            "{} on {} {}: accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}",
            report.model, report.dataset, report.split, m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1
        );
        for u in &m.undefined {
            println!("note: {u} has a zero denominator and was set to 0");
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    config: Option<PathBuf>,
    checkpoint: Option<PathBuf>,
    kind: Option<Kind>,
    precision: Precision,
    repetitions: usize,
    warmup: usize,
    out: Option<PathBuf>,
    quiet: bool,
) -> Result<()> {
    let model = match (checkpoint, config) {
        (Some(path), _) => {
            require(&path, "checkpoint")?;
            let ckpt = load_checkpoint(&path)?;
            match kind {
                Some(k) => {
                    let c = ckpt.model.config();
                    build_model(&ModelConfig::new(k.into(), c.input_channels, c.input_time, c.n_classes))?
                }
                None => ckpt.model,
            }
        }
        (None, Some(path)) => {
            let cfg = load_experiment(&path, None)?;
            let features = cfg.feature_shape()?;
            let n_classes = match (&cfg.synth, &cfg.dataset_path) {
                (Some(s), _) => s.n_classes,
                (None, Some(p)) => load_dataset(p)?.n_classes(),
                (None, None) => unreachable!("validated"),
            };
            let mut mcfg = cfg.model.clone();
            if let Some(k) = kind {
                mcfg = ModelConfig {
                    seed: mcfg.seed,
                    ..ModelConfig::new(k.into(), mcfg.input_channels, mcfg.input_time, mcfg.n_classes)
                };
            }
            let resolved = ExperimentConfig { model: mcfg, ..cfg }.resolved_model(features, n_classes)?;
            build_model(&resolved)?
        }
        (None, None) => return Err(Error::Config("bench needs --config or --checkpoint".into())),
    };
    let b = run_bench(&model, precision, repetitions, warmup)?;
    let kind = model.config().kind.as_str();
    if let Some(dir) = out {
        write_file(&dir.join(format!("bench_{kind}_{}.json", b.precision)), &b.to_json(kind))?;
    }
    if !quiet {
        println!(
            "{kind} ({}, {} reps): mean {:.4} ms  median {:.4} ms  p95 {:.4} ms  memory {:.4} MB ({} params, {} activations)",
            b.precision, b.repetitions, b.mean_ms, b.median_ms, b.p95_ms, b.memory_mb, b.param_count, b.activation_count
        );
    }
    Ok(())
}

fn cmd_compare(a: &Path, b: &Path, out: Option<PathBuf>) -> Result<()> {
    require(a, "report")?;
    require(b, "report")?;
    let cmp = compare(&read_report(a)?, &read_report(b)?)?;
    let text = cmp.render();
    print!("{text}");
    if let Some(dir) = out {
        write_file(&dir.join("comparison.txt"), &text)?;
        write_file(&dir.join("comparison.csv"), &cmp.to_csv())?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Synth {
            config,
            replica,
            out,
            seed,
        } => cmd_synth(config, replica, &out, seed, quiet).map(|_| 0),
        Command::Inspect { path } => cmd_inspect(&path).map(|_| 0),
        Command::Preprocess { config, out, seed } => {
            let cfg = load_experiment(&config, seed)?;
            let ds = write_prepared(&cfg, &out)?;
            if !quiet {
                println!("wrote {} ({} x {}) to {}", ds.name, ds.shape.channels(), ds.shape.time(), out.display());
                print!("{}", ds.counts_table());
            }
            Ok(0)
        }
        Command::Train { config, out, seed } => cmd_train(&config, out, seed, quiet),
        Command::Eval {
            checkpoint,
            dataset,
            config,
            seed,
            split,
            out,
            bench,
            precision,
        } => cmd_eval(&checkpoint, dataset, config, seed, &split, &out, bench, precision, quiet).map(|_| 0),
        Command::Bench {
            config,
            checkpoint,
            kind,
            precision,
            repetitions,
            warmup,
            out,
        } => cmd_bench(config, checkpoint, kind, precision, repetitions, warmup, out, quiet).map(|_| 0),
        Command::Compare { a, b, out } => cmd_compare(&a, &b, out).map(|_| 0),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
