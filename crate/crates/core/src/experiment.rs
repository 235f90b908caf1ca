//! JSON experiment files and the operations the command line runs on them.
//!
//! ```json
//! {
//!   "synth": { "n_classes": 6, "per_class_train": 20, "per_class_val": 8,
//!              "channels": 8, "time": 200, "sample_rate_hz": 100.0,
//!              "noise_std": 0.5 },
//!   "preprocessing": [
//!     { "step": "highpass", "sample_rate_hz": 100.0 },
//!     { "step": "normalize", "mode": "amplitude_zscore" },
//!     { "step": "doppler", "fft_size": 64, "hop": 32 }
//!   ],
//!   "model": { "kind": "cnn_gru" },
//!   "training": { "max_epochs": 10 },
//!   "seed": 7
//! }
//! ```
//!
//! Exactly one of `dataset_path` and `synth` must be present. The global
//! seed fixes every seeded component: the generator uses `seed`, model
//! initialization `seed + 1` and batch shuffling `seed + 2`, unless the
//! model or training block names its own seed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{load_dataset, Dataset, DatasetWriter, SampleShape, Split, SynthConfig};
use crate::dsp::{Pipeline, Step};
use crate::error::{Error, Result};
use crate::models::{build_model, ModelConfig};
use crate::training::{save_checkpoint, train_with, EpochRecord, TrainConfig, TrainOutcome};

pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const CHECKPOINT_DIR: &str = "checkpoint";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthConfig>,
    #[serde(default)]
    pub preprocessing: Vec<Step>,
    pub model: ModelConfig,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::json(path, e))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Apply the seed rule. `seed_override` (from the command line) replaces
    /// the global seed and every component seed.
    pub fn resolve_seeds(&mut self, seed_override: Option<u64>) {
        if let Some(s) = seed_override {
            self.seed = s;
            self.model.seed = None;
            self.training.shuffle_seed = None;
        }
        if let Some(synth) = &mut self.synth {
            synth.seed = self.seed;
        }
        self.model.seed.get_or_insert(self.seed.wrapping_add(1));
        self.training.shuffle_seed.get_or_insert(self.seed.wrapping_add(2));
    }

    /// Structural checks that need no file access beyond existence.
    pub fn validate(&self) -> Result<()> {
        match (&self.dataset_path, &self.synth) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "dataset_path and synth are both set; choose one dataset source".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config("one of dataset_path or synth is required".into()))
            }
            (Some(p), None) if !p.join(crate::data::MANIFEST_FILE).exists() => {
                return Err(Error::Config(format!(
                    "dataset_path {} does not contain a dataset",
                    p.display()
                )))
            }
            (_, Some(s)) => s.validate()?,
            _ => {}
        }
        Pipeline::new(self.preprocessing.clone())?;
        self.training.validate()
    }

    pub fn pipeline(&self) -> Result<Pipeline> {
        Pipeline::new(self.preprocessing.clone())
    }

    /// Sample `(channels, time)` after preprocessing, without generating data.
    pub fn feature_shape(&self) -> Result<(usize, usize)> {
        let raw = match (&self.synth, &self.dataset_path) {
            (Some(s), _) => (s.channels, s.time),
            (None, Some(p)) => {
                let ds = load_dataset(p)?;
                let remaining = remaining_steps(&ds, &self.preprocessing)?;
                return Pipeline::new(remaining)?
                    .output_shape((ds.shape.channels(), ds.shape.time()));
            }
            (None, None) => return Err(Error::Config("no dataset source".into())),
        };
        self.pipeline()?.output_shape(raw)
    }

    /// Copy the model block with input dims and class count taken from the
    /// data where they were left at 0.
    pub fn resolved_model(&self, features: (usize, usize), n_classes: usize) -> Result<ModelConfig> {
        let mut m = self.model.clone();
        for (field, have, want) in [
            ("input_channels", &mut m.input_channels, features.0),
            ("input_time", &mut m.input_time, features.1),
            ("n_classes", &mut m.n_classes, n_classes),
        ] {
            if *have == 0 {
                *have = want;
            } else if *have != want {
                return Err(Error::Config(format!(
                    "model.{field} is {have} but the data gives {want}"
                )));
            }
        }
        m.validate()?;
        Ok(m)
    }
}

/// Steps of `wanted` not yet applied to `ds`. The dataset's own steps must
/// be a prefix of `wanted`.
pub fn remaining_steps(ds: &Dataset, wanted: &[Step]) -> Result<Vec<Step>> {
    let done = &ds.preprocessing;
    if done.len() <= wanted.len() && wanted[..done.len()] == done[..] {
        Ok(wanted[done.len()..].to_vec())
    } else {
        Err(Error::Config(format!(
            "dataset {} was preprocessed with {:?}, which is not a prefix of the configured steps",
            ds.name,
            done.iter().map(Step::name).collect::<Vec<_>>()
        )))
    }
}

/// Bring a loaded dataset up to the configured preprocessing.
pub fn apply_remaining(ds: Dataset, wanted: &[Step]) -> Result<Dataset> {
    let remaining = remaining_steps(&ds, wanted)?;
    if remaining.is_empty() {
        Ok(ds)
    } else {
        Pipeline::new(remaining)?.apply_dataset(&ds)
    }
}

/// Generate synthetic data straight through `pipeline`, one raw sample at
/// a time, so the raw dataset is never held in memory.
pub fn synth_through(synth: &SynthConfig, pipeline: &Pipeline) -> Result<Dataset> {
    synth.validate()?;
    let shape = if pipeline.is_empty() {
        synth.shape()?
    } else {
        let (c, t) = pipeline.output_shape((synth.channels, synth.time))?;
        SampleShape::new(vec![c, t])?
    };
    let mut ds = Dataset::new(
        synth.name.clone(),
        synth.classes(),
        shape,
        crate::data::Provenance::Synthetic { seed: synth.seed },
    );
    for split in synth.splits() {
        let mut out = Vec::new();
        for raw in synth.samples(split) {
            out.extend(pipeline.apply_sample(&raw)?);
        }
        ds.set_split(split, out)?;
    }
    ds.preprocessing = pipeline.steps().to_vec();
    Ok(ds)
}

/// Load or generate the experiment's dataset with all preprocessing applied.
pub fn prepare_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    cfg.validate()?;
    match (&cfg.synth, &cfg.dataset_path) {
        (Some(s), _) => synth_through(s, &cfg.pipeline()?),
        (None, Some(p)) => apply_remaining(load_dataset(p)?, &cfg.preprocessing),
        (None, None) => unreachable!("validated"),
    }
}

/// Write the experiment's prepared dataset to `out`. Synthetic sources are
/// streamed sample by sample.
pub fn write_prepared(cfg: &ExperimentConfig, out: &Path) -> Result<Dataset> {
    let ds = prepare_dataset(cfg)?;
    crate::data::save_dataset(&ds, out)?;
    Ok(ds)
}

/// Stream a synthetic dataset to disk without preprocessing.
pub fn write_synth(synth: &SynthConfig, out: &Path) -> Result<()> {
    synth.validate()?;
    let mut w = DatasetWriter::create(
        out,
        &synth.name,
        synth.classes(),
        synth.shape()?,
        crate::data::Provenance::Synthetic { seed: synth.seed },
        Vec::new(),
    )?;
    for split in synth.splits() {
        w.open_split(split)?;
        for s in synth.samples(split) {
            w.push(split, &s)?;
        }
    }
    w.finish().map(drop)
}

/// Files written by [`run_train`].
#[derive(Clone, Debug)]
pub struct TrainArtifacts {
    pub checkpoint: PathBuf,
    pub history: PathBuf,
    pub resolved_config: PathBuf,
    pub outcome: TrainOutcome,
}

/// Prepare data, build the model, train and write the checkpoint, history
/// CSV and resolved configuration into `out`. `cfg` must have its seeds
/// resolved already.
pub fn run_train(
    cfg: &ExperimentConfig,
    out: &Path,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainArtifacts> {
    let data = prepare_dataset(cfg)?;
    if data.split(Split::Train).is_none_or(|s| s.is_empty()) || data.split(Split::Val).is_none_or(|s| s.is_empty()) {
        return Err(Error::Config(format!(
            "dataset {} needs non-empty train and val splits",
            data.name
        )));
    }
    let mut resolved = cfg.clone();
    resolved.model = cfg.resolved_model(
        (data.shape.channels(), data.shape.time()),
        data.n_classes(),
    )?;
    let model = build_model(&resolved.model)?;

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let config_path = out.join(RESOLVED_CONFIG_FILE);
    fs::write(&config_path, resolved.to_json()).map_err(|e| Error::io(&config_path, e))?;

    let outcome = train_with(model, &data, &resolved.training, on_epoch)?;
    let ckpt_path = out.join(CHECKPOINT_DIR);
    save_checkpoint(&outcome.checkpoint, &ckpt_path)?;
    let history_path = out.join(HISTORY_FILE);
    fs::write(&history_path, outcome.history.to_csv()).map_err(|e| Error::io(&history_path, e))?;
    Ok(TrainArtifacts {
        checkpoint: ckpt_path,
        history: history_path,
        resolved_config: config_path,
        outcome,
    })
}
