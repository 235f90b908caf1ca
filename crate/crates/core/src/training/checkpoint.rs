//! Checkpoint directories.
//!
//! ```text
//! <dir>/manifest.json   version, model config, init seed, epoch, classes,
//!                       preprocessing, history, parameter index, resume state
//! <dir>/params.bin      parameters in index order, little-endian binary64
//! <dir>/resume.bin      last-epoch parameters, then Adam m, then Adam v
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{commit_dir, prepare_temp};
use crate::dsp::Step;
use crate::error::{Error, Result};
use crate::models::{Model, ModelConfig, ParamStore};
use crate::tensor::Tensor;

use super::{AdamState, EarlyStopping, TrainHistory};

pub const CHECKPOINT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const PARAMS: &str = "params.bin";
const RESUME: &str = "resume.bin";

/// Optimizer state at the end of the last completed epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct ResumeState {
    pub epoch: usize,
    pub params: ParamStore,
    pub adam: AdamState,
    pub stopper: EarlyStopping,
}

/// A trained model plus everything needed to evaluate or resume it.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    /// Epoch that produced `model`; 0 for the initial parameters.
    pub epoch: usize,
    pub classes: Vec<String>,
    /// Steps to apply to raw samples before the model sees them.
    pub pipeline: Vec<Step>,
    pub history: TrainHistory,
    pub resume: Option<ResumeState>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResumeManifest {
    epoch: usize,
    adam_t: u64,
    stopper: EarlyStopping,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    version: u32,
    config: ModelConfig,
    seed: u64,
    epoch: usize,
    classes: Vec<String>,
    pipeline: Vec<Step>,
    history: TrainHistory,
    params: Vec<ParamEntry>,
    resume: Option<ResumeManifest>,
}

fn encode(tensors: &[Tensor], out: &mut Vec<u8>) {
    for t in tensors {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

fn decode(bytes: &[u8], index: &[ParamEntry]) -> Result<Vec<Tensor>> {
    let mut pos = 0;
    index
        .iter()
        .map(|e| {
            let n: usize = e.shape.iter().product();
            let data = bytes[pos..pos + n * 8]
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect();
            pos += n * 8;
            Tensor::new(&e.shape, data)
        })
        .collect()
}

fn read_exact_len(path: &Path, expected: u64) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() as u64 != expected {
        return Err(Error::Integrity {
            file: path.to_path_buf(),
            expected,
            found: bytes.len() as u64,
        });
    }
    Ok(bytes)
}

/// Write a checkpoint directory atomically.
pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let dest = path.as_ref();
    let tmp = prepare_temp(dest)?;
    let result = (|| {
        let params = ckpt.model.params();
        let manifest = Manifest {
            version: CHECKPOINT_VERSION,
            config: ckpt.model.config().clone(),
            seed: ckpt.model.config().init_seed(),
            epoch: ckpt.epoch,
            classes: ckpt.classes.clone(),
            pipeline: ckpt.pipeline.clone(),
            history: ckpt.history.clone(),
            params: params
                .iter()
                .map(|(name, t)| ParamEntry {
                    name: name.to_string(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
            resume: ckpt.resume.as_ref().map(|r| ResumeManifest {
                epoch: r.epoch,
                adam_t: r.adam.t,
                stopper: r.stopper.clone(),
            }),
        };
        let mut bytes = Vec::with_capacity(params.numel() * 8);
        encode(params.tensors(), &mut bytes);
        let p = tmp.join(PARAMS);
        fs::write(&p, &bytes).map_err(|e| Error::io(&p, e))?;
        if let Some(r) = &ckpt.resume {
            let mut bytes = Vec::with_capacity(params.numel() * 24);
            encode(r.params.tensors(), &mut bytes);
            encode(&r.adam.m, &mut bytes);
            encode(&r.adam.v, &mut bytes);
            let p = tmp.join(RESUME);
            fs::write(&p, &bytes).map_err(|e| Error::io(&p, e))?;
        }
        let p = tmp.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(&p, e))?;
        text.push('\n');
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    })();
    match result {
        Ok(()) => commit_dir(&tmp, dest),
        Err(e) => {
            let _ = fs::remove_dir_all(&tmp);
            Err(e)
        }
    }
}

/// Read a checkpoint directory, refusing version, shape or size mismatches.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let dir = path.as_ref();
    let mpath = dir.join(MANIFEST);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::json(&mpath, e))?;
    let found = raw.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found,
            expected: CHECKPOINT_VERSION,
        });
    }
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::json(&mpath, e))?;
    if m.classes.len() != m.config.n_classes {
        return Err(Error::Contract(format!(
            "checkpoint lists {} classes but the model has n_classes = {}",
            m.classes.len(),
            m.config.n_classes
        )));
    }
    let numel: usize = m.params.iter().map(|e| e.shape.iter().product::<usize>()).sum();
    let names: Vec<String> = m.params.iter().map(|e| e.name.clone()).collect();

    let bytes = read_exact_len(&dir.join(PARAMS), numel as u64 * 8)?;
    let tensors = decode(&bytes, &m.params)?;
    let store = |ts: Vec<Tensor>| ParamStore::new(names.iter().cloned().zip(ts).collect());
    let model = Model::from_params(m.config, store(tensors))?;

    let resume = match m.resume {
        None => None,
        Some(r) => {
            let bytes = read_exact_len(&dir.join(RESUME), numel as u64 * 24)?;
            let n = numel * 8;
            Some(ResumeState {
                epoch: r.epoch,
                params: store(decode(&bytes[..n], &m.params)?),
                adam: AdamState {
                    m: decode(&bytes[n..2 * n], &m.params)?,
                    v: decode(&bytes[2 * n..], &m.params)?,
                    t: r.adam_t,
                },
                stopper: r.stopper,
            })
        }
    };
    Ok(Checkpoint {
        model,
        epoch: m.epoch,
        classes: m.classes,
        pipeline: m.pipeline,
        history: m.history,
        resume,
    })
}
