//! Dataset model, interchange format and synthetic CSI generation.

mod format;
mod split;
mod synth;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsp::Step;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub(crate) use format::{commit_dir, prepare_temp};
pub use format::{load_dataset, save_dataset, DatasetWriter, FORMAT_VERSION, MANIFEST_FILE};
pub use split::{stratified_split, Allocation, SplitOutcome};
pub use synth::{synth_generate, synth_sample, SynthConfig, NTU_FI_CLASSES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!(
                "unknown split {other:?} (expected train, val or test)"
            ))),
        }
    }
}

/// Declared sample shape. Every axis but the last is folded into channels,
/// so `(3, 114, 500)` means 342 channels by 500 time steps.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct SampleShape {
    dims: Vec<usize>,
}

impl SampleShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Config(format!(
                "sample shape needs >= 2 positive dims, got {dims:?}"
            )));
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn channels(&self) -> usize {
        self.dims[..self.dims.len() - 1].iter().product()
    }

    pub fn time(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn numel(&self) -> usize {
        self.channels() * self.time()
    }
}

impl TryFrom<Vec<usize>> for SampleShape {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        SampleShape::new(dims)
    }
}

impl From<SampleShape> for Vec<usize> {
    fn from(s: SampleShape) -> Self {
        s.dims
    }
}

/// One activity instance: `[channels × time]` values and a class label.
///
/// Values are stored at 32-bit precision, matching the interchange format.
#[derive(Clone, Debug, PartialEq)]
pub struct CsiSample {
    pub data: Vec<f32>,
    pub channels: usize,
    pub time: usize,
    pub label: usize,
    pub source_id: String,
}

impl CsiSample {
    pub fn new(
        data: Vec<f32>,
        channels: usize,
        time: usize,
        label: usize,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if channels == 0 || time == 0 || data.len() != channels * time {
            return Err(Error::Contract(format!(
                "sample of {} values cannot be shaped {channels}x{time}",
                data.len()
            )));
        }
        Ok(Self {
            data,
            channels,
            time,
            label,
            source_id: source_id.into(),
        })
    }

    pub fn from_tensor(t: &Tensor, label: usize, source_id: impl Into<String>) -> Result<Self> {
        let [channels, time] = *t.shape() else {
            return Err(Error::Contract(format!(
                "sample tensors are [channels x time], got {:?}",
                t.shape()
            )));
        };
        let data = t.data().iter().map(|&v| v as f32).collect();
        Self::new(data, channels, time, label, source_id)
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            &[self.channels, self.time],
            self.data.iter().map(|&v| f64::from(v)).collect(),
        )
        .expect("sample shape checked at construction")
    }

    /// One channel as 64-bit values.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data[c * self.time..(c + 1) * self.time]
            .iter()
            .map(|&v| f64::from(v))
            .collect()
    }
}

/// Stack samples into a `[B × C × T]` batch.
pub fn stack_samples<'a>(samples: impl IntoIterator<Item = &'a CsiSample>) -> Result<Tensor> {
    let mut data = Vec::new();
    let mut dims: Option<(usize, usize)> = None;
    let mut n = 0;
    for s in samples {
        match dims {
            Some(d) if d != (s.channels, s.time) => {
                return Err(Error::Contract(format!(
                    "cannot batch {}x{} with {}x{} samples",
                    s.channels, s.time, d.0, d.1
                )))
            }
            _ => dims = Some((s.channels, s.time)),
        }
        data.extend(s.data.iter().map(|&v| f64::from(v)));
        n += 1;
    }
    let (c, t) = dims.ok_or_else(|| Error::Contract("cannot batch zero samples".into()))?;
    Tensor::new(&[n, c, t], data)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Provenance {
    Synthetic { seed: u64 },
    Imported { path: String },
}

/// Named train/val/(test) splits sharing one class roster and sample shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub classes: Vec<String>,
    pub shape: SampleShape,
    pub provenance: Provenance,
    /// Steps already applied to the samples.
    pub preprocessing: Vec<Step>,
    train: Vec<CsiSample>,
    val: Vec<CsiSample>,
    test: Option<Vec<CsiSample>>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        classes: Vec<String>,
        shape: SampleShape,
        provenance: Provenance,
    ) -> Self {
        Self {
            name: name.into(),
            classes,
            shape,
            provenance,
            preprocessing: Vec::new(),
            train: Vec::new(),
            val: Vec::new(),
            test: None,
        }
    }

    /// Same metadata, new shape, no samples.
    pub fn empty_like(&self, shape: SampleShape) -> Self {
        let mut d = Self::new(
            self.name.clone(),
            self.classes.clone(),
            shape,
            self.provenance.clone(),
        );
        d.preprocessing = self.preprocessing.clone();
        d
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn split(&self, split: Split) -> Option<&[CsiSample]> {
        match split {
            Split::Train => Some(&self.train),
            Split::Val => Some(&self.val),
            Split::Test => self.test.as_deref(),
        }
    }

    /// Present splits in `train, val, test` order.
    pub fn splits(&self) -> Vec<(Split, &[CsiSample])> {
        Split::ALL
            .iter()
            .filter_map(|&s| self.split(s).map(|v| (s, v)))
            .collect()
    }

    /// Replace a split after checking shape and labels of every sample.
    pub fn set_split(&mut self, split: Split, samples: Vec<CsiSample>) -> Result<()> {
        for s in &samples {
            self.check_sample(s)?;
        }
        match split {
            Split::Train => self.train = samples,
            Split::Val => self.val = samples,
            Split::Test => self.test = Some(samples),
        }
        Ok(())
    }

    fn check_sample(&self, s: &CsiSample) -> Result<()> {
        if s.channels != self.shape.channels() || s.time != self.shape.time() {
            return Err(Error::Contract(format!(
                "sample {} is {}x{}, dataset shape is {}x{}",
                s.source_id,
                s.channels,
                s.time,
                self.shape.channels(),
                self.shape.time()
            )));
        }
        if s.label >= self.classes.len() {
            return Err(Error::Contract(format!(
                "sample {} has label {} but only {} classes",
                s.source_id,
                s.label,
                self.classes.len()
            )));
        }
        Ok(())
    }

    /// Check every invariant, including disjointness of splits by source id.
    pub fn validate(&self) -> Result<()> {
        let mut seen: HashSet<&str> = HashSet::new();
        for (split, samples) in self.splits() {
            let mut local: HashSet<&str> = HashSet::new();
            for s in samples {
                self.check_sample(s)?;
                if !local.insert(&s.source_id) {
                    continue;
                }
                if seen.contains(s.source_id.as_str()) {
                    return Err(Error::Contract(format!(
                        "source id {} appears in {split} and another split",
                        s.source_id
                    )));
                }
            }
            seen.extend(local);
        }
        Ok(())
    }

    /// Per-class sample counts of a split (zeros when the split is absent).
    pub fn class_counts(&self, split: Split) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for s in self.split(split).unwrap_or(&[]) {
            counts[s.label] += 1;
        }
        counts
    }

    /// Per-class counts as an aligned text table, one row per class.
    pub fn counts_table(&self) -> String {
        let splits: Vec<Split> = self.splits().into_iter().map(|(s, _)| s).collect();
        let width = self
            .classes
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(5)
            .max(5);
        let mut out = format!("{:<width$}", "class");
        for s in &splits {
            out.push_str(&format!(" {:>8}", s.as_str()));
        }
        out.push('\n');
        let counts: Vec<Vec<usize>> = splits.iter().map(|&s| self.class_counts(s)).collect();
        for (c, name) in self.classes.iter().enumerate() {
            out.push_str(&format!("{name:<width$}"));
            for col in &counts {
                out.push_str(&format!(" {:>8}", col[c]));
            }
            out.push('\n');
        }
        out
    }
}
