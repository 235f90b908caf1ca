//! Declarative preprocessing: an ordered list of named steps applied to
//! every `[channels × time]` sample.

use serde::{Deserialize, Serialize};

use crate::data::{CsiSample, Dataset, SampleShape};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::{
    doppler_spectrogram, haar_dwt, highpass, magnitude_spectrum, normalize, sliding_windows,
    FilterSpec, NormalizeMode, SpectrogramSpec, WindowSpec,
};

pub const DEFAULT_CUTOFF_HZ: f64 = 2.0;
pub const DEFAULT_WINDOW_LENGTH: usize = 250;
pub const DEFAULT_WINDOW_STRIDE: usize = 125;

fn default_cutoff() -> f64 {
    DEFAULT_CUTOFF_HZ
}
fn default_window_length() -> usize {
    DEFAULT_WINDOW_LENGTH
}
fn default_window_stride() -> usize {
    DEFAULT_WINDOW_STRIDE
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeKind {
    AmplitudeZscore,
    AmplitudePhaseZscore,
}

/// One preprocessing step. Serialized as `{"step": "<name>", ...params}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    Highpass {
        #[serde(default = "default_cutoff")]
        cutoff_hz: f64,
        sample_rate_hz: f64,
    },
    /// `phase_from` defaults to half the channel count in phase mode.
    Normalize {
        mode: NormalizeKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phase_from: Option<usize>,
    },
    Doppler {
        fft_size: usize,
        hop: usize,
    },
    /// Per-channel one-sided magnitude spectrum.
    Fourier,
    /// Per-channel Haar coefficients laid out `[approx, detail_L … detail_1]`.
    Haar {
        levels: usize,
    },
    SlidingWindow {
        #[serde(default = "default_window_length")]
        length: usize,
        #[serde(default = "default_window_stride")]
        stride: usize,
    },
}

impl Step {
    /// Every step name accepted in a configuration.
    pub const NAMES: [&'static str; 6] = [
        "highpass",
        "normalize",
        "doppler",
        "fourier",
        "haar",
        "sliding_window",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Step::Highpass { .. } => "highpass",
            Step::Normalize { .. } => "normalize",
            Step::Doppler { .. } => "doppler",
            Step::Fourier => "fourier",
            Step::Haar { .. } => "haar",
            Step::SlidingWindow { .. } => "sliding_window",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Step::Highpass {
                cutoff_hz,
                sample_rate_hz,
            } => FilterSpec::new(*cutoff_hz, *sample_rate_hz).map(drop),
            Step::Doppler { fft_size, hop } => SpectrogramSpec::new(*fft_size, *hop).map(drop),
            Step::Haar { levels } if *levels == 0 => {
                Err(Error::Spec("haar levels must be >= 1".into()))
            }
            Step::SlidingWindow { length, stride } => WindowSpec::new(*length, *stride).map(drop),
            _ => Ok(()),
        }
    }

    fn output_shape(&self, (channels, time): (usize, usize)) -> Result<(usize, usize)> {
        Ok(match self {
            Step::Highpass { .. } | Step::Normalize { .. } => (channels, time),
            Step::Doppler { fft_size, hop } => {
                let spec = SpectrogramSpec::new(*fft_size, *hop)?;
                let frames = spec.frames(time).ok_or_else(|| {
                    Error::Spec(format!("doppler: time {time} shorter than fft_size {fft_size}"))
                })?;
                (spec.bins(), frames)
            }
            Step::Fourier => (channels, time / 2 + 1),
            Step::Haar { levels } => {
                let probe = haar_dwt(&vec![0.0; time], *levels)?;
                (channels, probe.padded_len)
            }
            Step::SlidingWindow { length, stride } => {
                let spec = WindowSpec::new(*length, *stride)?;
                if spec.count(time) == 0 {
                    return Err(Error::Spec(format!(
                        "sliding_window length {length} exceeds series length {time}"
                    )));
                }
                (channels, *length)
            }
        })
    }

    /// Apply to one sample; only `sliding_window` yields more than one output.
    fn apply(&self, x: &Tensor) -> Result<Vec<(Option<usize>, Tensor)>> {
        let [channels, time] = *x.shape() else {
            return Err(Error::Contract(format!(
                "pipeline samples must be [channels x time], got {:?}",
                x.shape()
            )));
        };
        let per_row = |f: &dyn Fn(&[f64]) -> Result<Vec<f64>>| -> Result<Tensor> {
            let mut data = Vec::new();
            let mut width = 0;
            for row in x.data().chunks_exact(time) {
                let out = f(row)?;
                width = out.len();
                data.extend(out);
            }
            Tensor::new(&[channels, width], data)
        };
        let single = |t: Tensor| Ok(vec![(None, t)]);
        match self {
            Step::Highpass {
                cutoff_hz,
                sample_rate_hz,
            } => {
                let spec = FilterSpec::new(*cutoff_hz, *sample_rate_hz)?;
                single(per_row(&|r| highpass(r, &spec))?)
            }
            Step::Normalize { mode, phase_from } => {
                let mode = match mode {
                    NormalizeKind::AmplitudeZscore => NormalizeMode::AmplitudeZscore,
                    NormalizeKind::AmplitudePhaseZscore => NormalizeMode::AmplitudePhaseZscore {
                        phase_from: phase_from.unwrap_or(channels / 2),
                    },
                };
                single(normalize(x, mode)?)
            }
            Step::Doppler { fft_size, hop } => {
                single(doppler_spectrogram(x, &SpectrogramSpec::new(*fft_size, *hop)?)?)
            }
            Step::Fourier => single(per_row(&|r| Ok(magnitude_spectrum(r)))?),
            Step::Haar { levels } => single(per_row(&|r| Ok(haar_dwt(r, *levels)?.flatten()))?),
            Step::SlidingWindow { length, stride } => {
                let windows = sliding_windows(x, &WindowSpec::new(*length, *stride)?)?;
                Ok(windows
                    .windows
                    .into_iter()
                    .map(|w| (Some(w.offset), w.tensor))
                    .collect())
            }
        }
    }
}

/// A processed sample and the window offsets that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub offsets: Vec<usize>,
    pub tensor: Tensor,
}

impl Segment {
    /// Suffix appended to the source id, e.g. `#w125`.
    pub fn id_suffix(&self) -> String {
        self.offsets.iter().map(|o| format!("#w{o}")).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pipeline {
    steps: Vec<Step>,
}

impl Pipeline {
    pub fn new(steps: Vec<Step>) -> Result<Self> {
        for step in &steps {
            step.validate()?;
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Sample shape after every step, starting from `(channels, time)`.
    pub fn output_shape(&self, input: (usize, usize)) -> Result<(usize, usize)> {
        self.steps.iter().try_fold(input, |s, step| step.output_shape(s))
    }

    pub fn apply(&self, sample: &Tensor) -> Result<Vec<Segment>> {
        let mut current = vec![Segment {
            offsets: Vec::new(),
            tensor: sample.clone(),
        }];
        for step in &self.steps {
            let mut next = Vec::with_capacity(current.len());
            for seg in current {
                for (offset, tensor) in step.apply(&seg.tensor)? {
                    let mut offsets = seg.offsets.clone();
                    offsets.extend(offset);
                    next.push(Segment { offsets, tensor });
                }
            }
            current = next;
        }
        Ok(current)
    }

    /// Map one sample to its processed segments, keeping label and lineage.
    pub fn apply_sample(&self, sample: &CsiSample) -> Result<Vec<CsiSample>> {
        self.apply(&sample.to_tensor())?
            .into_iter()
            .map(|seg| {
                CsiSample::from_tensor(
                    &seg.tensor,
                    sample.label,
                    format!("{}{}", sample.source_id, seg.id_suffix()),
                )
            })
            .collect()
    }

    /// Apply to every split of a dataset. The input is left untouched.
    pub fn apply_dataset(&self, dataset: &Dataset) -> Result<Dataset> {
        let (c, t) = self.output_shape((dataset.shape.channels(), dataset.shape.time()))?;
        let mut out = dataset.empty_like(SampleShape::new(vec![c, t])?);
        for (split, samples) in dataset.splits() {
            let mut processed = Vec::new();
            for s in samples {
                processed.extend(self.apply_sample(s)?);
            }
            out.set_split(split, processed)?;
        }
        out.preprocessing.extend(self.steps.iter().cloned());
        Ok(out)
    }
}
