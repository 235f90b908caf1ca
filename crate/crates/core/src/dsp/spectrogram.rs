use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use num_complex::Complex64;

use super::fourier::Radix2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowFn {
    #[default]
    Hann,
}

impl WindowFn {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowFn::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrogramSpec {
    pub fft_size: usize,
    pub hop: usize,
    #[serde(default)]
    pub window_fn: WindowFn,
}

impl SpectrogramSpec {
    pub fn new(fft_size: usize, hop: usize) -> Result<Self> {
        let spec = Self {
            fft_size,
            hop,
            window_fn: WindowFn::Hann,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.fft_size.is_power_of_two() || self.fft_size < 2 {
            return Err(Error::Spec(format!(
                "fft_size must be a power of two >= 2, got {}",
                self.fft_size
            )));
        }
        if self.hop == 0 || self.hop > self.fft_size {
            return Err(Error::Spec(format!(
                "hop must lie in [1, {}], got {}",
                self.fft_size, self.hop
            )));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// `floor((T − fft_size) / hop) + 1`, or `None` when `T < fft_size`.
    pub fn frames(&self, time: usize) -> Option<usize> {
        (time >= self.fft_size).then(|| (time - self.fft_size) / self.hop + 1)
    }
}

/// Channel-averaged Hann STFT magnitude of a `[channels × time]` window.
///
/// Each channel has its mean removed first. Magnitudes are divided by the
/// window sum, so a unit-amplitude tone on a bin centre reads 0.5. The
/// result is `[fft_size/2 + 1 × frames]`.
pub fn doppler_spectrogram(window: &Tensor, spec: &SpectrogramSpec) -> Result<Tensor> {
    spec.validate()?;
    let [channels, time] = *window.shape() else {
        return Err(Error::Contract(format!(
            "doppler_spectrogram expects [channels x time], got {:?}",
            window.shape()
        )));
    };
    let frames = spec.frames(time).ok_or_else(|| {
        Error::Spec(format!(
            "time length {time} shorter than fft_size {}",
            spec.fft_size
        ))
    })?;
    let bins = spec.bins();
    let taper = spec.window_fn.coefficients(spec.fft_size);
    let scale = 1.0 / (taper.iter().sum::<f64>() * channels as f64);

    let mut out = vec![0.0; bins * frames];
    let plan = Radix2::new(spec.fft_size, false);
    let mut frame = vec![Complex64::default(); spec.fft_size];
    for row in window.data().chunks_exact(time) {
        let mean = row.iter().sum::<f64>() / time as f64;
        for f in 0..frames {
            let start = f * spec.hop;
            for (i, slot) in frame.iter_mut().enumerate() {
                *slot = Complex64::new((row[start + i] - mean) * taper[i], 0.0);
            }
            plan.run(&mut frame);
            for (k, c) in frame.iter().take(bins).enumerate() {
                out[k * frames + f] += c.norm_sqr().sqrt() * scale;
            }
        }
    }
    Tensor::new(&[bins, frames], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_count_by_hand() {
        let spec = SpectrogramSpec::new(128, 64).unwrap();
        assert_eq!(spec.frames(500), Some(6));
        assert_eq!(spec.frames(127), None);
        assert_eq!(spec.frames(128), Some(1));
    }

    #[test]
    fn zero_signal_gives_zero_map() {
        let spec = SpectrogramSpec::new(16, 8).unwrap();
        let s = doppler_spectrogram(&Tensor::zeros(&[3, 40]), &spec).unwrap();
        assert_eq!(s.shape(), &[9, 4]);
        assert!(s.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn short_input_is_spec_error() {
        let spec = SpectrogramSpec::new(64, 32).unwrap();
        assert!(matches!(
            doppler_spectrogram(&Tensor::zeros(&[1, 63]), &spec),
            Err(Error::Spec(_))
        ));
    }

    #[test]
    fn invalid_specs() {
        assert!(SpectrogramSpec::new(100, 10).is_err());
        assert!(SpectrogramSpec::new(64, 0).is_err());
        assert!(SpectrogramSpec::new(64, 65).is_err());
    }
}
