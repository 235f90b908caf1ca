use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Standard deviations below this are treated as a constant channel.
pub const DEGENERATE_STD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMode {
    /// Z-score every channel.
    AmplitudeZscore,
    /// Channels `>= phase_from` hold phase: unwrap, detrend, then z-score.
    /// The remaining channels are z-scored as amplitudes.
    AmplitudePhaseZscore { phase_from: usize },
}

/// Per-channel normalization of a `[channels × time]` sample.
pub fn normalize(sample: &Tensor, mode: NormalizeMode) -> Result<Tensor> {
    let [channels, time] = *sample.shape() else {
        return Err(Error::Contract(format!(
            "normalize expects [channels x time], got {:?}",
            sample.shape()
        )));
    };
    let phase_from = match mode {
        NormalizeMode::AmplitudeZscore => channels,
        NormalizeMode::AmplitudePhaseZscore { phase_from } => {
            if phase_from > channels {
                return Err(Error::Spec(format!(
                    "phase channels start at {phase_from} but sample has {channels}"
                )));
            }
            phase_from
        }
    };
    let mut out = Vec::with_capacity(channels * time);
    for (c, row) in sample.data().chunks_exact(time).enumerate() {
        if c >= phase_from {
            out.extend(zscore(&detrend(&unwrap_phase(row))));
        } else {
            out.extend(zscore(row));
        }
    }
    Tensor::new(&[channels, time], out)
}

/// Zero mean, unit population standard deviation; constant input maps to zeros.
pub fn zscore(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < DEGENERATE_STD {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - mean) / std).collect()
}

/// Remove ±2π jumps so successive samples differ by at most π.
pub fn unwrap_phase(x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut offset = 0.0;
    for (i, &v) in x.iter().enumerate() {
        if i > 0 {
            let d = v - x[i - 1];
            // wrap the raw difference into (−π, π]
            let wrapped = d - 2.0 * PI * ((d + PI) / (2.0 * PI)).floor();
            let wrapped = if wrapped == -PI && d > 0.0 { PI } else { wrapped };
            offset += wrapped - d;
        }
        out.push(v + offset);
    }
    out
}

/// Subtract the least-squares line through `(i, x[i])`.
pub fn detrend(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let nf = n as f64;
    let t_mean = (nf - 1.0) / 2.0;
    let x_mean = x.iter().sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let dt = i as f64 - t_mean;
        sxy += dt * (v - x_mean);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    x.iter()
        .enumerate()
        .map(|(i, &v)| v - x_mean - slope * (i as f64 - t_mean))
        .collect()
}
