use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{model_forward, Model};
use crate::tensor::{Element, Tensor};

pub const MIN_REPETITIONS: usize = 30;
pub const MIN_WARMUP: usize = 5;
const MIB: f64 = (1u64 << 20) as f64;

/// Single-sample inference latency and analytic memory footprint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub precision: String,
    pub repetitions: usize,
    pub warmup: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub param_count: usize,
    pub activation_count: usize,
    /// `(param_count + activation_count) · element size`, in MiB.
    pub memory_mb: f64,
}

impl Benchmark {
    /// Flat JSON with four-decimal numbers, tagged with the model kind.
    pub fn to_json(&self, model: &str) -> String {
        format!(
            "{{\n  \"model\": {},\n  \"bench_precision\": {},\n  \"bench_repetitions\": {},\n  \"bench_warmup\": {},\n  \"latency_mean_ms\": {:.4},\n  \"latency_median_ms\": {:.4},\n  \"latency_p95_ms\": {:.4},\n  \"param_count\": {},\n  \"activation_count\": {},\n  \"memory_mb\": {:.4}\n}}\n",
            serde_json::to_string(model).expect("strings serialize"),
            serde_json::to_string(&self.precision).expect("strings serialize"),
            self.repetitions,
            self.warmup,
            self.mean_ms,
            self.median_ms,
            self.p95_ms,
            self.param_count,
            self.activation_count,
            self.memory_mb
        )
    }
}

/// Nearest-rank percentile of sorted values.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Analytic footprint in MiB of parameters plus the activations recorded
/// by one single-sample forward pass, at element type `E`.
pub fn memory_footprint<E: Element>(model: &Model) -> Result<(usize, usize, f64)> {
    let params = model.param_count();
    let acts = model.activation_elements(1)?;
    let bytes = (params + acts) * std::mem::size_of::<E>();
    Ok((params, acts, bytes as f64 / MIB))
}

/// Time `repetitions` single-sample forward passes after `warmup` discarded
/// runs. Runs are strictly sequential.
pub fn benchmark_inference<E: Element>(model: &Model, repetitions: usize, warmup: usize) -> Result<Benchmark> {
    if repetitions < MIN_REPETITIONS || warmup < MIN_WARMUP {
        return Err(Error::Config(format!(
            "benchmark needs >= {MIN_REPETITIONS} repetitions and >= {MIN_WARMUP} warm-up runs, got {repetitions} and {warmup}"
        )));
    }
    let c = model.config();
    let input = Tensor::<E>::from_fn(&[1, c.input_channels, c.input_time], |i| {
        E::from_f64_lossy(((i * 7919) % 1000) as f64 / 500.0 - 1.0)
    });
    for _ in 0..warmup {
        model_forward(model, &input)?;
    }
    let mut times = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        let out = model_forward(model, &input)?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(out);
    }
    let mean_ms = times.iter().sum::<f64>() / times.len() as f64;
    times.sort_by(f64::total_cmp);
    let median_ms = if times.len() % 2 == 1 {
        times[times.len() / 2]
    } else {
        0.5 * (times[times.len() / 2 - 1] + times[times.len() / 2])
    };
    let (param_count, activation_count, memory_mb) = memory_footprint::<E>(model)?;
    Ok(Benchmark {
        precision: E::NAME.to_string(),
        repetitions,
        warmup,
        mean_ms,
        median_ms,
        p95_ms: percentile(&times, 0.95),
        param_count,
        activation_count,
        memory_mb,
    })
}
