#![allow(dead_code)]

use csi_har::models::{bilstm_layer, gru_cell, lstm_cell, time_steps, GruParams, LstmParams};
use csi_har::tensor::{grad_check_many, Graph, Padding, Tensor, Var};
use csi_har::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GRAD_EPS: f64 = 1e-6;
pub const GRAD_TOL: f64 = 1e-5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    Tensor::from_fn(shape, |_| rng.gen_range(-scale..scale))
}

/// Weighted sum with fixed irregular weights, so every output coordinate
/// contributes a distinct gradient.
fn probe<'g>(v: Var<'g>, salt: usize) -> Result<Var<'g>> {
    let shape = v.shape();
    let w = Tensor::from_fn(&shape, |i| (((i + salt) * 37 % 23) as f64 - 11.0) / 7.0);
    v.mul(v.graph().constant(w))?.sum()
}

fn lstm_params<'g>(v: &[Var<'g>]) -> LstmParams<Var<'g>> {
    LstmParams {
        w: [v[0], v[1], v[2], v[3]],
        u: [v[4], v[5], v[6], v[7]],
        b: [v[8], v[9], v[10], v[11]],
    }
}

fn gru_params<'g>(v: &[Var<'g>]) -> GruParams<Var<'g>> {
    GruParams {
        w: [v[0], v[1], v[2]],
        u: [v[3], v[4], v[5]],
        b: [v[6], v[7], v[8]],
    }
}

fn lstm_tensors(r: &mut ChaCha8Rng, input: usize, hidden: usize) -> Vec<Tensor> {
    let mut out: Vec<Tensor> = (0..4).map(|_| uniform(r, &[hidden, input], 0.8)).collect();
    out.extend((0..4).map(|_| uniform(r, &[hidden, hidden], 0.8)));
    out.extend((0..4).map(|_| uniform(r, &[hidden], 0.5)));
    out
}

fn gru_tensors(r: &mut ChaCha8Rng, input: usize, hidden: usize) -> Vec<Tensor> {
    let mut out: Vec<Tensor> = (0..3).map(|_| uniform(r, &[hidden, input], 0.8)).collect();
    out.extend((0..3).map(|_| uniform(r, &[hidden, hidden], 0.8)));
    out.extend((0..3).map(|_| uniform(r, &[hidden], 0.5)));
    out
}

/// LSTM cell, input and hidden width 3, batch 2.
pub fn lstm_cell_error(seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let mut inputs = lstm_tensors(&mut r, 3, 3);
    for _ in 0..3 {
        inputs.push(uniform(&mut r, &[2, 3], 1.0));
    }
    let report = grad_check_many(
        |_, v| {
            let (h, c) = lstm_cell(v[12], v[13], v[14], &lstm_params(v))?;
            probe(h, 1)?.add(probe(c, 2)?)
        },
        &inputs,
        GRAD_EPS,
    )?;
    Ok(report.max_rel_error)
}

/// GRU cell, input 4, hidden 5, batch 2.
pub fn gru_cell_error(seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let mut inputs = gru_tensors(&mut r, 4, 5);
    inputs.push(uniform(&mut r, &[2, 4], 1.0));
    inputs.push(uniform(&mut r, &[2, 5], 1.0));
    let report = grad_check_many(
        |_, v| probe(gru_cell(v[9], v[10], &gru_params(v))?, 3),
        &inputs,
        GRAD_EPS,
    )?;
    Ok(report.max_rel_error)
}

/// BiLSTM layer over 3 steps, input 2, hidden 3, batch 2.
pub fn bilstm_error(seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let mut inputs = lstm_tensors(&mut r, 2, 3);
    inputs.extend(lstm_tensors(&mut r, 2, 3));
    inputs.push(uniform(&mut r, &[2, 2, 3], 1.0));
    let report = grad_check_many(
        |_, v| {
            let seq = time_steps(v[24])?;
            let out = bilstm_layer(&seq, &lstm_params(&v[..12]), &lstm_params(&v[12..24]))?;
            let mut total = probe(out[0], 0)?;
            for (t, o) in out.iter().enumerate().skip(1) {
                total = total.add(probe(*o, t)?)?;
            }
            Ok(total)
        },
        &inputs,
        GRAD_EPS,
    )?;
    Ok(report.max_rel_error)
}

/// conv1d with bias and tanh, strided and padded.
pub fn conv1d_error(seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let inputs = vec![
        uniform(&mut r, &[2, 3, 9], 1.0),
        uniform(&mut r, &[4, 3, 3], 0.6),
        uniform(&mut r, &[4], 0.3),
    ];
    let padding = if seed % 2 == 0 { Padding::Same } else { Padding::Valid };
    let stride = 1 + (seed % 2) as usize;
    let report = grad_check_many(
        |_, v| probe(v[0].conv1d(v[1], stride, padding)?.add_bias(v[2])?.tanh()?, 5),
        &inputs,
        GRAD_EPS,
    )?;
    Ok(report.max_rel_error)
}

/// Dense layer, softmax and mean cross-entropy.
pub fn dense_ce_error(seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let inputs = vec![
        uniform(&mut r, &[4, 5], 1.0),
        uniform(&mut r, &[3, 5], 1.0),
        uniform(&mut r, &[3], 0.5),
    ];
    let labels: Vec<usize> = (0..4).map(|_| r.gen_range(0..3)).collect();
    let report = grad_check_many(
        |_, v| v[0].linear(v[1], Some(v[2]))?.cross_entropy_with_logits(&labels),
        &inputs,
        GRAD_EPS,
    )?;
    Ok(report.max_rel_error)
}

/// Explicit softmax followed by `-log p[label]`, as a second route to the
/// same loss.
pub fn softmax_log_error(seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let inputs = vec![uniform(&mut r, &[3, 4], 2.0)];
    let report = grad_check_many(
        |g: &Graph, v| {
            let mask = Tensor::from_fn(&[3, 4], |i| if i % 4 == (i / 4) % 4 { -1.0 } else { 0.0 });
            v[0].softmax()?.log()?.mul(g.constant(mask))?.sum()
        },
        &inputs,
        GRAD_EPS,
    )?;
    Ok(report.max_rel_error)
}

pub type Case = (&'static str, fn(u64) -> Result<f64>);

pub const GRAD_CASES: [Case; 5] = [
    ("lstm cell", lstm_cell_error),
    ("gru cell", gru_cell_error),
    ("bilstm layer (3 steps)", bilstm_error),
    ("conv1d", conv1d_error),
    ("dense + softmax + cross-entropy", dense_ce_error),
];

/// `Σ x[n]·e^{−2πikn/N}` by direct summation.
pub fn direct_dft(x: &[f64]) -> Vec<num_complex::Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(j, &v)| {
                    let angle = -2.0 * std::f64::consts::PI * ((k * j) % n) as f64 / n as f64;
                    num_complex::Complex64::from_polar(v, angle)
                })
                .sum()
        })
        .collect()
}

/// Audio-EQ-cookbook high-pass with `Q = 1/√2`, normalized by `a0`.
pub fn cookbook_highpass(cutoff_hz: f64, sample_rate_hz: f64) -> ([f64; 3], [f64; 2]) {
    let w0 = 2.0 * std::f64::consts::PI * cutoff_hz / sample_rate_hz;
    let alpha = w0.sin() / (2.0 * std::f64::consts::FRAC_1_SQRT_2);
    let cos = w0.cos();
    let a0 = 1.0 + alpha;
    (
        [(1.0 + cos) / 2.0 / a0, -(1.0 + cos) / a0, (1.0 + cos) / 2.0 / a0],
        [-2.0 * cos / a0, (1.0 - alpha) / a0],
    )
}

/// Magnitude of the prewarped second-order Butterworth high-pass:
/// `|H|² = Ω⁴ / (1 + Ω⁴)` with `Ω = tan(πf/fs) / tan(πfc/fs)`.
pub fn butterworth_highpass_gain(freq_hz: f64, cutoff_hz: f64, sample_rate_hz: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let omega = (pi * freq_hz / sample_rate_hz).tan() / (pi * cutoff_hz / sample_rate_hz).tan();
    let o4 = omega.powi(4);
    (o4 / (1.0 + o4)).sqrt()
}

pub const FILTER_PROBES_HZ: [f64; 10] = [0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0, 15.0, 30.0, 45.0];
