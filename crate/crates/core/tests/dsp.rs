mod common;

use std::f64::consts::PI;

use common::{butterworth_highpass_gain, cookbook_highpass, direct_dft, FILTER_PROBES_HZ};
use csi_har::dsp::{
    detrend, dft, dft_complex, doppler_spectrogram, haar_dwt, highpass, idft, magnitude_spectrum,
    normalize, sliding_windows, unwrap_phase, zscore, Biquad, FilterSpec, NormalizeMode, Pipeline,
    SpectrogramSpec, Step, WindowSpec,
};
use csi_har::tensor::Tensor;
use csi_har::Error;
use num_complex::Complex64;
use proptest::collection::vec;
use proptest::prelude::*;

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn fast_dft_matches_direct_sum_for_every_length() {
    let mut r = common::rng(11);
    for n in 8..=256 {
        let x = common::uniform(&mut r, &[n], 1.0).into_data();
        let err = max_diff(&dft(&x), &direct_dft(&x));
        assert!(err < 1e-9, "n = {n}: {err}");
    }
}

proptest! {
    #[test]
    fn parseval(x in vec(-5.0f64..5.0, 1..200)) {
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = dft(&x).iter().map(|c| c.norm_sqr()).sum::<f64>() / x.len() as f64;
        prop_assert!((time - freq).abs() <= 1e-9 * time.max(1.0));
    }

    #[test]
    fn linearity(x in vec(-1.0f64..1.0, 64), y in vec(-1.0f64..1.0, 64), a in -3.0f64..3.0) {
        let mixed: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + v).collect();
        let lhs = dft(&mixed);
        let rhs: Vec<Complex64> = dft(&x).iter().zip(dft(&y)).map(|(u, v)| u * a + v).collect();
        prop_assert!(max_diff(&lhs, &rhs) < 1e-9);
    }

    #[test]
    fn real_input_is_conjugate_symmetric(x in vec(-1.0f64..1.0, 2..130)) {
        let s = dft(&x);
        let n = x.len();
        for k in 1..n {
            prop_assert!((s[k] - s[n - k].conj()).norm() < 1e-9);
        }
    }

    #[test]
    fn inverse_round_trips(x in vec(-2.0f64..2.0, 1..100)) {
        let c: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, -v * 0.5)).collect();
        prop_assert!(max_diff(&idft(&dft_complex(&c)), &c) < 1e-9);
    }

    #[test]
    fn haar_round_trips_and_keeps_energy(x in vec(-10.0f64..10.0, 16..300), levels in 1usize..4) {
        let bands = haar_dwt(&x, levels).unwrap();
        let back = bands.reconstruct();
        prop_assert_eq!(back.len(), x.len());
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        if !bands.was_padded() {
            let energy: f64 = x.iter().map(|v| v * v).sum();
            prop_assert!((bands.energy() - energy).abs() < 1e-9 * energy.max(1.0));
        }
    }

    #[test]
    fn unwrap_removes_jumps(steps in vec(-3.0f64..3.0, 1..80), start in -3.0f64..3.0) {
        // cumulative phase with increments below π, then wrapped
        let mut truth = vec![start];
        for d in &steps {
            truth.push(truth.last().unwrap() + d);
        }
        let wrapped: Vec<f64> = truth.iter().map(|v| (v + PI).rem_euclid(2.0 * PI) - PI).collect();
        let out = unwrap_phase(&wrapped);
        for w in out.windows(2) {
            prop_assert!((w[1] - w[0]).abs() <= PI + 1e-12);
        }
        let offset = out[0] - truth[0];
        for (o, t) in out.iter().zip(&truth) {
            let d = o - t - offset;
            prop_assert!(d.abs() < 1e-9, "{d}");
        }
    }

    #[test]
    fn zscore_moments(x in vec(-100.0f64..100.0, 2..200)) {
        let z = zscore(&x);
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!(var == 0.0 || (var - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sliding_window_count_and_content(time in 1usize..400, length in 1usize..100, stride_frac in 0.01f64..1.0) {
        let stride = ((length as f64 * stride_frac).ceil() as usize).max(1);
        let series = Tensor::from_fn(&[2, time], |i| i as f64);
        let spec = WindowSpec::new(length, stride).unwrap();
        let w = sliding_windows(&series, &spec).unwrap();
        let expected = if time < length { 0 } else { (time - length) / stride + 1 };
        prop_assert_eq!(w.windows.len(), expected);
        prop_assert_eq!(w.too_short, time < length);
        for win in &w.windows {
            prop_assert_eq!(win.tensor.data()[0], win.offset as f64);
            prop_assert_eq!(win.tensor.data()[length], (time + win.offset) as f64);
        }
    }
}

#[test]
fn pure_tone_peaks_at_its_bin() {
    let n = 128;
    for bin in [1, 5, 17, 40, 63] {
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * bin as f64 * i as f64 / n as f64).cos()).collect();
        let mag = magnitude_spectrum(&x);
        let peak = mag.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(peak, bin);
        assert!((mag[bin] - 0.5).abs() < 1e-9);
    }
}

#[test]
fn butterworth_matches_cookbook_design() {
    for (fc, fs) in [(2.0, 100.0), (2.0, 1000.0), (10.0, 250.0), (0.3, 20.0)] {
        let ours = Biquad::butterworth_highpass(&FilterSpec::new(fc, fs).unwrap()).unwrap();
        let (b, a) = cookbook_highpass(fc, fs);
        for i in 0..3 {
            assert!((ours.b[i] - b[i]).abs() < 1e-12, "b{i} at {fc}/{fs}");
        }
        for i in 0..2 {
            assert!((ours.a[i] - a[i]).abs() < 1e-12, "a{i} at {fc}/{fs}");
        }
    }
}

#[test]
fn highpass_response_matches_analytic_gain() {
    let (fc, fs) = (2.0, 100.0);
    let q = Biquad::butterworth_highpass(&FilterSpec::new(fc, fs).unwrap()).unwrap();
    for f in FILTER_PROBES_HZ {
        let ours = q.response(f, fs).norm();
        let want = butterworth_highpass_gain(f, fc, fs);
        assert!((ours - want).abs() <= 0.01 * want, "{f} Hz: {ours} vs {want}");
    }
    assert!((q.response(fc, fs).norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
}

#[test]
fn highpass_removes_dc_and_keeps_high_tones() {
    let fs = 100.0;
    let spec = FilterSpec::new(2.0, fs).unwrap();
    let dc = highpass(&vec![3.0; 2000], &spec).unwrap();
    assert!(dc[1000..].iter().all(|v| v.abs() < 1e-3));

    let tone: Vec<f64> = (0..4000).map(|i| (2.0 * PI * 20.0 * i as f64 / fs).sin()).collect();
    let out = highpass(&tone, &spec).unwrap();
    let tail = &out[2000..];
    let amp = (2.0 * tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64).sqrt();
    let want = butterworth_highpass_gain(20.0, 2.0, fs);
    assert!((amp - want).abs() < 0.01 * want, "{amp} vs {want}");
}

#[test]
fn highpass_rejects_bad_cutoff() {
    assert!(matches!(FilterSpec::new(60.0, 100.0), Err(Error::Spec(_))));
    assert!(matches!(FilterSpec::new(0.0, 100.0), Err(Error::Spec(_))));
    assert!(matches!(FilterSpec::new(1.0, -5.0), Err(Error::Spec(_))));
}

#[test]
fn haar_of_constant_has_zero_details() {
    let bands = haar_dwt(&[2.0; 32], 3).unwrap();
    assert!(bands.details.iter().flatten().all(|d| d.abs() < 1e-12));
    assert_eq!(bands.approx.len(), 4);
}

#[test]
fn detrend_removes_lines() {
    let x: Vec<f64> = (0..50).map(|i| 3.0 * i as f64 - 7.0).collect();
    assert!(detrend(&x).iter().all(|v| v.abs() < 1e-9));
}

#[test]
fn phase_normalization_is_offset_invariant() {
    let t = 64;
    let sample = Tensor::from_fn(&[2, t], |i| {
        let k = (i % t) as f64;
        if i < t { (0.3 * k).sin() + 2.0 } else { (0.2 * k + 0.1 * (0.5 * k).sin()).rem_euclid(2.0 * PI) - PI }
    });
    let shifted = Tensor::from_fn(&[2, t], |i| {
        let v = sample.data()[i];
        if i < t { v } else { (v + PI + 1.3).rem_euclid(2.0 * PI) - PI }
    });
    let mode = NormalizeMode::AmplitudePhaseZscore { phase_from: 1 };
    let a = normalize(&sample, mode).unwrap();
    let b = normalize(&shifted, mode).unwrap();
    assert!(a.max_abs_diff(&b) < 1e-9);
}

#[test]
fn doppler_tone_lands_on_its_bin() {
    let (n, fs, bin) = (64usize, 64.0, 8usize);
    let window = Tensor::from_fn(&[3, 256], |i| (2.0 * PI * bin as f64 * (i % 256) as f64 / fs).cos());
    let spec = SpectrogramSpec::new(n, 32).unwrap();
    let s = doppler_spectrogram(&window, &spec).unwrap();
    assert_eq!(s.shape(), &[33, 7]);
    for f in 0..7 {
        let col: Vec<f64> = (0..33).map(|k| s.data()[k * 7 + f]).collect();
        let peak = col.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(peak, bin);
        assert!((col[bin] - 0.5).abs() < 1e-9);
    }
}

#[test]
fn pipeline_shapes_and_lineage() {
    let steps: Vec<Step> = serde_json::from_str(
        r#"[{"step": "highpass", "sample_rate_hz": 100.0},
            {"step": "normalize", "mode": "amplitude_zscore"},
            {"step": "sliding_window", "length": 100, "stride": 50},
            {"step": "doppler", "fft_size": 32, "hop": 16}]"#,
    )
    .unwrap();
    let p = Pipeline::new(steps).unwrap();
    assert_eq!(p.output_shape((4, 300)).unwrap(), (17, 5));
    let x = Tensor::from_fn(&[4, 300], |i| ((i * 31) % 17) as f64);
    let segs = p.apply(&x).unwrap();
    assert_eq!(segs.len(), 5);
    assert_eq!(segs[2].id_suffix(), "#w100");
    assert!(segs.iter().all(|s| s.tensor.shape() == [17, 5]));
}

#[test]
fn unknown_step_is_rejected() {
    assert!(serde_json::from_str::<Step>(r#"{"step": "bandpass"}"#).is_err());
    assert!(serde_json::from_str::<Step>(r#"{"step": "haar", "levels": 2, "extra": 1}"#).is_err());
}
