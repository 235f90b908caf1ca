use std::f64::consts::PI;

use num_complex::Complex64;

/// `X[k] = Σ x[n]·e^{−2πikn/N}` of a real series.
///
/// Power-of-two lengths use an iterative radix-2 FFT; other lengths fall
/// back to direct evaluation.
pub fn dft(signal: &[f64]) -> Vec<Complex64> {
    let x: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(&x, false)
}

/// Forward transform of a complex series.
pub fn dft_complex(x: &[Complex64]) -> Vec<Complex64> {
    transform(x, false)
}

/// Inverse transform, scaled by `1/N`.
pub fn idft(spectrum: &[Complex64]) -> Vec<Complex64> {
    let n = spectrum.len() as f64;
    transform(spectrum, true)
        .into_iter()
        .map(|v| v / n)
        .collect()
}

fn transform(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    if n.is_power_of_two() {
        fft_radix2(x, inverse)
    } else {
        direct(x, inverse)
    }
}

fn twiddle(k: usize, n: usize, inverse: bool) -> Complex64 {
    let sign = if inverse { 1.0 } else { -1.0 };
    // reduce k·/n before scaling so large products keep full precision
    Complex64::from_polar(1.0, sign * 2.0 * PI * (k % n) as f64 / n as f64)
}

fn direct(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(j, &v)| v * twiddle(k * j, n, inverse))
                .sum()
        })
        .collect()
}

fn fft_radix2(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let mut a = x.to_vec();
    Radix2::new(x.len(), inverse).run(&mut a);
    a
}

/// Precomputed twiddles for repeated transforms of one power-of-two length.
pub(crate) struct Radix2 {
    bits: u32,
    table: Vec<Complex64>,
}

impl Radix2 {
    pub(crate) fn new(n: usize, inverse: bool) -> Self {
        debug_assert!(n.is_power_of_two());
        Self {
            bits: n.trailing_zeros(),
            table: (0..n / 2).map(|k| twiddle(k, n, inverse)).collect(),
        }
    }

    /// In-place transform; `a.len()` must equal the planned length.
    pub(crate) fn run(&self, a: &mut [Complex64]) {
        let n = a.len();
        assert_eq!(n, 1 << self.bits, "transform length differs from plan");
        if self.bits > 0 {
            for i in 0..n {
                let r = i.reverse_bits() >> (usize::BITS - self.bits);
                if r > i {
                    a.swap(i, r);
                }
            }
        }
        let mut len = 2;
        while len <= n {
            let step = n / len;
            let half = len / 2;
            for start in (0..n).step_by(len) {
                for j in 0..half {
                    let w = self.table[j * step];
                    let u = a[start + j];
                    let v = a[start + j + half] * w;
                    a[start + j] = u + v;
                    a[start + j + half] = u - v;
                }
            }
            len <<= 1;
        }
    }
}

/// One-sided magnitude spectrum `|X[k]| / N` for `k = 0..=N/2`.
pub fn magnitude_spectrum(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    let scale = 1.0 / n as f64;
    dft(signal)
        .into_iter()
        .take(n / 2 + 1)
        .map(|c| c.norm() * scale)
        .collect()
}
