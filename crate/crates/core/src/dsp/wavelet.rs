use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

/// Multi-level Haar decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarBands {
    /// Coarsest approximation band.
    pub approx: Vec<f64>,
    /// Detail bands, finest (level 1) first.
    pub details: Vec<Vec<f64>>,
    /// Length of the series before edge padding.
    pub original_len: usize,
    /// Length after padding to a multiple of `2^levels`.
    pub padded_len: usize,
}

impl HaarBands {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    pub fn was_padded(&self) -> bool {
        self.padded_len != self.original_len
    }

    pub fn energy(&self) -> f64 {
        self.approx
            .iter()
            .chain(self.details.iter().flatten())
            .map(|v| v * v)
            .sum()
    }

    /// Coefficients laid out as `[approx, detail_L, …, detail_1]`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.approx.clone();
        for d in self.details.iter().rev() {
            out.extend_from_slice(d);
        }
        out
    }

    /// Inverse transform of the padded series.
    pub fn reconstruct_padded(&self) -> Vec<f64> {
        let mut approx = self.approx.clone();
        for detail in self.details.iter().rev() {
            approx = approx
                .iter()
                .zip(detail)
                .flat_map(|(&a, &d)| [(a + d) * FRAC_1_SQRT_2, (a - d) * FRAC_1_SQRT_2])
                .collect();
        }
        approx
    }

    /// Inverse transform truncated to the original length.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut x = self.reconstruct_padded();
        x.truncate(self.original_len);
        x
    }
}

/// Haar DWT with `levels` levels.
///
/// Lengths not divisible by `2^levels` are padded by repeating the last
/// sample. `levels` must be at least 1 and `2^levels` may not exceed the
/// next power of two of the signal length.
pub fn haar_dwt(signal: &[f64], levels: usize) -> Result<HaarBands> {
    if signal.is_empty() {
        return Err(Error::Spec("haar_dwt of an empty series".into()));
    }
    if levels == 0 || levels >= usize::BITS as usize {
        return Err(Error::Spec(format!("haar_dwt levels must be >= 1, got {levels}")));
    }
    let block = 1usize << levels;
    if block > signal.len().next_power_of_two() {
        return Err(Error::Spec(format!(
            "{levels} Haar levels need at least {} samples, series has {}",
            block / 2 + 1,
            signal.len()
        )));
    }
    let padded_len = signal.len().div_ceil(block) * block;
    let mut approx = signal.to_vec();
    approx.resize(padded_len, *signal.last().unwrap());

    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (a, d): (Vec<f64>, Vec<f64>) = approx
            .chunks_exact(2)
            .map(|p| ((p[0] + p[1]) * FRAC_1_SQRT_2, (p[0] - p[1]) * FRAC_1_SQRT_2))
            .unzip();
        details.push(d);
        approx = a;
    }
    Ok(HaarBands {
        approx,
        details,
        original_len: signal.len(),
        padded_len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_pair() {
        let b = haar_dwt(&[2.0, 4.0], 1).unwrap();
        assert!((b.approx[0] - 3.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!((b.details[0][0] + std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn constant_series_has_no_detail() {
        let b = haar_dwt(&[1.7; 16], 3).unwrap();
        assert!(b.details.iter().flatten().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn padding_is_recorded() {
        let b = haar_dwt(&[1.0, 2.0, 3.0, 4.0, 5.0], 2).unwrap();
        assert!(b.was_padded());
        assert_eq!(b.padded_len, 8);
        let r = b.reconstruct();
        for (a, e) in r.iter().zip([1.0, 2.0, 3.0, 4.0, 5.0]) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn too_many_levels_rejected() {
        assert!(haar_dwt(&[1.0, 2.0, 3.0], 3).is_err());
        assert!(haar_dwt(&[1.0, 2.0, 3.0], 2).is_ok());
        assert!(haar_dwt(&[1.0, 2.0], 0).is_err());
    }
}
