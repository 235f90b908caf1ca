use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub length: usize,
    pub stride: usize,
}

impl WindowSpec {
    pub fn new(length: usize, stride: usize) -> Result<Self> {
        let spec = Self { length, stride };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 || self.stride == 0 {
            return Err(Error::Spec("window length and stride must be positive".into()));
        }
        if self.stride > self.length {
            return Err(Error::Spec(format!(
                "stride {} exceeds window length {}; windows would leave gaps",
                self.stride, self.length
            )));
        }
        Ok(())
    }

    /// `floor((T − length) / stride) + 1`, or 0 when `T < length`.
    pub fn count(&self, time: usize) -> usize {
        if time < self.length {
            0
        } else {
            (time - self.length) / self.stride + 1
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    /// Start index in the source series.
    pub offset: usize,
    pub tensor: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Windows {
    pub windows: Vec<Window>,
    /// Set when the series was shorter than one window.
    pub too_short: bool,
}

/// Segment a `[channels × time]` series into fixed-length windows.
///
/// Windows start at `0, stride, 2·stride, …`; a trailing remainder that does
/// not fill a window is dropped.
pub fn sliding_windows(series: &Tensor, spec: &WindowSpec) -> Result<Windows> {
    spec.validate()?;
    let [channels, time] = *series.shape() else {
        return Err(Error::Contract(format!(
            "sliding_windows expects [channels x time], got {:?}",
            series.shape()
        )));
    };
    let count = spec.count(time);
    let windows = (0..count)
        .map(|w| {
            let offset = w * spec.stride;
            let mut data = Vec::with_capacity(channels * spec.length);
            for row in series.data().chunks_exact(time) {
                data.extend_from_slice(&row[offset..offset + spec.length]);
            }
            Window {
                offset,
                tensor: Tensor::new(&[channels, spec.length], data).expect("window shape"),
            }
        })
        .collect();
    Ok(Windows {
        windows,
        too_short: count == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(c: usize, t: usize) -> Tensor {
        Tensor::from_fn(&[c, t], |i| i as f64)
    }

    #[test]
    fn ten_by_four_by_two() {
        let w = sliding_windows(&ramp(1, 10), &WindowSpec::new(4, 2).unwrap()).unwrap();
        let offsets: Vec<_> = w.windows.iter().map(|w| w.offset).collect();
        assert_eq!(offsets, vec![0, 2, 4, 6]);
        assert_eq!(w.windows[3].tensor.data(), &[6.0, 7.0, 8.0, 9.0]);
    }

    #[test]
    fn full_length_window() {
        let w = sliding_windows(&ramp(2, 7), &WindowSpec::new(7, 3).unwrap()).unwrap();
        assert_eq!(w.windows.len(), 1);
        assert_eq!(w.windows[0].tensor, ramp(2, 7));
    }

    #[test]
    fn ut_har_like_count() {
        assert_eq!(WindowSpec::new(50, 25).unwrap().count(250), 9);
    }

    #[test]
    fn short_series_flags_instead_of_failing() {
        let w = sliding_windows(&ramp(1, 3), &WindowSpec::new(4, 2).unwrap()).unwrap();
        assert!(w.too_short);
        assert!(w.windows.is_empty());
    }

    #[test]
    fn gaps_rejected() {
        assert!(WindowSpec::new(4, 5).is_err());
    }
}
