//! CSI preprocessing: noise reduction, normalization, spectral and wavelet
//! features, Doppler profiles and sliding-window segmentation.
//!
//! Every function here is pure. Series are `&[f64]`; multi-channel samples
//! are `[channels × time]` tensors.

mod filter;
mod fourier;
mod normalize;
mod pipeline;
mod spectrogram;
mod wavelet;
mod window;

pub use filter::{highpass, Biquad, FilterSpec};
pub use fourier::{dft, dft_complex, idft, magnitude_spectrum};
pub use normalize::{detrend, normalize, unwrap_phase, zscore, NormalizeMode, DEGENERATE_STD};
pub use pipeline::{
    NormalizeKind, Pipeline, Segment, Step, DEFAULT_CUTOFF_HZ, DEFAULT_WINDOW_LENGTH,
    DEFAULT_WINDOW_STRIDE,
};
pub use spectrogram::{doppler_spectrogram, SpectrogramSpec, WindowFn};
pub use wavelet::{haar_dwt, HaarBands};
pub use window::{sliding_windows, Window, WindowSpec, Windows};
