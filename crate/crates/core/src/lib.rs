//! Workbench for WiFi channel-state-information (CSI) human activity
//! recognition.
//!
//! The crate covers the whole experiment path:
//!
//! * [`tensor`]: dense tensors with reverse-mode automatic differentiation.
//! * [`dsp`]: high-pass filtering, normalization, DFT, Haar wavelets, Doppler
//!   spectrograms and sliding-window segmentation.
//! * [`data`]: the dataset model, its on-disk interchange format and a seeded
//!   synthetic CSI generator.
//! * [`models`]: LSTM/GRU cells, convolution, and the BiLSTM and CNN+GRU
//!   classifiers.
//! * [`training`]: cross-entropy, Adam, early stopping and checkpoints.
//! * [`eval`]: confusion matrices, macro metrics, reports and the inference
//!   benchmark.
//! * [`experiment`]: the JSON experiment configuration driving the CLI.

pub mod data;
pub mod dsp;
mod error;
pub mod eval;
pub mod experiment;
pub mod models;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/autodiff.md")]
    mod autodiff {}
    #[doc = include_str!("../../../book/src/dsp.md")]
    mod dsp {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
