//! Confusion matrices, percentage metrics with macro averaging, report
//! files and the inference benchmark.
//!
//! ```
//! use csi_har::eval::{confusion, metrics};
//!
//! let cm = confusion(&[0, 0, 1, 1], &[0, 1, 1, 1], 2)?;
//! assert_eq!(cm.counts, vec![vec![1, 0], vec![1, 2]]);
//! let m = metrics(&cm)?;
//! assert_eq!(m.accuracy, 75.0);
//! assert_eq!(m.per_class[1].precision, 100.0);
//! # Ok::<(), csi_har::Error>(())
//! ```

mod bench;
mod metrics;
mod report;

use crate::data::CsiSample;
use crate::error::Result;
use crate::models::Model;
use crate::training::evaluate_samples;

pub use bench::{benchmark_inference, memory_footprint, percentile, Benchmark, MIN_REPETITIONS, MIN_WARMUP};
pub use metrics::{confusion, f1_score, macro_average, metrics, ClassMetrics, ConfusionMatrix, Metrics};
pub use report::{
    compare, confusion_csv, export_report, read_report, Comparison, ComparisonRow, EvalReport,
    ReportFormat, TABLE_HEADER,
};

/// Predict every sample and summarize against its label.
pub fn evaluate(
    model: &Model,
    samples: &[CsiSample],
    classes: &[String],
    dataset: &str,
    split: &str,
) -> Result<EvalReport> {
    let (_, _, preds) = evaluate_samples(model, samples)?;
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let cm = confusion(&preds, &labels, classes.len())?.with_classes(classes.to_vec())?;
    Ok(EvalReport {
        model: model.config().kind.as_str().to_string(),
        dataset: dataset.to_string(),
        split: split.to_string(),
        metrics: metrics(&cm)?,
        confusion: Some(cm),
        benchmark: None,
    })
}
