use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

use super::{Benchmark, ClassMetrics, ConfusionMatrix, Metrics};

/// Header of the overall metrics columns, in table order.
pub const TABLE_HEADER: [&str; 4] = ["Accuracy(%)", "Precision(%)", "Recall(%)", "F1-Score(%)"];

/// Evaluation of one model on one split.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub model: String,
    pub dataset: String,
    pub split: String,
    pub metrics: Metrics,
    pub confusion: Option<ConfusionMatrix>,
    pub benchmark: Option<Benchmark>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    /// Flat metrics object.
    Json,
    /// Confusion matrix with class-name header row and column.
    Csv,
}

impl EvalReport {
    pub fn classes(&self) -> Vec<String> {
        self.metrics.per_class.iter().map(|c| c.class.clone()).collect()
    }

    pub fn samples(&self) -> u64 {
        self.metrics.per_class.iter().map(|c| c.support).sum()
    }

    /// Flat JSON, numbers at four decimals, keys in fixed order.
    pub fn to_json(&self) -> String {
        let mut out = String::from("{\n");
        let mut first = true;
        let mut put = |key: &str, raw: String| {
            if !first {
                out.push_str(",\n");
            }
            first = false;
            let _ = write!(out, "  {}: {raw}", quote(key));
        };
        let num = |v: f64| format!("{v:.4}");
        put("model", quote(&self.model));
        put("dataset", quote(&self.dataset));
        put("split", quote(&self.split));
        put("samples", self.samples().to_string());
        put("n_classes", self.metrics.per_class.len().to_string());
        put("accuracy", num(self.metrics.accuracy));
        put("precision", num(self.metrics.macro_precision));
        put("recall", num(self.metrics.macro_recall));
        put("f1", num(self.metrics.macro_f1));
        for (i, c) in self.metrics.per_class.iter().enumerate() {
            put(&format!("class.{i}.name"), quote(&c.class));
            put(&format!("class.{i}.support"), c.support.to_string());
            put(&format!("class.{i}.precision"), num(c.precision));
            put(&format!("class.{i}.recall"), num(c.recall));
            put(&format!("class.{i}.f1"), num(c.f1));
        }
        put("undefined_count", self.metrics.undefined.len().to_string());
        for (i, u) in self.metrics.undefined.iter().enumerate() {
            put(&format!("undefined.{i}"), quote(u));
        }
        if let Some(b) = &self.benchmark {
            put("bench_precision", quote(&b.precision));
            put("bench_repetitions", b.repetitions.to_string());
            put("bench_warmup", b.warmup.to_string());
            put("latency_mean_ms", num(b.mean_ms));
            put("latency_median_ms", num(b.median_ms));
            put("latency_p95_ms", num(b.p95_ms));
            put("param_count", b.param_count.to_string());
            put("activation_count", b.activation_count.to_string());
            put("memory_mb", num(b.memory_mb));
        }
        out.push_str("\n}\n");
        out
    }

    /// Parse [`to_json`](Self::to_json) output. The confusion matrix is not
    /// part of the JSON and comes back as `None`.
    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let obj: Map<String, Value> = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let s = |k: &str| {
            obj.get(k)
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| format!("missing string field {k:?}"))
        };
        let f = |k: &str| {
            obj.get(k)
                .and_then(Value::as_f64)
                .ok_or_else(|| format!("missing numeric field {k:?}"))
        };
        let u = |k: &str| {
            obj.get(k)
                .and_then(Value::as_u64)
                .ok_or_else(|| format!("missing integer field {k:?}"))
        };
        let k = u("n_classes")? as usize;
        let per_class = (0..k)
            .map(|i| {
                Ok(ClassMetrics {
                    class: s(&format!("class.{i}.name"))?,
                    support: u(&format!("class.{i}.support"))?,
                    precision: f(&format!("class.{i}.precision"))?,
                    recall: f(&format!("class.{i}.recall"))?,
                    f1: f(&format!("class.{i}.f1"))?,
                })
            })
            .collect::<std::result::Result<Vec<_>, String>>()?;
        let undefined = (0..u("undefined_count")?)
            .map(|i| s(&format!("undefined.{i}")))
            .collect::<std::result::Result<Vec<_>, String>>()?;
        let benchmark = if obj.contains_key("bench_precision") {
            Some(Benchmark {
                precision: s("bench_precision")?,
                repetitions: u("bench_repetitions")? as usize,
                warmup: u("bench_warmup")? as usize,
                mean_ms: f("latency_mean_ms")?,
                median_ms: f("latency_median_ms")?,
                p95_ms: f("latency_p95_ms")?,
                param_count: u("param_count")? as usize,
                activation_count: u("activation_count")? as usize,
                memory_mb: f("memory_mb")?,
            })
        } else {
            None
        };
        Ok(Self {
            model: s("model")?,
            dataset: s("dataset")?,
            split: s("split")?,
            metrics: Metrics {
                accuracy: f("accuracy")?,
                macro_precision: f("precision")?,
                macro_recall: f("recall")?,
                macro_f1: f("f1")?,
                per_class,
                undefined,
            },
            confusion: None,
            benchmark,
        })
    }
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Confusion matrix CSV; the first cell is `true\pred`.
pub fn confusion_csv(cm: &ConfusionMatrix) -> String {
    let mut out = String::from("true\\pred");
    for c in &cm.classes {
        out.push(',');
        out.push_str(&csv_field(c));
    }
    out.push('\n');
    for (name, row) in cm.classes.iter().zip(&cm.counts) {
        out.push_str(&csv_field(name));
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Write the report in `format` to `path`.
pub fn export_report(report: &EvalReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Csv => confusion_csv(
            report
                .confusion
                .as_ref()
                .ok_or_else(|| Error::Contract("report carries no confusion matrix".into()))?,
        ),
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Read a metrics JSON written by [`export_report`].
pub fn read_report(path: impl AsRef<Path>) -> Result<EvalReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EvalReport::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// One compared quantity: values of A and B and `B − A`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub metric: String,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
}

/// Side-by-side comparison of two reports over the same class roster.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub label_a: String,
    pub label_b: String,
    /// Accuracy, precision, recall and F1, in table order.
    pub overall: [ComparisonRow; 4],
    /// Per-class and benchmark rows.
    pub details: Vec<ComparisonRow>,
}

fn row(metric: impl Into<String>, a: f64, b: f64) -> ComparisonRow {
    ComparisonRow {
        metric: metric.into(),
        a,
        b,
        delta: b - a,
    }
}

/// Compare two reports; deltas are `B − A`.
pub fn compare(a: &EvalReport, b: &EvalReport) -> Result<Comparison> {
    if a.classes() != b.classes() {
        return Err(Error::Config(format!(
            "class rosters differ: {:?} vs {:?}",
            a.classes(),
            b.classes()
        )));
    }
    let (ma, mb) = (&a.metrics, &b.metrics);
    let overall = [
        row("accuracy", ma.accuracy, mb.accuracy),
        row("precision", ma.macro_precision, mb.macro_precision),
        row("recall", ma.macro_recall, mb.macro_recall),
        row("f1", ma.macro_f1, mb.macro_f1),
    ];
    let mut details = Vec::new();
    for (ca, cb) in ma.per_class.iter().zip(&mb.per_class) {
        details.push(row(format!("{}.precision", ca.class), ca.precision, cb.precision));
        details.push(row(format!("{}.recall", ca.class), ca.recall, cb.recall));
        details.push(row(format!("{}.f1", ca.class), ca.f1, cb.f1));
    }
    if let (Some(ba), Some(bb)) = (&a.benchmark, &b.benchmark) {
        details.push(row("latency_mean_ms", ba.mean_ms, bb.mean_ms));
        details.push(row("latency_median_ms", ba.median_ms, bb.median_ms));
        details.push(row("latency_p95_ms", ba.p95_ms, bb.p95_ms));
        details.push(row("memory_mb", ba.memory_mb, bb.memory_mb));
    }
    let label = |r: &EvalReport| format!("{} ({} {})", r.model, r.dataset, r.split);
    Ok(Comparison {
        label_a: label(a),
        label_b: label(b),
        overall,
        details,
    })
}

impl Comparison {
    /// Text table with the overall metrics as columns and A, B, `B − A` as
    /// rows, followed by the per-class and benchmark rows.
    pub fn render(&self) -> String {
        let labels = [
            format!("A: {}", self.label_a),
            format!("B: {}", self.label_b),
            "delta (B - A)".to_string(),
        ];
        let width = labels.iter().map(String::len).max().unwrap_or(0).max(6);
        let mut out = format!("{:<width$}", "Model");
        for h in TABLE_HEADER {
            let _ = write!(out, "  {h:>12}");
        }
        out.push('\n');
        for (i, label) in labels.iter().enumerate() {
            let _ = write!(out, "{label:<width$}");
            for r in &self.overall {
                let v = [r.a, r.b, r.delta][i];
                let _ = write!(out, "  {v:>12.4}");
            }
            out.push('\n');
        }
        if !self.details.is_empty() {
            let w = self.details.iter().map(|r| r.metric.len()).max().unwrap_or(0).max(6);
            let _ = write!(out, "\n{:<w$}  {:>12}  {:>12}  {:>12}\n", "metric", "A", "B", "B - A");
            for r in &self.details {
                let _ = writeln!(out, "{:<w$}  {:>12.4}  {:>12.4}  {:>12.4}", r.metric, r.a, r.b, r.delta);
            }
        }
        out
    }

    /// `metric,a,b,delta_b_minus_a` rows, overall metrics first.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,a,b,delta_b_minus_a\n");
        for r in self.overall.iter().chain(&self.details) {
            let _ = writeln!(out, "{},{:.4},{:.4},{:.4}", csv_field(&r.metric), r.a, r.b, r.delta);
        }
        out
    }
}
