use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `counts[t][p]`: samples of true class `t` predicted as `p`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: Vec<String>) -> Self {
        let k = classes.len();
        Self {
            classes,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|c| self.counts[c][c]).sum()
    }

    /// Samples whose true class is `c`.
    pub fn support(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    /// Samples predicted as `c`.
    pub fn predicted(&self, c: usize) -> u64 {
        self.counts.iter().map(|row| row[c]).sum()
    }

    pub fn with_classes(mut self, classes: Vec<String>) -> Result<Self> {
        if classes.len() != self.n_classes() {
            return Err(Error::Contract(format!(
                "{} class names for a {}-class matrix",
                classes.len(),
                self.n_classes()
            )));
        }
        self.classes = classes;
        Ok(self)
    }
}

/// Tally predictions against labels. Classes are named `0 … K−1`.
pub fn confusion(predictions: &[usize], labels: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut cm = ConfusionMatrix::zeros((0..k).map(|c| c.to_string()).collect());
    for (&p, &t) in predictions.iter().zip(labels) {
        if p >= k || t >= k {
            return Err(Error::Contract(format!(
                "class index {} out of range for {k} classes",
                p.max(t)
            )));
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Percentages: per class and unweighted macro averages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// `class:metric` entries whose denominator was zero and were set to 0.
    pub undefined: Vec<String>,
}

fn ratio(num: u64, den: u64, flag: String, undefined: &mut Vec<String>) -> f64 {
    if den == 0 {
        undefined.push(flag);
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Harmonic mean of two percentages; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Precision, recall and F1 per class plus accuracy and macro averages.
pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Contract("metrics of an empty confusion matrix".into()));
    }
    let mut undefined = Vec::new();
    let per_class: Vec<ClassMetrics> = (0..cm.n_classes())
        .map(|c| {
            let tp = cm.counts[c][c];
            let name = &cm.classes[c];
            let precision = ratio(tp, cm.predicted(c), format!("{name}:precision"), &mut undefined);
            let recall = ratio(tp, cm.support(c), format!("{name}:recall"), &mut undefined);
            if precision + recall == 0.0 {
                undefined.push(format!("{name}:f1"));
            }
            ClassMetrics {
                class: name.clone(),
                support: cm.support(c),
                precision,
                recall,
                f1: f1_score(precision, recall),
            }
        })
        .collect();
    Ok(Metrics {
        accuracy: 100.0 * cm.trace() as f64 / total as f64,
        macro_precision: mean(per_class.iter().map(|m| m.precision)),
        macro_recall: mean(per_class.iter().map(|m| m.recall)),
        macro_f1: mean(per_class.iter().map(|m| m.f1)),
        per_class,
        undefined,
    })
}

/// Macro averages of transcribed per-class values: `(precision, recall, f1)`.
pub fn macro_average(rows: &[(f64, f64, f64)]) -> (f64, f64, f64) {
    (
        mean(rows.iter().map(|r| r.0)),
        mean(rows.iter().map(|r| r.1)),
        mean(rows.iter().map(|r| r.2)),
    )
}
