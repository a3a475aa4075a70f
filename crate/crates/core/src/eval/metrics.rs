use std::fmt;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let n = labels.len();
        Self {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn from_pairs(labels: Vec<String>, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut cm = Self::new(labels);
        for (t, p) in pairs {
            cm.record(t, p);
        }
        cm
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_total(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    /// Absent for an empty matrix.
    pub fn overall_accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| self.trace() as f64 / total as f64)
    }

    /// Recall of each class; absent for classes with no true examples.
    pub fn per_class_accuracy(&self) -> Vec<Option<f64>> {
        (0..self.labels.len())
            .map(|i| {
                let row = self.row_total(i);
                (row > 0).then(|| self.counts[i][i] as f64 / row as f64)
            })
            .collect()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .labels
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max(6);
        let cell = self
            .counts
            .iter()
            .flatten()
            .map(|c| c.to_string().len())
            .max()
            .unwrap_or(1)
            .max(3);
        write!(f, "{:width$}", "true\\pred")?;
        for i in 0..self.labels.len() {
            write!(f, " {:>cell$}", format!("c{i}"))?;
        }
        writeln!(f, "  recall")?;
        let recalls = self.per_class_accuracy();
        for (i, row) in self.counts.iter().enumerate() {
            write!(f, "{:width$}", self.labels[i])?;
            for c in row {
                write!(f, " {c:>cell$}")?;
            }
            match recalls[i] {
                Some(r) => writeln!(f, "  {:6.2}%", r * 100.0)?,
                None => writeln!(f, "       -")?,
            }
        }
        for (i, l) in self.labels.iter().enumerate() {
            writeln!(f, "  c{i} = {l}")?;
        }
        Ok(())
    }
}

/// Fall-vs-rest detection rates. Each is absent when its denominator is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FallMetrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

/// Collapses the matrix to fall vs non-fall: sensitivity = TP/(TP+FN),
/// specificity = TN/(TN+FP).
pub fn fall_metrics(cm: &ConfusionMatrix, fall_label: &str) -> Result<FallMetrics, EvalError> {
    let f = cm
        .index_of(fall_label)
        .ok_or_else(|| EvalError::UnknownLabel(fall_label.to_string()))?;
    let n = cm.labels.len();
    let tp = cm.counts[f][f];
    let fn_ = cm.row_total(f) - tp;
    let fp: u64 = (0..n).filter(|&i| i != f).map(|i| cm.counts[i][f]).sum();
    let non_fall: u64 = (0..n).filter(|&i| i != f).map(|i| cm.row_total(i)).sum();
    let tn = non_fall - fp;
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    Ok(FallMetrics {
        sensitivity: ratio(tp, tp + fn_),
        specificity: ratio(tn, tn + fp),
    })
}

/// Formats a rate as a percentage with two decimals, `-` when absent.
pub fn percent(rate: Option<f64>) -> String {
    match rate {
        Some(r) => format!("{:.2}%", r * 100.0),
        None => "-".to_string(),
    }
}
