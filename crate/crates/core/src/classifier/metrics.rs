use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Multiclass evaluation summary. Confusion rows are true classes, columns
/// predicted classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub f1_macro: f64,
    pub f1_micro: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl Metrics {
    pub fn from_confusion(confusion: Vec<Vec<usize>>) -> Result<Self> {
        let n = confusion.len();
        if confusion.iter().any(|row| row.len() != n) {
            return Err(Error::Shape("confusion matrix must be square".into()));
        }
        let total: usize = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(Error::Empty("evaluation over an empty set"));
        }
        let mut per_class = Vec::with_capacity(n);
        let (mut tp_all, mut fp_all, mut fn_all) = (0, 0, 0);
        for c in 0..n {
            let tp = confusion[c][c];
            let predicted: usize = confusion.iter().map(|row| row[c]).sum();
            let support: usize = confusion[c].iter().sum();
            let (fp, fneg) = (predicted - tp, support - tp);
            tp_all += tp;
            fp_all += fp;
            fn_all += fneg;
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fneg);
            per_class.push(ClassMetrics {
                precision,
                recall,
                f1: f1(precision, recall),
                support,
            });
        }
        let trace: usize = (0..n).map(|c| confusion[c][c]).sum();
        let micro_p = ratio(tp_all, tp_all + fp_all);
        let micro_r = ratio(tp_all, tp_all + fn_all);
        Ok(Metrics {
            accuracy: ratio(trace, total),
            f1_macro: per_class.iter().map(|m| m.f1).sum::<f64>() / n as f64,
            f1_micro: f1(micro_p, micro_r),
            per_class,
            confusion,
        })
    }

    pub fn from_predictions(truth: &[usize], predicted: &[usize], n_classes: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Shape(format!("{} labels vs {} predictions", truth.len(), predicted.len())));
        }
        let mut confusion = vec![vec![0; n_classes]; n_classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= n_classes || p >= n_classes {
                return Err(Error::OutOfRange {
                    index: t.max(p),
                    size: n_classes,
                });
            }
            confusion[t][p] += 1;
        }
        Self::from_confusion(confusion)
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    /// Confusion matrix as CSV with class names on both axes.
    pub fn confusion_csv(&self) -> String {
        let name = |i: usize| Label::from_index(i).map_or_else(|| i.to_string(), |l| l.to_string());
        let n = self.confusion.len();
        let mut out = String::from("true\\predicted");
        for c in 0..n {
            out.push(',');
            out.push_str(&name(c));
        }
        out.push('\n');
        for (r, row) in self.confusion.iter().enumerate() {
            out.push_str(&name(r));
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_report(&self, json_path: &Path, csv_path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(json_path, json).map_err(|e| Error::io(json_path, e))?;
        std::fs::write(csv_path, self.confusion_csv()).map_err(|e| Error::io(csv_path, e))
    }
}
