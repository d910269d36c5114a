//! Confusion matrices and per-class / macro / overall classification
//! metrics. A ratio with a zero denominator is reported as undefined
//! (`None`), never as zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{truth} true labels but {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelRange { label: usize, classes: usize },
    #[error("confusion matrix is empty")]
    Empty,
    #[error("{0} class names for a {1}-class matrix")]
    Names(usize, usize),
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

/// Rows are ground truth, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>) -> Self {
        let c = class_names.len();
        Self { class_names, counts: vec![vec![0; c]; c] }
    }

    pub fn from_counts(class_names: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let c = class_names.len();
        if counts.len() != c || counts.iter().any(|r| r.len() != c) {
            return Err(MetricsError::Names(c, counts.len()));
        }
        Ok(Self { class_names, counts })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn add(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let classes = self.classes();
        for label in [truth, predicted] {
            if label >= classes {
                return Err(MetricsError::LabelRange { label, classes });
            }
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    /// Header row of predicted class names, then one row per true class.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["truth\\predicted".to_string()];
        header.extend(self.class_names.iter().cloned());
        w.write_record(&header).expect("in-memory csv");
        for (name, row) in self.class_names.iter().zip(&self.counts) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(u64::to_string));
            w.write_record(&rec).expect("in-memory csv");
        }
        w.into_inner().expect("in-memory csv")
    }
}

pub fn confusion(truth: &[usize], predicted: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    confusion_named(truth, predicted, (0..classes).map(|c| c.to_string()).collect())
}

pub fn confusion_named(
    truth: &[usize],
    predicted: &[usize],
    class_names: Vec<String>,
) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch { truth: truth.len(), predicted: predicted.len() });
    }
    let mut cm = ConfusionMatrix::new(class_names);
    for (&t, &p) in truth.iter().zip(predicted) {
        cm.add(t, p)?;
    }
    Ok(cm)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Harmonic mean of precision and sensitivity; undefined if either is, or
/// if both are zero.
pub fn f1_score(ppv: Option<f64>, sen: Option<f64>) -> Option<f64> {
    let (p, s) = (ppv?, sen?);
    (p + s > 0.0).then(|| 2.0 * p * s / (p + s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub ppv: Option<f64>,
    pub sen: Option<f64>,
    pub f1: Option<f64>,
}

pub fn per_class(cm: &ConfusionMatrix, k: usize) -> ClassMetrics {
    let tp = cm.counts[k][k];
    let row: u64 = cm.counts[k].iter().sum();
    let col: u64 = cm.counts.iter().map(|r| r[k]).sum();
    let ppv = ratio(tp, col);
    let sen = ratio(tp, row);
    ClassMetrics { ppv, sen, f1: f1_score(ppv, sen) }
}

/// Classes left out of each macro average because the value was undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Excluded {
    pub ppv: usize,
    pub sen: usize,
    pub f1: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overall {
    pub accuracy: f64,
    pub macro_ppv: Option<f64>,
    pub macro_sen: Option<f64>,
    pub macro_f1: Option<f64>,
    pub excluded: Excluded,
    pub total: u64,
}

/// Mean of the defined values and the number of undefined ones.
pub fn macro_mean(values: impl IntoIterator<Item = Option<f64>>) -> (Option<f64>, usize) {
    let (mut sum, mut n, mut skipped) = (0.0, 0usize, 0usize);
    for v in values {
        match v {
            Some(x) => {
                sum += x;
                n += 1;
            }
            None => skipped += 1,
        }
    }
    ((n > 0).then(|| sum / n as f64), skipped)
}

/// Accuracy is trace over total; macro values average the per-class
/// metrics that are defined.
pub fn overall(cm: &ConfusionMatrix) -> Result<Overall> {
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::Empty);
    }
    let trace: u64 = (0..cm.classes()).map(|k| cm.counts[k][k]).sum();
    let per: Vec<ClassMetrics> = (0..cm.classes()).map(|k| per_class(cm, k)).collect();
    let (macro_ppv, ex_ppv) = macro_mean(per.iter().map(|m| m.ppv));
    let (macro_sen, ex_sen) = macro_mean(per.iter().map(|m| m.sen));
    let (macro_f1, ex_f1) = macro_mean(per.iter().map(|m| m.f1));
    Ok(Overall {
        accuracy: trace as f64 / total as f64,
        macro_ppv,
        macro_sen,
        macro_f1,
        excluded: Excluded { ppv: ex_ppv, sen: ex_sen, f1: ex_f1 },
        total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: String,
    #[serde(flatten)]
    pub metrics: ClassMetrics,
    pub support: u64,
}

/// Everything written by an evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub model: String,
    pub classes: Vec<ClassReport>,
    pub overall: Overall,
    pub confusion: Vec<Vec<u64>>,
}

impl Report {
    pub fn new(model: &str, cm: &ConfusionMatrix) -> Result<Self> {
        let overall = overall(cm)?;
        let classes = (0..cm.classes())
            .map(|k| ClassReport {
                class: cm.class_names[k].clone(),
                metrics: per_class(cm, k),
                support: cm.counts[k].iter().sum(),
            })
            .collect();
        Ok(Self { model: model.to_string(), classes, overall, confusion: cm.counts.clone() })
    }

    /// `class,ppv,sen,f1,support` rows, then `average` and `overall`.
    pub fn to_csv(&self) -> Vec<u8> {
        let fmt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.6}"));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["class", "ppv", "sen", "f1", "support"]).expect("in-memory csv");
        for c in &self.classes {
            w.write_record([
                c.class.clone(),
                fmt(c.metrics.ppv),
                fmt(c.metrics.sen),
                fmt(c.metrics.f1),
                c.support.to_string(),
            ])
            .expect("in-memory csv");
        }
        let o = &self.overall;
        w.write_record([
            "average".to_string(),
            fmt(o.macro_ppv),
            fmt(o.macro_sen),
            fmt(o.macro_f1),
            o.total.to_string(),
        ])
        .expect("in-memory csv");
        w.write_record([
            "overall_acc".to_string(),
            String::new(),
            String::new(),
            format!("{:.6}", o.accuracy),
            o.total.to_string(),
        ])
        .expect("in-memory csv");
        w.into_inner().expect("in-memory csv")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(counts: Vec<Vec<u64>>) -> ConfusionMatrix {
        let names = (0..counts.len()).map(|c| format!("c{c}")).collect();
        ConfusionMatrix::from_counts(names, counts).unwrap()
    }

    #[test]
    fn confusion_examples() {
        assert_eq!(confusion(&[0, 1], &[0, 1], 2).unwrap().counts(), &[vec![1, 0], vec![0, 1]]);
        assert_eq!(confusion(&[0, 0], &[1, 1], 2).unwrap().counts(), &[vec![0, 2], vec![0, 0]]);
        assert_eq!(
            confusion(&[0], &[0, 1], 2),
            Err(MetricsError::LengthMismatch { truth: 1, predicted: 2 })
        );
        assert_eq!(confusion(&[0], &[2], 2), Err(MetricsError::LabelRange { label: 2, classes: 2 }));
    }

    #[test]
    fn per_class_example() {
        let m = cm(vec![vec![8, 2], vec![1, 9]]);
        let k0 = per_class(&m, 0);
        assert!((k0.sen.unwrap() - 0.8).abs() < 1e-12);
        assert!((k0.ppv.unwrap() - 8.0 / 9.0).abs() < 1e-12);
        assert!((k0.f1.unwrap() - 0.842_105_263_157_894_7).abs() < 1e-12);
        assert!((overall(&m).unwrap().accuracy - 0.85).abs() < 1e-12);
    }

    #[test]
    fn undefined_is_not_zero() {
        let m = cm(vec![vec![3, 0, 0], vec![0, 0, 0], vec![1, 0, 2]]);
        let k1 = per_class(&m, 1);
        assert_eq!(k1, ClassMetrics { ppv: None, sen: None, f1: None });
        let o = overall(&m).unwrap();
        assert_eq!(o.excluded, Excluded { ppv: 1, sen: 1, f1: 1 });
        let expected_sen = (1.0 + 2.0 / 3.0) / 2.0;
        assert!((o.macro_sen.unwrap() - expected_sen).abs() < 1e-12);
        // Ppv and Sen both zero: F1 is undefined, not zero.
        let z = cm(vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(per_class(&z, 0).f1, None);
        assert_eq!(per_class(&z, 0).ppv, Some(0.0));
    }

    #[test]
    fn perfect_diagonal() {
        let o = overall(&cm(vec![vec![4, 0, 0], vec![0, 7, 0], vec![0, 0, 1]])).unwrap();
        assert_eq!((o.accuracy, o.macro_ppv, o.macro_sen, o.macro_f1), (1.0, Some(1.0), Some(1.0), Some(1.0)));
    }

    #[test]
    fn empty_matrix_is_an_error() {
        assert_eq!(overall(&cm(vec![vec![0, 0], vec![0, 0]])), Err(MetricsError::Empty));
    }

    #[test]
    fn report_outputs() {
        let m = cm(vec![vec![8, 2], vec![1, 9]]);
        let r = Report::new("identified", &m).unwrap();
        let csv = String::from_utf8(r.to_csv()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "class,ppv,sen,f1,support");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("overall_acc,,,0.850000"));
        let back: Report = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        let grid = String::from_utf8(m.to_csv()).unwrap();
        assert_eq!(grid, "truth\\predicted,c0,c1\nc0,8,2\nc1,1,9\n");
    }
}
