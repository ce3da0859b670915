//! Threshold metrics, ROC curves and AUC.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{labels} labels but {scores} scores")]
    LengthMismatch { labels: usize, scores: usize },
    #[error("no samples to evaluate")]
    Empty,
    #[error("label {0} is not 0 or 1")]
    InvalidLabel(u8),
    #[error("score at index {0} is not finite")]
    NonFiniteScore(usize),
    #[error("AUC undefined for single-class labels")]
    SingleClass,
    #[error("writing {path}: {message}")]
    Io { path: String, message: String },
}

/// Confusion-matrix counts at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// The four threshold metrics plus which ratios had a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_auc: f64,
    pub threshold: f64,
    pub support_pos: usize,
    pub support_neg: usize,
    pub confusion: Confusion,
    /// Ratios reported as 0 because their denominator was 0.
    pub undefined: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores `>=` this value are predicted positive. The origin uses `+inf`.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

fn check_inputs(labels: &[u8], scores: &[f64]) -> Result<(), MetricsError> {
    if labels.len() != scores.len() {
        return Err(MetricsError::LengthMismatch {
            labels: labels.len(),
            scores: scores.len(),
        });
    }
    if labels.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
        return Err(MetricsError::InvalidLabel(bad));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFiniteScore(i));
    }
    Ok(())
}

/// Counts with "positive" meaning `score >= threshold`.
pub fn confusion_at_threshold(
    labels: &[u8],
    scores: &[f64],
    threshold: f64,
) -> Result<Confusion, MetricsError> {
    check_inputs(labels, scores)?;
    let mut c = Confusion::default();
    for (&y, &s) in labels.iter().zip(scores) {
        match (y == 1, s >= threshold) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Accuracy, precision, recall and F1; undefined ratios are 0 and flagged.
pub fn precision_recall_f1_accuracy(c: &Confusion) -> Result<Ratios, MetricsError> {
    if c.total() == 0 {
        return Err(MetricsError::Empty);
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            (0.0, true)
        } else {
            (num as f64 / den as f64, false)
        }
    };
    let (precision, precision_undefined) = ratio(c.tp, c.tp + c.fp);
    let (recall, recall_undefined) = ratio(c.tp, c.tp + c.fn_);
    let (f1, f1_undefined) = if precision + recall == 0.0 {
        (0.0, true)
    } else {
        (2.0 * precision * recall / (precision + recall), false)
    };
    Ok(Ratios {
        accuracy: (c.tp + c.tn) as f64 / c.total() as f64,
        precision,
        recall,
        f1,
        precision_undefined,
        recall_undefined,
        f1_undefined,
    })
}

/// One point per distinct score, swept from the highest score down, after
/// the origin. Tied scores move both rates in a single step.
pub fn roc_curve(labels: &[u8], scores: &[f64]) -> Result<RocCurve, MetricsError> {
    check_inputs(labels, scores)?;
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: s,
        });
    }
    Ok(RocCurve { points })
}

/// Trapezoidal area under the curve.
pub fn roc_auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) * 0.5)
        .sum()
}

impl RocCurve {
    pub fn auc(&self) -> f64 {
        roc_auc(self)
    }

    /// CSV with header `fpr,tpr,threshold`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["fpr", "tpr", "threshold"])
            .expect("in-memory write");
        for p in &self.points {
            w.write_record([
                p.fpr.to_string(),
                p.tpr.to_string(),
                p.threshold.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), MetricsError> {
        std::fs::write(path, self.to_csv()).map_err(|e| MetricsError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Full bundle and ROC curve for one set of predictions.
pub fn evaluate(
    labels: &[u8],
    scores: &[f64],
    threshold: f64,
) -> Result<(MetricBundle, RocCurve), MetricsError> {
    let c = confusion_at_threshold(labels, scores, threshold)?;
    let r = precision_recall_f1_accuracy(&c)?;
    let curve = roc_curve(labels, scores)?;
    let undefined = [
        ("precision", r.precision_undefined),
        ("recall", r.recall_undefined),
        ("f1", r.f1_undefined),
    ]
    .into_iter()
    .filter(|(_, u)| *u)
    .map(|(n, _)| n.to_string())
    .collect();
    let bundle = MetricBundle {
        accuracy: r.accuracy,
        precision: r.precision,
        recall: r.recall,
        f1: r.f1,
        roc_auc: curve.auc(),
        threshold,
        support_pos: c.tp + c.fn_,
        support_neg: c.fp + c.tn,
        confusion: c,
        undefined,
    };
    Ok((bundle, curve))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn auc(labels: &[u8], scores: &[f64]) -> f64 {
        roc_auc(&roc_curve(labels, scores).unwrap())
    }

    #[test]
    fn confusion_examples() {
        let c = confusion_at_threshold(&[1, 0], &[0.9, 0.1], 0.5).unwrap();
        assert_eq!(
            c,
            Confusion {
                tp: 1,
                fp: 0,
                tn: 1,
                fn_: 0
            }
        );
        let c = confusion_at_threshold(&[1, 0], &[0.5, 0.5], 0.5).unwrap();
        assert_eq!((c.tp, c.fp), (1, 1));
        let c = confusion_at_threshold(&[1, 0, 1], &[0.1, 0.2, 0.3], 0.5).unwrap();
        assert_eq!((c.tp, c.fp), (0, 0));
        assert!(matches!(
            confusion_at_threshold(&[1], &[0.1, 0.2], 0.5),
            Err(MetricsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn ratio_examples() {
        let r = precision_recall_f1_accuracy(&Confusion {
            tp: 8,
            fp: 2,
            tn: 8,
            fn_: 2,
        })
        .unwrap();
        for v in [r.precision, r.recall, r.f1, r.accuracy] {
            assert!((v - 0.8).abs() < 1e-15);
        }
        let r = precision_recall_f1_accuracy(&Confusion {
            tp: 0,
            fp: 0,
            tn: 5,
            fn_: 3,
        })
        .unwrap();
        assert_eq!(r.precision, 0.0);
        assert!(r.precision_undefined && r.f1_undefined && !r.recall_undefined);
        let r = precision_recall_f1_accuracy(&Confusion {
            tp: 4,
            fp: 0,
            tn: 6,
            fn_: 0,
        })
        .unwrap();
        assert_eq!([r.precision, r.recall, r.f1, r.accuracy], [1.0; 4]);
        assert!(precision_recall_f1_accuracy(&Confusion::default()).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[1, 1, 0, 0], &[0.9, 0.8, 0.7, 0.4]), 1.0);
        assert_eq!(auc(&[1, 0], &[0.6, 0.6]), 0.5);
        assert_eq!(auc(&[1, 0, 0], &[0.3, 0.5, 0.7]), 0.0);
    }

    #[test]
    fn curve_shapes() {
        let perfect = roc_curve(&[1, 1, 0, 0], &[0.9, 0.8, 0.7, 0.4]).unwrap();
        assert!(perfect.points.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));
        let flat = roc_curve(&[1, 0, 1, 0], &[0.3; 4]).unwrap();
        assert_eq!(flat.points.len(), 2);
        assert_eq!(flat.auc(), 0.5);
        let last = flat.points.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
    }

    #[test]
    fn single_class_rejected() {
        let err = roc_curve(&[1, 1], &[0.2, 0.4]).unwrap_err();
        assert_eq!(err.to_string(), "AUC undefined for single-class labels");
    }

    #[test]
    fn csv_export() {
        let c = roc_curve(&[1, 0], &[0.75, 0.25]).unwrap();
        assert_eq!(
            c.to_csv(),
            "fpr,tpr,threshold\n0,0,inf\n0,1,0.75\n1,1,0.25\n"
        );
    }

    #[test]
    fn evaluate_fills_supports() {
        let (b, _) = evaluate(&[1, 0, 0, 1, 0], &[0.9, 0.2, 0.6, 0.4, 0.1], 0.5).unwrap();
        assert_eq!((b.support_pos, b.support_neg), (2, 3));
        assert_eq!(
            b.confusion,
            Confusion {
                tp: 1,
                fp: 1,
                tn: 2,
                fn_: 1
            }
        );
        assert!(b.undefined.is_empty());
        assert!((b.roc_auc - 5.0 / 6.0).abs() < 1e-12);
    }
}
