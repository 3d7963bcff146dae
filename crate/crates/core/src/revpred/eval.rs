use serde::{Deserialize, Serialize};

use super::{Dataset, PredictorModel, RevPredError};

/// Calibrated probabilities at or above this value count as predicted
/// revocations.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub samples: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Evaluation {
    /// Metrics from predicted and actual labels. Precision and recall with
    /// an empty denominator are zero, as is F1 when both are zero.
    pub fn from_labels(predicted: &[bool], actual: &[bool]) -> Self {
        assert_eq!(predicted.len(), actual.len());
        let mut c = [0usize; 4];
        for (&p, &a) in predicted.iter().zip(actual) {
            c[(p as usize) << 1 | a as usize] += 1;
        }
        let (tn, fneg, fp, tp) = (c[0], c[1], c[2], c[3]);
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fneg);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Evaluation {
            samples: predicted.len(),
            true_positives: tp,
            false_positives: fp,
            true_negatives: tn,
            false_negatives: fneg,
            accuracy: ratio(tp + tn, predicted.len()),
            precision,
            recall,
            f1,
        }
    }
}

pub fn evaluate(model: &PredictorModel, dataset: &Dataset) -> Result<Evaluation, RevPredError> {
    if dataset.is_empty() {
        return Err(RevPredError::EmptyEvaluation);
    }
    let predicted: Vec<bool> = model
        .predict_dataset(dataset)
        .into_iter()
        .map(|p| p >= DECISION_THRESHOLD)
        .collect();
    let actual: Vec<bool> = dataset.samples.iter().map(|s| s.label).collect();
    Ok(Evaluation::from_labels(&predicted, &actual))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_counts() {
        let p = [true, true, false, false, true];
        let a = [true, false, false, true, true];
        let e = Evaluation::from_labels(&p, &a);
        assert_eq!((e.true_positives, e.false_positives, e.true_negatives, e.false_negatives), (2, 1, 1, 1));
        assert!((e.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((e.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((e.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((e.accuracy - 0.6).abs() < 1e-15);
    }

    #[test]
    fn no_positives_anywhere_gives_zero_f1() {
        let e = Evaluation::from_labels(&[false; 4], &[false; 4]);
        assert_eq!(e.f1, 0.0);
        assert_eq!(e.accuracy, 1.0);
    }
}
