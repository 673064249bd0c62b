use serde::{Deserialize, Serialize};

use crate::AffectLabel;

const K: usize = AffectLabel::COUNT;

/// Mean of the four per-class accuracies.
pub fn overall(per_class: &[f64; K]) -> f64 {
    per_class.iter().sum::<f64>() / K as f64
}

/// Mean over every class except frustrated.
pub fn no_frustrated(per_class: &[f64; K]) -> f64 {
    let skip = AffectLabel::Frustrated.index();
    per_class
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != skip)
        .map(|(_, a)| a)
        .sum::<f64>()
        / (K - 1) as f64
}

/// One test prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub fold: usize,
    pub truth: AffectLabel,
    pub predicted: AffectLabel,
}

/// Pooled cross-validation result. `confusion[p][t]` counts test items of
/// true class `t` predicted as `p`; accuracies are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class_accuracy: [f64; K],
    pub confusion: [[usize; K]; K],
    pub overall: f64,
    pub no_frustrated: f64,
    pub predictions: Vec<PredictionRecord>,
}

impl EvalReport {
    /// Builds the pooled report; predictions are sorted by id. A class with
    /// no test items scores 0.
    pub fn from_predictions(mut predictions: Vec<PredictionRecord>) -> EvalReport {
        predictions.sort_by(|a, b| a.id.cmp(&b.id));
        let mut confusion = [[0usize; K]; K];
        for p in &predictions {
            confusion[p.predicted.index()][p.truth.index()] += 1;
        }
        let mut per_class_accuracy = [0.0; K];
        for (c, acc) in per_class_accuracy.iter_mut().enumerate() {
            let total: usize = (0..K).map(|p| confusion[p][c]).sum();
            if total > 0 {
                *acc = 100.0 * confusion[c][c] as f64 / total as f64;
            }
        }
        EvalReport {
            overall: overall(&per_class_accuracy),
            no_frustrated: no_frustrated(&per_class_accuracy),
            per_class_accuracy,
            confusion,
            predictions,
        }
    }

    /// Test items per true class (column sums).
    pub fn class_totals(&self) -> [usize; K] {
        std::array::from_fn(|t| (0..K).map(|p| self.confusion[p][t]).sum())
    }
}
