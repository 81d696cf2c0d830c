use serde::{Deserialize, Serialize};

use super::{ClassifierError, Model};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// Unweighted mean of per-class F1, zero-support classes counted as 0.
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// `confusion[gold][predicted]`
    pub confusion: Vec<Vec<usize>>,
    /// Classes absent from the gold labels.
    pub zero_support: Vec<usize>,
}

impl Metrics {
    pub fn from_predictions(predicted: &[usize], gold: &[usize], num_classes: usize) -> Result<Self, ClassifierError> {
        if predicted.len() != gold.len() {
            return Err(ClassifierError::ShapeMismatch(format!(
                "{} predictions for {} gold labels",
                predicted.len(),
                gold.len()
            )));
        }
        if gold.is_empty() {
            return Err(ClassifierError::EmptyEvalSet);
        }
        if let Some(bad) = predicted.iter().chain(gold).find(|&&c| c >= num_classes) {
            return Err(ClassifierError::ShapeMismatch(format!(
                "class {bad} out of range for {num_classes} classes"
            )));
        }

        let mut confusion = vec![vec![0usize; num_classes]; num_classes];
        for (&p, &g) in predicted.iter().zip(gold) {
            confusion[g][p] += 1;
        }
        let correct: usize = (0..num_classes).map(|c| confusion[c][c]).sum();
        let per_class: Vec<ClassMetrics> = (0..num_classes)
            .map(|c| {
                let tp = confusion[c][c] as f64;
                let support: usize = confusion[c].iter().sum();
                let predicted_c: usize = confusion.iter().map(|row| row[c]).sum();
                let precision = if predicted_c == 0 { 0.0 } else { tp / predicted_c as f64 };
                let recall = if support == 0 { 0.0 } else { tp / support as f64 };
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassMetrics {
                    precision,
                    recall,
                    f1,
                    support,
                }
            })
            .collect();
        let macro_f1 = per_class.iter().map(|m| m.f1).sum::<f64>() / num_classes as f64;
        let zero_support = per_class
            .iter()
            .enumerate()
            .filter(|(_, m)| m.support == 0)
            .map(|(c, _)| c)
            .collect();
        Ok(Metrics {
            accuracy: correct as f64 / gold.len() as f64,
            macro_f1,
            per_class,
            confusion,
            zero_support,
        })
    }
}

pub fn evaluate<X: AsRef<[f64]>>(model: &Model, features: &[X], gold: &[usize]) -> Result<Metrics, ClassifierError> {
    if features.len() != gold.len() {
        return Err(ClassifierError::ShapeMismatch(format!(
            "{} feature rows but {} labels",
            features.len(),
            gold.len()
        )));
    }
    if features.is_empty() {
        return Err(ClassifierError::EmptyEvalSet);
    }
    let predicted = features
        .iter()
        .map(|x| model.predict(x.as_ref()).map(|(c, _)| c))
        .collect::<Result<Vec<_>, _>>()?;
    Metrics::from_predictions(&predicted, gold, model.num_classes())
}
