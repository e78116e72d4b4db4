use serde::{Deserialize, Serialize};

use crate::encoding::{Dataset, StepLabel};
use crate::error::{Error, Result};
use crate::model::{adjacency_as, Architecture, Model, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub correct: usize,
    /// Scored prefixes, including those whose target is outside the classes.
    pub total: usize,
    pub accuracy: f64,
    /// Prefixes whose next activity was never seen in training.
    pub unknown_targets: usize,
    /// `confusion[target][predicted]`, over prefixes with a known target.
    pub confusion: Vec<Vec<usize>>,
}

/// Target and argmax prediction of every scored prefix in `ds`.
pub fn predict_steps<T: Scalar>(model: &Model<T>, ds: &Dataset) -> Result<Vec<(StepLabel, usize)>> {
    if Architecture::new(model.arch.config.clone(), &ds.encoder) != model.arch {
        return Err(Error::VocabMismatch("model and dataset were fitted on different data".into()));
    }
    let a_hat = adjacency_as::<T>(&ds.normalized);
    let mut out = Vec::with_capacity(ds.num_prefixes());
    for w in ds.windows() {
        let seq = ds.sequence(&w);
        let (logits, _) = model.forward(&a_hat, seq.nodes.view(), seq.attrs.view())?;
        for (row, &label) in logits.rows().into_iter().zip(&seq.labels) {
            if label.is_scored() {
                let arg = (0..row.len()).fold(0, |b, i| if row[i] > row[b] { i } else { b });
                out.push((label, arg));
            }
        }
    }
    Ok(out)
}

pub fn tally(predictions: &[(StepLabel, usize)], num_classes: usize) -> Evaluation {
    let mut confusion = vec![vec![0; num_classes]; num_classes];
    let mut correct = 0;
    let mut unknown = 0;
    for &(label, pred) in predictions {
        match label.class() {
            Some(c) => {
                confusion[c][pred] += 1;
                correct += usize::from(c == pred);
            }
            None => unknown += 1,
        }
    }
    let total = predictions.len();
    Evaluation {
        correct,
        total,
        accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        unknown_targets: unknown,
        confusion,
    }
}

/// Fraction of prefixes whose argmax prediction equals the next activity.
pub fn evaluate<T: Scalar>(model: &Model<T>, ds: &Dataset) -> Result<Evaluation> {
    Ok(tally(&predict_steps(model, ds)?, ds.encoder.num_classes()))
}
