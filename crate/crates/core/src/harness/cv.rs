use serde::{Deserialize, Serialize};

use super::{evaluate, make_folds, Config, Evaluation};
use crate::encoding::{Dataset, Encoder};
use crate::error::Result;
use crate::eventlog::EventLog;
use crate::model::{Architecture, Model};
use crate::petrinet::PetriNet;
use crate::training::{split_train_val, train, TrainReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_traces: usize,
    pub val_traces: usize,
    pub test_traces: usize,
    pub vocab_hash: String,
    pub training: TrainReport,
    pub test: Evaluation,
    /// Class names indexing `test.confusion`.
    pub class_labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub config_hash: String,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// Test prefixes over all folds.
    pub prefixes: usize,
    pub folds: Vec<FoldReport>,
}

/// K-fold cross-validation. For each fold, vocabularies, time buckets and the
/// maximum length are fitted on the remaining traces only; those are split
/// again for validation-based model selection, and the selected model is
/// scored on the held-out fold. The seed is `config.train.seed`.
pub fn run_cv(log: &EventLog, net: &PetriNet, config: &Config) -> Result<EvalReport> {
    config.validate()?;
    let seed = config.train.seed;
    let lengths: Vec<usize> = log.traces.iter().map(|t| t.len()).collect();
    let plan = make_folds(&lengths, config.folds, seed)?;
    let mut folds = Vec::with_capacity(config.folds);
    for (fold, test_idx) in plan.folds.iter().enumerate() {
        let fold_seed = seed.wrapping_add(fold as u64);
        let rest = plan.rest(fold);
        let (tr, va) = split_train_val(rest.len(), config.train.val_fraction, fold_seed)?;
        let train_idx: Vec<usize> = tr.iter().map(|&i| rest[i]).collect();
        let val_idx: Vec<usize> = va.iter().map(|&i| rest[i]).collect();

        let train_log = log.select(&train_idx);
        let encoder = Encoder::fit(net, &train_log, &config.encoder)?;
        let train_ds = Dataset::build(net, encoder.clone(), &train_log)?;
        let val_ds = Dataset::build(net, encoder.clone(), &log.select(&val_idx))?;
        let test_ds = Dataset::build(net, encoder.clone(), &log.select(test_idx))?;

        let model = Model::<f32>::new(Architecture::new(config.model.clone(), &encoder), fold_seed)?;
        let mut train_config = config.train.clone();
        train_config.seed = fold_seed;
        let (best, training) = train(model, &train_ds, &val_ds, &train_config)?;
        let test = evaluate(&best, &test_ds)?;
        log::info!("fold {fold}: test accuracy {:.4} over {} prefixes", test.accuracy, test.total);
        folds.push(FoldReport {
            fold,
            train_traces: train_idx.len(),
            val_traces: val_idx.len(),
            test_traces: test_idx.len(),
            vocab_hash: encoder.vocab_hash(),
            training,
            test,
            class_labels: (0..encoder.num_classes())
                .map(|c| encoder.class_label(c).unwrap_or_default().to_owned())
                .collect(),
        });
    }
    let fold_accuracies: Vec<f64> = folds.iter().map(|f| f.test.accuracy).collect();
    Ok(EvalReport {
        seed,
        config_hash: config.hash(),
        mean_accuracy: fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64,
        fold_accuracies,
        prefixes: folds.iter().map(|f| f.test.total).sum(),
        folds,
    })
}
