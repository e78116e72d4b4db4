//! Cross-validation, evaluation and prediction.

mod config;
mod cv;
mod eval;
mod folds;
mod predict;

pub use config::Config;
pub use cv::{run_cv, EvalReport, FoldReport};
pub use eval::{evaluate, predict_steps, tally, Evaluation};
pub use folds::{make_folds, FoldPlan};
pub use predict::{parse_case_csv, parse_case_json, predict, predict_from_checkpoint, CaseEvent, PredictionReport, Ranked};
