//! Evaluation protocol: stratified leak-free folds, pooled cross-validation,
//! comparison grids and report rendering.

mod ablation;
mod cv;
mod folds;
mod metrics;
pub mod report;

pub use ablation::{ablation_matrix, AblationRow, GridCell};
pub use cv::{extract_windows, run_cross_validation, with_workers, Classifier, NeuralClassifier};
pub use folds::{plan_folds, FoldPlan, Role};
pub use metrics::{no_frustrated, overall, EvalReport, PredictionRecord};
