//! Stratified k-fold training and evaluation.

mod config;
mod cv;
mod early;
mod kfold;
mod trainer;

pub use config::{ConfigKey, TrainConfig};
pub use cv::{run_cross_validation, AverageRow, CvOutcome, CvReport, FoldOutcome, FoldRow};
pub use early::{run_with_early_stopping, EarlyStopping, StopDecision, StoppedRun};
pub use kfold::{stratified_kfold, FoldSplit};
pub use trainer::{evaluate, train_fold, EpochMetrics, EvalReport, FoldTraining, PreparedData};
