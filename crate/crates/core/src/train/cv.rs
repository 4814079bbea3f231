use std::fmt::Write as _;

use serde::Serialize;

use super::config::TrainConfig;
use super::kfold::{stratified_kfold, FoldSplit};
use super::trainer::{evaluate, train_fold, EvalReport, FoldTraining, PreparedData};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub split: FoldSplit,
    pub training: FoldTraining,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub folds: Vec<FoldOutcome>,
    pub mean_accuracy: f64,
    pub mean_loss: f64,
}

fn run_fold(data: &PreparedData, split: &FoldSplit, config: &TrainConfig) -> Result<FoldOutcome> {
    let training = train_fold(data, split, config)?;
    let mut report = evaluate(&training.model, &split.test_ids, data)?;
    report.fold_index = split.fold_index;
    Ok(FoldOutcome {
        split: split.clone(),
        training,
        report,
    })
}

/// One model per stratified fold, scored on its held-out test ids.
///
/// `jobs > 1` trains folds on a thread pool; results are identical to the
/// sequential run since every fold owns its seed and data split.
pub fn run_cross_validation(data: &PreparedData, config: &TrainConfig, jobs: usize) -> Result<CvOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    let splits = stratified_kfold(&data.labels, config.folds, config.seed, config.validation_fraction)?;

    let folds: Vec<FoldOutcome> = if jobs > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))?;
        pool.install(|| {
            splits
                .par_iter()
                .map(|s| run_fold(data, s, config))
                .collect::<Result<_>>()
        })?
    } else {
        splits
            .iter()
            .map(|s| run_fold(data, s, config))
            .collect::<Result<_>>()?
    };

    let n = folds.len() as f64;
    let mean_accuracy = folds.iter().map(|f| f.report.test_accuracy).sum::<f64>() / n;
    let mean_loss = folds.iter().map(|f| f.report.test_loss).sum::<f64>() / n;
    Ok(CvOutcome {
        folds,
        mean_accuracy,
        mean_loss,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldRow {
    pub fold: usize,
    pub test_accuracy: f64,
    pub test_loss: f64,
    pub test_count: usize,
    pub best_epoch: Option<usize>,
    pub epochs_run: usize,
    pub best_validation_accuracy: Option<f64>,
    pub confusion_matrix: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AverageRow {
    pub test_accuracy: f64,
    pub test_loss: f64,
}

/// Per-fold accuracy and loss plus the averages row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub folds: Vec<FoldRow>,
    pub average: AverageRow,
}

impl CvOutcome {
    pub fn report(&self) -> CvReport {
        CvReport {
            folds: self
                .folds
                .iter()
                .map(|f| FoldRow {
                    fold: f.split.fold_index + 1,
                    test_accuracy: f.report.test_accuracy,
                    test_loss: f.report.test_loss,
                    test_count: f.report.sample_count,
                    best_epoch: f.training.best_epoch,
                    epochs_run: f.training.history.len(),
                    best_validation_accuracy: f.training.best_validation_accuracy,
                    confusion_matrix: f.report.confusion_matrix.clone(),
                })
                .collect(),
            average: AverageRow {
                test_accuracy: self.mean_accuracy,
                test_loss: self.mean_loss,
            },
        }
    }

    /// `fold,epoch,train_loss,train_acc,val_loss,val_acc`, folds numbered from 1.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("fold,epoch,train_loss,train_acc,val_loss,val_acc\n");
        for f in &self.folds {
            for m in &f.training.history {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    f.split.fold_index + 1,
                    m.epoch,
                    m.train_loss,
                    m.train_accuracy,
                    m.validation_loss,
                    m.validation_accuracy
                )
                .unwrap();
            }
        }
        out
    }
}

impl CvReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Plain-text table with one row per fold and an average row.
    pub fn table(&self) -> String {
        let mut out = String::from("fold  test_accuracy  test_loss\n");
        for f in &self.folds {
            writeln!(
                out,
                "{:<4}  {:>12.2}%  {:>9.4}",
                f.fold,
                100.0 * f.test_accuracy,
                f.test_loss
            )
            .unwrap();
        }
        writeln!(
            out,
            "avg   {:>12.2}%  {:>9.4}",
            100.0 * self.average.test_accuracy,
            self.average.test_loss
        )
        .unwrap();
        out
    }
}
