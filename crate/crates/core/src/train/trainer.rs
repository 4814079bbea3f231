use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::TrainConfig;
use super::early::run_with_early_stopping;
use super::kfold::FoldSplit;
use crate::data::{Dataset, SeverityClass};
use crate::error::{Error, Result};
use crate::nn::{adam_step, argmax, cross_entropy, AdamState, Gradients, ModelParams, ModelShape, Phase};
use crate::reduce::{reduce, ReductionConfig};

/// Dataset after temporal reduction: one `S × D′` input per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub inputs: Vec<Array2<f64>>,
    pub labels: Vec<SeverityClass>,
    pub class_count: usize,
    pub input_width: usize,
}

impl PreparedData {
    pub fn new(inputs: Vec<Array2<f64>>, labels: Vec<SeverityClass>, class_count: usize) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        let input_width = inputs.first().map_or(0, |x| x.ncols());
        if let Some(bad) = inputs.iter().position(|x| x.ncols() != input_width || x.nrows() == 0) {
            return Err(Error::Shape(format!(
                "sample {bad} has shape {:?}, expected width {input_width}",
                inputs[bad].dim()
            )));
        }
        if let Some(l) = labels.iter().find(|l| l.0 >= class_count) {
            return Err(Error::Domain(format!("label {} outside {class_count} classes", l.0)));
        }
        Ok(Self {
            inputs,
            labels,
            class_count,
            input_width,
        })
    }

    pub fn from_dataset(dataset: &Dataset, reduction: &ReductionConfig) -> Result<Self> {
        let inputs = dataset
            .samples
            .iter()
            .map(|s| {
                reduce(s.frames.view(), reduction)
                    .map(|p| p.into_inner())
                    .map_err(|e| Error::Shape(format!("sample {}: {e}", s.id)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(inputs, dataset.labels(), dataset.class_count())
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn input(&self, id: usize) -> Result<&Array2<f64>> {
        self.inputs.get(id).ok_or(Error::Lookup(id))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub validation_loss: f64,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub fold_index: usize,
    pub test_accuracy: f64,
    pub test_loss: f64,
    pub sample_count: usize,
    /// Rows are true classes, columns predictions.
    pub confusion_matrix: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldTraining {
    pub model: ModelParams,
    pub history: Vec<EpochMetrics>,
    pub best_epoch: Option<usize>,
    pub best_validation_accuracy: Option<f64>,
}

/// Eval-mode accuracy (argmax, ties to the lowest class), mean loss and
/// confusion matrix over `ids`.
pub fn evaluate(model: &ModelParams, ids: &[usize], data: &PreparedData) -> Result<EvalReport> {
    if ids.is_empty() {
        return Err(Error::Config("cannot evaluate an empty id list".into()));
    }
    let c = model.shape().classes;
    let mut confusion = vec![vec![0usize; c]; c];
    let mut loss = 0.0;
    for &id in ids {
        let x = data.input(id)?;
        let label = data.labels[id];
        let probs = model.predict(x.view())?;
        loss += cross_entropy(probs.view(), label);
        confusion[label.0][argmax(probs.view())] += 1;
    }
    let correct: usize = (0..c).map(|k| confusion[k][k]).sum();
    Ok(EvalReport {
        fold_index: 0,
        test_accuracy: correct as f64 / ids.len() as f64,
        test_loss: loss / ids.len() as f64,
        sample_count: ids.len(),
        confusion_matrix: confusion,
    })
}

fn epoch_rng(seed: u64, epoch: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * epoch as u64 + stream);
    rng
}

struct EpochTotals {
    loss: f64,
    correct: usize,
    seen: usize,
}

fn train_epoch(
    model: &mut ModelParams,
    adam: &mut AdamState,
    data: &PreparedData,
    train_ids: &[usize],
    config: &TrainConfig,
    seed: u64,
    epoch: usize,
) -> Result<EpochTotals> {
    let mut order = train_ids.to_vec();
    order.shuffle(&mut epoch_rng(seed, epoch, 0));
    let mut dropout_rng = epoch_rng(seed, epoch, 1);
    let shape = model.shape();
    let mut totals = EpochTotals {
        loss: 0.0,
        correct: 0,
        seen: 0,
    };

    for batch in order.chunks(config.batch_size) {
        let mut grads = Gradients::zeros(&shape, 0);
        // fixed sample order keeps the accumulation bitwise reproducible
        for &id in batch {
            let x = data.input(id)?;
            let label = data.labels[id];
            let out = model.forward(x.view(), Phase::Train, &mut dropout_rng)?;
            totals.loss += cross_entropy(out.probs.view(), label);
            totals.correct += usize::from(argmax(out.probs.view()) == label.0);
            grads.accumulate(&model.backward(out.cache.as_ref(), label)?);
        }
        totals.seen += batch.len();
        grads.scale(1.0 / batch.len() as f64);
        if let Some(max_norm) = config.clip_norm {
            grads.clip_global_norm(max_norm);
        }
        adam_step(model, &grads, adam);
    }
    Ok(totals)
}

/// Trains one fold from a fresh model seeded with `seed + fold_index`,
/// monitoring validation accuracy for early stopping and returning the best
/// epoch's weights. Falls back to monitoring the training ids when the split
/// has no validation ids.
pub fn train_fold(data: &PreparedData, split: &FoldSplit, config: &TrainConfig) -> Result<FoldTraining> {
    config.validate()?;
    if split.train_ids.is_empty() {
        return Err(Error::Config(format!(
            "fold {} has no training samples",
            split.fold_index
        )));
    }
    if data.class_count != config.class_count {
        return Err(Error::Config(format!(
            "dataset has {} classes but class-count is {}",
            data.class_count, config.class_count
        )));
    }
    let seed = config.seed.wrapping_add(split.fold_index as u64);
    let shape = ModelShape {
        input_width: data.input_width,
        hidden: config.hidden_size,
        classes: config.class_count,
    };
    let model = ModelParams::init(&shape, config.dropout, seed)?;
    let monitor: &[usize] = if split.validation_ids.is_empty() {
        &split.train_ids
    } else {
        &split.validation_ids
    };

    let mut history = Vec::new();
    let start = (model.clone(), AdamState::for_model(config.adam(), &model));
    let run = run_with_early_stopping(start, config.epochs, config.patience, |epoch, (model, adam)| {
        let totals = train_epoch(model, adam, data, &split.train_ids, config, seed, epoch)?;
        let val = evaluate(model, monitor, data)?;
        history.push(EpochMetrics {
            epoch,
            train_loss: totals.loss / totals.seen as f64,
            train_accuracy: totals.correct as f64 / totals.seen as f64,
            validation_loss: val.test_loss,
            validation_accuracy: val.test_accuracy,
        });
        Ok(val.test_accuracy)
    })?;

    Ok(FoldTraining {
        model: run.best_state.0,
        history,
        best_epoch: run.best_epoch,
        best_validation_accuracy: run.best_metric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthesize_sessions, SyntheticSpec};
    use crate::train::kfold::stratified_kfold;

    fn tiny() -> (PreparedData, TrainConfig) {
        let spec = SyntheticSpec {
            session_count: 40,
            frames_per_sample: 10,
            feature_dim: 4,
            class_count: 2,
            motif_strength: 4.0,
            noise_sigma: 1.0,
            seed: 5,
        };
        let (sessions, binning) = synthesize_sessions(&spec).unwrap();
        let ds = Dataset::from_sessions(&sessions, 4, binning).unwrap();
        let config = TrainConfig {
            class_count: 2,
            hidden_size: 8,
            epochs: 8,
            batch_size: 8,
            learning_rate: 0.01,
            ..TrainConfig::default()
        };
        (PreparedData::from_dataset(&ds, &config.reduction).unwrap(), config)
    }

    #[test]
    fn prepared_shapes() {
        let (data, _) = tiny();
        assert_eq!(data.len(), 40);
        assert_eq!(data.inputs[0].dim(), (2, 20));
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let (data, mut config) = tiny();
        config.epochs = 0;
        let split = &stratified_kfold(&data.labels, 5, 0, 0.1).unwrap()[1];
        let out = train_fold(&data, split, &config).unwrap();
        assert!(out.history.is_empty());
        let shape = out.model.shape();
        assert_eq!(
            out.model,
            ModelParams::init(&shape, config.dropout, config.seed + 1).unwrap()
        );
    }

    #[test]
    fn training_is_reproducible_and_restores_best() {
        let (data, config) = tiny();
        let split = &stratified_kfold(&data.labels, 5, 0, 0.1).unwrap()[0];
        let a = train_fold(&data, split, &config).unwrap();
        let b = train_fold(&data, split, &config).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.model, b.model);
        let again = evaluate(&a.model, &split.validation_ids, &data).unwrap();
        assert_eq!(Some(again.test_accuracy), a.best_validation_accuracy);
        let best = a.best_epoch.unwrap();
        assert_eq!(a.history[best - 1].validation_accuracy, again.test_accuracy);
    }

    #[test]
    fn empty_training_split_rejected() {
        let (data, config) = tiny();
        let split = FoldSplit {
            fold_index: 0,
            train_ids: vec![],
            validation_ids: vec![0],
            test_ids: vec![1],
        };
        assert!(matches!(train_fold(&data, &split, &config), Err(Error::Config(_))));
    }

    #[test]
    fn evaluate_metrics() {
        let (data, _) = tiny();
        let shape = ModelShape {
            input_width: data.input_width,
            hidden: 3,
            classes: 2,
        };
        let uniform = ModelParams::zeros(&shape, 0.0);
        let ids: Vec<usize> = (0..data.len()).collect();
        let r = evaluate(&uniform, &ids, &data).unwrap();
        assert!((r.test_loss - 2f64.ln()).abs() < 1e-12);
        // ties go to class 0
        assert_eq!(r.confusion_matrix[0][0] + r.confusion_matrix[1][0], 40);
        assert_eq!(r.test_accuracy, 0.5);
        let sums: Vec<usize> = r.confusion_matrix.iter().map(|row| row.iter().sum()).collect();
        assert_eq!(sums, vec![20, 20]);
        assert!(matches!(evaluate(&uniform, &[99], &data), Err(Error::Lookup(99))));
        assert!(evaluate(&uniform, &[], &data).is_err());
    }

    #[test]
    fn perfect_predictions_give_unit_accuracy() {
        // head bias alone decides; a dataset of one class
        let inputs = vec![Array2::zeros((2, 3)); 4];
        let data = PreparedData::new(inputs, vec![SeverityClass(1); 4], 2).unwrap();
        let mut model = ModelParams::zeros(
            &ModelShape {
                input_width: 3,
                hidden: 2,
                classes: 2,
            },
            0.0,
        );
        model.head.b[1] = 3.0;
        let r = evaluate(&model, &[0, 1, 2, 3], &data).unwrap();
        assert_eq!(r.test_accuracy, 1.0);
        assert_eq!(r.confusion_matrix[1][1], 4);
    }
}
