//! Python module `cybersick`. Matrices cross the boundary as lists of rows
//! (any nested sequence of floats is accepted, numpy arrays included).

use std::path::PathBuf;

use cybersick_core::attribution::{self, Aggregation, AttributionConfig, Baseline, Method, Target};
use cybersick_core::checkpoint::{load_model, save_checkpoint};
use cybersick_core::data::{self, BinningScheme, FrameFeatureSequence, SeverityClass, SyntheticSpec};
use cybersick_core::nn::{ModelParams, ModelShape};
use cybersick_core::reduce::{self, ReductionConfig};
use cybersick_core::train::{self, PreparedData, TrainConfig};
use cybersick_core::Error;
use ndarray::Array2;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyOSError::new_err(e.to_string())
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    let n = rows.len();
    Array2::from_shape_vec((n, cols), rows.into_iter().flatten().collect())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// Reads an FSEQ file into a list of frame rows.
#[pyfunction]
fn read_features(path: PathBuf) -> PyResult<Vec<Vec<f64>>> {
    let seq = data::read_feature_file(&path).map_err(to_py)?;
    Ok(rows(&seq.into_frames()))
}

#[pyfunction]
fn write_features(path: PathBuf, frames: Vec<Vec<f64>>) -> PyResult<()> {
    let seq = FrameFeatureSequence::new(matrix(frames)?, 1.0).map_err(to_py)?;
    data::write_feature_file(&seq, &path).map_err(to_py)
}

#[pyfunction]
fn max_pool(frames: Vec<Vec<f64>>, k: usize) -> PyResult<Vec<Vec<f64>>> {
    let out = reduce::max_pool_time(matrix(frames)?.view(), k).map_err(to_py)?;
    Ok(rows(&out.into_inner()))
}

#[pyfunction]
fn concat(frames: Vec<Vec<f64>>, k: usize) -> PyResult<Vec<Vec<f64>>> {
    let out = reduce::concat_windows(matrix(frames)?.view(), k).map_err(to_py)?;
    Ok(rows(&out.into_inner()))
}

/// Severity class of an FMS score; `edges` defaults to the four-class scheme.
#[pyfunction]
#[pyo3(signature = (fms, edges=None))]
fn bin_fms(fms: u8, edges: Option<Vec<u8>>) -> PyResult<usize> {
    let scheme = match edges {
        Some(e) => BinningScheme::new(e).map_err(to_py)?,
        None => BinningScheme::default(),
    };
    Ok(data::bin_fms(fms, &scheme).map_err(to_py)?.0)
}

#[pyfunction]
#[pyo3(signature = (labels, k=5, seed=0, validation_fraction=0.1))]
fn stratified_kfold<'py>(
    py: Python<'py>,
    labels: Vec<usize>,
    k: usize,
    seed: u64,
    validation_fraction: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let labels: Vec<SeverityClass> = labels.into_iter().map(SeverityClass).collect();
    let folds = train::stratified_kfold(&labels, k, seed, validation_fraction).map_err(to_py)?;
    folds
        .into_iter()
        .map(|f| {
            let d = PyDict::new(py);
            d.set_item("fold_index", f.fold_index)?;
            d.set_item("train_ids", f.train_ids)?;
            d.set_item("validation_ids", f.validation_ids)?;
            d.set_item("test_ids", f.test_ids)?;
            Ok(d)
        })
        .collect()
}

/// Writes a synthetic dataset and returns the manifest path.
#[pyfunction]
#[pyo3(signature = (out_dir, sessions=300, frames=25, dim=16, classes=4, strength=5.0, sigma=1.0, seed=0))]
#[allow(clippy::too_many_arguments)]
fn generate_synthetic(
    out_dir: PathBuf,
    sessions: usize,
    frames: usize,
    dim: usize,
    classes: usize,
    strength: f64,
    sigma: f64,
    seed: u64,
) -> PyResult<PathBuf> {
    let spec = SyntheticSpec {
        session_count: sessions,
        frames_per_sample: frames,
        feature_dim: dim,
        class_count: classes,
        motif_strength: strength,
        noise_sigma: sigma,
        seed,
    };
    data::generate_synthetic(&spec, &out_dir).map_err(to_py)?;
    Ok(out_dir.join("manifest.json"))
}

fn train_config(config: Option<&Bound<'_, PyDict>>) -> PyResult<TrainConfig> {
    let mut cfg = TrainConfig::default();
    if let Some(d) = config {
        for (k, v) in d.iter() {
            let key: String = k.extract()?;
            let text = if v.is_none() {
                "none".to_string()
            } else {
                v.str()?.to_string()
            };
            cfg.set(&key, &text).map_err(to_py)?;
        }
    }
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

/// Stratified k-fold training on a manifest; returns the per-fold report.
/// `config` keys are the CLI keys, e.g. `{"epochs": 10, "reduce.k": 5}`.
#[pyfunction]
#[pyo3(signature = (manifest, config=None, jobs=1))]
fn cross_validate<'py>(
    py: Python<'py>,
    manifest: PathBuf,
    config: Option<&Bound<'py, PyDict>>,
    jobs: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = train_config(config)?;
    let report = py
        .detach(|| -> cybersick_core::Result<String> {
            let (_, mut ds) = data::load_manifest(&manifest)?;
            if ds.class_count() != cfg.class_count {
                ds.rebin(BinningScheme::for_class_count(cfg.class_count)?)?;
            }
            let prepared = PreparedData::from_dataset(&ds, &cfg.reduction)?;
            Ok(train::run_cross_validation(&prepared, &cfg, jobs.max(1))?
                .report()
                .to_json())
        })
        .map_err(to_py)?;
    json_to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (scores, aggregation="mean-abs"))]
fn temporal_importance(scores: Vec<Vec<f64>>, aggregation: &str) -> PyResult<Vec<f64>> {
    let agg: Aggregation = aggregation.parse().map_err(to_py)?;
    Ok(attribution::temporal_importance(matrix(scores)?.view(), agg).per_step)
}

/// Two-layer LSTM classifier.
#[pyclass(module = "cybersick")]
struct Model {
    inner: ModelParams,
}

impl Model {
    fn attribute(&self, x: Vec<Vec<f64>>, config: AttributionConfig) -> PyResult<(Vec<Vec<f64>>, usize)> {
        let x = matrix(x)?;
        let map = attribution::attribute(&self.inner, x.view(), &config).map_err(to_py)?;
        Ok((rows(&map.scores), map.class))
    }
}

#[pymethods]
impl Model {
    #[new]
    #[pyo3(signature = (input_width, hidden=100, classes=4, dropout=0.2, seed=0))]
    fn new(input_width: usize, hidden: usize, classes: usize, dropout: f64, seed: u64) -> PyResult<Self> {
        let shape = ModelShape {
            input_width,
            hidden,
            classes,
        };
        Ok(Self {
            inner: ModelParams::init(&shape, dropout, seed).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: load_model(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&path, &self.inner, None).map_err(to_py)
    }

    /// `(input_width, hidden, classes)`
    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        let s = self.inner.shape();
        (s.input_width, s.hidden, s.classes)
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        self.inner.parameter_count()
    }

    /// Class probabilities for one reduced input (steps × width), dropout off.
    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        Ok(self.inner.predict(matrix(x)?.view()).map_err(to_py)?.to_vec())
    }

    /// Input gradient of the target output; returns `(scores, explained_class)`.
    #[pyo3(signature = (x, target="logit"))]
    fn gradients(&self, x: Vec<Vec<f64>>, target: &str) -> PyResult<(Vec<Vec<f64>>, usize)> {
        let config = AttributionConfig {
            method: Method::StandardGradients,
            target: target.parse::<Target>().map_err(to_py)?,
            ..AttributionConfig::default()
        };
        self.attribute(x, config)
    }

    /// Integrated gradients from `baseline` (zeros when omitted).
    #[pyo3(signature = (x, steps=50, target="logit", baseline=None))]
    fn integrated_gradients(
        &self,
        x: Vec<Vec<f64>>,
        steps: usize,
        target: &str,
        baseline: Option<Vec<Vec<f64>>>,
    ) -> PyResult<(Vec<Vec<f64>>, usize)> {
        let config = AttributionConfig {
            method: Method::IntegratedGradients,
            target: target.parse::<Target>().map_err(to_py)?,
            ig_steps: steps,
            baseline: match baseline {
                Some(b) => Baseline::Custom(matrix(b)?),
                None => Baseline::Zeros,
            },
            ..AttributionConfig::default()
        };
        self.attribute(x, config)
    }

    fn __repr__(&self) -> String {
        let (d, h, c) = self.shape();
        format!("Model(input_width={d}, hidden={h}, classes={c})")
    }
}

/// Reduction helper matching the training pipeline.
#[pyfunction]
#[pyo3(signature = (frames, mode="concat", k=5))]
fn reduce_frames(frames: Vec<Vec<f64>>, mode: &str, k: usize) -> PyResult<Vec<Vec<f64>>> {
    let cfg = ReductionConfig {
        mode: mode.parse().map_err(to_py)?,
        window: k,
        ..ReductionConfig::default()
    };
    let out = reduce::reduce(matrix(frames)?.view(), &cfg).map_err(to_py)?;
    Ok(rows(&out.into_inner()))
}

#[pymodule]
fn cybersick(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(read_features, m)?)?;
    m.add_function(wrap_pyfunction!(write_features, m)?)?;
    m.add_function(wrap_pyfunction!(max_pool, m)?)?;
    m.add_function(wrap_pyfunction!(concat, m)?)?;
    m.add_function(wrap_pyfunction!(reduce_frames, m)?)?;
    m.add_function(wrap_pyfunction!(bin_fms, m)?)?;
    m.add_function(wrap_pyfunction!(stratified_kfold, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(temporal_importance, m)?)?;
    m.add_class::<Model>()?;
    Ok(())
}
