//! Gradient attributions over model inputs and per-step importance curves.
//!
//! Integrated gradients use the right-endpoint Riemann sum
//! `(x − b) · (1/m) Σ_{j=1..m} ∇F(b + (j/m)(x − b))`.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{argmax, ModelParams};

/// A scalar function of an `S × D′` input with an exact gradient.
pub trait Differentiable {
    fn value(&self, x: ArrayView2<'_, f64>) -> Result<f64>;
    fn gradient(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    StandardGradients,
    IntegratedGradients,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::StandardGradients => "standard",
            Method::IntegratedGradients => "integrated",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" | "standard-gradients" | "saliency" => Ok(Method::StandardGradients),
            "integrated" | "integrated-gradients" | "ig" => Ok(Method::IntegratedGradients),
            other => Err(Error::Config(format!(
                "unknown attribution method {other:?} (standard or integrated)"
            ))),
        }
    }
}

/// Which scalar output is explained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    PredictedClassLogit,
    PredictedClassProbability,
    /// Logit of a fixed class.
    ExplicitClass(usize),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::PredictedClassLogit => f.write_str("logit"),
            Target::PredictedClassProbability => f.write_str("probability"),
            Target::ExplicitClass(c) => write!(f, "class:{c}"),
        }
    }
}

impl FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logit" => Ok(Target::PredictedClassLogit),
            "probability" | "prob" => Ok(Target::PredictedClassProbability),
            other => other
                .strip_prefix("class:")
                .and_then(|c| c.parse().ok())
                .map(Target::ExplicitClass)
                .ok_or_else(|| Error::Config(format!("unknown target {other:?} (logit, probability or class:N)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Baseline {
    Zeros,
    Custom(Array2<f64>),
}

impl Baseline {
    pub fn materialize(&self, shape: (usize, usize)) -> Result<Array2<f64>> {
        match self {
            Baseline::Zeros => Ok(Array2::zeros(shape)),
            Baseline::Custom(b) if b.dim() == shape => Ok(b.clone()),
            Baseline::Custom(b) => Err(Error::Shape(format!(
                "baseline shape {:?} differs from input shape {shape:?}",
                b.dim()
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    MeanAbsolute,
    L2Norm,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::MeanAbsolute => "mean-abs",
            Aggregation::L2Norm => "l2",
        })
    }
}

impl FromStr for Aggregation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean-abs" | "mean-absolute" => Ok(Aggregation::MeanAbsolute),
            "l2" | "l2-norm" => Ok(Aggregation::L2Norm),
            other => Err(Error::Config(format!("unknown aggregation {other:?} (mean-abs or l2)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionConfig {
    pub method: Method,
    pub target: Target,
    pub ig_steps: usize,
    pub baseline: Baseline,
    pub aggregation: Aggregation,
}

impl Default for AttributionConfig {
    fn default() -> Self {
        Self {
            method: Method::IntegratedGradients,
            target: Target::PredictedClassLogit,
            ig_steps: 50,
            baseline: Baseline::Zeros,
            aggregation: Aggregation::MeanAbsolute,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Output {
    Logit,
    Probability,
}

/// One class output of the classifier, evaluated with dropout off.
#[derive(Debug, Clone, Copy)]
pub struct ClassObjective<'a> {
    pub model: &'a ModelParams,
    pub class: usize,
    pub output: Output,
}

impl Differentiable for ClassObjective<'_> {
    fn value(&self, x: ArrayView2<'_, f64>) -> Result<f64> {
        let cache = self.model.forward_traced(x)?;
        Ok(match self.output {
            Output::Logit => cache.logits[self.class],
            Output::Probability => cache.probs[self.class],
        })
    }

    fn gradient(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let cache = self.model.forward_traced(x)?;
        let c = self.class;
        let seed: Array1<f64> = match self.output {
            Output::Logit => Array1::from_shape_fn(cache.logits.len(), |k| f64::from(u8::from(k == c))),
            // ∂p_c/∂z_k = p_c (δ_ck − p_k)
            Output::Probability => {
                let p = &cache.probs;
                Array1::from_shape_fn(p.len(), |k| p[c] * (f64::from(u8::from(k == c)) - p[k]))
            }
        };
        Ok(self.model.backward_from_logits(&cache, seed.view())?.input)
    }
}

pub fn standard_gradients<F: Differentiable + ?Sized>(f: &F, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    f.gradient(x)
}

pub fn integrated_gradients<F: Differentiable + ?Sized>(
    f: &F,
    x: ArrayView2<'_, f64>,
    baseline: ArrayView2<'_, f64>,
    steps: usize,
) -> Result<Array2<f64>> {
    if steps == 0 {
        return Err(Error::Config("integrated gradients need at least one step".into()));
    }
    if baseline.dim() != x.dim() {
        return Err(Error::Shape(format!(
            "baseline shape {:?} differs from input shape {:?}",
            baseline.dim(),
            x.dim()
        )));
    }
    let delta = &x - &baseline;
    let mut total = Array2::<f64>::zeros(x.dim());
    for j in 1..=steps {
        let alpha = j as f64 / steps as f64;
        let point = &baseline + &(&delta * alpha);
        total += &f.gradient(point.view())?;
    }
    total /= steps as f64;
    Ok(total * delta)
}

/// `|Σ scores − (F(x) − F(baseline))|`.
pub fn completeness_gap<F: Differentiable + ?Sized>(
    f: &F,
    x: ArrayView2<'_, f64>,
    scores: ArrayView2<'_, f64>,
    baseline: ArrayView2<'_, f64>,
) -> Result<f64> {
    let expected = f.value(x)? - f.value(baseline)?;
    Ok((scores.sum() - expected).abs())
}

/// Non-negative importance per time step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemporalImportance {
    pub per_step: Vec<f64>,
}

impl TemporalImportance {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,importance\n");
        for (s, v) in self.per_step.iter().enumerate() {
            writeln!(out, "{s},{v}").unwrap();
        }
        out
    }

    /// Element-wise mean over curves of equal length.
    pub fn mean(curves: &[TemporalImportance]) -> Result<TemporalImportance> {
        let Some(first) = curves.first() else {
            return Err(Error::Config("no curves to average".into()));
        };
        let len = first.per_step.len();
        if curves.iter().any(|c| c.per_step.len() != len) {
            return Err(Error::Shape("curves have different lengths".into()));
        }
        let per_step = (0..len)
            .map(|s| curves.iter().map(|c| c.per_step[s]).sum::<f64>() / curves.len() as f64)
            .collect();
        Ok(TemporalImportance { per_step })
    }
}

pub fn temporal_importance(scores: ArrayView2<'_, f64>, aggregation: Aggregation) -> TemporalImportance {
    let width = scores.ncols().max(1) as f64;
    let per_step = scores
        .axis_iter(Axis(0))
        .map(|row| match aggregation {
            Aggregation::MeanAbsolute => row.iter().map(|v| v.abs()).sum::<f64>() / width,
            Aggregation::L2Norm => row.iter().map(|v| v * v).sum::<f64>().sqrt() / width.sqrt(),
        })
        .collect();
    TemporalImportance { per_step }
}

/// Attribution scores for one input plus the settings that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionMap {
    pub scores: Array2<f64>,
    pub method: Method,
    pub target: Target,
    /// Class whose output was explained.
    pub class: usize,
    pub output: Output,
    pub ig_steps: usize,
    pub baseline: Array2<f64>,
}

impl AttributionMap {
    pub fn objective<'a>(&self, model: &'a ModelParams) -> ClassObjective<'a> {
        ClassObjective {
            model,
            class: self.class,
            output: self.output,
        }
    }

    pub fn importance(&self, aggregation: Aggregation) -> TemporalImportance {
        temporal_importance(self.scores.view(), aggregation)
    }
}

/// Resolves the target class at `x` and runs the configured method.
pub fn attribute(model: &ModelParams, x: ArrayView2<'_, f64>, config: &AttributionConfig) -> Result<AttributionMap> {
    let classes = model.shape().classes;
    let (class, output) = match config.target {
        Target::PredictedClassLogit => (argmax(model.predict(x)?.view()), Output::Logit),
        Target::PredictedClassProbability => (argmax(model.predict(x)?.view()), Output::Probability),
        Target::ExplicitClass(c) if c < classes => (c, Output::Logit),
        Target::ExplicitClass(c) => {
            return Err(Error::Config(format!("target class {c} outside {classes} classes")));
        }
    };
    let objective = ClassObjective { model, class, output };
    let baseline = config.baseline.materialize(x.dim())?;
    let scores = match config.method {
        Method::StandardGradients => standard_gradients(&objective, x)?,
        Method::IntegratedGradients => integrated_gradients(&objective, x, baseline.view(), config.ig_steps)?,
    };
    Ok(AttributionMap {
        scores,
        method: config.method,
        target: config.target,
        class,
        output,
        ig_steps: config.ig_steps,
        baseline,
    })
}
