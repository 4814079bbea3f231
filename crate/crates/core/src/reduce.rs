//! Temporal reduction of frame sequences into short LSTM inputs.
//!
//! Both modes consume `floor(T / k)` non-overlapping windows of `k` frames and
//! drop the trailing `T mod k` frames.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReductionMode {
    /// Column-wise maximum over each window; width stays `D`.
    MaxPool,
    /// Window frames laid end to end; width becomes `k·D`.
    Concat,
}

impl fmt::Display for ReductionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReductionMode::MaxPool => "max-pool",
            ReductionMode::Concat => "concat",
        })
    }
}

impl FromStr for ReductionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max-pool" | "maxpool" | "max_pool" => Ok(ReductionMode::MaxPool),
            "concat" => Ok(ReductionMode::Concat),
            other => Err(Error::Config(format!(
                "unknown reduction mode {other:?} (expected max-pool or concat)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailPolicy {
    #[default]
    DropRemainder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionConfig {
    pub mode: ReductionMode,
    pub window: usize,
    #[serde(default)]
    pub tail_policy: TailPolicy,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        Self {
            mode: ReductionMode::Concat,
            window: 5,
            tail_policy: TailPolicy::DropRemainder,
        }
    }
}

impl ReductionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("reduce.k must be at least 1".into()));
        }
        Ok(())
    }

    /// Output shape `(S, D′)` for a `frames × dim` input.
    pub fn output_shape(&self, frames: usize, dim: usize) -> (usize, usize) {
        let steps = frames / self.window.max(1);
        match self.mode {
            ReductionMode::MaxPool => (steps, dim),
            ReductionMode::Concat => (steps, self.window * dim),
        }
    }
}

/// Reduced model input, `S × D′`.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledSequence {
    steps: Array2<f64>,
}

impl PooledSequence {
    pub fn new(steps: Array2<f64>) -> Result<Self> {
        if steps.nrows() == 0 || steps.ncols() == 0 {
            return Err(Error::Shape(format!(
                "pooled sequence must be non-empty, got {:?}",
                steps.dim()
            )));
        }
        if steps.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("pooled sequence contains non-finite values".into()));
        }
        Ok(Self { steps })
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.steps.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.steps
    }

    pub fn steps(&self) -> usize {
        self.steps.nrows()
    }

    pub fn width(&self) -> usize {
        self.steps.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.steps.dim()
    }
}

fn check_window(frames: usize, k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::Config("window must be at least 1".into()));
    }
    if frames < k {
        return Err(Error::Shape(format!(
            "sequence of {frames} frames is shorter than window {k}"
        )));
    }
    Ok(frames / k)
}

pub fn max_pool_time(frames: ArrayView2<'_, f64>, k: usize) -> Result<PooledSequence> {
    let steps = check_window(frames.nrows(), k)?;
    let mut out = Array2::zeros((steps, frames.ncols()));
    for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        let window = frames.slice(s![i * k..(i + 1) * k, ..]);
        for (d, v) in row.iter_mut().enumerate() {
            *v = window.column(d).fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        }
    }
    PooledSequence::new(out)
}

pub fn concat_windows(frames: ArrayView2<'_, f64>, k: usize) -> Result<PooledSequence> {
    let steps = check_window(frames.nrows(), k)?;
    let dim = frames.ncols();
    let consumed = frames.slice(s![..steps * k, ..]);
    // row-major reshape: row i = frames i·k .. (i+1)·k laid end to end
    let flat: Vec<f64> = consumed.iter().copied().collect();
    PooledSequence::new(Array2::from_shape_vec((steps, k * dim), flat).expect("exact size"))
}

pub fn reduce(frames: ArrayView2<'_, f64>, config: &ReductionConfig) -> Result<PooledSequence> {
    config.validate()?;
    match config.mode {
        ReductionMode::MaxPool => max_pool_time(frames, config.window),
        ReductionMode::Concat => concat_windows(frames, config.window),
    }
}
