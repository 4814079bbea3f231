use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::SeverityClass;

pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Fully connected output layer, `C × H` weights plus `C` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl DenseParams {
    pub fn zeros(input_size: usize, outputs: usize) -> Self {
        Self {
            w: Array2::zeros((outputs, input_size)),
            b: Array1::zeros(outputs),
        }
    }

    pub fn outputs(&self) -> usize {
        self.w.nrows()
    }

    pub fn input_size(&self) -> usize {
        self.w.ncols()
    }

    pub fn logits(&self, features: ArrayView1<'_, f64>) -> Array1<f64> {
        self.w.dot(&features) + &self.b
    }
}

/// Max-shifted softmax.
pub fn softmax(logits: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut exp = logits.mapv(|v| (v - max).exp());
    let total = exp.sum();
    exp /= total;
    exp
}

/// Negative log-likelihood of `label`, with the probability clamped at
/// [`PROBABILITY_FLOOR`].
pub fn cross_entropy(probs: ArrayView1<'_, f64>, label: SeverityClass) -> f64 {
    -probs[label.0].max(PROBABILITY_FLOOR).ln()
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(values: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
