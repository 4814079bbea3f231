use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dense::{cross_entropy, softmax, DenseParams};
use super::dropout::{check_rate, dropout, Phase};
use super::lstm::{lstm_backward, lstm_forward, Gate, LstmCache, LstmLayerParams};
use crate::data::SeverityClass;
use crate::error::{Error, Result};

/// Names of the trainable tensors, in storage and optimizer order.
pub const TENSOR_NAMES: [&str; 8] = [
    "lstm1.w", "lstm1.u", "lstm1.b", "lstm2.w", "lstm2.u", "lstm2.b", "head.w", "head.b",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub input_width: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl ModelShape {
    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0 || self.hidden == 0 {
            return Err(Error::Config(format!("model dimensions must be positive: {self:?}")));
        }
        if self.classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {}", self.classes)));
        }
        Ok(())
    }
}

/// LSTM → dropout → LSTM (last state) → dropout → dense softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lstm1: LstmLayerParams,
    pub lstm2: LstmLayerParams,
    pub head: DenseParams,
    pub dropout_rate: f64,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub lstm1: LstmCache,
    pub mask1: Array2<f64>,
    pub lstm2: LstmCache,
    pub mask2: Array1<f64>,
    /// Final hidden state of the second layer after dropout.
    pub features: Array1<f64>,
    pub logits: Array1<f64>,
    pub probs: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub logits: Array1<f64>,
    pub probs: Array1<f64>,
    pub cache: Option<ForwardCache>,
}

/// Gradients mirroring [`ModelParams`], plus ∂/∂x for the input sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub lstm1: LstmLayerParams,
    pub lstm2: LstmLayerParams,
    pub head: DenseParams,
    pub input: Array2<f64>,
}

fn fill_uniform(a: &mut [f64], limit: f64, rng: &mut impl Rng) {
    for v in a {
        *v = rng.random_range(-limit..limit);
    }
}

fn init_lstm(input: usize, hidden: usize, rng: &mut impl Rng) -> LstmLayerParams {
    let mut p = LstmLayerParams::zeros(input, hidden);
    // fan limits are per gate block
    fill_uniform(p.w.as_slice_mut().unwrap(), (6.0 / (input + hidden) as f64).sqrt(), rng);
    fill_uniform(p.u.as_slice_mut().unwrap(), (6.0 / (2 * hidden) as f64).sqrt(), rng);
    p.b.slice_mut(s![Gate::Forget as usize * hidden..(Gate::Forget as usize + 1) * hidden])
        .fill(1.0);
    p
}

macro_rules! tensor_list {
    ($self:ident, $as:ident) => {
        [
            $self.lstm1.w.$as().unwrap(),
            $self.lstm1.u.$as().unwrap(),
            $self.lstm1.b.$as().unwrap(),
            $self.lstm2.w.$as().unwrap(),
            $self.lstm2.u.$as().unwrap(),
            $self.lstm2.b.$as().unwrap(),
            $self.head.w.$as().unwrap(),
            $self.head.b.$as().unwrap(),
        ]
    };
}

impl ModelParams {
    pub fn zeros(shape: &ModelShape, dropout_rate: f64) -> Self {
        Self {
            lstm1: LstmLayerParams::zeros(shape.input_width, shape.hidden),
            lstm2: LstmLayerParams::zeros(shape.hidden, shape.hidden),
            head: DenseParams::zeros(shape.hidden, shape.classes),
            dropout_rate,
        }
    }

    /// Uniform `±sqrt(6/(fan_in+fan_out))` weights, zero biases except the
    /// forget gate (1). Deterministic in `seed`.
    pub fn init(shape: &ModelShape, dropout_rate: f64, seed: u64) -> Result<Self> {
        shape.validate()?;
        check_rate(dropout_rate)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lstm1 = init_lstm(shape.input_width, shape.hidden, &mut rng);
        let lstm2 = init_lstm(shape.hidden, shape.hidden, &mut rng);
        let mut head = DenseParams::zeros(shape.hidden, shape.classes);
        fill_uniform(
            head.w.as_slice_mut().unwrap(),
            (6.0 / (shape.hidden + shape.classes) as f64).sqrt(),
            &mut rng,
        );
        Ok(Self {
            lstm1,
            lstm2,
            head,
            dropout_rate,
        })
    }

    /// Every entry, biases included, drawn from `U(-scale, scale)`.
    pub fn random_uniform(shape: &ModelShape, scale: f64, dropout_rate: f64, seed: u64) -> Result<Self> {
        shape.validate()?;
        check_rate(dropout_rate)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = Self::zeros(shape, dropout_rate);
        for t in model.tensors_mut() {
            fill_uniform(t, scale, &mut rng);
        }
        Ok(model)
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape {
            input_width: self.lstm1.input_size(),
            hidden: self.lstm1.hidden_size(),
            classes: self.head.outputs(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lstm1.check()?;
        self.lstm2.check()?;
        let h = self.lstm1.hidden_size();
        if self.lstm2.input_size() != h || self.lstm2.hidden_size() != h || self.head.input_size() != h {
            return Err(Error::Shape(format!(
                "layer widths disagree: lstm1 H={h}, lstm2 {}→{}, head input {}",
                self.lstm2.input_size(),
                self.lstm2.hidden_size(),
                self.head.input_size()
            )));
        }
        if self.head.b.len() != self.head.outputs() {
            return Err(Error::Shape("head bias length differs from class count".into()));
        }
        check_rate(self.dropout_rate)?;
        let finite = self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::Domain("model contains non-finite parameters".into()));
        }
        Ok(())
    }

    pub fn tensors(&self) -> [&[f64]; 8] {
        tensor_list!(self, as_slice)
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 8] {
        tensor_list!(self, as_slice_mut)
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn check_input(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.lstm1.input_size() {
            return Err(Error::Shape(format!(
                "model expects input width {}, got {}",
                self.lstm1.input_size(),
                x.ncols()
            )));
        }
        if x.nrows() == 0 {
            return Err(Error::Shape("input sequence has no steps".into()));
        }
        Ok(())
    }

    fn run(&self, x: ArrayView2<'_, f64>, phase: Phase, rng: &mut impl Rng) -> Result<ForwardCache> {
        self.check_input(x)?;
        let (h1, c1) = lstm_forward(&self.lstm1, x)?;
        let (h1, mask1) = dropout(h1.view(), self.dropout_rate, phase, rng)?;
        let (h2, c2) = lstm_forward(&self.lstm2, h1.view())?;
        let last = h2.row(h2.nrows() - 1);
        let (features, mask2) = dropout(last, self.dropout_rate, phase, rng)?;
        let logits = self.head.logits(features.view());
        let probs = softmax(logits.view());
        Ok(ForwardCache {
            lstm1: c1,
            mask1,
            lstm2: c2,
            mask2,
            features,
            logits,
            probs,
        })
    }

    /// Class probabilities for one sequence; the cache is kept only in training.
    pub fn forward(&self, x: ArrayView2<'_, f64>, phase: Phase, rng: &mut impl Rng) -> Result<Forward> {
        let cache = self.run(x, phase, rng)?;
        Ok(Forward {
            logits: cache.logits.clone(),
            probs: cache.probs.clone(),
            cache: (phase == Phase::Train).then_some(cache),
        })
    }

    /// Deterministic forward with dropout disabled and the cache retained,
    /// for gradients of the inference graph.
    pub fn forward_traced(&self, x: ArrayView2<'_, f64>) -> Result<ForwardCache> {
        self.run(x, Phase::Eval, &mut NoRng)
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        Ok(self.forward_traced(x)?.probs)
    }

    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        Ok(self.forward_traced(x)?.logits)
    }

    /// Backward pass seeded with ∂(objective)/∂logits.
    pub fn backward_from_logits(&self, cache: &ForwardCache, d_logits: ArrayView1<'_, f64>) -> Result<Gradients> {
        if d_logits.len() != self.head.outputs() {
            return Err(Error::Shape(format!(
                "logit gradient has {} entries, model has {} classes",
                d_logits.len(),
                self.head.outputs()
            )));
        }
        let h = self.lstm1.hidden_size();
        let steps = cache.lstm2.hidden.nrows();

        let mut head = DenseParams::zeros(h, self.head.outputs());
        head.w = outer(d_logits, cache.features.view());
        head.b = d_logits.to_owned();
        let d_features = self.head.w.t().dot(&d_logits);

        let mut d_h2 = Array2::zeros((steps, h));
        d_h2.row_mut(steps - 1).assign(&(&d_features * &cache.mask2));
        let (lstm2, d_h1_dropped) = lstm_backward(&self.lstm2, &cache.lstm2, d_h2.view())?;
        let d_h1 = d_h1_dropped * &cache.mask1;
        let (lstm1, input) = lstm_backward(&self.lstm1, &cache.lstm1, d_h1.view())?;
        Ok(Gradients {
            lstm1,
            lstm2,
            head,
            input,
        })
    }

    /// Exact gradient of the cross-entropy of `label` through the cached graph.
    pub fn backward(&self, cache: Option<&ForwardCache>, label: SeverityClass) -> Result<Gradients> {
        let cache = cache.ok_or_else(|| Error::Shape("backward needs a training-mode forward cache".into()))?;
        if label.0 >= self.head.outputs() {
            return Err(Error::Domain(format!(
                "label {} outside {} classes",
                label.0,
                self.head.outputs()
            )));
        }
        let mut d_logits = cache.probs.clone();
        d_logits[label.0] -= 1.0;
        self.backward_from_logits(cache, d_logits.view())
    }

    /// Eval-mode cross-entropy.
    pub fn loss(&self, x: ArrayView2<'_, f64>, label: SeverityClass) -> Result<f64> {
        Ok(cross_entropy(self.predict(x)?.view(), label))
    }
}

fn outer(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}

/// Never consulted: eval-mode dropout draws nothing.
struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("eval forward drew a random number")
    }
    fn next_u64(&mut self) -> u64 {
        unreachable!("eval forward drew a random number")
    }
    fn fill_bytes(&mut self, _: &mut [u8]) {
        unreachable!("eval forward drew a random number")
    }
}

impl Gradients {
    pub fn zeros(shape: &ModelShape, steps: usize) -> Self {
        let z = ModelParams::zeros(shape, 0.0);
        Self {
            lstm1: z.lstm1,
            lstm2: z.lstm2,
            head: z.head,
            input: Array2::zeros((steps, shape.input_width)),
        }
    }

    pub fn tensors(&self) -> [&[f64]; 8] {
        tensor_list!(self, as_slice)
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 8] {
        tensor_list!(self, as_slice_mut)
    }

    /// Adds the parameter gradients of `other`; the input gradient is left alone.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
        self.input *= factor;
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales parameter gradients so their global norm is at most `max_norm`.
    pub fn clip_global_norm(&mut self, max_norm: f64) {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            let f = max_norm / norm;
            for t in self.tensors_mut() {
                t.iter_mut().for_each(|v| *v *= f);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn shape() -> ModelShape {
        ModelShape {
            input_width: 6,
            hidden: 4,
            classes: 3,
        }
    }

    fn input(seed: u64, steps: usize, width: usize) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((steps, width), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn init_is_deterministic_with_expected_shapes() {
        let s = ModelShape {
            input_width: 12,
            hidden: 100,
            classes: 4,
        };
        let a = ModelParams::init(&s, 0.2, 3).unwrap();
        assert_eq!(a, ModelParams::init(&s, 0.2, 3).unwrap());
        assert_ne!(a, ModelParams::init(&s, 0.2, 4).unwrap());
        for g in Gate::ALL {
            assert_eq!(a.lstm1.gate_input_weights(g).dim(), (100, 12));
            assert_eq!(a.lstm1.gate_recurrent_weights(g).dim(), (100, 100));
            assert_eq!(a.lstm2.gate_bias(g).len(), 100);
        }
        assert!(a.lstm1.gate_bias(Gate::Forget).iter().all(|&b| b == 1.0));
        assert!(a.lstm1.gate_bias(Gate::Input).iter().all(|&b| b == 0.0));
        assert!(a.head.b.iter().all(|&b| b == 0.0));
        a.validate().unwrap();
    }

    #[test]
    fn init_weights_are_centred() {
        // 4·100 × 250 = 10⁵ entries
        let s = ModelShape {
            input_width: 250,
            hidden: 100,
            classes: 4,
        };
        let p = ModelParams::init(&s, 0.2, 17).unwrap();
        let w = &p.lstm1.w;
        assert_eq!(w.len(), 100_000);
        let limit = (6.0f64 / 350.0).sqrt();
        assert!(w.iter().all(|v| v.abs() <= limit));
        let sigma_of_mean = limit / (3.0 * w.len() as f64).sqrt();
        assert!(w.mean().unwrap().abs() < 3.0 * sigma_of_mean);
    }

    #[test]
    fn zero_head_gives_uniform_probabilities() {
        let mut p = ModelParams::init(&shape(), 0.2, 1).unwrap();
        p.head = DenseParams::zeros(4, 3);
        let probs = p.predict(input(2, 5, 6).view()).unwrap();
        assert!(probs.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn eval_forward_is_bitwise_repeatable() {
        let p = ModelParams::init(&shape(), 0.2, 1).unwrap();
        let x = input(3, 5, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = p.forward(x.view(), Phase::Eval, &mut rng).unwrap();
        let b = p.forward(x.view(), Phase::Eval, &mut rng).unwrap();
        assert!(a.cache.is_none());
        assert_eq!(a.probs.mapv(f64::to_bits), b.probs.mapv(f64::to_bits));
        assert!((a.probs.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn training_forward_fills_cache_and_backward_requires_it() {
        let p = ModelParams::init(&shape(), 0.2, 1).unwrap();
        let x = input(3, 5, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f = p.forward(x.view(), Phase::Train, &mut rng).unwrap();
        assert!(f.cache.is_some());
        assert!(p.backward(None, SeverityClass(0)).is_err());
        let g = p.backward(f.cache.as_ref(), SeverityClass(0)).unwrap();
        assert_eq!(g.input.dim(), (5, 6));
    }

    #[test]
    fn width_mismatch_rejected() {
        let p = ModelParams::init(&shape(), 0.2, 1).unwrap();
        assert!(matches!(p.predict(Array2::zeros((3, 5)).view()), Err(Error::Shape(_))));
    }

    #[test]
    fn head_bias_gradient_vanishes_at_minimum() {
        let mut p = ModelParams::init(&shape(), 0.0, 1).unwrap();
        p.head.b = array![60.0, 0.0, 0.0];
        let cache = p.forward_traced(input(4, 3, 6).view()).unwrap();
        let g = p.backward(Some(&cache), SeverityClass(0)).unwrap();
        assert!(g.head.b.iter().all(|v| v.abs() < 1e-9), "{:?}", g.head.b);
    }

    #[test]
    fn gradients_are_linear_in_the_loss() {
        let p = ModelParams::init(&shape(), 0.0, 8).unwrap();
        let cache = p.forward_traced(input(5, 4, 6).view()).unwrap();
        let g = p.backward(Some(&cache), SeverityClass(2)).unwrap();
        let mut doubled = g.clone();
        doubled.accumulate(&g);
        for (d, s) in doubled.tensors().iter().zip(g.tensors()) {
            assert!(d.iter().zip(s).all(|(a, b)| *a == 2.0 * b));
        }
    }

    #[test]
    fn clipping_bounds_norm() {
        let p = ModelParams::init(&shape(), 0.0, 8).unwrap();
        let cache = p.forward_traced(input(5, 4, 6).view()).unwrap();
        let mut g = p.backward(Some(&cache), SeverityClass(2)).unwrap();
        let n = g.global_norm();
        g.clip_global_norm(n / 2.0);
        assert!((g.global_norm() - n / 2.0).abs() < 1e-12);
    }
}
