use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gate blocks, in the order they are stacked inside the fused matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Candidate];
}

/// Weights of one LSTM layer, with the four gates stacked row-wise.
///
/// `w` is `4H × D′`, `u` is `4H × H`, `b` has `4H` entries; block `g` of each
/// spans rows `g·H .. (g+1)·H` (see [`Gate`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayerParams {
    pub w: Array2<f64>,
    pub u: Array2<f64>,
    pub b: Array1<f64>,
}

impl LstmLayerParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        Self {
            w: Array2::zeros((4 * hidden_size, input_size)),
            u: Array2::zeros((4 * hidden_size, hidden_size)),
            b: Array1::zeros(4 * hidden_size),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.u.ncols()
    }

    pub fn input_size(&self) -> usize {
        self.w.ncols()
    }

    fn rows(&self, gate: Gate) -> std::ops::Range<usize> {
        let h = self.hidden_size();
        gate as usize * h..(gate as usize + 1) * h
    }

    pub fn gate_input_weights(&self, gate: Gate) -> ArrayView2<'_, f64> {
        self.w.slice(s![self.rows(gate), ..])
    }

    pub fn gate_recurrent_weights(&self, gate: Gate) -> ArrayView2<'_, f64> {
        self.u.slice(s![self.rows(gate), ..])
    }

    pub fn gate_bias(&self, gate: Gate) -> ArrayView1<'_, f64> {
        self.b.slice(s![self.rows(gate)])
    }

    pub(crate) fn check(&self) -> Result<()> {
        let h4 = self.u.nrows();
        if !h4.is_multiple_of(4) || h4 / 4 != self.u.ncols() || self.w.nrows() != h4 || self.b.len() != h4 {
            return Err(Error::Shape(format!(
                "inconsistent LSTM tensors: w {:?}, u {:?}, b {}",
                self.w.dim(),
                self.u.dim(),
                self.b.len()
            )));
        }
        Ok(())
    }
}

/// Everything the backward pass needs from one layer's forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCache {
    pub input: Array2<f64>,
    /// Activated gates per step, `S × 4H` in [`Gate`] order.
    pub gates: Array2<f64>,
    pub cells: Array2<f64>,
    pub cell_tanh: Array2<f64>,
    pub hidden: Array2<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Runs the layer over `x` (`S × D′`) from zero hidden and cell state and
/// returns every hidden state (`S × H`).
pub fn lstm_forward(params: &LstmLayerParams, x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, LstmCache)> {
    if x.ncols() != params.input_size() {
        return Err(Error::Shape(format!(
            "LSTM expects input width {}, got {}",
            params.input_size(),
            x.ncols()
        )));
    }
    let h = params.hidden_size();
    let steps = x.nrows();

    let mut gates = x.dot(&params.w.t());
    gates += &params.b;
    let mut cells = Array2::zeros((steps, h));
    let mut cell_tanh = Array2::zeros((steps, h));
    let mut hidden = Array2::<f64>::zeros((steps, h));

    for t in 0..steps {
        let mut z = gates.row_mut(t);
        if t > 0 {
            z += &params.u.dot(&hidden.row(t - 1));
        }
        for j in 0..3 * h {
            z[j] = sigmoid(z[j]);
        }
        for j in 3 * h..4 * h {
            z[j] = z[j].tanh();
        }
        for j in 0..h {
            let (i, f, o, g) = (z[j], z[h + j], z[2 * h + j], z[3 * h + j]);
            let prev = if t > 0 { cells[[t - 1, j]] } else { 0.0 };
            let c = f * prev + i * g;
            let tc = c.tanh();
            cells[[t, j]] = c;
            cell_tanh[[t, j]] = tc;
            hidden[[t, j]] = o * tc;
        }
    }

    let cache = LstmCache {
        input: x.to_owned(),
        gates,
        cells,
        cell_tanh,
        hidden: hidden.clone(),
    };
    Ok((hidden, cache))
}

/// Backpropagation through time. `d_hidden` is ∂L/∂h_t for every step as seen
/// from above the layer; returns parameter gradients and ∂L/∂x.
pub fn lstm_backward(
    params: &LstmLayerParams,
    cache: &LstmCache,
    d_hidden: ArrayView2<'_, f64>,
) -> Result<(LstmLayerParams, Array2<f64>)> {
    let h = params.hidden_size();
    let steps = cache.hidden.nrows();
    if d_hidden.dim() != (steps, h) {
        return Err(Error::Shape(format!(
            "hidden gradient is {:?}, expected {:?}",
            d_hidden.dim(),
            (steps, h)
        )));
    }

    let mut dz = Array2::<f64>::zeros((steps, 4 * h));
    let mut dh_next = Array1::<f64>::zeros(h);
    let mut dc_next = Array1::<f64>::zeros(h);

    for t in (0..steps).rev() {
        let z = cache.gates.row(t);
        let mut dzt = dz.row_mut(t);
        for j in 0..h {
            let (i, f, o, g) = (z[j], z[h + j], z[2 * h + j], z[3 * h + j]);
            let tc = cache.cell_tanh[[t, j]];
            let prev = if t > 0 { cache.cells[[t - 1, j]] } else { 0.0 };
            let dh = d_hidden[[t, j]] + dh_next[j];
            let d_o = dh * tc;
            let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
            dzt[j] = dc * g * i * (1.0 - i);
            dzt[h + j] = dc * prev * f * (1.0 - f);
            dzt[2 * h + j] = d_o * o * (1.0 - o);
            dzt[3 * h + j] = dc * i * (1.0 - g * g);
            dc_next[j] = dc * f;
        }
        dh_next = params.u.t().dot(&dz.row(t));
    }

    let mut grads = LstmLayerParams::zeros(params.input_size(), h);
    grads.w = dz.t().dot(&cache.input);
    if steps > 1 {
        grads.u = dz.slice(s![1.., ..]).t().dot(&cache.hidden.slice(s![..steps - 1, ..]));
    }
    grads.b = dz.sum_axis(Axis(0));
    let d_input = dz.dot(&params.w);
    Ok((grads, d_input))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};

    fn random_layer(rng: &mut impl Rng, input: usize, hidden: usize, scale: f64) -> LstmLayerParams {
        let mut p = LstmLayerParams::zeros(input, hidden);
        p.w.mapv_inplace(|_| rng.random_range(-scale..scale));
        p.u.mapv_inplace(|_| rng.random_range(-scale..scale));
        p.b.mapv_inplace(|_| rng.random_range(-scale..scale));
        p
    }

    #[test]
    fn zero_weights_give_zero_hidden() {
        let p = LstmLayerParams::zeros(3, 4);
        let x = array![[1., 2., 3.], [-4., 5., 0.5]];
        let (h, _) = lstm_forward(&p, x.view()).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_cell_hand_evaluation() {
        // every pre-activation equals 1 at t = 1
        let mut p = LstmLayerParams::zeros(1, 1);
        p.w.fill(0.5);
        p.b.fill(0.5);
        p.u.fill(0.3);
        let (h, cache) = lstm_forward(&p, array![[1.0]].view()).unwrap();
        let s1 = 1.0 / (1.0 + (-1.0f64).exp());
        let c1 = s1 * 1.0f64.tanh();
        let h1 = s1 * c1.tanh();
        assert!((cache.cells[[0, 0]] - c1).abs() < 1e-12);
        assert!((h[[0, 0]] - h1).abs() < 1e-12);
        assert!((h[[0, 0]] - 0.3695).abs() < 1e-3);
    }

    #[test]
    fn gate_views_have_per_gate_shapes() {
        let p = LstmLayerParams::zeros(7, 100);
        for g in Gate::ALL {
            assert_eq!(p.gate_input_weights(g).dim(), (100, 7));
            assert_eq!(p.gate_recurrent_weights(g).dim(), (100, 100));
            assert_eq!(p.gate_bias(g).len(), 100);
        }
    }

    #[test]
    fn hidden_states_stay_inside_unit_interval() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let (d, h, s) = (rng.random_range(1..5), rng.random_range(1..5), rng.random_range(1..6));
            let p = random_layer(&mut rng, d, h, 5.0);
            let x = Array2::from_shape_fn((s, d), |_| rng.random_range(-10.0..10.0));
            let (hid, _) = lstm_forward(&p, x.view()).unwrap();
            assert!(hid.iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let p = LstmLayerParams::zeros(3, 2);
        assert!(matches!(
            lstm_forward(&p, Array2::zeros((2, 4)).view()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn backward_matches_central_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let p = random_layer(&mut rng, 3, 4, 0.8);
        let x = Array2::from_shape_fn((4, 3), |_| rng.random_range(-1.0..1.0));
        let weights = Array2::from_shape_fn((4, 4), |_| rng.random_range(-1.0..1.0));
        // scalar objective: Σ weights ⊙ h
        let objective = |p: &LstmLayerParams, x: &Array2<f64>| {
            let (h, _) = lstm_forward(p, x.view()).unwrap();
            (&h * &weights).sum()
        };
        let (_, cache) = lstm_forward(&p, x.view()).unwrap();
        let (g, dx) = lstm_backward(&p, &cache, weights.view()).unwrap();
        let step = 1e-6;
        let mut worst: f64 = 0.0;
        for idx in 0..p.w.len() {
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus.w.as_slice_mut().unwrap()[idx] += step;
            minus.w.as_slice_mut().unwrap()[idx] -= step;
            let num = (objective(&plus, &x) - objective(&minus, &x)) / (2.0 * step);
            worst = worst.max((num - g.w.as_slice().unwrap()[idx]).abs());
        }
        for idx in 0..p.u.len() {
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus.u.as_slice_mut().unwrap()[idx] += step;
            minus.u.as_slice_mut().unwrap()[idx] -= step;
            let num = (objective(&plus, &x) - objective(&minus, &x)) / (2.0 * step);
            worst = worst.max((num - g.u.as_slice().unwrap()[idx]).abs());
        }
        for idx in 0..x.len() {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus.as_slice_mut().unwrap()[idx] += step;
            minus.as_slice_mut().unwrap()[idx] -= step;
            let num = (objective(&p, &plus) - objective(&p, &minus)) / (2.0 * step);
            worst = worst.max((num - dx.as_slice().unwrap()[idx]).abs());
        }
        assert!(worst < 1e-8, "max abs error {worst}");
    }
}
