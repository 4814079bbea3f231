//! Analytic-vs-numeric gradient comparison.

use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{ModelParams, TENSOR_NAMES};
use crate::data::SeverityClass;
use crate::error::Result;

/// `|a − n| / max(|a|, |n|, 1e−8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub coordinates: usize,
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_relative_error).fold(0.0, f64::max)
    }

    pub fn max_absolute_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_absolute_error).fold(0.0, f64::max)
    }

    pub fn coordinates(&self) -> usize {
        self.tensors.iter().map(|t| t.coordinates).sum()
    }
}

fn pick(len: usize, per_tensor: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if len <= per_tensor {
        (0..len).collect()
    } else {
        let mut idx = sample(rng, len, per_tensor).into_vec();
        idx.sort_unstable();
        idx
    }
}

/// Central differences of `f` over `coords` of `point`, compared against
/// `analytic`. Returns the worst relative and absolute errors.
pub fn check_coordinates(
    point: &mut [f64],
    analytic: &[f64],
    coords: &[usize],
    step: f64,
    mut f: impl FnMut(&[f64]) -> f64,
) -> (f64, f64) {
    let (mut worst, mut worst_abs): (f64, f64) = (0.0, 0.0);
    for &i in coords {
        let orig = point[i];
        point[i] = orig + step;
        let up = f(point);
        point[i] = orig - step;
        let down = f(point);
        point[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        worst = worst.max(relative_error(analytic[i], numeric));
        worst_abs = worst_abs.max((analytic[i] - numeric).abs());
    }
    (worst, worst_abs)
}

/// Compares backprop against central differences of the eval-mode loss for
/// every parameter tensor and the input. Tensors with at most `per_tensor`
/// entries are checked exhaustively; larger ones on a seeded subsample.
pub fn grad_check(
    model: &ModelParams,
    x: ArrayView2<'_, f64>,
    label: SeverityClass,
    step: f64,
    per_tensor: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let cache = model.forward_traced(x)?;
    let grads = model.backward(Some(&cache), label)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport { tensors: Vec::new() };

    let mut probe = model.clone();
    for (k, name) in TENSOR_NAMES.iter().enumerate() {
        let analytic = grads.tensors()[k].to_vec();
        let coords = pick(analytic.len(), per_tensor, &mut rng);
        let mut values = probe.tensors()[k].to_vec();
        let (worst, worst_abs) = check_coordinates(&mut values, &analytic, &coords, step, |v| {
            probe.tensors_mut()[k].copy_from_slice(v);
            probe.loss(x, label).expect("shapes fixed")
        });
        probe.tensors_mut()[k].copy_from_slice(model.tensors()[k]);
        report.tensors.push(TensorCheck {
            name: (*name).to_string(),
            coordinates: coords.len(),
            max_relative_error: worst,
            max_absolute_error: worst_abs,
        });
    }

    let shape = x.dim();
    let mut input = x.to_owned().into_raw_vec_and_offset().0;
    let analytic: Vec<f64> = grads.input.iter().copied().collect();
    let coords = pick(input.len(), per_tensor, &mut rng);
    let (worst, worst_abs) = check_coordinates(&mut input, &analytic, &coords, step, |v| {
        let view = ArrayView2::from_shape(shape, v).expect("same shape");
        model.loss(view, label).expect("shapes fixed")
    });
    report.tensors.push(TensorCheck {
        name: "input".into(),
        coordinates: coords.len(),
        max_relative_error: worst,
        max_absolute_error: worst_abs,
    });
    Ok(report)
}
