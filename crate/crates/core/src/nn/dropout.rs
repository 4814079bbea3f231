use ndarray::{Array, ArrayView, Dimension};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Eval,
}

pub(crate) fn check_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::Config(format!("dropout rate must be in [0, 1), got {rate}")))
    }
}

/// Inverted dropout. The returned mask holds the multiplier applied to each
/// entry: `0` for dropped entries, `1/(1-rate)` for survivors, all ones in eval.
pub fn dropout<D: Dimension>(
    x: ArrayView<'_, f64, D>,
    rate: f64,
    phase: Phase,
    rng: &mut impl Rng,
) -> Result<(Array<f64, D>, Array<f64, D>)> {
    check_rate(rate)?;
    let mask = match phase {
        Phase::Train if rate > 0.0 => {
            let keep = 1.0 / (1.0 - rate);
            x.map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        }
        _ => Array::ones(x.raw_dim()),
    };
    Ok((&x * &mask, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;
    use rand::SeedableRng;

    #[test]
    fn zero_rate_and_eval_are_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let x = Array1::linspace(-3.0, 3.0, 50);
        for phase in [Phase::Train, Phase::Eval] {
            let (y, _) = dropout(x.view(), 0.0, phase, &mut rng).unwrap();
            assert_eq!(y, x);
        }
        let (y, mask) = dropout(x.view(), 0.2, Phase::Eval, &mut rng).unwrap();
        assert_eq!(y, x);
        assert!(mask.iter().all(|&m| m == 1.0));
    }

    #[test]
    fn drop_fraction_and_unbiasedness() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x = Array1::from_shape_fn(1_000_000, |i| 1.0 + (i % 7) as f64);
        let (y, _) = dropout(x.view(), 0.2, Phase::Train, &mut rng).unwrap();
        let zeros = y.iter().filter(|&&v| v == 0.0).count() as f64 / 1e6;
        assert!((zeros - 0.2).abs() < 0.002, "{zeros}");
        let ratio = y.mean().unwrap() / x.mean().unwrap();
        assert!((ratio - 1.0).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn rate_bounds() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let x = Array1::<f64>::ones(3);
        assert!(dropout(x.view(), 1.0, Phase::Train, &mut rng).is_err());
        assert!(dropout(x.view(), -0.1, Phase::Eval, &mut rng).is_err());
    }
}
