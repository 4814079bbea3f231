use crate::error::Result;

/// Patience counter over a "higher is better" metric.
///
/// Only strict improvements reset the counter.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    wait: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            wait: 0,
        }
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }

    pub fn observe(&mut self, epoch: usize, metric: f64) -> StopDecision {
        match self.best {
            Some((_, best)) if metric <= best => {
                self.wait += 1;
                if self.wait >= self.patience {
                    StopDecision::Stop
                } else {
                    StopDecision::Continue
                }
            }
            _ => {
                self.best = Some((epoch, metric));
                self.wait = 0;
                StopDecision::Improved
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoppedRun<S> {
    /// State snapshot from the best epoch, or the initial state if none ran.
    pub best_state: S,
    pub best_epoch: Option<usize>,
    pub best_metric: Option<f64>,
    pub epochs_run: usize,
}

/// Drives `epoch_fn` for epochs `1..=max_epochs`; it mutates the state and
/// returns the monitored metric. Stops after `patience` epochs without strict
/// improvement and hands back the best snapshot.
pub fn run_with_early_stopping<S: Clone>(
    mut state: S,
    max_epochs: usize,
    patience: usize,
    mut epoch_fn: impl FnMut(usize, &mut S) -> Result<f64>,
) -> Result<StoppedRun<S>> {
    let mut stopper = EarlyStopping::new(patience);
    let mut best_state = state.clone();
    let mut epochs_run = 0;
    for epoch in 1..=max_epochs {
        let metric = epoch_fn(epoch, &mut state)?;
        epochs_run = epoch;
        match stopper.observe(epoch, metric) {
            StopDecision::Improved => best_state = state.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }
    let best = stopper.best();
    Ok(StoppedRun {
        best_state,
        best_epoch: best.map(|b| b.0),
        best_metric: best.map(|b| b.1),
        epochs_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Reference simulation of the stopping rule on a fixed sequence.
    fn simulate(seq: &[f64], patience: usize) -> (usize, usize) {
        let (mut best, mut best_epoch, mut wait) = (f64::NEG_INFINITY, 0, 0);
        for (i, &v) in seq.iter().enumerate() {
            if v > best {
                best = v;
                best_epoch = i + 1;
                wait = 0;
            } else {
                wait += 1;
                if wait >= patience {
                    return (i + 1, best_epoch);
                }
            }
        }
        (seq.len(), best_epoch)
    }

    #[test]
    fn plateau_stops_after_patience() {
        let seq = [0.5, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6];
        assert_eq!(simulate(&seq, 5), (7, 2));
        let run = run_with_early_stopping(0usize, 50, 5, |epoch, s| {
            *s = epoch;
            Ok(seq.get(epoch - 1).copied().unwrap_or(0.0))
        })
        .unwrap();
        assert_eq!(run.epochs_run, 7);
        assert_eq!(run.best_epoch, Some(2));
        assert_eq!(run.best_state, 2);
    }

    #[test]
    fn zero_epochs_returns_initial_state() {
        let run = run_with_early_stopping(41, 0, 5, |_, _| unreachable!()).unwrap();
        assert_eq!((run.best_state, run.best_epoch, run.epochs_run), (41, None, 0));
    }

    #[test]
    fn never_exceeds_max_epochs_or_stops_early() {
        for patience in 1..6 {
            for max in 0..12 {
                let run = run_with_early_stopping((), max, patience, |_, _| Ok(0.3)).unwrap();
                assert!(run.epochs_run <= max);
                assert_eq!(run.epochs_run, max.min(patience + 1));
            }
        }
    }

    #[test]
    fn sequences_agree_with_simulation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let seq: Vec<f64> = (0..20).map(|_| f64::from(rng.random_range(0..5u8)) / 4.0).collect();
            let patience = rng.random_range(1..6);
            let run = run_with_early_stopping(0, seq.len(), patience, |e, s| {
                *s = e;
                Ok(seq[e - 1])
            })
            .unwrap();
            let (stop, best) = simulate(&seq, patience);
            assert_eq!((run.epochs_run, run.best_epoch.unwrap()), (stop, best));
            assert_eq!(run.best_state, best);
        }
    }
}
