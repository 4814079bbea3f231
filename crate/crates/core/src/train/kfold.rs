use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::SeverityClass;
use crate::error::{Error, Result};

/// Disjoint sample-id lists for one fold, each ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldSplit {
    pub fold_index: usize,
    pub train_ids: Vec<usize>,
    pub validation_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
}

/// Shuffles each class with `seed` and deals it round-robin across `k` test
/// folds, continuing the deal position from one class to the next so fold
/// sizes stay within one of each other. Each fold's validation set takes the
/// first `round(fraction·n)` (at least one, at most `n−1`) of every class's
/// remaining shuffled samples.
pub fn stratified_kfold(
    labels: &[SeverityClass],
    k: usize,
    seed: u64,
    validation_fraction: f64,
) -> Result<Vec<FoldSplit>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (id, label) in labels.iter().enumerate() {
        by_class.entry(label.0).or_default().push(id);
    }
    for (&class, ids) in &by_class {
        if ids.len() < k {
            return Err(Error::Stratification {
                class,
                count: ids.len(),
                folds: k,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; labels.len()];
    let mut offset = 0;
    for ids in by_class.values_mut() {
        ids.shuffle(&mut rng);
        for (j, &id) in ids.iter().enumerate() {
            fold_of[id] = (offset + j) % k;
        }
        offset = (offset + ids.len()) % k;
    }

    let mut splits = Vec::with_capacity(k);
    for fold in 0..k {
        let mut split = FoldSplit {
            fold_index: fold,
            train_ids: Vec::new(),
            validation_ids: Vec::new(),
            test_ids: Vec::new(),
        };
        for ids in by_class.values() {
            let (test, rest): (Vec<usize>, Vec<usize>) = ids.iter().partition(|&&id| fold_of[id] == fold);
            split.test_ids.extend(test);
            let n = rest.len();
            let n_val = if n >= 2 {
                ((validation_fraction * n as f64).round() as usize).clamp(1, n - 1)
            } else {
                0
            };
            split.validation_ids.extend(&rest[..n_val]);
            split.train_ids.extend(&rest[n_val..]);
        }
        split.train_ids.sort_unstable();
        split.validation_ids.sort_unstable();
        split.test_ids.sort_unstable();
        splits.push(split);
    }
    Ok(splits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(counts: &[usize]) -> Vec<SeverityClass> {
        counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat_n(SeverityClass(c), n))
            .collect()
    }

    #[test]
    fn ten_balanced_samples_five_folds() {
        let l = labels(&[5, 5]);
        let splits = stratified_kfold(&l, 5, 3, 0.1).unwrap();
        // deal enumeration: fold sizes 2, one per class
        for s in &splits {
            let per_class: Vec<usize> = (0..2)
                .map(|c| s.test_ids.iter().filter(|&&i| l[i].0 == c).count())
                .collect();
            assert_eq!(per_class, vec![1, 1]);
        }
    }

    #[test]
    fn two_fold_halves() {
        let l = labels(&[2, 2]);
        let splits = stratified_kfold(&l, 2, 0, 0.1).unwrap();
        for s in &splits {
            assert_eq!(s.test_ids.len(), 2);
            assert_ne!(l[s.test_ids[0]], l[s.test_ids[1]]);
        }
    }

    #[test]
    fn lists_are_disjoint_and_cover() {
        let l = labels(&[17, 9, 30]);
        let splits = stratified_kfold(&l, 5, 1, 0.1).unwrap();
        let mut seen = vec![0; l.len()];
        for s in &splits {
            for &id in &s.test_ids {
                seen[id] += 1;
            }
            let mut all: Vec<usize> = s
                .train_ids
                .iter()
                .chain(&s.validation_ids)
                .chain(&s.test_ids)
                .copied()
                .collect();
            all.sort_unstable();
            assert_eq!(all, (0..l.len()).collect::<Vec<_>>());
            assert!(!s.validation_ids.is_empty());
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn deterministic_in_seed() {
        let l = labels(&[12, 8, 10]);
        assert_eq!(
            stratified_kfold(&l, 4, 9, 0.1).unwrap(),
            stratified_kfold(&l, 4, 9, 0.1).unwrap()
        );
        assert_ne!(
            stratified_kfold(&l, 4, 9, 0.1).unwrap(),
            stratified_kfold(&l, 4, 10, 0.1).unwrap()
        );
    }

    #[test]
    fn small_class_is_named() {
        let l = labels(&[6, 3]);
        match stratified_kfold(&l, 5, 0, 0.1) {
            Err(Error::Stratification { class, count, folds }) => assert_eq!((class, count, folds), (1, 3, 5)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
