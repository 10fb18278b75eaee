use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// Row indices of a train/test partition, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn class_indices(labels: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let pos = (0..labels.len()).filter(|&i| labels[i]).collect();
    let neg = (0..labels.len()).filter(|&i| !labels[i]).collect();
    (pos, neg)
}

/// Hold out `test_fraction` of the rows. When stratified, each class
/// contributes `round(fraction * class_count)` rows to the test side.
pub fn split_holdout(labels: &[bool], test_fraction: f64, stratified: bool, seed: u64) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid("test_fraction must lie in (0, 1)"));
    }
    let mut r = rng::stream(seed, "split/holdout");
    let mut test = Vec::new();
    let mut train = Vec::new();
    if stratified {
        let (mut pos, mut neg) = class_indices(labels);
        if pos.len() < 2 {
            return Err(Error::invalid(format!(
                "stratified split needs at least 2 positives, found {}",
                pos.len()
            )));
        }
        for class in [&mut pos, &mut neg] {
            class.shuffle(&mut r);
            let k = (test_fraction * class.len() as f64).round() as usize;
            test.extend_from_slice(&class[..k]);
            train.extend_from_slice(&class[k..]);
        }
    } else {
        let mut all: Vec<usize> = (0..labels.len()).collect();
        all.shuffle(&mut r);
        let k = (test_fraction * all.len() as f64).round() as usize;
        test.extend_from_slice(&all[..k]);
        train.extend_from_slice(&all[k..]);
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid(format!(
            "split of {} rows at fraction {test_fraction} leaves an empty side",
            labels.len()
        )));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// `k` (train, validation) pairs; positives and negatives are dealt
/// round-robin so per-fold positive counts differ by at most one.
pub fn stratified_kfold(labels: &[bool], k: usize, seed: u64) -> Result<Vec<Split>> {
    if k < 2 {
        return Err(Error::invalid("k must be at least 2"));
    }
    let (mut pos, mut neg) = class_indices(labels);
    if pos.len() < k {
        return Err(Error::invalid(format!(
            "{} positives cannot fill {k} folds",
            pos.len()
        )));
    }
    let mut r = rng::stream(seed, "split/kfold");
    pos.shuffle(&mut r);
    neg.shuffle(&mut r);
    let mut fold_of = vec![0usize; labels.len()];
    for (j, &i) in pos.iter().enumerate() {
        fold_of[i] = j % k;
    }
    // Continue dealing where the positives stopped to balance fold sizes.
    let offset = pos.len() % k;
    for (j, &i) in neg.iter().enumerate() {
        fold_of[i] = (j + offset) % k;
    }
    Ok((0..k)
        .map(|f| Split {
            train: (0..labels.len()).filter(|&i| fold_of[i] != f).collect(),
            test: (0..labels.len()).filter(|&i| fold_of[i] == f).collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(n: usize, positives: usize) -> Vec<bool> {
        (0..n).map(|i| i < positives).collect()
    }

    #[test]
    fn stratified_holdout_is_exactly_proportional() {
        let y = labels(1000, 10);
        let s = split_holdout(&y, 0.4, true, 1).unwrap();
        assert_eq!(s.test.iter().filter(|&&i| y[i]).count(), 4);
        assert_eq!(s.train.len() + s.test.len(), 1000);
    }

    #[test]
    fn half_split_of_ten() {
        let s = split_holdout(&labels(10, 3), 0.5, false, 3).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (5, 5));
        assert!(s.train.iter().all(|i| !s.test.contains(i)));
    }

    #[test]
    fn holdout_deterministic_and_errors() {
        let y = labels(200, 20);
        assert_eq!(split_holdout(&y, 0.3, true, 5).unwrap(), split_holdout(&y, 0.3, true, 5).unwrap());
        assert_ne!(split_holdout(&y, 0.3, true, 5).unwrap(), split_holdout(&y, 0.3, true, 6).unwrap());
        assert!(split_holdout(&labels(100, 1), 0.3, true, 1).is_err());
        assert!(split_holdout(&y, 0.0, true, 1).is_err());
        assert!(split_holdout(&y, 1.0, false, 1).is_err());
    }

    #[test]
    fn kfold_examples() {
        let y = labels(100, 10);
        let folds = stratified_kfold(&y, 5, 2).unwrap();
        for f in &folds {
            assert_eq!(f.test.iter().filter(|&&i| y[i]).count(), 2);
        }
        let y = labels(4, 2);
        for f in stratified_kfold(&y, 2, 0).unwrap() {
            assert_eq!(f.test.iter().filter(|&&i| y[i]).count(), 1);
        }
        assert!(stratified_kfold(&labels(50, 3), 5, 0).is_err());
        assert!(stratified_kfold(&labels(50, 3), 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn kfold_partitions_rows(n in 10usize..300, pos_frac in 0.05f64..0.5, k in 2usize..6, seed: u64) {
            let p = ((n as f64 * pos_frac) as usize).max(k);
            prop_assume!(p <= n);
            let y = labels(n, p);
            let folds = stratified_kfold(&y, k, seed).unwrap();
            let mut seen = vec![0u32; n];
            let mut counts = Vec::new();
            for f in &folds {
                for &i in &f.test { seen[i] += 1; }
                prop_assert_eq!(f.train.len() + f.test.len(), n);
                counts.push(f.test.iter().filter(|&&i| y[i]).count());
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            prop_assert!(hi - lo <= 1);
        }

        #[test]
        fn holdout_partitions_rows(n in 20usize..300, frac in 0.1f64..0.9, seed: u64) {
            let p = n / 5;
            let y = labels(n, p);
            let s = split_holdout(&y, frac, true, seed).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let tp = s.test.iter().filter(|&&i| y[i]).count() as f64;
            prop_assert!((tp - frac * p as f64).abs() <= 1.0);
        }
    }
}
