use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Inverse-frequency class weights: `total / (2 * count_c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub negative: f64,
    pub positive: f64,
}

impl ClassWeights {
    pub fn of(&self, label: bool) -> f64 {
        if label {
            self.positive
        } else {
            self.negative
        }
    }
}

pub fn class_weights(labels: &[bool]) -> Result<ClassWeights> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("class weights need both classes present"));
    }
    let total = labels.len() as f64;
    Ok(ClassWeights {
        negative: total / (2.0 * neg as f64),
        positive: total / (2.0 * pos as f64),
    })
}

/// Batches drawn with replacement, each row chosen with probability
/// inversely proportional to its class frequency, so every batch is
/// balanced in expectation.
pub struct WeightedBatchSampler {
    positives: Vec<usize>,
    negatives: Vec<usize>,
    batch_size: usize,
    remaining: usize,
    rng: rng::Rng,
}

impl WeightedBatchSampler {
    pub fn new(labels: &[bool], batch_size: usize, n_batches: usize, seed: u64) -> Result<Self> {
        if batch_size < 2 {
            return Err(Error::invalid("batch_size must be at least 2"));
        }
        let positives: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
        let negatives: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
        if positives.is_empty() || negatives.is_empty() {
            return Err(Error::invalid("weighted sampling needs both classes present"));
        }
        Ok(WeightedBatchSampler {
            positives,
            negatives,
            batch_size,
            remaining: n_batches,
            rng: rng::stream(seed, "sampler/weighted"),
        })
    }
}

impl Iterator for WeightedBatchSampler {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        // Each class carries total weight 1/2: pick the class, then a row
        // uniformly inside it.
        Some(
            (0..self.batch_size)
                .map(|_| {
                    let class = if self.rng.random_bool(0.5) {
                        &self.positives
                    } else {
                        &self.negatives
                    };
                    class[self.rng.random_range(0..class.len())]
                })
                .collect(),
        )
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

pub fn weighted_batch_sampler(
    labels: &[bool],
    batch_size: usize,
    n_batches: usize,
    seed: u64,
) -> Result<WeightedBatchSampler> {
    WeightedBatchSampler::new(labels, batch_size, n_batches, seed)
}

/// One pass over the rows in a fresh random order, chunked into batches.
pub fn shuffled_batches(n_rows: usize, batch_size: usize, r: &mut rng::Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(r);
    order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_weight_examples() {
        let y: Vec<bool> = (0..100).map(|i| i < 10).collect();
        let w = class_weights(&y).unwrap();
        assert!((w.negative - 100.0 / 180.0).abs() < 1e-12);
        assert!((w.positive - 5.0).abs() < 1e-12);
        assert!((90.0 * w.negative - 10.0 * w.positive).abs() < 1e-9);

        let y: Vec<bool> = (0..100).map(|i| i % 2 == 0).collect();
        let w = class_weights(&y).unwrap();
        assert_eq!((w.negative, w.positive), (1.0, 1.0));

        let y: Vec<bool> = (0..1000).map(|i| i == 0).collect();
        let w = class_weights(&y).unwrap();
        assert!((w.negative - 1000.0 / 1998.0).abs() < 1e-12);
        assert_eq!(w.positive, 500.0);

        assert!(class_weights(&[true, true]).is_err());
    }

    #[test]
    fn sampler_is_deterministic_and_sized() {
        let y: Vec<bool> = (0..500).map(|i| i % 50 == 0).collect();
        let a: Vec<Vec<usize>> = weighted_batch_sampler(&y, 32, 10, 3).unwrap().collect();
        let b: Vec<Vec<usize>> = weighted_batch_sampler(&y, 32, 10, 3).unwrap().collect();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        assert!(a.iter().all(|batch| batch.len() == 32));
        assert!(weighted_batch_sampler(&[false; 10], 4, 1, 0).is_err());
        assert!(weighted_batch_sampler(&y, 1, 1, 0).is_err());
    }

    #[test]
    fn balanced_labels_draw_uniformly() {
        let y: Vec<bool> = (0..100).map(|i| i % 2 == 0).collect();
        let draws: usize = 200 * 64;
        let pos: usize = weighted_batch_sampler(&y, 64, 200, 9)
            .unwrap()
            .flatten()
            .filter(|&i| y[i])
            .count();
        let sigma = (draws as f64 * 0.25).sqrt();
        assert!((pos as f64 - draws as f64 / 2.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn shuffled_batches_cover_rows_once() {
        let mut r = rng::stream(1, "t");
        let b = shuffled_batches(10, 4, &mut r);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), [4, 4, 2]);
        let mut all: Vec<usize> = b.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }
}
