//! Threshold metrics for scored binary predictions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

fn check(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::invalid(format!("score {i} is NaN")));
    }
    Ok(())
}

/// Indices sorted by descending score (stable, so ties keep input order).
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// One point per distinct score, visited from the highest threshold down;
/// a row is predicted positive when its score is at least the threshold.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<PrPoint>> {
    check(scores, labels)?;
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::invalid("precision-recall curve needs at least one positive"));
    }
    let order = descending(scores);
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            threshold: t,
            recall: tp as f64 / positives as f64,
            precision: tp as f64 / (tp + fp) as f64,
        });
    }
    Ok(points)
}

/// Average precision: `sum_k (R_k - R_{k-1}) * P_k` over the curve.
pub fn auc_pr_from_curve(points: &[PrPoint]) -> f64 {
    let mut prev = 0.0;
    let mut area = 0.0;
    for p in points {
        area += (p.recall - prev) * p.precision;
        prev = p.recall;
    }
    area
}

pub fn auc_pr(scores: &[f64], labels: &[bool]) -> Result<f64> {
    pr_curve(scores, labels).map(|c| auc_pr_from_curve(&c))
}

/// Largest gap between the class-conditional empirical CDFs of the scores.
pub fn ks_statistic(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("KS statistic needs both classes"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut cp, mut cn) = (0usize, 0usize);
    let mut best: f64 = 0.0;
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                cp += 1;
            } else {
                cn += 1;
            }
            i += 1;
        }
        best = best.max((cp as f64 / n_pos as f64 - cn as f64 / n_neg as f64).abs());
    }
    Ok(best)
}

/// Area under the ROC curve (ties count one half).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("ROC AUC needs both classes"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of positive ranks with average ranks for ties.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        let start = i;
        let mut pos = 0usize;
        while i < order.len() && scores[order[i]] == t {
            pos += labels[order[i]] as usize;
            i += 1;
        }
        let avg_rank = (start + 1 + i) as f64 / 2.0;
        rank_sum += pos as f64 * avg_rank;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub threshold: f64,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `tp / (tp + fn)`, undefined without positives.
    pub fn recall(&self) -> Option<f64> {
        let p = self.tp + self.fn_;
        (p > 0).then(|| self.tp as f64 / p as f64)
    }

    /// `fp / (fp + tn)`, undefined without negatives.
    pub fn false_positive_rate(&self) -> Option<f64> {
        let n = self.fp + self.tn;
        (n > 0).then(|| self.fp as f64 / n as f64)
    }

    pub fn precision(&self) -> Option<f64> {
        let p = self.tp + self.fp;
        (p > 0).then(|| self.tp as f64 / p as f64)
    }
}

/// Rows scoring at least `threshold` are predicted positive.
pub fn confusion_at(scores: &[f64], labels: &[bool], threshold: f64) -> Result<ConfusionCounts> {
    check(scores, labels)?;
    let mut c = ConfusionCounts {
        tp: 0,
        fp: 0,
        tn: 0,
        fn_: 0,
        threshold,
    };
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::seq::SliceRandom;
    use rand::Rng as _;

    #[test]
    fn hand_enumerated_curve() {
        let pts = pr_curve(&[0.9, 0.8, 0.7, 0.6], &[true, false, true, false]).unwrap();
        let got: Vec<(f64, f64)> = pts.iter().map(|p| (p.recall, p.precision)).collect();
        assert_eq!(got, vec![(0.5, 1.0), (0.5, 0.5), (1.0, 2.0 / 3.0), (1.0, 0.5)]);
        assert_eq!(auc_pr(&[0.9, 0.8, 0.7, 0.6], &[true, false, true, false]).unwrap(), 0.5 + 0.5 * 2.0 / 3.0);
    }

    #[test]
    fn perfect_and_flat_scores() {
        let s = [0.9, 0.8, 0.3, 0.1];
        let y = [true, true, false, false];
        assert!(pr_curve(&s, &y).unwrap().iter().filter(|p| p.recall <= 1.0 && p.threshold >= 0.8).all(|p| p.precision == 1.0));
        assert_eq!(auc_pr(&s, &y).unwrap(), 1.0);
        let flat = [0.4; 5];
        let y = [true, false, false, false, false];
        let c = pr_curve(&flat, &y).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].recall, c[0].precision), (1.0, 0.2));
        assert_eq!(auc_pr(&flat, &y).unwrap(), 0.2);
        assert!(pr_curve(&flat, &[false; 5]).is_err());
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_statistic(&[0.9, 0.7, 0.8, 0.1], &[true, true, false, false]).unwrap(), 0.5);
        assert_eq!(ks_statistic(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap(), 1.0);
        assert_eq!(ks_statistic(&[0.3, 0.5, 0.3, 0.5], &[true, true, false, false]).unwrap(), 0.0);
        assert!(ks_statistic(&[0.3], &[true]).is_err());
    }

    #[test]
    fn confusion_examples() {
        let mut scores = vec![0.9; 371];
        scores.extend(vec![0.1; 33]);
        let labels = vec![true; 404];
        let c = confusion_at(&scores, &labels, 0.5).unwrap();
        assert_eq!((c.tp, c.fn_), (371, 33));
        assert!((c.recall().unwrap() - 0.918).abs() < 5e-4);

        let s = [0.2, 0.7, 0.4];
        let y = [false, true, false];
        let all = confusion_at(&s, &y, 0.0).unwrap();
        assert_eq!((all.fp, all.fn_), (2, 0));
        let none = confusion_at(&s, &y, 0.7 + 1e-9).unwrap();
        assert_eq!((none.tp, none.fp), (0, 0));
        assert_eq!(none.total(), 3);
        assert_eq!(confusion_at(&s, &[false; 3], 0.5).unwrap().recall(), None);
    }

    #[test]
    fn confusion_json_uses_fn_key() {
        let c = confusion_at(&[0.6], &[true], 0.5).unwrap();
        let v = serde_json::to_value(c).unwrap();
        assert_eq!(v["tp"], 1);
        assert_eq!(v["fn"], 0);
    }

    #[test]
    fn random_scores_have_prevalence_level_auc() {
        for seed in 0..5 {
            let mut r = rng::stream(seed, "null-auc");
            let mut labels: Vec<bool> = (0..10_000).map(|i| i < 100).collect();
            labels.shuffle(&mut r);
            let scores: Vec<f64> = (0..10_000).map(|_| r.random()).collect();
            let a = auc_pr(&scores, &labels).unwrap();
            assert!((0.005..=0.02).contains(&a), "seed {seed}: {a}");
        }
    }

    #[test]
    fn roc_auc_with_ties() {
        assert_eq!(roc_auc(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.5, 0.5], &[true, false]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.9, 0.5, 0.5, 0.1], &[true, true, false, false]).unwrap(), 0.875);
    }
}
