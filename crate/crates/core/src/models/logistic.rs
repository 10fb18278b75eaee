//! L2-regularized logistic regression fitted with L-BFGS.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::{check_labels, round_f32, sigmoid, softplus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    /// Inverse regularization strength; 0 disables the penalty.
    #[serde(rename = "C", alias = "c")]
    pub c: f64,
    pub max_iters: usize,
    /// Stop once the max-norm of the (per-row) gradient falls below this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            c: 1.0,
            max_iters: 500,
            tolerance: 1e-7,
            seed: 0,
        }
    }
}

impl LogisticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::config("C must be finite and non-negative"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn input_width(&self) -> usize {
        self.weights.len()
    }

    pub fn margin(&self, row: &[f64]) -> f64 {
        self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin(row))
    }
}

/// Objective divided by the row count:
/// `(sum of NLL + ||w||^2 / (2C)) / n`, the bias left unpenalized.
pub fn objective(x: &Matrix, y: &[bool], c: f64, theta: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let d = x.cols();
    let n = x.rows() as f64;
    let (w, b) = theta.split_at(d);
    let b = b[0];
    let mut loss = 0.0;
    let mut g = vec![0.0; d + 1];
    for (row, &label) in x.iter_rows().zip(y) {
        let z = row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
        let t = if label { 1.0 } else { 0.0 };
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for (gj, xj) in g.iter_mut().zip(row) {
            *gj += r * xj;
        }
        g[d] += r;
    }
    if c > 0.0 {
        let lam = 1.0 / c;
        loss += 0.5 * lam * w.iter().map(|v| v * v).sum::<f64>();
        for (gj, wj) in g.iter_mut().zip(w) {
            *gj += lam * wj;
        }
    }
    if let Some(out) = grad {
        for (o, gj) in out.iter_mut().zip(&g) {
            *o = gj / n;
        }
    }
    loss / n
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn train_logistic(x: &Matrix, y: &[bool], config: &LogisticConfig) -> Result<LogisticModel> {
    config.validate()?;
    check_labels(x, y)?;
    x.ensure_finite("training matrix")?;
    let d = x.cols();
    let mut theta = vec![0.0; d + 1];
    let mut grad = vec![0.0; d + 1];
    let mut f = objective(x, y, config.c, &theta, Some(&mut grad));
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    const MEMORY: usize = 10;

    for _ in 0..config.max_iters {
        if grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) < config.tolerance {
            break;
        }
        // Two-loop recursion for the search direction.
        let mut q = grad.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, yv, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(yv) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, yv, _)) = history.back() {
            let gamma = dot(s, yv) / dot(yv, yv);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, yv, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let bcoef = rho * dot(yv, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - bcoef) * si;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&dir, &grad);
        if slope >= 0.0 {
            dir = grad.iter().map(|g| -g).collect();
            slope = dot(&dir, &grad);
            history.clear();
        }

        // Armijo backtracking.
        let mut step = if history.is_empty() {
            1.0 / grad.iter().map(|g| g * g).sum::<f64>().sqrt().max(1.0)
        } else {
            1.0
        };
        let mut new_grad = vec![0.0; d + 1];
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(t, p)| t + step * p).collect();
            let fc = objective(x, y, config.c, &cand, Some(&mut new_grad));
            if fc.is_finite() && fc <= f + 1e-4 * step * slope {
                accepted = Some((cand, fc));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, fc)) = accepted else {
            break;
        };
        let s: Vec<f64> = cand.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 {
            if history.len() == MEMORY {
                history.pop_front();
            }
            history.push_back((s, yv, 1.0 / sy));
        }
        let improvement = f - fc;
        theta = cand;
        grad.copy_from_slice(&new_grad);
        f = fc;
        if improvement.abs() <= 1e-15 * f.abs().max(1.0) {
            break;
        }
    }
    if !f.is_finite() {
        return Err(Error::training("logistic objective is not finite"));
    }
    let bias = round_f32(theta[d]);
    theta.truncate(d);
    Ok(LogisticModel {
        weights: theta.into_iter().map(round_f32).collect(),
        bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng as _;

    #[test]
    fn separable_sign() {
        let x = Matrix::from_rows(&[[1.0], [1.0], [-1.0], [-1.0]]).unwrap();
        let y = [true, true, false, false];
        let m = train_logistic(&x, &y, &LogisticConfig::default()).unwrap();
        assert!(m.weights[0] > 0.0);
        assert!(m.predict_row(&[1.0]) > 0.5 && m.predict_row(&[-1.0]) < 0.5);
    }

    #[test]
    fn single_class_rejected() {
        let x = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        assert!(train_logistic(&x, &[true, true], &LogisticConfig::default()).is_err());
        let bad = Matrix::from_rows(&[[f64::NAN], [2.0]]).unwrap();
        assert!(train_logistic(&bad, &[true, false], &LogisticConfig::default()).is_err());
    }

    fn fixture() -> (Matrix, Vec<bool>) {
        let mut r = rng::stream(5, "logistic-fixture");
        let rows: Vec<Vec<f64>> = (0..50).map(|_| (0..3).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
        let y = rows
            .iter()
            .map(|v| v[0] - 0.5 * v[1] + r.random_range(-1.5..1.5) > 0.0)
            .collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn matches_gradient_descent_oracle() {
        let (x, y) = fixture();
        for c in [0.5, 1.0] {
            let m = train_logistic(&x, &y, &LogisticConfig { c, ..Default::default() }).unwrap();
            let mut theta = m.weights.clone();
            theta.push(m.bias);
            let fitted = objective(&x, &y, c, &theta, None);

            // Plain full-batch descent, run to a tight gradient norm.
            let mut t = vec![0.0; 4];
            let mut g = vec![0.0; 4];
            for _ in 0..200_000 {
                objective(&x, &y, c, &t, Some(&mut g));
                if g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-10 {
                    break;
                }
                for (ti, gi) in t.iter_mut().zip(&g) {
                    *ti -= 0.5 * gi;
                }
            }
            let oracle = objective(&x, &y, c, &t, None);
            assert!((fitted - oracle).abs() < 1e-4, "{fitted} vs {oracle}");
        }
    }

    #[test]
    fn unregularized_endpoint() {
        let (x, y) = fixture();
        let m = train_logistic(&x, &y, &LogisticConfig { c: 0.0, ..Default::default() }).unwrap();
        let reg = train_logistic(&x, &y, &LogisticConfig { c: 0.01, ..Default::default() }).unwrap();
        let norm = |w: &[f64]| w.iter().map(|v| v * v).sum::<f64>();
        assert!(norm(&m.weights) > norm(&reg.weights));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (x, y) = fixture();
        let theta = [0.3, -0.2, 0.1, 0.05];
        let mut g = vec![0.0; 4];
        objective(&x, &y, 0.7, &theta, Some(&mut g));
        for j in 0..4 {
            let mut a = theta;
            let mut b = theta;
            a[j] += 1e-6;
            b[j] -= 1e-6;
            let num = (objective(&x, &y, 0.7, &a, None) - objective(&x, &y, 0.7, &b, None)) / 2e-6;
            assert!((num - g[j]).abs() < 1e-7);
        }
    }

    #[test]
    fn monotone_in_positive_weight_feature() {
        let (x, y) = fixture();
        let m = train_logistic(&x, &y, &LogisticConfig::default()).unwrap();
        let j = m.weights.iter().position(|&w| w > 0.0).unwrap();
        let mut row = vec![0.1, 0.2, 0.3];
        let before = m.predict_row(&row);
        row[j] += 0.5;
        assert!(m.predict_row(&row) > before);
    }
}
