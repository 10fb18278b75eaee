//! Logistic regression, gradient-boosted trees and the MLP behind one
//! probability-scoring interface, plus the SCM1 model file format.

mod gbt;
mod io;
mod logistic;
mod mlp;

use serde::{Deserialize, Serialize};

pub use gbt::{train_gbt, train_gbt_traced, GbtConfig, GbtModel, GbtTrace, Tree, TreeNode};
pub use io::{load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use logistic::{train_logistic, LogisticConfig, LogisticModel};
pub use mlp::{
    grad_check, grad_check_model, train_mlp, train_mlp_with_history, Activation, Layer, LossWeighting, MlpConfig,
    MlpModel, SamplerKind, LEAKY_SLOPE,
};

use crate::dataset::split_holdout;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::sampling::{smote_enc, SmoteConfig};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub(crate) fn round_f32(v: f64) -> f64 {
    v as f32 as f64
}

pub(crate) fn log_loss_from_margins(margins: &[f64], y: &[bool]) -> f64 {
    margins
        .iter()
        .zip(y)
        .map(|(&z, &l)| softplus(z) - if l { z } else { 0.0 })
        .sum::<f64>()
        / margins.len().max(1) as f64
}

pub(crate) fn check_labels(x: &Matrix, y: &[bool]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::invalid(format!("{} rows but {} labels", x.rows(), y.len())));
    }
    let pos = y.iter().filter(|&&l| l).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::invalid("training labels must contain both classes"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    Gbt,
    Mlp,
}

impl ModelKind {
    pub fn tag(self) -> u8 {
        match self {
            ModelKind::Logistic => 0,
            ModelKind::Gbt => 1,
            ModelKind::Mlp => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(ModelKind::Logistic),
            1 => Some(ModelKind::Gbt),
            2 => Some(ModelKind::Mlp),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::Gbt => "gbt",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(ModelKind::Logistic),
            "gbt" => Ok(ModelKind::Gbt),
            "mlp" => Ok(ModelKind::Mlp),
            _ => Err(Error::config(format!("unknown model kind {s:?} (expected logistic, gbt or mlp)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    Logistic(LogisticModel),
    Gbt(GbtModel),
    Mlp(MlpModel),
}

/// A trained scorer with the fingerprint of the schema it was fitted on
/// and an echo of its training configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub estimator: Estimator,
    pub schema_fingerprint: String,
    pub config: serde_json::Value,
}

impl Model {
    pub fn new(estimator: Estimator) -> Self {
        Model {
            estimator,
            schema_fingerprint: String::new(),
            config: serde_json::Value::Null,
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self.estimator {
            Estimator::Logistic(_) => ModelKind::Logistic,
            Estimator::Gbt(_) => ModelKind::Gbt,
            Estimator::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn input_width(&self) -> usize {
        match &self.estimator {
            Estimator::Logistic(m) => m.input_width(),
            Estimator::Gbt(m) => m.input_width,
            Estimator::Mlp(m) => m.input_width(),
        }
    }

    /// Default probability for every row.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.input_width() {
            return Err(Error::WidthMismatch {
                expected: self.input_width(),
                found: x.cols(),
            });
        }
        Ok(match &self.estimator {
            Estimator::Logistic(m) => x.iter_rows().map(|r| m.predict_row(r)).collect(),
            Estimator::Gbt(m) => x.iter_rows().map(|r| m.predict_row(r)).collect(),
            Estimator::Mlp(m) => m.predict(x),
        })
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        let x = Matrix::from_vec(1, row.len(), row.to_vec())?;
        Ok(self.predict_proba(&x)?[0])
    }
}

pub fn predict_proba(model: &Model, x: &Matrix) -> Result<Vec<f64>> {
    model.predict_proba(x)
}

/// Model family plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Logistic(LogisticConfig),
    Gbt(GbtConfig),
    Mlp(MlpConfig),
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Logistic(LogisticConfig::default())
    }
}

/// Share of the training rows held out for early stopping when boosting
/// is trained without an explicit validation set.
pub const INNER_VALIDATION_FRACTION: f64 = 0.2;

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Logistic(_) => ModelKind::Logistic,
            ModelSpec::Gbt(_) => ModelKind::Gbt,
            ModelSpec::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ModelSpec::Logistic(c) => c.seed,
            ModelSpec::Gbt(c) => c.seed,
            ModelSpec::Mlp(c) => c.seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            ModelSpec::Logistic(c) => c.seed = seed,
            ModelSpec::Gbt(c) => c.seed = seed,
            ModelSpec::Mlp(c) => c.seed = seed,
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Logistic(c) => c.validate(),
            ModelSpec::Gbt(c) => c.validate(),
            ModelSpec::Mlp(c) => c.validate(),
        }
    }

    /// Trains on `(x, y)`. Boosting with early stopping carves a stratified
    /// validation split out of the training rows.
    pub fn fit(&self, x: &Matrix, y: &[bool]) -> Result<Model> {
        self.fit_oversampled(x, y, None)
    }

    /// As [`fit`](Self::fit), oversampling the training rows with SMOTE-ENC
    /// first when `smote` is given. The early-stopping split is taken from
    /// the original rows before oversampling, so validation never sees
    /// synthetic samples.
    pub fn fit_oversampled(&self, x: &Matrix, y: &[bool], smote: Option<&SmoteConfig>) -> Result<Model> {
        let oversample = |x: &Matrix, y: &[bool]| -> Result<(Matrix, Vec<bool>)> {
            match smote {
                Some(cfg) => smote_enc(x, y, cfg),
                None => Ok((x.clone(), y.to_vec())),
            }
        };
        let estimator = match self {
            ModelSpec::Logistic(c) => {
                let (x, y) = oversample(x, y)?;
                Estimator::Logistic(train_logistic(&x, &y, c)?)
            }
            ModelSpec::Mlp(c) => {
                let (x, y) = oversample(x, y)?;
                Estimator::Mlp(train_mlp(&x, &y, c)?)
            }
            ModelSpec::Gbt(c) if c.early_stopping_patience.is_none() => {
                let (x, y) = oversample(x, y)?;
                Estimator::Gbt(train_gbt(&x, &y, c, None)?)
            }
            ModelSpec::Gbt(c) => {
                check_labels(x, y)?;
                let inner = split_holdout(y, INNER_VALIDATION_FRACTION, true, c.seed)?;
                let tx = x.select_rows(&inner.train);
                let ty: Vec<bool> = inner.train.iter().map(|&i| y[i]).collect();
                let (tx, ty) = oversample(&tx, &ty)?;
                let vx = x.select_rows(&inner.test);
                let vy: Vec<bool> = inner.test.iter().map(|&i| y[i]).collect();
                Estimator::Gbt(train_gbt(&tx, &ty, c, Some((&vx, &vy)))?)
            }
        };
        Ok(Model {
            estimator,
            schema_fingerprint: String::new(),
            config: serde_json::to_value(self)?,
        })
    }
}
