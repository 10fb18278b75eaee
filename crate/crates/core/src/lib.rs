//! Default prediction for municipal bonds under extreme class imbalance.
//!
//! The crate covers the whole desk-scale pipeline: a calibrated synthetic
//! bond generator, feature encoding with description embeddings, SMOTE-ENC
//! oversampling and balanced batch sampling, three model families
//! (logistic regression, boosted trees, a multilayer perceptron), PR-AUC /
//! KS evaluation with human-estimate baselines, and group Shapley
//! attribution.

pub mod attribution;
pub mod benchmark;
pub mod dataset;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod matrix;
pub mod models;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
pub use matrix::Matrix;
