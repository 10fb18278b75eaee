//! Controlled comparison of oversampling and embedding toggles.

use serde::{Deserialize, Serialize};

use super::report::{evaluate, EvalReport};
use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::rng;
use crate::sampling::SmoteConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationOptions {
    pub seed: u64,
    /// Nominal groups are taken from the schema.
    pub smote: SmoteConfig,
    pub threshold: f64,
}

impl Default for AblationOptions {
    fn default() -> Self {
        AblationOptions {
            seed: 0,
            smote: SmoteConfig::default(),
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub smote: bool,
    pub embeddings: bool,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub model: String,
    pub test_rows: usize,
    pub cells: Vec<AblationCell>,
}

impl AblationTable {
    pub fn cell(&self, smote: bool, embeddings: bool) -> Option<&AblationCell> {
        self.cells.iter().find(|c| c.smote == smote && c.embeddings == embeddings)
    }

    fn auc(&self, smote: bool, embeddings: bool) -> Option<f64> {
        self.cell(smote, embeddings).and_then(|c| c.report.auc_pr)
    }

    /// AUC-PR lost by turning SMOTE off, embeddings kept on.
    pub fn smote_drop(&self) -> Option<f64> {
        Some(self.auc(true, true)? - self.auc(false, true)?)
    }

    /// AUC-PR lost by zeroing the embeddings, SMOTE kept on.
    pub fn embedding_drop(&self) -> Option<f64> {
        Some(self.auc(true, true)? - self.auc(true, false)?)
    }
}

/// Which toggle combinations to evaluate, as (smote, embeddings) pairs.
pub const ALL_CELLS: [(bool, bool); 4] = [(true, true), (false, true), (true, false), (false, false)];

/// Trains `spec` on `train` under every toggle combination and scores each
/// on the same `test` rows.
pub fn ablation_run(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    spec: &ModelSpec,
    options: &AblationOptions,
) -> Result<AblationTable> {
    ablation_cells(train, test, spec, options, &ALL_CELLS)
}

/// As [`ablation_run`], restricted to the listed cells.
pub fn ablation_cells(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    spec: &ModelSpec,
    options: &AblationOptions,
    cells: &[(bool, bool)],
) -> Result<AblationTable> {
    if cells.is_empty() {
        return Err(Error::config("no ablation cells requested"));
    }
    if train.schema != test.schema {
        return Err(Error::invalid("train and test matrices use different schemas"));
    }
    let smote_cfg = SmoteConfig {
        seed: rng::derive_seed(options.seed, "ablation/smote"),
        ..options.smote.clone()
    }
    .with_schema_groups(&train.schema);

    let mut out = Vec::with_capacity(cells.len());
    for &(smote, embeddings) in cells {
        let (tr, te) = if embeddings {
            (train.clone(), test.clone())
        } else {
            (train.without_embeddings(), test.without_embeddings())
        };
        let model = spec.fit_oversampled(&tr.values, &tr.labels, smote.then_some(&smote_cfg))?;
        let scores = model.predict_proba(&te.values)?;
        let description = format!(
            "{} (smote {}, embeddings {})",
            spec.kind().name(),
            if smote { "on" } else { "off" },
            if embeddings { "on" } else { "off" }
        );
        log::info!("{description}");
        out.push(AblationCell {
            smote,
            embeddings,
            report: evaluate(description, &scores, &te.labels, options.threshold)?,
        });
    }
    Ok(AblationTable {
        model: spec.kind().name().to_string(),
        test_rows: test.rows(),
        cells: out,
    })
}
