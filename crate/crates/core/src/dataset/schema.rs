use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::record::TabularRecord;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    OneHot { level: String },
    Continuous,
    Embedding { component: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnDescriptor {
    pub index: usize,
    pub feature: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalBlock {
    pub feature: String,
    /// Levels in column order (sorted).
    pub levels: Vec<String>,
    pub start: usize,
}

impl CategoricalBlock {
    pub fn columns(&self) -> Range<usize> {
        self.start..self.start + self.levels.len()
    }

    pub fn column_of(&self, level: &str) -> Option<usize> {
        self.levels
            .binary_search_by(|l| l.as_str().cmp(level))
            .ok()
            .map(|i| self.start + i)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousParam {
    pub feature: String,
    pub column: usize,
    pub mean: f64,
    pub std: f64,
}

/// Column layout: one-hot blocks, then standardised continuous features,
/// then the embedding block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<ColumnDescriptor>,
    pub categorical: Vec<CategoricalBlock>,
    pub continuous: Vec<ContinuousParam>,
    pub embedding_start: usize,
    pub embedding_dim: usize,
}

impl FeatureSchema {
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn embedding_range(&self) -> Range<usize> {
        self.embedding_start..self.embedding_start + self.embedding_dim
    }

    /// Columns before the embedding block.
    pub fn base_width(&self) -> usize {
        self.embedding_start
    }

    pub fn categorical_block(&self, feature: &str) -> Option<&CategoricalBlock> {
        self.categorical.iter().find(|b| b.feature == feature)
    }

    pub fn continuous_param(&self, feature: &str) -> Option<&ContinuousParam> {
        self.continuous.iter().find(|c| c.feature == feature)
    }

    /// Short stable content hash.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("schema serialises");
        hex::encode(&Sha256::digest(&json)[..8])
    }

    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.columns.iter().enumerate() {
            if c.index != i {
                return Err(Error::Format(format!(
                    "schema column {i} has index {} (indices must be contiguous from 0)",
                    c.index
                )));
            }
        }
        for p in &self.continuous {
            if !(p.mean.is_finite() && p.std.is_finite() && p.std > 0.0) {
                return Err(Error::Format(format!(
                    "standardisation parameters for {} are invalid",
                    p.feature
                )));
            }
        }
        if self.embedding_start + self.embedding_dim != self.columns.len() {
            return Err(Error::Format("embedding block must close the schema".into()));
        }
        Ok(())
    }
}

/// Fit one-hot levels and standardisation parameters on training records.
///
/// A constant continuous feature keeps std 1 (so it encodes to zeros).
pub fn fit_schema<R: TabularRecord>(records: &[R], embedding_dim: usize) -> Result<FeatureSchema> {
    if records.is_empty() {
        return Err(Error::invalid("cannot fit a schema on zero records"));
    }
    let mut columns = Vec::new();
    let mut categorical = Vec::new();
    for (fi, name) in R::categorical_names().iter().enumerate() {
        let levels: BTreeSet<&str> = records.iter().map(|r| r.categorical(fi)).collect();
        let start = columns.len();
        for level in &levels {
            columns.push(ColumnDescriptor {
                index: columns.len(),
                feature: (*name).to_string(),
                kind: ColumnKind::OneHot {
                    level: (*level).to_string(),
                },
            });
        }
        categorical.push(CategoricalBlock {
            feature: (*name).to_string(),
            levels: levels.into_iter().map(str::to_string).collect(),
            start,
        });
    }

    let n = records.len() as f64;
    let mut continuous = Vec::new();
    for (fi, name) in R::continuous_names().iter().enumerate() {
        let mean = records.iter().map(|r| r.continuous(fi)).sum::<f64>() / n;
        let var = records
            .iter()
            .map(|r| (r.continuous(fi) - mean).powi(2))
            .sum::<f64>()
            / n;
        let mut std = var.sqrt();
        if !mean.is_finite() || !std.is_finite() {
            return Err(Error::invalid(format!("continuous feature {name} has non-finite values")));
        }
        if std <= 1e-12 * mean.abs().max(1.0) {
            log::warn!("continuous feature {name} is constant in training data; using std 1");
            std = 1.0;
        }
        continuous.push(ContinuousParam {
            feature: (*name).to_string(),
            column: columns.len(),
            mean,
            std,
        });
        columns.push(ColumnDescriptor {
            index: columns.len(),
            feature: (*name).to_string(),
            kind: ColumnKind::Continuous,
        });
    }

    let embedding_start = columns.len();
    for component in 0..embedding_dim {
        columns.push(ColumnDescriptor {
            index: columns.len(),
            feature: "description_embedding".to_string(),
            kind: ColumnKind::Embedding { component },
        });
    }
    Ok(FeatureSchema {
        columns,
        categorical,
        continuous,
        embedding_start,
        embedding_dim,
    })
}

/// Encoded rows with labels and keys.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Matrix,
    pub schema: FeatureSchema,
    pub labels: Vec<bool>,
    pub row_keys: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(values: Matrix, schema: FeatureSchema, labels: Vec<bool>, row_keys: Vec<String>) -> Result<Self> {
        if values.cols() != schema.width() {
            return Err(Error::WidthMismatch {
                expected: schema.width(),
                found: values.cols(),
            });
        }
        if labels.len() != values.rows() || row_keys.len() != values.rows() {
            return Err(Error::invalid(format!(
                "{} rows but {} labels and {} keys",
                values.rows(),
                labels.len(),
                row_keys.len()
            )));
        }
        values.ensure_finite("feature matrix")?;
        Ok(FeatureMatrix {
            values,
            schema,
            labels,
            row_keys,
        })
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn select(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            values: self.values.select_rows(idx),
            schema: self.schema.clone(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            row_keys: idx.iter().map(|&i| self.row_keys[i].clone()).collect(),
        }
    }

    /// Copy with the embedding block set to zero.
    pub fn without_embeddings(&self) -> FeatureMatrix {
        let mut out = self.clone();
        let range = self.schema.embedding_range();
        for i in 0..out.values.rows() {
            out.values.row_mut(i)[range.clone()].fill(0.0);
        }
        out
    }
}

/// Encode records with a fitted schema. Unseen categorical levels encode as
/// an all-zero block; the embedding block is left at zero.
pub fn encode_features<R: TabularRecord>(records: &[R], schema: &FeatureSchema) -> Result<FeatureMatrix> {
    schema.validate()?;
    let cat_names = R::categorical_names();
    let cont_names = R::continuous_names();
    let cat_map: Vec<(usize, &CategoricalBlock)> = schema
        .categorical
        .iter()
        .map(|b| {
            cat_names
                .iter()
                .position(|n| *n == b.feature)
                .map(|i| (i, b))
                .ok_or_else(|| Error::invalid(format!("records have no categorical feature {}", b.feature)))
        })
        .collect::<Result<_>>()?;
    let cont_map: Vec<(usize, &ContinuousParam)> = schema
        .continuous
        .iter()
        .map(|p| {
            cont_names
                .iter()
                .position(|n| *n == p.feature)
                .map(|i| (i, p))
                .ok_or_else(|| Error::invalid(format!("records have no continuous feature {}", p.feature)))
        })
        .collect::<Result<_>>()?;

    let mut values = Matrix::zeros(records.len(), schema.width());
    for (i, rec) in records.iter().enumerate() {
        let row = values.row_mut(i);
        for (fi, block) in &cat_map {
            if let Some(col) = block.column_of(rec.categorical(*fi)) {
                row[col] = 1.0;
            }
        }
        for (fi, p) in &cont_map {
            row[p.column] = (rec.continuous(*fi) - p.mean) / p.std;
        }
    }
    FeatureMatrix::new(
        values,
        schema.clone(),
        records.iter().map(TabularRecord::label).collect(),
        records.iter().map(|r| r.key().to_string()).collect(),
    )
}
