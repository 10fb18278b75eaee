use std::borrow::Cow;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{EmbeddingProvider, EmbeddingSettings, ExperimentConfig};
use crate::dataset::io::{read_records_csv, records_csv_bytes, RECORDS_FILE};
use crate::dataset::{encode_features, fit_schema, generate_synthetic, split_holdout, BondRecord, FeatureMatrix, Split};
use crate::embeddings::{attach_embeddings, read_embedding_file, EmbeddingSource, EmbeddingTable, HashEmbedder};
use crate::error::{Result, StageExt};
use crate::rng;

/// Description vectors for a set of records, as configured.
pub enum Embeddings<'a> {
    Hash(HashEmbedder<'a>),
    Table(EmbeddingTable),
    TableWithHash(EmbeddingTable, HashEmbedder<'a>),
    None,
}

impl<'a> Embeddings<'a> {
    pub fn from_settings(records: &'a [BondRecord], settings: &EmbeddingSettings) -> Result<Self> {
        Ok(match settings.provider {
            EmbeddingProvider::None => Embeddings::None,
            EmbeddingProvider::Hash => Embeddings::Hash(HashEmbedder::new(records, settings.dim, settings.seed)),
            EmbeddingProvider::File => {
                let path = settings.path.as_ref().expect("validated");
                let table = read_embedding_file(path)?;
                if settings.hash_fallback {
                    let dim = table.dim();
                    Embeddings::TableWithHash(table, HashEmbedder::new(records, dim, settings.seed))
                } else {
                    Embeddings::Table(table)
                }
            }
        })
    }
}

impl EmbeddingSource for Embeddings<'_> {
    fn dim(&self) -> usize {
        match self {
            Embeddings::Hash(h) => h.dim(),
            Embeddings::Table(t) | Embeddings::TableWithHash(t, _) => t.dim(),
            Embeddings::None => 0,
        }
    }

    fn vector(&self, key: &str) -> Option<Cow<'_, [f32]>> {
        match self {
            Embeddings::Hash(h) => h.vector(key),
            Embeddings::Table(t) => t.vector(key),
            Embeddings::TableWithHash(t, h) => t.vector(key).or_else(|| h.vector(key)),
            Embeddings::None => Some(Cow::Borrowed(&[])),
        }
    }
}

/// Records read from `data_dir` or generated from the config.
pub fn load_records(cfg: &ExperimentConfig) -> Result<Vec<BondRecord>> {
    match &cfg.data_dir {
        Some(dir) => read_records_csv(dir.join(RECORDS_FILE)),
        None => generate_synthetic(&cfg.generator_config()),
    }
}

/// Identity of the input records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFingerprint {
    pub source: String,
    pub n_records: usize,
    pub n_positives: usize,
    pub sha256: String,
    pub schema_fingerprint: String,
    pub width: usize,
    pub embedding_dim: usize,
    pub n_train: usize,
    pub n_test: usize,
}

/// Train and test matrices built from one record set.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
    pub split: Split,
    pub test_records: Vec<BondRecord>,
    pub fingerprint: DatasetFingerprint,
}

/// Splits records, fits the schema on the training side only, encodes both
/// sides and fills in description embeddings.
pub fn prepare(records: &[BondRecord], cfg: &ExperimentConfig) -> Result<Prepared> {
    let labels: Vec<bool> = records.iter().map(|r| r.defaulted).collect();
    let split = split_holdout(
        &labels,
        cfg.split.test_fraction,
        cfg.split.stratified,
        rng::derive_seed(cfg.seed, "split"),
    )
    .stage("split")?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    let train_records = pick(&split.train);
    let test_records = pick(&split.test);

    let source = Embeddings::from_settings(records, &cfg.embedding).stage("embeddings")?;
    let schema = fit_schema(&train_records, source.dim()).stage("encode")?;
    let encode = |recs: &[BondRecord]| -> Result<FeatureMatrix> {
        let m = encode_features(recs, &schema).stage("encode")?;
        if source.dim() == 0 {
            return Ok(m);
        }
        attach_embeddings(&m, &source).stage("embeddings")
    };
    let train = encode(&train_records)?;
    let test = encode(&test_records)?;

    let csv = records_csv_bytes(records).stage("data")?;
    let fingerprint = DatasetFingerprint {
        source: match &cfg.data_dir {
            Some(d) => d.join(RECORDS_FILE).display().to_string(),
            None => "generated".to_string(),
        },
        n_records: records.len(),
        n_positives: labels.iter().filter(|&&l| l).count(),
        sha256: hex::encode(Sha256::digest(&csv)),
        schema_fingerprint: schema.fingerprint(),
        width: schema.width(),
        embedding_dim: source.dim(),
        n_train: train.rows(),
        n_test: test.rows(),
    };
    Ok(Prepared {
        train,
        test,
        split,
        test_records,
        fingerprint,
    })
}

/// [`load_records`] followed by [`prepare`].
pub fn load_and_prepare(cfg: &ExperimentConfig) -> Result<(Vec<BondRecord>, Prepared)> {
    let records = load_records(cfg).stage("data")?;
    let prepared = prepare(&records, cfg)?;
    Ok((records, prepared))
}

pub(crate) fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| crate::Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.generator.n_records = 2_000;
        cfg.generator.default_rate = 0.02;
        cfg.embedding.dim = 8;
        cfg
    }

    #[test]
    fn schema_is_fitted_on_train_records_only() {
        let cfg = small();
        let records = load_records(&cfg).unwrap();
        let p = prepare(&records, &cfg).unwrap();
        let train: Vec<BondRecord> = p.split.train.iter().map(|&i| records[i].clone()).collect();
        assert_eq!(p.train.schema, fit_schema(&train, 8).unwrap());
        assert_eq!(p.test.schema, p.train.schema);
        assert_eq!(p.fingerprint.n_train + p.fingerprint.n_test, 2_000);
        assert_eq!(p.test_records.len(), p.test.rows());
        let range = p.train.schema.embedding_range();
        let norm: f64 = p.test.values.row(0)[range].iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-5);
    }

    #[test]
    fn no_embeddings_gives_empty_block() {
        let mut cfg = small();
        cfg.embedding.provider = EmbeddingProvider::None;
        let records = load_records(&cfg).unwrap();
        let p = prepare(&records, &cfg).unwrap();
        assert_eq!(p.train.schema.embedding_dim, 0);
        assert_eq!(p.train.cols(), p.train.schema.base_width());
    }

    #[test]
    fn file_embeddings_missing_key_fails_without_fallback() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small();
        let records = load_records(&cfg).unwrap();
        let mut t = EmbeddingTable::new(4);
        t.insert(records[0].id.clone(), vec![1.0; 4]).unwrap();
        let path = dir.path().join("e.emb1");
        crate::embeddings::write_embedding_file(&path, &t).unwrap();
        cfg.embedding.provider = EmbeddingProvider::File;
        cfg.embedding.path = Some(path);
        let e = prepare(&records, &cfg).unwrap_err();
        assert!(e.to_string().contains("embeddings"), "{e}");
        cfg.embedding.hash_fallback = true;
        assert_eq!(prepare(&records, &cfg).unwrap().train.schema.embedding_dim, 4);
    }
}
