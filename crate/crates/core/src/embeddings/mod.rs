//! Description embeddings: a deterministic hash embedder for hermetic runs,
//! the EMB1 file format for pretrained vectors, and attachment to feature
//! matrices.

mod emb1;
mod hash;

use std::borrow::Cow;

pub use emb1::{read_embedding_file, write_embedding_file, EmbeddingTable, MAGIC};
pub use hash::{hash_embed, tokenize, HashEmbedder};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};

/// Anything that maps a record key to an embedding vector.
pub trait EmbeddingSource {
    fn dim(&self) -> usize;
    fn vector(&self, key: &str) -> Option<Cow<'_, [f32]>>;
}

/// Look up in `primary`, falling back to `fallback` for missing keys.
pub struct WithFallback<'a> {
    pub primary: &'a dyn EmbeddingSource,
    pub fallback: &'a dyn EmbeddingSource,
}

impl EmbeddingSource for WithFallback<'_> {
    fn dim(&self) -> usize {
        self.primary.dim()
    }

    fn vector(&self, key: &str) -> Option<Cow<'_, [f32]>> {
        self.primary.vector(key).or_else(|| self.fallback.vector(key))
    }
}

/// Fill the embedding block of every row from `source`; all other columns
/// are copied unchanged.
pub fn attach_embeddings(matrix: &FeatureMatrix, source: &dyn EmbeddingSource) -> Result<FeatureMatrix> {
    let range = matrix.schema.embedding_range();
    if source.dim() != range.len() {
        return Err(Error::WidthMismatch {
            expected: range.len(),
            found: source.dim(),
        });
    }
    let mut out = matrix.clone();
    for (i, key) in matrix.row_keys.iter().enumerate() {
        let v = source
            .vector(key)
            .ok_or_else(|| Error::invalid(format!("no embedding for record {key}")))?;
        if v.len() != range.len() {
            return Err(Error::WidthMismatch {
                expected: range.len(),
                found: v.len(),
            });
        }
        for (dst, &src) in out.values.row_mut(i)[range.clone()].iter_mut().zip(v.iter()) {
            *dst = f64::from(src);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{encode_features, fit_schema, generate_synthetic, GeneratorConfig};

    fn fixture(dim: usize) -> (Vec<crate::dataset::BondRecord>, FeatureMatrix) {
        let cfg = GeneratorConfig {
            n_records: 1_000,
            default_rate: 0.02,
            seed: 11,
            ..GeneratorConfig::default()
        };
        let recs = generate_synthetic(&cfg).unwrap();
        let schema = fit_schema(&recs, dim).unwrap();
        let m = encode_features(&recs, &schema).unwrap();
        (recs, m)
    }

    #[test]
    fn attach_fills_only_embedding_block_and_is_idempotent() {
        let (recs, m) = fixture(16);
        let h = HashEmbedder::new(&recs, 16, 5);
        let a = attach_embeddings(&m, &h).unwrap();
        let base = m.schema.base_width();
        for i in 0..m.rows() {
            assert_eq!(&a.values.row(i)[..base], &m.values.row(i)[..base]);
            let n: f64 = a.values.row(i)[base..].iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-5);
        }
        assert_eq!(attach_embeddings(&a, &h).unwrap(), a);
    }

    #[test]
    fn zero_table_gives_zero_block() {
        let (_, m) = fixture(4);
        let mut t = EmbeddingTable::new(4);
        for k in &m.row_keys {
            t.insert(k.clone(), vec![0.0; 4]).unwrap();
        }
        assert_eq!(attach_embeddings(&m, &t).unwrap(), m);
    }

    #[test]
    fn missing_key_and_dim_mismatch() {
        let (recs, m) = fixture(4);
        let mut t = EmbeddingTable::new(4);
        t.insert(m.row_keys[0].clone(), vec![1.0; 4]).unwrap();
        let e = attach_embeddings(&m, &t).unwrap_err();
        assert!(e.to_string().contains(&m.row_keys[1]), "{e}");

        let h = HashEmbedder::new(&recs, 4, 0);
        let fb = WithFallback { primary: &t, fallback: &h };
        let a = attach_embeddings(&m, &fb).unwrap();
        assert_eq!(&a.values.row(0)[m.schema.embedding_range()], &[1.0; 4]);

        let wrong = EmbeddingTable::new(3);
        assert!(matches!(attach_embeddings(&m, &wrong), Err(Error::WidthMismatch { .. })));
    }

    #[test]
    fn paper_width_arithmetic() {
        // 76 base columns + 384 -> 460; a 230-column base -> 614.
        for (base, total) in [(76usize, 460usize), (230, 614)] {
            let schema = crate::dataset::FeatureSchema {
                columns: (0..base + 384)
                    .map(|i| crate::dataset::ColumnDescriptor {
                        index: i,
                        feature: "f".into(),
                        kind: if i < base {
                            crate::dataset::ColumnKind::Continuous
                        } else {
                            crate::dataset::ColumnKind::Embedding { component: i - base }
                        },
                    })
                    .collect(),
                categorical: vec![],
                continuous: vec![],
                embedding_start: base,
                embedding_dim: 384,
            };
            let m = FeatureMatrix::new(
                crate::Matrix::zeros(1, schema.width()),
                schema,
                vec![false],
                vec!["k".into()],
            )
            .unwrap();
            let mut t = EmbeddingTable::new(384);
            t.insert("k", vec![0.5; 384]).unwrap();
            let a = attach_embeddings(&m, &t).unwrap();
            assert_eq!(a.cols(), total);
        }
    }
}
