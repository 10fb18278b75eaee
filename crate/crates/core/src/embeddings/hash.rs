use std::borrow::Cow;
use std::collections::HashMap;

use super::EmbeddingSource;
use crate::dataset::BondRecord;
use crate::rng::{derive_seed, mix64};

/// Lowercase, split on anything that is not alphanumeric, drop empties.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Accumulate the ±1 pattern of one token.
fn add_token_pattern(token: &str, seed: u64, out: &mut [f64]) {
    let key = derive_seed(seed, token);
    for (chunk, block) in out.chunks_mut(64).enumerate() {
        let bits = mix64(key ^ mix64(chunk as u64 + 1));
        for (b, v) in block.iter_mut().enumerate() {
            *v += if (bits >> b) & 1 == 1 { 1.0 } else { -1.0 };
        }
    }
}

/// Sum of per-token signed random patterns, L2-normalised. Returns the zero
/// vector when the sum vanishes (e.g. no tokens).
pub fn hash_embed(description: &str, dim: usize, seed: u64) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for token in tokenize(description) {
        add_token_pattern(&token, seed, &mut v);
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

/// Hash embeddings of record descriptions keyed by record id.
pub struct HashEmbedder<'a> {
    dim: usize,
    seed: u64,
    descriptions: HashMap<&'a str, &'a str>,
}

impl<'a> HashEmbedder<'a> {
    pub fn new(records: &'a [BondRecord], dim: usize, seed: u64) -> Self {
        HashEmbedder {
            dim,
            seed,
            descriptions: records
                .iter()
                .map(|r| (r.id.as_str(), r.description.as_str()))
                .collect(),
        }
    }
}

impl EmbeddingSource for HashEmbedder<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn vector(&self, key: &str) -> Option<Cow<'_, [f32]>> {
        let desc = self.descriptions.get(key)?;
        Some(Cow::Owned(
            hash_embed(desc, self.dim, self.seed)
                .into_iter()
                .map(|x| x as f32)
                .collect(),
        ))
    }
}
