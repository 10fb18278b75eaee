//! EMB1: little-endian `EMB1`, u32 N, u32 D, then N records of
//! (u32 key length, key bytes, D x f32). Canonical files list keys in
//! byte-lexicographic order.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::path::Path;

use super::EmbeddingSource;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EMB1";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    entries: BTreeMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&[f32]> {
        self.entries.get(key).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Insert or replace an entry.
    pub fn insert(&mut self, key: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::WidthMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("embedding vectors must be finite"));
        }
        self.entries.insert(key.into(), vector);
        Ok(())
    }

    pub fn from_source<'k>(
        source: &dyn EmbeddingSource,
        keys: impl IntoIterator<Item = &'k str>,
    ) -> Result<Self> {
        let mut t = EmbeddingTable::new(source.dim());
        for k in keys {
            let v = source
                .vector(k)
                .ok_or_else(|| Error::invalid(format!("no embedding for record {k}")))?;
            t.insert(k, v.into_owned())?;
        }
        Ok(t)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.entries.len() * (8 + 4 * self.dim));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        // BTreeMap<String, _> iterates in byte order of the UTF-8 keys.
        for (k, v) in &self.entries {
            out.extend_from_slice(&(k.len() as u32).to_le_bytes());
            out.extend_from_slice(k.as_bytes());
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::Format("not an embedding file".into()));
        }
        let mut cur = Cursor { bytes, pos: 4 };
        let n = cur.u32().ok_or_else(|| Error::Format("truncated EMB1 header".into()))? as usize;
        let dim = cur.u32().ok_or_else(|| Error::Format("truncated EMB1 header".into()))? as usize;
        let mut table = EmbeddingTable::new(dim);
        for rec in 0..n {
            let truncated = || Error::Format(format!("truncated EMB1 record {rec}"));
            let klen = cur.u32().ok_or_else(truncated)? as usize;
            let key = cur.take(klen).ok_or_else(truncated)?;
            let key = std::str::from_utf8(key)
                .map_err(|_| Error::Format(format!("EMB1 record {rec}: key is not UTF-8")))?
                .to_string();
            let raw = cur.take(dim * 4).ok_or_else(truncated)?;
            let vector: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format(format!("EMB1 record {rec}: non-finite value")));
            }
            if table.entries.contains_key(&key) {
                return Err(Error::Format(format!("EMB1 record {rec}: duplicate key {key:?}")));
            }
            table.entries.insert(key, vector);
        }
        if cur.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after {n} EMB1 records",
                bytes.len() - cur.pos
            )));
        }
        Ok(table)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

impl EmbeddingSource for EmbeddingTable {
    fn dim(&self) -> usize {
        self.dim
    }

    fn vector(&self, key: &str) -> Option<Cow<'_, [f32]>> {
        self.get(key).map(Cow::Borrowed)
    }
}

pub fn read_embedding_file(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingTable::from_bytes(&bytes)
}

pub fn write_embedding_file(path: impl AsRef<Path>, table: &EmbeddingTable) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, table.to_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_by_four() -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(b"EMB1");
        b.extend_from_slice(&2u32.to_le_bytes());
        b.extend_from_slice(&4u32.to_le_bytes());
        for (k, base) in [("a", 0.0f32), ("bb", 10.0)] {
            b.extend_from_slice(&(k.len() as u32).to_le_bytes());
            b.extend_from_slice(k.as_bytes());
            for j in 0..4 {
                b.extend_from_slice(&(base + j as f32).to_le_bytes());
            }
        }
        b
    }

    #[test]
    fn reads_hand_built_file() {
        let t = EmbeddingTable::from_bytes(&two_by_four()).unwrap();
        assert_eq!((t.len(), t.dim()), (2, 4));
        assert_eq!(t.get("bb").unwrap(), &[10.0, 11.0, 12.0, 13.0]);
        assert_eq!(t.to_bytes(), two_by_four());
    }

    #[test]
    fn rejects_bad_magic_truncation_and_duplicates() {
        let mut bad = two_by_four();
        bad[..4].copy_from_slice(b"XXXX");
        let e = EmbeddingTable::from_bytes(&bad).unwrap_err();
        assert!(e.to_string().contains("not an embedding file"));

        let full = two_by_four();
        let e = EmbeddingTable::from_bytes(&full[..full.len() - 3]).unwrap_err();
        assert!(e.to_string().contains("record 1"), "{e}");

        let mut dup = Vec::new();
        dup.extend_from_slice(b"EMB1");
        dup.extend_from_slice(&2u32.to_le_bytes());
        dup.extend_from_slice(&1u32.to_le_bytes());
        for _ in 0..2 {
            dup.extend_from_slice(&1u32.to_le_bytes());
            dup.push(b'k');
            dup.extend_from_slice(&1.0f32.to_le_bytes());
        }
        let e = EmbeddingTable::from_bytes(&dup).unwrap_err();
        assert!(e.to_string().contains("duplicate"), "{e}");
    }

    #[test]
    fn writer_sorts_keys() {
        let mut t = EmbeddingTable::new(1);
        t.insert("zeta", vec![1.0]).unwrap();
        t.insert("Alpha", vec![2.0]).unwrap();
        t.insert("alpha", vec![3.0]).unwrap();
        let back = EmbeddingTable::from_bytes(&t.to_bytes()).unwrap();
        let keys: Vec<&str> = back.iter().map(|(k, _)| k).collect();
        assert_eq!(keys, ["Alpha", "alpha", "zeta"]);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.emb1");
        std::fs::write(&p, two_by_four()).unwrap();
        let t = read_embedding_file(&p).unwrap();
        let q = dir.path().join("f.emb1");
        write_embedding_file(&q, &t).unwrap();
        assert_eq!(std::fs::read(&q).unwrap(), two_by_four());
    }

    proptest! {
        #[test]
        fn read_after_write_is_identity(
            dim in 0usize..6,
            entries in proptest::collection::btree_map("[a-zA-Z0-9é]{0,6}", proptest::collection::vec(-1e3f32..1e3, 6), 0..8)
        ) {
            let mut t = EmbeddingTable::new(dim);
            for (k, v) in entries {
                t.insert(k, v[..dim].to_vec()).unwrap();
            }
            let bytes = t.to_bytes();
            let back = EmbeddingTable::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &t);
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}
