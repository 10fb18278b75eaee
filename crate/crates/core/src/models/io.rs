//! SCM1 model files.
//!
//! Layout (little-endian): magic `SCM1`, u8 format version, u8 model kind
//! (0 logistic, 1 gbt, 2 mlp), u32 metadata length, UTF-8 JSON metadata,
//! then the parameters as f32:
//!
//! - logistic: weights, then bias;
//! - gbt: base score, then for each tree its nodes in pre-order, a split
//!   contributing its threshold and a leaf its value (the tree shapes and
//!   split features live in the metadata);
//! - mlp: for each layer, its `fan_in x fan_out` weights row-major, then
//!   its bias.
//!
//! Parameters are f32-representable after training, so a round trip is
//! lossless.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, Estimator, GbtModel, Layer, LogisticModel, MlpModel, Model, ModelKind, Tree, TreeNode};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"SCM1";
pub const MODEL_VERSION: u8 = 1;
const HEADER_LEN: usize = 10;

#[derive(Debug, Serialize, Deserialize)]
struct Metadata {
    input_width: usize,
    schema_fingerprint: String,
    config: serde_json::Value,
    parameter_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    activation: Option<Activation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    layer_sizes: Vec<usize>,
    /// Per tree, per pre-order node: split feature, or -1 for a leaf.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    trees: Vec<Vec<i64>>,
}

fn payload(model: &Model) -> (Metadata, Vec<f64>) {
    let mut meta = Metadata {
        input_width: model.input_width(),
        schema_fingerprint: model.schema_fingerprint.clone(),
        config: model.config.clone(),
        parameter_count: 0,
        activation: None,
        layer_sizes: Vec::new(),
        trees: Vec::new(),
    };
    let params = match &model.estimator {
        Estimator::Logistic(m) => {
            let mut p = m.weights.clone();
            p.push(m.bias);
            p
        }
        Estimator::Gbt(m) => {
            let mut p = vec![m.base_score];
            for t in &m.trees {
                let mut shape = Vec::with_capacity(t.nodes.len());
                for n in &t.nodes {
                    match *n {
                        TreeNode::Split { feature, threshold, .. } => {
                            shape.push(feature as i64);
                            p.push(threshold);
                        }
                        TreeNode::Leaf { value } => {
                            shape.push(-1);
                            p.push(value);
                        }
                    }
                }
                meta.trees.push(shape);
            }
            p
        }
        Estimator::Mlp(m) => {
            meta.activation = Some(m.activation);
            meta.layer_sizes = m.layer_sizes();
            m.parameters()
        }
    };
    meta.parameter_count = params.len();
    (meta, params)
}

pub fn to_bytes(model: &Model) -> Result<Vec<u8>> {
    let (meta, params) = payload(model);
    let json = serde_json::to_vec(&meta)?;
    let mut out = Vec::with_capacity(HEADER_LEN + json.len() + 4 * params.len());
    out.extend_from_slice(MODEL_MAGIC);
    out.push(MODEL_VERSION);
    out.push(model.kind().tag());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for p in params {
        out.extend_from_slice(&(p as f32).to_le_bytes());
    }
    Ok(out)
}

fn corrupt(offset: usize, message: impl Into<String>) -> Error {
    Error::Corrupt {
        offset,
        message: message.into(),
    }
}

/// Rebuilds pre-order trees from their feature lists.
fn build_trees(shapes: &[Vec<i64>], values: &[f64], width: usize) -> std::result::Result<Vec<Tree>, String> {
    fn subtree(shape: &[i64], i: usize) -> std::result::Result<usize, String> {
        match shape.get(i) {
            None => Err("tree shape ends inside a subtree".into()),
            Some(&f) if f < 0 => Ok(i + 1),
            Some(_) => {
                let right = subtree(shape, i + 1)?;
                subtree(shape, right)
            }
        }
    }
    let mut at = 0;
    let mut trees = Vec::with_capacity(shapes.len());
    for shape in shapes {
        let mut nodes = Vec::with_capacity(shape.len());
        for (i, &f) in shape.iter().enumerate() {
            let v = values[at + i];
            nodes.push(if f < 0 {
                TreeNode::Leaf { value: v }
            } else {
                if f as usize >= width {
                    return Err(format!("split feature {f} beyond input width {width}"));
                }
                TreeNode::Split {
                    feature: f as usize,
                    threshold: v,
                    right: subtree(shape, i + 1)?,
                }
            });
        }
        if shape.is_empty() || subtree(shape, 0)? != shape.len() {
            return Err("malformed tree shape".into());
        }
        at += shape.len();
        trees.push(Tree { nodes });
    }
    Ok(trees)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < 4 || &bytes[..4] != MODEL_MAGIC {
        return Err(Error::Format("not an SCM1 model file".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(corrupt(bytes.len(), "truncated header"));
    }
    if bytes[4] != MODEL_VERSION {
        return Err(Error::Version {
            found: bytes[4],
            expected: MODEL_VERSION,
        });
    }
    let kind = ModelKind::from_tag(bytes[5]).ok_or_else(|| corrupt(5, format!("unknown model kind {}", bytes[5])))?;
    let meta_len = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
    let meta_end = HEADER_LEN
        .checked_add(meta_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| corrupt(bytes.len(), "truncated metadata"))?;
    let meta: Metadata = serde_json::from_slice(&bytes[HEADER_LEN..meta_end])
        .map_err(|e| corrupt(HEADER_LEN, format!("bad metadata: {e}")))?;

    let body = &bytes[meta_end..];
    let expected = meta.parameter_count;
    if body.len() / 4 < expected {
        return Err(corrupt(meta_end + 4 * (body.len() / 4), "truncated parameter payload"));
    }
    if body.len() != 4 * expected {
        return Err(corrupt(meta_end + 4 * expected, "trailing bytes after parameters"));
    }
    let mut params = Vec::with_capacity(expected);
    for (i, chunk) in body.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return Err(corrupt(meta_end + 4 * i, "non-finite parameter"));
        }
        params.push(v as f64);
    }

    let shape_err = |m: String| corrupt(HEADER_LEN, m);
    let width = meta.input_width;
    let estimator = match kind {
        ModelKind::Logistic => {
            if expected != width + 1 {
                return Err(shape_err(format!(
                    "logistic model of width {width} needs {} parameters",
                    width + 1
                )));
            }
            let bias = params.pop().expect("non-empty");
            Estimator::Logistic(LogisticModel { weights: params, bias })
        }
        ModelKind::Gbt => {
            let nodes: usize = meta.trees.iter().map(Vec::len).sum();
            if expected != nodes + 1 {
                return Err(shape_err("tree shapes disagree with parameter count".into()));
            }
            let trees = build_trees(&meta.trees, &params[1..], width).map_err(shape_err)?;
            Estimator::Gbt(GbtModel {
                base_score: params[0],
                trees,
                input_width: width,
            })
        }
        ModelKind::Mlp => {
            let sizes = &meta.layer_sizes;
            let activation = meta
                .activation
                .ok_or_else(|| shape_err("MLP metadata lacks an activation".into()))?;
            if sizes.len() < 3 || sizes[0] != width || sizes.last() != Some(&1) || sizes.contains(&0) {
                return Err(shape_err(format!("bad MLP layer sizes {sizes:?}")));
            }
            let count: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
            if count != expected {
                return Err(shape_err("layer sizes disagree with parameter count".into()));
            }
            let mut at = 0;
            let layers = sizes
                .windows(2)
                .map(|w| {
                    let weights = params[at..at + w[0] * w[1]].to_vec();
                    at += w[0] * w[1];
                    let bias = params[at..at + w[1]].to_vec();
                    at += w[1];
                    Layer {
                        fan_in: w[0],
                        fan_out: w[1],
                        weights,
                        bias,
                    }
                })
                .collect();
            Estimator::Mlp(MlpModel { layers, activation })
        }
    };
    Ok(Model {
        estimator,
        schema_fingerprint: meta.schema_fingerprint,
        config: meta.config,
    })
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::models::{GbtConfig, LogisticConfig, MlpConfig, ModelSpec};
    use crate::rng;
    use rand::Rng as _;

    fn fixture() -> (Matrix, Vec<bool>) {
        let mut r = rng::stream(21, "io-fixture");
        let data: Vec<f64> = (0..100 * 4).map(|_| r.random_range(-1.0..1.0)).collect();
        let y = (0..100).map(|i| data[i * 4] + data[i * 4 + 1] * data[i * 4 + 2] > 0.0).collect();
        (Matrix::from_vec(100, 4, data).unwrap(), y)
    }

    fn trained() -> Vec<Model> {
        let (x, y) = fixture();
        let specs = [
            ModelSpec::Logistic(LogisticConfig::default()),
            ModelSpec::Gbt(GbtConfig {
                n_rounds: 8,
                max_depth: 3,
                early_stopping_patience: None,
                ..Default::default()
            }),
            ModelSpec::Mlp(MlpConfig {
                hidden_sizes: vec![5, 3],
                epochs: 3,
                batch_size: 16,
                ..Default::default()
            }),
        ];
        specs
            .iter()
            .map(|s| {
                let mut m = s.fit(&x, &y).unwrap();
                m.schema_fingerprint = "abcdef0123456789".into();
                m
            })
            .collect()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (x, _) = fixture();
        for m in trained() {
            let back = from_bytes(&to_bytes(&m).unwrap()).unwrap();
            assert_eq!(back, m);
            let a = m.predict_proba(&x).unwrap();
            let b = back.predict_proba(&x).unwrap();
            assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.scm");
        let m = trained().remove(1);
        save_model(&m, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), m);
    }

    #[test]
    fn unknown_version_rejected() {
        let mut b = to_bytes(&trained()[0]).unwrap();
        b[4] = 7;
        assert!(matches!(from_bytes(&b), Err(Error::Version { found: 7, expected: 1 })));
    }

    #[test]
    fn truncation_reports_offset() {
        let b = to_bytes(&trained()[2]).unwrap();
        for cut in [7, 20, b.len() - 3, b.len() - 4] {
            match from_bytes(&b[..cut]) {
                Err(Error::Corrupt { offset, .. }) => assert!(offset <= cut),
                other => panic!("cut {cut}: {other:?}"),
            }
        }
        let mut long = b.clone();
        long.extend_from_slice(&[0, 0, 0, 0]);
        assert!(matches!(from_bytes(&long), Err(Error::Corrupt { offset, .. }) if offset == b.len()));
        assert!(matches!(from_bytes(b"NOPE"), Err(Error::Format(_))));
    }

    #[test]
    fn unknown_kind_rejected() {
        let mut b = to_bytes(&trained()[0]).unwrap();
        b[5] = 9;
        assert!(matches!(from_bytes(&b), Err(Error::Corrupt { offset: 5, .. })));
    }
}
