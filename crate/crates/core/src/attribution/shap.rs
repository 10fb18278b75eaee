use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureSchema;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::Model;
use crate::rng;

pub const EMBEDDING_GROUP: &str = "description_embedding";
const MAX_EXACT_GROUPS: usize = 10;

/// Anything that scores rows of a fixed width.
pub trait Scorer: Sync {
    fn input_width(&self) -> usize;
    fn score(&self, x: &Matrix) -> Result<Vec<f64>>;
}

impl Scorer for Model {
    fn input_width(&self) -> usize {
        Model::input_width(self)
    }

    fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.predict_proba(x)
    }
}

/// Row-wise scoring function of a given width.
pub struct FnScorer<F> {
    pub width: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Scorer for FnScorer<F> {
    fn input_width(&self) -> usize {
        self.width
    }

    fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(x.iter_rows().map(&self.f).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub name: String,
    pub columns: Vec<usize>,
}

/// Named groups partitioning the columns of a matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGrouping {
    groups: Vec<FeatureGroup>,
    width: usize,
}

impl FeatureGrouping {
    pub fn new(groups: Vec<FeatureGroup>, width: usize) -> Result<Self> {
        let mut owner = vec![None; width];
        for (g, group) in groups.iter().enumerate() {
            if group.columns.is_empty() {
                return Err(Error::invalid(format!("group {:?} is empty", group.name)));
            }
            for &c in &group.columns {
                match owner.get_mut(c) {
                    None => {
                        return Err(Error::invalid(format!(
                            "group {:?} names column {c} beyond width {width}",
                            group.name
                        )))
                    }
                    Some(Some(_)) => return Err(Error::invalid(format!("column {c} belongs to two groups"))),
                    Some(slot) => *slot = Some(g),
                }
            }
        }
        if let Some(c) = owner.iter().position(Option::is_none) {
            return Err(Error::invalid(format!("column {c} belongs to no group")));
        }
        Ok(FeatureGrouping { groups, width })
    }

    /// One group per column, named `x0`, `x1`, ...
    pub fn singletons(width: usize) -> Self {
        let groups = (0..width)
            .map(|c| FeatureGroup {
                name: format!("x{c}"),
                columns: vec![c],
            })
            .collect();
        FeatureGrouping { groups, width }
    }

    /// One group per categorical block, one per continuous feature and one
    /// for the whole embedding block.
    pub fn from_schema(schema: &FeatureSchema) -> Result<Self> {
        let mut groups: Vec<FeatureGroup> = schema
            .categorical
            .iter()
            .map(|b| FeatureGroup {
                name: b.feature.clone(),
                columns: b.columns().collect(),
            })
            .collect();
        groups.extend(schema.continuous.iter().map(|c| FeatureGroup {
            name: c.feature.clone(),
            columns: vec![c.column],
        }));
        if schema.embedding_dim > 0 {
            groups.push(FeatureGroup {
                name: EMBEDDING_GROUP.to_string(),
                columns: schema.embedding_range().collect(),
            });
        }
        groups.sort_by_key(|g| g.columns[0]);
        Self::new(groups, schema.width())
    }

    pub fn groups(&self) -> &[FeatureGroup] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupValue {
    pub group: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub key: String,
    /// Expected score over the background rows.
    pub base: f64,
    pub score: f64,
    pub values: Vec<GroupValue>,
}

impl Attribution {
    pub fn value(&self, group: &str) -> Option<f64> {
        self.values.iter().find(|v| v.group == group).map(|v| v.value)
    }

    pub fn total(&self) -> f64 {
        self.base + self.values.iter().map(|v| v.value).sum::<f64>()
    }
}

fn fill(dst: &mut [f64], src: &[f64], cols: &[usize]) {
    for &c in cols {
        dst[c] = src[c];
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Shapley values of `row` over the groups, with absent groups taking
/// their values from background rows. `n_samples = 0` enumerates all
/// coalitions (at most 10 groups); otherwise `n_samples` random
/// permutations are averaged, permutation `t` masking with background row
/// `t mod |background|`.
pub fn shap_values(
    model: &dyn Scorer,
    key: &str,
    row: &[f64],
    background: &Matrix,
    grouping: &FeatureGrouping,
    n_samples: usize,
    seed: u64,
) -> Result<Attribution> {
    let width = model.input_width();
    if background.rows() == 0 {
        return Err(Error::invalid("background set is empty"));
    }
    if grouping.width() != width || row.len() != width || background.cols() != width {
        return Err(Error::WidthMismatch {
            expected: width,
            found: if row.len() != width { row.len() } else { grouping.width() },
        });
    }
    let g = grouping.len();
    let groups = grouping.groups();
    let score = model.score(&Matrix::from_vec(1, width, row.to_vec())?)?[0];
    let bg_scores = model.score(background)?;
    let base = mean(&bg_scores);
    let mut phi = vec![0.0; g];

    if n_samples == 0 {
        if g > MAX_EXACT_GROUPS {
            return Err(Error::invalid(format!(
                "exact Shapley values need at most {MAX_EXACT_GROUPS} groups, got {g}"
            )));
        }
        // v(S): mean score with groups in S taken from `row`.
        let n_bg = background.rows();
        let mut v = vec![0.0; 1 << g];
        for (mask, slot) in v.iter_mut().enumerate() {
            let mut m = background.clone();
            for i in 0..n_bg {
                let dst = m.row_mut(i);
                for (j, grp) in groups.iter().enumerate() {
                    if mask >> j & 1 == 1 {
                        fill(dst, row, &grp.columns);
                    }
                }
            }
            *slot = mean(&model.score(&m)?);
        }
        let mut fact = vec![1.0f64; g + 1];
        for i in 1..=g {
            fact[i] = fact[i - 1] * i as f64;
        }
        for (j, p) in phi.iter_mut().enumerate() {
            for mask in 0..(1usize << g) {
                if mask >> j & 1 == 1 {
                    continue;
                }
                let s = mask.count_ones() as usize;
                let w = fact[s] * fact[g - s - 1] / fact[g];
                *p += w * (v[mask | 1 << j] - v[mask]);
            }
        }
        // v(empty) is the background mean and v(all) the row's own score.
        return Ok(Attribution {
            key: key.to_string(),
            base: v[0],
            score: v[(1 << g) - 1],
            values: groups
                .iter()
                .zip(phi)
                .map(|(grp, value)| GroupValue {
                    group: grp.name.clone(),
                    value,
                })
                .collect(),
        });
    }

    let mut r = rng::stream(seed, "shap/permutations");
    let mut order: Vec<usize> = (0..g).collect();
    const CHUNK: usize = 256;
    let mut t = 0;
    while t < n_samples {
        let count = CHUNK.min(n_samples - t);
        let mut perms = Vec::with_capacity(count);
        let mut data = Vec::with_capacity(count * (g + 1) * width);
        for k in 0..count {
            order.shuffle(&mut r);
            let mut z = background.row((t + k) % background.rows()).to_vec();
            data.extend_from_slice(&z);
            for &j in &order {
                fill(&mut z, row, &groups[j].columns);
                data.extend_from_slice(&z);
            }
            perms.push(order.clone());
        }
        let scores = model.score(&Matrix::from_vec(count * (g + 1), width, data)?)?;
        for (k, perm) in perms.iter().enumerate() {
            let s = &scores[k * (g + 1)..(k + 1) * (g + 1)];
            for (step, &j) in perm.iter().enumerate() {
                phi[j] += s[step + 1] - s[step];
            }
        }
        t += count;
    }
    phi.iter_mut().for_each(|p| *p /= n_samples as f64);
    Ok(Attribution {
        key: key.to_string(),
        base,
        score,
        values: groups
            .iter()
            .zip(phi)
            .map(|(grp, value)| GroupValue {
                group: grp.name.clone(),
                value,
            })
            .collect(),
    })
}

/// Groups ranked by mean |Shapley value|, ties broken by name.
pub fn global_importance(attributions: &[Attribution]) -> Result<Vec<(String, f64)>> {
    let first = attributions
        .first()
        .ok_or_else(|| Error::invalid("no attributions to summarize"))?;
    let mut out: Vec<(String, f64)> = first
        .values
        .iter()
        .map(|gv| {
            let total: f64 = attributions
                .iter()
                .map(|a| a.value(&gv.group).unwrap_or(0.0).abs())
                .sum();
            (gv.group.clone(), total / attributions.len() as f64)
        })
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}

/// Up to `size` row indices, drawn per class in proportion to its share
/// (at least one row from each class present).
pub fn stratified_background(labels: &[bool], size: usize, seed: u64) -> Vec<usize> {
    let mut r = rng::stream(seed, "shap/background");
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if size >= labels.len() {
        return (0..labels.len()).collect();
    }
    let mut k_pos = (size as f64 * pos.len() as f64 / labels.len() as f64).round() as usize;
    if k_pos == 0 && !pos.is_empty() && size > 1 {
        k_pos = 1;
    }
    let k_pos = k_pos.min(pos.len());
    let k_neg = (size - k_pos).min(neg.len());
    pos.shuffle(&mut r);
    neg.shuffle(&mut r);
    let mut out: Vec<usize> = pos[..k_pos].iter().chain(&neg[..k_neg]).copied().collect();
    out.sort_unstable();
    out
}

/// `attributions.json` (one object per row) and `importance.csv`
/// (`group,mean_abs_shap`).
pub fn write_attributions(dir: &Path, attributions: &[Attribution]) -> Result<Vec<(String, f64)>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = dir.join("attributions.json");
    let mut json = serde_json::to_string_pretty(attributions)?;
    json.push('\n');
    std::fs::write(&p, json).map_err(|e| Error::io(&p, e))?;
    let ranking = global_importance(attributions)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["group", "mean_abs_shap"])?;
    for (g, v) in &ranking {
        w.write_record([g.clone(), v.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    let p = dir.join("importance.csv");
    std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
    Ok(ranking)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn background(rows: usize, width: usize, seed: u64) -> Matrix {
        let mut r = rng::stream(seed, "bg");
        Matrix::from_vec(rows, width, (0..rows * width).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn linear(w: Vec<f64>) -> FnScorer<impl Fn(&[f64]) -> f64 + Sync> {
        let width = w.len();
        FnScorer {
            width,
            f: move |x: &[f64]| 0.3 + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>(),
        }
    }

    #[test]
    fn linear_closed_form_exact() {
        let w = vec![0.5, -1.0, 2.0, 0.25];
        let m = linear(w.clone());
        let bg = background(20, 4, 1);
        let row = [0.3, 0.9, -0.4, 0.1];
        let a = shap_values(&m, "r", &row, &bg, &FeatureGrouping::singletons(4), 0, 0).unwrap();
        for j in 0..4 {
            let mean_j = bg.column(j).iter().sum::<f64>() / 20.0;
            assert!((a.values[j].value - w[j] * (row[j] - mean_j)).abs() < 1e-9);
        }
        assert!((a.total() - (m.f)(&row)).abs() < 1e-12);
    }

    #[test]
    fn zero_model_gets_zero_values() {
        let m = FnScorer { width: 3, f: |_: &[f64]| 0.7 };
        let a = shap_values(&m, "r", &[1.0, 2.0, 3.0], &background(5, 3, 2), &FeatureGrouping::singletons(3), 0, 0).unwrap();
        assert!(a.values.iter().all(|v| v.value == 0.0));
        assert_eq!(a.base, 0.7);
    }

    #[test]
    fn symmetric_duplicates_share_credit() {
        let m = FnScorer {
            width: 2,
            f: |x: &[f64]| (x[0] + x[1]).tanh(),
        };
        let bg = Matrix::from_rows(&[[0.2, 0.2], [-0.5, -0.5]]).unwrap();
        let a = shap_values(&m, "r", &[0.9, 0.9], &bg, &FeatureGrouping::singletons(2), 0, 0).unwrap();
        assert!((a.values[0].value - a.values[1].value).abs() < 1e-15);
    }

    #[test]
    fn sampling_converges_to_exact() {
        let m = FnScorer {
            width: 6,
            f: |x: &[f64]| (x[0] * x[1] + x[2] - 0.5 * x[3] * x[4] + x[5].sin()).tanh(),
        };
        let bg = background(10, 6, 3);
        let row = [0.8, -0.6, 0.4, 0.9, 0.7, -0.2];
        let grp = FeatureGrouping::singletons(6);
        let exact = shap_values(&m, "r", &row, &bg, &grp, 0, 0).unwrap();
        let approx = shap_values(&m, "r", &row, &bg, &grp, 20_000, 9).unwrap();
        for (e, a) in exact.values.iter().zip(&approx.values) {
            assert!((e.value - a.value).abs() < 0.01);
        }
        assert!((approx.total() - approx.score).abs() < 1e-9);
    }

    #[test]
    fn grouping_must_partition() {
        let g = |cols: Vec<Vec<usize>>| {
            FeatureGrouping::new(
                cols.into_iter()
                    .enumerate()
                    .map(|(i, c)| FeatureGroup {
                        name: format!("g{i}"),
                        columns: c,
                    })
                    .collect(),
                3,
            )
        };
        assert!(g(vec![vec![0, 1], vec![2]]).is_ok());
        assert!(g(vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(g(vec![vec![0, 1]]).is_err());
        assert!(g(vec![vec![0, 1], vec![2, 3]]).is_err());
        let m = linear(vec![1.0; 3]);
        let empty = Matrix::zeros(0, 3);
        assert!(shap_values(&m, "r", &[0.0; 3], &empty, &FeatureGrouping::singletons(3), 0, 0).is_err());
    }

    #[test]
    fn ranking_is_sorted_and_order_free() {
        let mk = |k: &str, a: f64, b: f64| Attribution {
            key: k.into(),
            base: 0.0,
            score: a + b,
            values: vec![
                GroupValue { group: "b".into(), value: b },
                GroupValue { group: "a".into(), value: a },
            ],
        };
        let rows = vec![mk("1", 0.1, -0.1), mk("2", -0.3, 0.3)];
        let ranked = global_importance(&rows).unwrap();
        assert_eq!(ranked[0].0, "a");
        let mut rev = rows.clone();
        rev.reverse();
        assert_eq!(global_importance(&rev).unwrap(), ranked);
        let single = vec![Attribution {
            key: "k".into(),
            base: 0.0,
            score: 1.0,
            values: vec![GroupValue { group: "only".into(), value: 1.0 }],
        }];
        assert_eq!(global_importance(&single).unwrap()[0].0, "only");
    }

    #[test]
    fn background_is_stratified() {
        let labels: Vec<bool> = (0..1000).map(|i| i % 100 == 0).collect();
        let bg = stratified_background(&labels, 100, 1);
        assert_eq!(bg.len(), 100);
        assert_eq!(bg.iter().filter(|&&i| labels[i]).count(), 1);
    }
}
