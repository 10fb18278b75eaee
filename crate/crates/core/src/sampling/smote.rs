//! SMOTE-ENC: synthetic minority oversampling over mixed nominal and
//! continuous features.
//!
//! Each nominal group (a one-hot block, or a single label-encoded column)
//! is collapsed to one numeric coordinate for the neighbour search. A
//! category `c` encodes to `(o_c / eps) * m`, where `o_c` is the minority
//! share among rows with category `c`, `eps` the overall minority share and
//! `m` the median standard deviation of the continuous columns over the
//! minority rows. Synthetic rows interpolate the continuous columns between
//! a minority seed and one of its k nearest minority neighbours and copy the
//! nominal columns from the seed.

use std::collections::{BTreeMap, HashSet};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureSchema;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    /// Minority/majority ratio after oversampling.
    pub target_ratio: f64,
    pub seed: u64,
    /// Nominal feature groups: a one-hot block's columns, or a single
    /// label-encoded column.
    pub nominal_columns: Vec<Vec<usize>>,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            k_neighbors: 5,
            target_ratio: 1.0,
            seed: 0,
            nominal_columns: Vec::new(),
        }
    }
}

impl SmoteConfig {
    /// Nominal groups taken from the one-hot blocks of a schema.
    pub fn with_schema_groups(mut self, schema: &FeatureSchema) -> Self {
        self.nominal_columns = schema.categorical.iter().map(|b| b.columns().collect()).collect();
        self
    }

    pub fn validate(&self, width: usize) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::config("k_neighbors must be at least 1"));
        }
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(Error::config("target_ratio must lie in (0, 1]"));
        }
        let mut seen = HashSet::new();
        for g in &self.nominal_columns {
            if g.is_empty() {
                return Err(Error::config("empty nominal group"));
            }
            for &c in g {
                if c >= width {
                    return Err(Error::WidthMismatch {
                        expected: width,
                        found: c + 1,
                    });
                }
                if !seen.insert(c) {
                    return Err(Error::config(format!("column {c} appears in two nominal groups")));
                }
            }
        }
        Ok(())
    }
}

/// Category of a row within a nominal group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    /// Position of the hot column inside a one-hot block.
    Level(usize),
    /// All-zero one-hot block.
    Absent,
    /// Raw bits of a label-encoded value.
    Label(u64),
}

pub fn category_of(row: &[f64], group: &[usize]) -> Category {
    if let [col] = group {
        // -0.0 and 0.0 are the same label.
        let v = row[*col];
        return Category::Label(if v == 0.0 { 0 } else { v.to_bits() });
    }
    group
        .iter()
        .position(|&c| row[c] != 0.0)
        .map_or(Category::Absent, Category::Level)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupEncoding {
    pub columns: Vec<usize>,
    pub values: BTreeMap<Category, f64>,
}

impl GroupEncoding {
    pub fn value(&self, c: Category) -> f64 {
        self.values.get(&c).copied().unwrap_or(0.0)
    }
}

/// Numeric encoding of the nominal groups plus the constants behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSpace {
    pub groups: Vec<GroupEncoding>,
    pub continuous_columns: Vec<usize>,
    /// Median std of continuous columns over minority rows.
    pub median_std: f64,
    /// Overall minority share.
    pub minority_fraction: f64,
    pub minority_label: bool,
}

impl EncodedSpace {
    /// Point used for distance computations.
    pub fn encode_row(&self, row: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.continuous_columns.iter().map(|&c| row[c]).collect();
        out.extend(
            self.groups
                .iter()
                .map(|g| g.value(category_of(row, &g.columns))),
        );
        out
    }
}

/// The smaller class; positives on a tie.
pub fn minority_label(labels: &[bool]) -> bool {
    let pos = labels.iter().filter(|&&l| l).count();
    pos <= labels.len() - pos
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn encode_nominal_enc(matrix: &Matrix, labels: &[bool], nominal_columns: &[Vec<usize>]) -> Result<EncodedSpace> {
    if labels.len() != matrix.rows() {
        return Err(Error::invalid("labels and matrix rows differ"));
    }
    if labels.is_empty() {
        return Err(Error::invalid("no rows"));
    }
    let minority = minority_label(labels);
    let minority_rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == minority).collect();
    if minority_rows.is_empty() {
        return Err(Error::invalid("no minority samples"));
    }
    let nominal: HashSet<usize> = nominal_columns.iter().flatten().copied().collect();
    let continuous_columns: Vec<usize> = (0..matrix.cols()).filter(|c| !nominal.contains(c)).collect();
    if continuous_columns.is_empty() {
        return Err(Error::invalid(
            "SMOTE-ENC needs at least one continuous column (median std undefined)",
        ));
    }

    let nm = minority_rows.len() as f64;
    let stds: Vec<f64> = continuous_columns
        .iter()
        .map(|&c| {
            let mean = minority_rows.iter().map(|&i| matrix.get(i, c)).sum::<f64>() / nm;
            let var = minority_rows
                .iter()
                .map(|&i| (matrix.get(i, c) - mean).powi(2))
                .sum::<f64>()
                / nm;
            var.sqrt()
        })
        .collect();
    let median_std = median(stds);
    let minority_fraction = nm / labels.len() as f64;

    let groups = nominal_columns
        .iter()
        .map(|cols| {
            let mut counts: BTreeMap<Category, (usize, usize)> = BTreeMap::new();
            for (i, &l) in labels.iter().enumerate() {
                let e = counts.entry(category_of(matrix.row(i), cols)).or_default();
                e.0 += 1;
                if l == minority {
                    e.1 += 1;
                }
            }
            let values = counts
                .into_iter()
                .map(|(c, (total, minor))| {
                    let share = minor as f64 / total as f64;
                    (c, share / minority_fraction * median_std)
                })
                .collect();
            GroupEncoding {
                columns: cols.clone(),
                values,
            }
        })
        .collect();

    Ok(EncodedSpace {
        groups,
        continuous_columns,
        median_std,
        minority_fraction,
        minority_label: minority,
    })
}

/// k nearest neighbours of every point (excluding itself), ties broken by
/// lower index.
pub fn nearest_neighbors(points: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    let n = points.len();
    (0..n)
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let dist = points[i]
                        .iter()
                        .zip(&points[j])
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>();
                    (dist, j)
                })
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.truncate(k);
            d.into_iter().map(|(_, j)| j).collect()
        })
        .collect()
}

/// Oversample the minority class up to `target_ratio` of the majority.
/// The output starts with the input rows, unchanged and in order.
pub fn smote_enc(matrix: &Matrix, labels: &[bool], config: &SmoteConfig) -> Result<(Matrix, Vec<bool>)> {
    config.validate(matrix.cols())?;
    let space = encode_nominal_enc(matrix, labels, &config.nominal_columns)?;
    let minority = space.minority_label;
    let minority_rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == minority).collect();
    let n_min = minority_rows.len();
    let n_maj = labels.len() - n_min;
    if n_min <= config.k_neighbors {
        return Err(Error::invalid(format!(
            "insufficient minority samples: {n_min} with k_neighbors = {}",
            config.k_neighbors
        )));
    }
    let target = (config.target_ratio * n_maj as f64).floor() as usize;
    let n_synth = target.saturating_sub(n_min);

    let points: Vec<Vec<f64>> = minority_rows.iter().map(|&i| space.encode_row(matrix.row(i))).collect();
    let neighbors = nearest_neighbors(&points, config.k_neighbors);

    let mut r = rng::stream(config.seed, "smote");
    let mut synth = Vec::with_capacity(n_synth * matrix.cols());
    for _ in 0..n_synth {
        let s = r.random_range(0..n_min);
        let nb = neighbors[s][r.random_range(0..neighbors[s].len())];
        let u: f64 = r.random();
        let x = matrix.row(minority_rows[s]);
        let xn = matrix.row(minority_rows[nb]);
        let start = synth.len();
        synth.extend_from_slice(x);
        let row = &mut synth[start..];
        for &c in &space.continuous_columns {
            row[c] = x[c] + u * (xn[c] - x[c]);
        }
    }
    let synth = Matrix::from_vec(n_synth, matrix.cols(), synth)?;
    let out = matrix.vstack(&synth)?;
    let mut out_labels = labels.to_vec();
    out_labels.extend(std::iter::repeat_n(minority, n_synth));
    Ok((out, out_labels))
}
