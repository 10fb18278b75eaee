//! Second-order gradient boosting of regression trees under logistic loss.
//!
//! Trees grow level-wise with exact greedy split search: every continuous
//! column is presorted once, and each level scans the sorted order while
//! accumulating gradient/Hessian sums per open node. Two-valued columns
//! (one-hot indicators) have a single candidate split and are handled by
//! summing over the rows that hold the upper value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::{check_labels, log_loss_from_margins, round_f32, sigmoid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtConfig {
    pub learning_rate: f64,
    pub max_depth: usize,
    /// Minimum Hessian sum in each child of a split.
    pub min_child_weight: f64,
    pub n_rounds: usize,
    /// Rounds without validation improvement before stopping; `None` trains
    /// all rounds.
    pub early_stopping_patience: Option<usize>,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            learning_rate: 0.1,
            max_depth: 6,
            min_child_weight: 1.0,
            n_rounds: 200,
            early_stopping_patience: Some(10),
            lambda: 1.0,
            seed: 0,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::config("learning_rate must lie in (0, 1]"));
        }
        if self.max_depth == 0 || self.max_depth > 24 {
            return Err(Error::config("max_depth must lie in 1..=24"));
        }
        if !(self.min_child_weight >= 0.0 && self.min_child_weight.is_finite()) {
            return Err(Error::config("min_child_weight must be finite and non-negative"));
        }
        if self.early_stopping_patience == Some(0) {
            return Err(Error::config("early_stopping_patience must be at least 1"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::config("lambda must be non-negative"));
        }
        Ok(())
    }
}

/// Pre-order node; the left child of a split at `i` is `i + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode {
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Split {
                    feature,
                    threshold,
                    right,
                } => i = if row[feature] < threshold { i + 1 } else { right },
                TreeNode::Leaf { value } => return value,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> (usize, usize) {
            // (depth below i, index after the subtree)
            match nodes[i] {
                TreeNode::Leaf { .. } => (0, i + 1),
                TreeNode::Split { right, .. } => {
                    let (dl, _) = go(nodes, i + 1);
                    let (dr, end) = go(nodes, right);
                    (1 + dl.max(dr), end)
                }
            }
        }
        go(&self.nodes, 0).0
    }

    pub fn validate(&self, width: usize) -> Result<()> {
        fn go(nodes: &[TreeNode], i: usize, width: usize) -> Result<usize> {
            match nodes.get(i) {
                None => Err(Error::Format("tree node index out of range".into())),
                Some(TreeNode::Leaf { .. }) => Ok(i + 1),
                Some(&TreeNode::Split { feature, right, .. }) => {
                    if feature >= width {
                        return Err(Error::WidthMismatch {
                            expected: width,
                            found: feature + 1,
                        });
                    }
                    let end = go(nodes, i + 1, width)?;
                    if end != right {
                        return Err(Error::Format("tree is not in pre-order".into()));
                    }
                    go(nodes, right, width)
                }
            }
        }
        if go(&self.nodes, 0, width)? != self.nodes.len() {
            return Err(Error::Format("tree has unreachable nodes".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbtModel {
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub input_width: usize,
}

impl GbtModel {
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin(row))
    }
}

enum ColumnIndex {
    Constant,
    /// Exactly two distinct values; rows holding `hi`.
    Binary { lo: f64, hi: f64, hi_rows: Vec<u32> },
    Sorted { order: Vec<u32>, values: Vec<f64> },
}

fn index_columns(x: &Matrix) -> Vec<ColumnIndex> {
    let n = x.rows();
    let d = x.cols();
    let data = x.as_slice();
    (0..d)
        .map(|f| {
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.sort_by(|&a, &b| data[a as usize * d + f].total_cmp(&data[b as usize * d + f]).then(a.cmp(&b)));
            let values: Vec<f64> = order.iter().map(|&r| data[r as usize * d + f]).collect();
            let lo = values[0];
            let hi = values[n - 1];
            if lo == hi {
                return ColumnIndex::Constant;
            }
            let first_hi = values.partition_point(|&v| v < hi);
            if values[first_hi - 1] == lo {
                let mut hi_rows = order[first_hi..].to_vec();
                hi_rows.sort_unstable();
                ColumnIndex::Binary { lo, hi, hi_rows }
            } else {
                ColumnIndex::Sorted { order, values }
            }
        })
        .collect()
}

/// A threshold strictly above `lo` and at most `hi` that survives rounding
/// to f32, or `None` when the gap is too small to represent.
fn split_threshold(lo: f64, hi: f64) -> Option<f64> {
    let t = round_f32(lo + 0.5 * (hi - lo));
    (t > lo && t <= hi).then_some(t)
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct OpenNode {
    arena: usize,
    g: f64,
    h: f64,
}

enum ArenaNode {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

const INACTIVE: u32 = u32::MAX;

struct RowStat {
    g: f64,
    h: f64,
    node: u32,
}

struct Builder<'a> {
    x: &'a Matrix,
    columns: &'a [ColumnIndex],
    config: &'a GbtConfig,
}

impl Builder<'_> {
    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        round_f32(-self.config.learning_rate * g / (h + self.config.lambda))
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.config.lambda)
    }

    /// Grows one tree and returns it with each row's leaf value.
    fn grow(&self, grad: &[f64], hess: &[f64]) -> (Tree, Vec<f64>) {
        let n = self.x.rows();
        let d = self.x.cols();
        let data = self.x.as_slice();
        let mcw = self.config.min_child_weight;
        let mut arena: Vec<ArenaNode> = Vec::new();
        let mut node_of = vec![0u32; n];
        let mut row_value = vec![0.0; n];

        let (g0, h0) = grad.iter().zip(hess).fold((0.0, 0.0), |(a, b), (g, h)| (a + g, b + h));
        arena.push(ArenaNode::Leaf(0.0));
        let mut open = vec![OpenNode { arena: 0, g: g0, h: h0 }];

        for depth in 0..=self.config.max_depth {
            if open.is_empty() {
                break;
            }
            let k = open.len();
            let mut best: Vec<Option<Candidate>> = vec![None; k];
            let splittable: Vec<bool> = open
                .iter()
                .map(|o| depth < self.config.max_depth && o.h >= 2.0 * mcw)
                .collect();
            if splittable.iter().any(|&s| s) {
                let parent: Vec<f64> = open.iter().map(|o| self.score(o.g, o.h)).collect();
                let consider = |best: &mut Vec<Option<Candidate>>, j: usize, f: usize, gl: f64, hl: f64, lo: f64, hi: f64| {
                    let (gr, hr) = (open[j].g - gl, open[j].h - hl);
                    if hl < mcw || hr < mcw {
                        return;
                    }
                    let gain = self.score(gl, hl) + self.score(gr, hr) - parent[j];
                    if gain > 1e-12 && best[j].is_none_or(|b| gain > b.gain) {
                        if let Some(threshold) = split_threshold(lo, hi) {
                            best[j] = Some(Candidate {
                                gain,
                                feature: f,
                                threshold,
                            });
                        }
                    }
                };
                // One packed record per row keeps the sorted scans to a single
                // random access each; rows of unsplittable nodes are masked.
                let stats: Vec<RowStat> = (0..n)
                    .map(|r| {
                        let j = node_of[r];
                        let live = j != INACTIVE && splittable[j as usize];
                        RowStat {
                            g: grad[r],
                            h: hess[r],
                            node: if live { j } else { INACTIVE },
                        }
                    })
                    .collect();
                let mut gl = vec![0.0; k];
                let mut hl = vec![0.0; k];
                let mut last = vec![f64::NAN; k];
                for (f, col) in self.columns.iter().enumerate() {
                    match col {
                        ColumnIndex::Constant => {}
                        ColumnIndex::Binary { lo, hi, hi_rows } => {
                            gl.fill(0.0);
                            hl.fill(0.0);
                            for &r in hi_rows {
                                let st = &stats[r as usize];
                                if st.node != INACTIVE {
                                    gl[st.node as usize] += st.g;
                                    hl[st.node as usize] += st.h;
                                }
                            }
                            for j in 0..k {
                                if splittable[j] {
                                    let (g_lo, h_lo) = (open[j].g - gl[j], open[j].h - hl[j]);
                                    consider(&mut best, j, f, g_lo, h_lo, *lo, *hi);
                                }
                            }
                        }
                        ColumnIndex::Sorted { order, values } => {
                            gl.fill(0.0);
                            hl.fill(0.0);
                            last.fill(f64::NAN);
                            for (&r, &v) in order.iter().zip(values) {
                                let st = &stats[r as usize];
                                if st.node == INACTIVE {
                                    continue;
                                }
                                let j = st.node as usize;
                                if v != last[j] && !last[j].is_nan() {
                                    consider(&mut best, j, f, gl[j], hl[j], last[j], v);
                                }
                                gl[j] += st.g;
                                hl[j] += st.h;
                                last[j] = v;
                            }
                        }
                    }
                }
            }

            // Turn the chosen splits into children; the rest become leaves.
            let mut child_of: Vec<Option<(usize, f64, u32)>> = vec![None; k];
            let mut next = Vec::new();
            let mut sums = Vec::new();
            for (j, cand) in best.iter().enumerate() {
                let a = open[j].arena;
                match cand {
                    Some(c) => {
                        let left = arena.len();
                        arena.push(ArenaNode::Leaf(0.0));
                        arena.push(ArenaNode::Leaf(0.0));
                        arena[a] = ArenaNode::Split {
                            feature: c.feature,
                            threshold: c.threshold,
                            left,
                            right: left + 1,
                        };
                        child_of[j] = Some((c.feature, c.threshold, next.len() as u32));
                        next.push(left);
                        next.push(left + 1);
                        sums.push((0.0, 0.0));
                        sums.push((0.0, 0.0));
                    }
                    None => arena[a] = ArenaNode::Leaf(self.leaf_value(open[j].g, open[j].h)),
                }
            }
            for r in 0..n {
                let j = node_of[r];
                if j == INACTIVE {
                    continue;
                }
                match child_of[j as usize] {
                    Some((f, t, base)) => {
                        let c = if data[r * d + f] < t { base } else { base + 1 };
                        node_of[r] = c;
                        sums[c as usize].0 += grad[r];
                        sums[c as usize].1 += hess[r];
                    }
                    None => {
                        if let ArenaNode::Leaf(v) = arena[open[j as usize].arena] {
                            row_value[r] = v;
                        }
                        node_of[r] = INACTIVE;
                    }
                }
            }
            open = next
                .into_iter()
                .zip(sums)
                .map(|(a, (g, h))| OpenNode { arena: a, g, h })
                .collect();
        }

        let mut nodes = Vec::with_capacity(arena.len());
        fn emit(arena: &[ArenaNode], i: usize, out: &mut Vec<TreeNode>) {
            match arena[i] {
                ArenaNode::Leaf(value) => out.push(TreeNode::Leaf { value }),
                ArenaNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let at = out.len();
                    out.push(TreeNode::Leaf { value: 0.0 });
                    emit(arena, left, out);
                    let r = out.len();
                    emit(arena, right, out);
                    out[at] = TreeNode::Split {
                        feature,
                        threshold,
                        right: r,
                    };
                }
            }
        }
        emit(&arena, 0, &mut nodes);
        (Tree { nodes }, row_value)
    }
}

/// Per-round diagnostics from [`train_gbt_traced`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GbtTrace {
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    pub best_round: Option<usize>,
}

pub fn train_gbt(
    x: &Matrix,
    y: &[bool],
    config: &GbtConfig,
    validation: Option<(&Matrix, &[bool])>,
) -> Result<GbtModel> {
    train_gbt_traced(x, y, config, validation).map(|(m, _)| m)
}

pub fn train_gbt_traced(
    x: &Matrix,
    y: &[bool],
    config: &GbtConfig,
    validation: Option<(&Matrix, &[bool])>,
) -> Result<(GbtModel, GbtTrace)> {
    config.validate()?;
    check_labels(x, y)?;
    x.ensure_finite("training matrix")?;
    let validation = match (config.early_stopping_patience, validation) {
        (Some(_), None) => return Err(Error::config("early stopping needs a validation set")),
        (Some(_), Some((vx, _))) if vx.rows() == 0 => {
            return Err(Error::invalid("validation set is empty but early stopping is on"))
        }
        (_, Some((vx, vy))) => {
            if vx.cols() != x.cols() {
                return Err(Error::WidthMismatch {
                    expected: x.cols(),
                    found: vx.cols(),
                });
            }
            if vy.len() != vx.rows() {
                return Err(Error::invalid("validation labels and rows differ"));
            }
            vx.ensure_finite("validation matrix")?;
            Some((vx, vy))
        }
        (None, None) => None,
    };

    let n = x.rows();
    let prevalence = y.iter().filter(|&&l| l).count() as f64 / n as f64;
    let base_score = round_f32((prevalence / (1.0 - prevalence)).ln());
    let columns = index_columns(x);
    let builder = Builder {
        x,
        columns: &columns,
        config,
    };

    let mut margins = vec![base_score; n];
    let mut val_margins = validation.map(|(vx, _)| vec![base_score; vx.rows()]);
    let mut trees = Vec::new();
    let mut trace = GbtTrace::default();
    let mut best: Option<(f64, usize)> = None;
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];

    for round in 0..config.n_rounds {
        for i in 0..n {
            let p = sigmoid(margins[i]);
            grad[i] = p - if y[i] { 1.0 } else { 0.0 };
            hess[i] = (p * (1.0 - p)).max(1e-16);
        }
        let (tree, values) = builder.grow(&grad, &hess);
        if tree.nodes.len() == 1 {
            // No feasible split: further rounds cannot change the ranking.
            break;
        }
        for (m, v) in margins.iter_mut().zip(&values) {
            *m += v;
        }
        trace.train_loss.push(log_loss_from_margins(&margins, y));
        if let (Some((vx, vy)), Some(vm)) = (validation, val_margins.as_mut()) {
            for (i, m) in vm.iter_mut().enumerate() {
                *m += tree.predict_row(vx.row(i));
            }
            let loss = log_loss_from_margins(vm, vy);
            trace.validation_loss.push(loss);
            if best.is_none_or(|(b, _)| loss < b) {
                best = Some((loss, round));
            }
        }
        trees.push(tree);
        if let (Some(patience), Some((_, best_round))) = (config.early_stopping_patience, best) {
            if round - best_round >= patience {
                break;
            }
        }
        if margins.iter().any(|m| !m.is_finite()) {
            return Err(Error::training("boosting produced non-finite margins"));
        }
    }
    if config.early_stopping_patience.is_some() {
        if let Some((_, best_round)) = best {
            trees.truncate(best_round + 1);
            trace.best_round = Some(best_round);
        }
    }
    Ok((
        GbtModel {
            base_score,
            trees,
            input_width: x.cols(),
        },
        trace,
    ))
}
