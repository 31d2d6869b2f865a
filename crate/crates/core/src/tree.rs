//! A single contextual-treatment-selection tree.
//!
//! Every node carries an estimate `ŷ_t` of the expected response under each
//! treatment. A child estimates treatment `t` from its own rows only when it
//! has at least `min_split` of them, shrunk toward the parent by `n_reg`
//! pseudo-rows; otherwise it inherits the parent's value. A split is scored
//! by how much it raises the best achievable expected response:
//!
//! ```text
//! gain = p_l · max_t ŷ_t(left) + p_r · max_t ŷ_t(right) − max_t ŷ_t(node)
//! ```
//!
//! evaluated as `p_l · (max_l − max) + p_r · (max_r − max)` with
//! `p_r = 1 − p_l`, so that children that inherit everything score exactly 0.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Result, UpliftError};
use crate::split::{scan_feature, SortedIndex, Split, TrainingSample, TreatmentStats};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub min_split: usize,
    pub n_reg: usize,
    pub mtry: usize,
    /// `None` grows until the termination rules stop every branch.
    pub max_depth: Option<usize>,
}

impl TreeParams {
    pub fn new(min_split: usize, n_reg: usize, mtry: usize) -> Self {
        TreeParams {
            min_split,
            n_reg,
            mtry,
            max_depth: None,
        }
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.min_split == 0 {
            return Err(UpliftError::param("min_split must be at least 1"));
        }
        if self.mtry == 0 || self.mtry > n_features {
            return Err(UpliftError::param(format!(
                "mtry {} outside 1..={n_features}",
                self.mtry
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NodeKind {
    Leaf,
    Internal { split: Split, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub estimates: Vec<f64>,
    pub counts: Vec<usize>,
    #[serde(flatten)]
    pub kind: NodeKind,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf)
    }
}

/// Nodes are stored in an arena; the root is node 0 and children always
/// follow their parent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpliftTree {
    pub nodes: Vec<Node>,
    pub params: TreeParams,
    pub fingerprint: String,
}

impl UpliftTree {
    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        let mut max = 0;
        for (i, node) in self.nodes.iter().enumerate() {
            if let NodeKind::Internal { left, right, .. } = node.kind {
                depth[left] = depth[i] + 1;
                depth[right] = depth[i] + 1;
                max = max.max(depth[i] + 1);
            }
        }
        max
    }

    /// Index of the leaf `x` falls into.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i].kind {
                NodeKind::Leaf => return i,
                NodeKind::Internal { split, left, right } => {
                    i = if split.goes_left(x) { *left } else { *right };
                }
            }
        }
    }

    /// Per-treatment expected-response estimates for `x`.
    pub fn predict(&self, x: &[f64]) -> &[f64] {
        &self.nodes[self.leaf_index(x)].estimates
    }
}

/// Per-treatment leaf estimates for `x`.
pub fn tree_predict<'a>(tree: &'a UpliftTree, x: &[f64]) -> &'a [f64] {
    tree.predict(x)
}

#[inline]
pub(crate) fn estimate_from_stats(parent: f64, stats: TreatmentStats, min_split: usize, n_reg: usize) -> f64 {
    if stats.count < min_split {
        parent
    } else {
        let reg = n_reg as f64;
        (stats.sum + parent * reg) / (stats.count as f64 + reg)
    }
}

/// Estimate for one treatment in a child node given the parent's estimate and
/// the child's responses under that treatment.
pub fn child_estimate(parent_estimate: f64, child_rows: &[f64], min_split: usize, n_reg: usize) -> f64 {
    let mut stats = TreatmentStats::default();
    for &y in child_rows {
        stats.add(y);
    }
    estimate_from_stats(parent_estimate, stats, min_split, n_reg)
}

#[inline]
fn combine(max_left: f64, max_right: f64, parent_max: f64, n_left: usize, n: usize) -> f64 {
    let p_left = n_left as f64 / n as f64;
    let p_right = 1.0 - p_left;
    p_left * (max_left - parent_max) + p_right * (max_right - parent_max)
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Gain of a split whose left side has `left` stats; the right side is
/// `totals − left`.
#[inline]
fn gain_against_totals(
    parent: &[f64],
    parent_max: f64,
    totals: &[TreatmentStats],
    left: &[TreatmentStats],
    n_left: usize,
    n: usize,
    params: &TreeParams,
) -> f64 {
    let mut max_left = f64::NEG_INFINITY;
    let mut max_right = f64::NEG_INFINITY;
    for t in 0..parent.len() {
        let right = totals[t].minus(left[t]);
        max_left = max_left.max(estimate_from_stats(parent[t], left[t], params.min_split, params.n_reg));
        max_right = max_right.max(estimate_from_stats(parent[t], right, params.min_split, params.n_reg));
    }
    combine(max_left, max_right, parent_max, n_left, n)
}

/// Estimated increase in expected response from executing `split` on the
/// node made of `rows`.
pub fn split_gain(
    data: &Dataset,
    rows: &[usize],
    node_estimates: &[f64],
    split: &Split,
    params: &TreeParams,
) -> Result<f64> {
    let mut left = vec![TreatmentStats::default(); data.n_treatments()];
    let mut right = left.clone();
    let col = data.feature(split.feature);
    for &i in rows {
        let side = if split.goes_left_value(col[i]) { &mut left } else { &mut right };
        side[data.treatment()[i]].add(data.response()[i]);
    }
    let n_left: usize = left.iter().map(|s| s.count).sum();
    let n_right: usize = right.iter().map(|s| s.count).sum();
    if n_left == 0 || n_right == 0 {
        return Err(UpliftError::param("split leaves one side empty"));
    }
    let side_max = |stats: &[TreatmentStats]| {
        stats
            .iter()
            .zip(node_estimates)
            .map(|(s, &p)| estimate_from_stats(p, *s, params.min_split, params.n_reg))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    Ok(combine(
        side_max(&left),
        side_max(&right),
        max_of(node_estimates),
        n_left,
        n_left + n_right,
    ))
}

/// Best split of node `lo..hi` over `features` (ascending), or `None` when no
/// candidate has non-negative gain.
fn find_best_split(
    sample: &TrainingSample,
    index: &SortedIndex,
    lo: usize,
    hi: usize,
    estimates: &[f64],
    totals: &[TreatmentStats],
    features: &[usize],
    params: &TreeParams,
    scratch: &mut Vec<TreatmentStats>,
) -> Option<(Split, f64)> {
    let parent_max = max_of(estimates);
    let n = hi - lo;
    let mut best: Option<(Split, f64)> = None;
    for &f in features {
        scan_feature(sample, index, f, lo, hi, scratch, |split, left, n_left| {
            let gain = gain_against_totals(estimates, parent_max, totals, left, n_left, n, params);
            if gain >= 0.0 && best.is_none_or(|(_, g)| gain > g) {
                best = Some((split, gain));
            }
        });
    }
    best
}

/// Highest-gain split of the node made of `rows` among `candidate_features`,
/// with its gain. Ties keep the lowest feature index, then the lowest
/// threshold or code.
pub fn best_split(
    data: &Dataset,
    rows: &[usize],
    node_estimates: &[f64],
    candidate_features: &[usize],
    params: &TreeParams,
) -> Option<(Split, f64)> {
    if rows.is_empty() {
        return None;
    }
    let sample = TrainingSample::gather(data, rows);
    let index = SortedIndex::new(&sample);
    let totals = sample.stats(index.rows(0, sample.len()));
    let mut features = candidate_features.to_vec();
    features.sort_unstable();
    features.dedup();
    let mut scratch = Vec::new();
    find_best_split(
        &sample,
        &index,
        0,
        sample.len(),
        node_estimates,
        &totals,
        &features,
        params,
        &mut scratch,
    )
}

/// Per-treatment sample means; fails if a treatment has no rows.
pub fn treatment_means(data: &Dataset, rows: &[usize]) -> Result<Vec<f64>> {
    let mut stats = vec![TreatmentStats::default(); data.n_treatments()];
    for &i in rows {
        stats[data.treatment()[i]].add(data.response()[i]);
    }
    stats
        .iter()
        .enumerate()
        .map(|(t, s)| {
            if s.count == 0 {
                Err(UpliftError::TreatmentAbsent(t))
            } else {
                Ok(s.sum / s.count as f64)
            }
        })
        .collect()
}

/// Grows a tree on all rows of `data`.
pub fn grow_tree<R: Rng + ?Sized>(
    data: &Dataset,
    params: &TreeParams,
    root_estimates: &[f64],
    rng: &mut R,
) -> Result<UpliftTree> {
    let rows: Vec<usize> = (0..data.len()).collect();
    grow_tree_on_rows(data, &rows, params, root_estimates, rng)
}

/// Grows a tree on the given rows of `data` (duplicates allowed, as produced
/// by bootstrapping).
pub fn grow_tree_on_rows<R: Rng + ?Sized>(
    data: &Dataset,
    rows: &[usize],
    params: &TreeParams,
    root_estimates: &[f64],
    rng: &mut R,
) -> Result<UpliftTree> {
    if rows.is_empty() {
        return Err(UpliftError::EmptyDataset);
    }
    params.validate(data.n_features())?;
    if root_estimates.len() != data.n_treatments() {
        return Err(UpliftError::param(format!(
            "{} root estimates for {} treatments",
            root_estimates.len(),
            data.n_treatments()
        )));
    }
    if root_estimates.iter().any(|e| !e.is_finite()) {
        return Err(UpliftError::param("root estimates must be finite"));
    }
    let sample = TrainingSample::gather(data, rows);
    if let Some(t) = sample
        .stats(&(0..rows.len() as u32).collect::<Vec<_>>())
        .iter()
        .position(|s| s.count == 0)
    {
        return Err(UpliftError::TreatmentAbsent(t));
    }
    let nodes = grow(&sample, params, root_estimates, rng);
    Ok(UpliftTree {
        nodes,
        params: params.clone(),
        fingerprint: data.schema().fingerprint(),
    })
}

fn grow<R: Rng + ?Sized>(
    sample: &TrainingSample,
    params: &TreeParams,
    root_estimates: &[f64],
    rng: &mut R,
) -> Vec<Node> {
    let mut index = SortedIndex::new(sample);
    let n = sample.len();
    let d = sample.n_features();
    let root_stats = sample.stats(index.rows(0, n));
    let mut nodes = vec![Node {
        estimates: root_estimates.to_vec(),
        counts: root_stats.iter().map(|s| s.count).collect(),
        kind: NodeKind::Leaf,
    }];
    // (node, lo, hi, depth, per-treatment stats)
    let mut stack = vec![(0usize, 0usize, n, 0usize, root_stats)];
    let mut scratch = Vec::new();

    while let Some((id, lo, hi, depth, stats)) = stack.pop() {
        if params.max_depth.is_some_and(|m| depth >= m) {
            continue;
        }
        if stats.iter().all(|s| s.count < params.min_split) {
            continue;
        }
        if sample.is_pure(index.rows(lo, hi)) {
            continue;
        }
        let mut features = index::sample(rng, d, params.mtry).into_vec();
        features.sort_unstable();
        let estimates = nodes[id].estimates.clone();
        let Some((split, _gain)) = find_best_split(
            sample, &index, lo, hi, &estimates, &stats, &features, params, &mut scratch,
        ) else {
            continue;
        };

        let mid = index.partition(sample, &split, lo, hi);
        let children = [(lo, mid), (mid, hi)].map(|(a, b)| {
            let child_stats = sample.stats(index.rows(a, b));
            let node = Node {
                estimates: estimates
                    .iter()
                    .zip(&child_stats)
                    .map(|(&p, s)| estimate_from_stats(p, *s, params.min_split, params.n_reg))
                    .collect(),
                counts: child_stats.iter().map(|s| s.count).collect(),
                kind: NodeKind::Leaf,
            };
            (node, a, b, child_stats)
        });
        let left_id = nodes.len();
        let right_id = left_id + 1;
        nodes[id].kind = NodeKind::Internal {
            split,
            left: left_id,
            right: right_id,
        };
        let [(left_node, la, lb, ls), (right_node, ra, rb, rs)] = children;
        nodes.push(left_node);
        nodes.push(right_node);
        stack.push((right_id, ra, rb, depth + 1, rs));
        stack.push((left_id, la, lb, depth + 1, ls));
    }
    nodes
}
