//! Separate-model baseline: one bagged variance-reduction regression forest
//! per treatment, predicting the treatment with the highest fitted response.
//!
//! Candidate splits and routing are shared with the uplift trees, so the two
//! learners differ only in how a split is scored.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Dictionaries, Schema};
use crate::error::{Result, UpliftError};
use crate::evaluation::PolicyPrediction;
use crate::rng::stream_rng;
use crate::split::{scan_feature, SortedIndex, Split, TrainingSample, TreatmentStats};
use crate::tree::NodeKind;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmaParams {
    pub ntree: usize,
    pub mtry: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl SmaParams {
    pub fn defaults_for(n_features: usize) -> Self {
        SmaParams {
            ntree: 100,
            mtry: n_features.div_ceil(2).max(1),
            min_samples_leaf: 5,
            seed: 0,
        }
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.ntree == 0 || self.min_samples_leaf == 0 {
            return Err(UpliftError::param("ntree and min_samples_leaf must be at least 1"));
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
pub struct RegressionNode {
    pub value: f64,
    pub count: usize,
    #[serde(flatten)]
    pub kind: NodeKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<RegressionNode>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i].kind {
                NodeKind::Leaf => return self.nodes[i].value,
                NodeKind::Internal { split, left, right } => {
                    i = if split.goes_left(x) { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionForest {
    pub trees: Vec<RegressionTree>,
}

impl RegressionForest {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmaModel {
    /// One forest per treatment label.
    pub forests: Vec<RegressionForest>,
    pub params: SmaParams,
    pub schema: Schema,
    pub dictionaries: Dictionaries,
}

impl SmaModel {
    pub fn n_treatments(&self) -> usize {
        self.forests.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.n_features()
    }

    pub fn predict(&self, x: &[f64]) -> Result<PolicyPrediction> {
        if x.len() != self.n_features() {
            return Err(UpliftError::SchemaMismatch(format!(
                "feature vector has {} entries, model expects {}",
                x.len(),
                self.n_features()
            )));
        }
        Ok(PolicyPrediction::from_estimates(
            self.forests.iter().map(|f| f.predict(x)).collect(),
        ))
    }
}

pub fn sma_predict(model: &SmaModel, x: &[f64]) -> Result<PolicyPrediction> {
    model.predict(x)
}

/// Variance-reduction score of splitting `(n, sum)` into `(n_left, sum_left)`
/// and the remainder; larger is better.
#[inline]
fn sse_reduction(total: TreatmentStats, left: TreatmentStats) -> f64 {
    let right = total.minus(left);
    let sq = |s: TreatmentStats| s.sum * s.sum / s.count as f64;
    sq(left) + sq(right) - sq(total)
}

/// Grows one regression tree on `rows` of `data`, ignoring treatment labels.
pub fn grow_regression_tree<R: Rng + ?Sized>(
    data: &Dataset,
    rows: &[usize],
    params: &SmaParams,
    rng: &mut R,
) -> Result<RegressionTree> {
    if rows.is_empty() {
        return Err(UpliftError::EmptyDataset);
    }
    params.validate(data.n_features())?;
    let sample = TrainingSample::gather_single_arm(data, rows);
    Ok(grow(&sample, params, rng))
}

fn grow<R: Rng + ?Sized>(sample: &TrainingSample, params: &SmaParams, rng: &mut R) -> RegressionTree {
    let mut index = SortedIndex::new(sample);
    let n = sample.len();
    let d = sample.n_features();
    let leaf = |s: TreatmentStats| RegressionNode {
        value: s.sum / s.count as f64,
        count: s.count,
        kind: NodeKind::Leaf,
    };
    let root = sample.stats(index.rows(0, n))[0];
    let mut nodes = vec![leaf(root)];
    let mut stack = vec![(0usize, 0usize, n, root)];
    let mut scratch = Vec::new();
    let min_leaf = params.min_samples_leaf;

    while let Some((id, lo, hi, total)) = stack.pop() {
        if hi - lo < 2 * min_leaf || sample.is_pure(index.rows(lo, hi)) {
            continue;
        }
        let mut features = index::sample(rng, d, params.mtry).into_vec();
        features.sort_unstable();
        let mut best: Option<(Split, f64)> = None;
        for &f in &features {
            scan_feature(sample, &index, f, lo, hi, &mut scratch, |split, left, n_left| {
                if n_left < min_leaf || (hi - lo) - n_left < min_leaf {
                    return;
                }
                let score = sse_reduction(total, left[0]);
                if score > 0.0 && best.is_none_or(|(_, s)| score > s) {
                    best = Some((split, score));
                }
            });
        }
        let Some((split, _)) = best else {
            continue;
        };
        let mid = index.partition(sample, &split, lo, hi);
        let ls = sample.stats(index.rows(lo, mid))[0];
        let rs = sample.stats(index.rows(mid, hi))[0];
        let left = nodes.len();
        nodes[id].kind = NodeKind::Internal {
            split,
            left,
            right: left + 1,
        };
        nodes.push(leaf(ls));
        nodes.push(leaf(rs));
        stack.push((left + 1, mid, hi, rs));
        stack.push((left, lo, mid, ls));
    }
    RegressionTree { nodes }
}

/// Fits one bagged regression forest per treatment on that treatment's rows.
/// Tree `i` of treatment `t` uses stream `(t << 32) | i` of `params.seed`.
pub fn train_sma(data: &Dataset, params: &SmaParams) -> Result<SmaModel> {
    if data.is_empty() {
        return Err(UpliftError::EmptyDataset);
    }
    params.validate(data.n_features())?;
    let groups = data.rows_by_treatment();
    if let Some(t) = groups.iter().position(Vec::is_empty) {
        return Err(UpliftError::TreatmentAbsent(t));
    }
    let forests = groups
        .iter()
        .enumerate()
        .map(|(t, rows)| {
            let trees = (0..params.ntree)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream_rng(params.seed, ((t as u64) << 32) | i as u64);
                    let boot: Vec<usize> = (0..rows.len())
                        .map(|_| rows[rng.random_range(0..rows.len())])
                        .collect();
                    let sample = TrainingSample::gather_single_arm(data, &boot);
                    grow(&sample, params, &mut rng)
                })
                .collect();
            RegressionForest { trees }
        })
        .collect();
    Ok(SmaModel {
        forests,
        params: params.clone(),
        schema: data.schema().clone(),
        dictionaries: data.dictionaries(),
    })
}
