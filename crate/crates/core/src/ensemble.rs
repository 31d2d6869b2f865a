//! Forest of uplift trees, each grown on a treatment-stratified bootstrap
//! resample with features drawn per node.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_bootstrap_indices, Dataset, Dictionaries, Schema};
use crate::error::{Result, UpliftError};
use crate::evaluation::PolicyPrediction;
use crate::rng::stream_rng;
use crate::tree::{grow_tree_on_rows, treatment_means, TreeParams, UpliftTree};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub ntree: usize,
    /// Rows per tree; `None` uses the full training size.
    pub bootstrap: Option<usize>,
    pub tree: TreeParams,
    pub seed: u64,
}

impl ForestParams {
    /// 100 trees, `n_reg = 3`, `mtry = ceil(d / 2)`, `min_split = 100`.
    pub fn defaults_for(n_features: usize) -> Self {
        ForestParams {
            ntree: 100,
            bootstrap: None,
            tree: TreeParams::new(100, 3, n_features.div_ceil(2).max(1)),
            seed: 0,
        }
    }

    pub fn validate(&self, n_rows: usize, n_features: usize) -> Result<()> {
        if self.ntree == 0 {
            return Err(UpliftError::param("ntree must be at least 1"));
        }
        match self.bootstrap {
            Some(0) => return Err(UpliftError::param("bootstrap size must be at least 1")),
            Some(b) if b > n_rows => {
                return Err(UpliftError::param(format!(
                    "bootstrap size {b} exceeds dataset size {n_rows}"
                )))
            }
            _ => {}
        }
        self.tree.validate(n_features)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<UpliftTree>,
    pub params: ForestParams,
    pub schema: Schema,
    pub n_treatments: usize,
    pub dictionaries: Dictionaries,
}

impl Forest {
    pub fn n_features(&self) -> usize {
        self.schema.n_features()
    }

    /// Mean of the trees' per-treatment estimates, summed in tree order.
    pub fn predict_estimates(&self, x: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_treatments];
        for tree in &self.trees {
            for (a, e) in acc.iter_mut().zip(tree.predict(x)) {
                *a += e;
            }
        }
        let n = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    pub fn predict(&self, x: &[f64]) -> Result<PolicyPrediction> {
        if x.len() != self.n_features() {
            return Err(UpliftError::SchemaMismatch(format!(
                "feature vector has {} entries, model expects {}",
                x.len(),
                self.n_features()
            )));
        }
        Ok(PolicyPrediction::from_estimates(self.predict_estimates(x)))
    }
}

/// Forest prediction: averaged per-treatment estimates and the best treatment.
pub fn forest_predict(forest: &Forest, x: &[f64]) -> Result<PolicyPrediction> {
    forest.predict(x)
}

/// Trains the forest. Tree `i` draws from stream `i` of `params.seed`, so the
/// result does not depend on how many worker threads build trees.
pub fn train_cts(data: &Dataset, params: &ForestParams) -> Result<Forest> {
    if data.is_empty() {
        return Err(UpliftError::EmptyDataset);
    }
    params.validate(data.len(), data.n_features())?;
    if let Some(t) = data.treatment_counts().iter().position(|&c| c == 0) {
        return Err(UpliftError::TreatmentAbsent(t));
    }
    let b = params.bootstrap.unwrap_or(data.len());
    let trees = (0..params.ntree)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(params.seed, i as u64);
            let rows = stratified_bootstrap_indices(data, b, &mut rng)?;
            let root = treatment_means(data, &rows)?;
            grow_tree_on_rows(data, &rows, &params.tree, &root, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest {
        trees,
        params: params.clone(),
        schema: data.schema().clone(),
        n_treatments: data.n_treatments(),
        dictionaries: data.dictionaries(),
    })
}
