//! Grid search over a size parameter (`min_split` for CTS,
//! `min_samples_leaf` for the baseline) scored by the held-out expected
//! response estimate.

use serde::{Deserialize, Serialize};

use crate::dataset::{empirical_treatment_probs, stratified_folds, stratified_split_indices, Dataset, TreatmentProbs};
use crate::ensemble::{train_cts, ForestParams};
use crate::error::{Result, UpliftError};
use crate::evaluation::expected_response;
use crate::model::UpliftModel;
use crate::rng::stream_rng;
use crate::sma::{train_sma, SmaParams};

pub const DEFAULT_MIN_SPLIT_GRID: [usize; 9] = [25, 50, 100, 200, 400, 800, 1600, 3200, 6400];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum TuneMode {
    /// `folds`-fold cross-validation with treatment-stratified folds.
    CrossValidation { folds: usize },
    /// One stratified train/validation split; `fraction` goes to validation.
    Validation { fraction: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub grid: Vec<usize>,
    /// `scores[g][f]`: held-out estimate for grid value `g` on fold `f`.
    pub scores: Vec<Vec<f64>>,
    pub mean_scores: Vec<f64>,
    pub best: usize,
}

impl TuneReport {
    fn from_scores(grid: Vec<usize>, scores: Vec<Vec<f64>>) -> Self {
        let mean_scores: Vec<f64> = scores
            .iter()
            .map(|s| s.iter().sum::<f64>() / s.len() as f64)
            .collect();
        // highest mean; ties go to the smaller value
        let mut best_i = 0;
        for i in 1..grid.len() {
            let (m, b) = (mean_scores[i], mean_scores[best_i]);
            if m > b || (m == b && grid[i] < grid[best_i]) {
                best_i = i;
            }
        }
        TuneReport {
            best: grid[best_i],
            grid,
            scores,
            mean_scores,
        }
    }

    /// CSV with header `value,fold,score`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["value", "fold", "score"])?;
        for (value, row) in self.grid.iter().zip(&self.scores) {
            for (fold, score) in row.iter().enumerate() {
                w.write_record([value.to_string(), fold.to_string(), score.to_string()])?;
            }
        }
        w.flush().map_err(|e| UpliftError::io("<tune report>", e))?;
        Ok(())
    }
}

/// Grid values from [`DEFAULT_MIN_SPLIT_GRID`] that are below the smallest
/// treatment group of a training set of `n_train_per_treatment` rows; at
/// least the smallest value is always kept.
pub fn default_grid_for(n_train_per_treatment: usize) -> Vec<usize> {
    let grid: Vec<usize> = DEFAULT_MIN_SPLIT_GRID
        .iter()
        .copied()
        .filter(|&v| v < n_train_per_treatment)
        .collect();
    if grid.is_empty() {
        vec![DEFAULT_MIN_SPLIT_GRID[0]]
    } else {
        grid
    }
}

/// Train/held-out row pairs for `mode`, each guaranteed to contain every treatment.
pub fn tuning_partitions(data: &Dataset, mode: TuneMode, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let mut rng = stream_rng(seed, 0);
    let pairs = match mode {
        TuneMode::CrossValidation { folds } => {
            let parts = stratified_folds(data, folds, &mut rng)?;
            (0..parts.len())
                .map(|k| {
                    let mut train: Vec<usize> = parts
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != k)
                        .flat_map(|(_, p)| p.iter().copied())
                        .collect();
                    train.sort_unstable();
                    (train, parts[k].clone())
                })
                .collect::<Vec<_>>()
        }
        TuneMode::Validation { fraction } => {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(UpliftError::param("validation fraction must be in (0, 1)"));
            }
            let mut parts = stratified_split_indices(data, &[1.0 - fraction, fraction], &mut rng)?;
            let held = parts.pop().unwrap_or_default();
            let train = parts.pop().unwrap_or_default();
            vec![(train, held)]
        }
    };
    let k = data.n_treatments();
    for (f, (train, held)) in pairs.iter().enumerate() {
        for rows in [train, held] {
            let mut seen = vec![false; k];
            rows.iter().for_each(|&i| seen[data.treatment()[i]] = true);
            if let Some(t) = seen.iter().position(|s| !s) {
                return Err(UpliftError::param(format!(
                    "fold {f} is too small: treatment {t} has no rows"
                )));
            }
        }
    }
    Ok(pairs)
}

/// Scores every grid value with `fit` on each partition. Held-out estimates
/// use `probs`, or the treatment frequencies of the whole dataset.
pub fn tune_with<F>(
    data: &Dataset,
    grid: &[usize],
    mode: TuneMode,
    seed: u64,
    probs: Option<&TreatmentProbs>,
    fit: F,
) -> Result<TuneReport>
where
    F: Fn(&Dataset, usize) -> Result<UpliftModel>,
{
    if grid.is_empty() {
        return Err(UpliftError::param("tuning grid is empty"));
    }
    let probs = match probs {
        Some(p) => p.clone(),
        None => empirical_treatment_probs(data)?,
    };
    let partitions = tuning_partitions(data, mode, seed)?;
    let mut scores = vec![Vec::with_capacity(partitions.len()); grid.len()];
    for (train_rows, held_rows) in &partitions {
        let train = data.subset(train_rows);
        let held = data.subset(held_rows);
        for (row, &value) in scores.iter_mut().zip(grid) {
            let model = fit(&train, value)?;
            let report = expected_response(&held, |x| model.predict_unchecked(x), &probs, 0.95)?;
            row.push(report.estimate);
        }
    }
    Ok(TuneReport::from_scores(grid.to_vec(), scores))
}

/// Tunes `min_split` of a CTS forest; all other parameters come from `base`.
pub fn tune_cts(
    data: &Dataset,
    base: &ForestParams,
    grid: &[usize],
    mode: TuneMode,
    seed: u64,
    probs: Option<&TreatmentProbs>,
) -> Result<TuneReport> {
    tune_with(data, grid, mode, seed, probs, |train, min_split| {
        let mut params = base.clone();
        params.tree.min_split = min_split;
        params.bootstrap = params.bootstrap.map(|b| b.min(train.len()));
        Ok(train_cts(train, &params)?.into())
    })
}

/// Tunes `min_samples_leaf` of the separate-model baseline.
pub fn tune_sma(
    data: &Dataset,
    base: &SmaParams,
    grid: &[usize],
    mode: TuneMode,
    seed: u64,
    probs: Option<&TreatmentProbs>,
) -> Result<TuneReport> {
    tune_with(data, grid, mode, seed, probs, |train, leaf| {
        let mut params = base.clone();
        params.min_samples_leaf = leaf;
        Ok(train_sma(train, &params)?.into())
    })
}
