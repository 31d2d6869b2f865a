//! Synthetic benchmark: for every training size and replication, draw a
//! training set from a pinned model, fit each algorithm, and score the
//! fitted policies with the Monte Carlo oracle. All policies of a run share
//! the same Monte Carlo draws.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ensemble::{train_cts, ForestParams};
use crate::error::{Result, UpliftError};
use crate::model::{Algorithm, UpliftModel};
use crate::rng::stream_rng;
use crate::sma::{train_sma, SmaParams};
use crate::synthetic::{monte_carlo_samples, MonteCarloEstimate, SyntheticConfig, SyntheticModel};
use crate::tune::{default_grid_for, tune_cts, tune_sma, TuneMode};

const DATA_SALT: u64 = 0x9e37_79b9_7f4a_7c15;
const MC_SALT: u64 = 0xbf58_476d_1ce4_e5b9;
const FIT_SALT: u64 = 0x94d0_49bb_1331_11eb;

type Policy<'a> = Box<dyn Fn(&[f64]) -> usize + Sync + 'a>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTuning {
    pub mode: TuneMode,
    /// Trees per forest while tuning; `None` uses the final forest size.
    pub ntree: Option<usize>,
    /// `min_split` grid; `None` uses the default grid filtered by size.
    pub cts_grid: Option<Vec<usize>>,
    pub sma_grid: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub seed: u64,
    /// Training rows per treatment.
    pub sizes: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
    pub replications: usize,
    pub mc_samples: usize,
    pub synthetic: SyntheticConfig,
    pub cts: ForestParams,
    pub sma: SmaParams,
    /// Tuned once per size on replication 0 and reused for the others.
    pub tuning: Option<BenchmarkTuning>,
}

impl BenchmarkConfig {
    pub fn new(seed: u64, sizes: Vec<usize>, algorithms: Vec<Algorithm>, replications: usize) -> Self {
        let synthetic = SyntheticConfig::default();
        BenchmarkConfig {
            seed,
            sizes,
            algorithms,
            replications,
            mc_samples: 100_000,
            cts: ForestParams::defaults_for(synthetic.d),
            sma: SmaParams::defaults_for(synthetic.d),
            synthetic,
            tuning: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(UpliftError::param("sizes must be non-empty and positive"));
        }
        if self.replications == 0 || self.mc_samples == 0 {
            return Err(UpliftError::param("replications and mc_samples must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    /// `None` for reference policies, which do not depend on training data.
    pub size: Option<usize>,
    pub replication: Option<usize>,
    pub policy: String,
    /// Tuned `min_split` (CTS) or `min_samples_leaf` (SMA-RF).
    pub tuned_value: Option<usize>,
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkResult {
    pub model: SyntheticModel,
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkResult {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["size", "replication", "policy", "tuned_value", "estimate", "std_error"])?;
        let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                opt(r.size),
                opt(r.replication),
                r.policy.clone(),
                opt(r.tuned_value),
                r.estimate.to_string(),
                r.std_error.to_string(),
            ])?;
        }
        w.flush().map_err(|e| UpliftError::io("<benchmark output>", e))?;
        Ok(())
    }

    pub fn reference(&self, policy: &str) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.size.is_none() && r.policy == policy)
    }
}

/// Training set for one benchmark cell.
pub fn benchmark_data(model: &SyntheticModel, seed: u64, size: usize, replication: usize) -> Result<crate::Dataset> {
    let mut rng = stream_rng(seed ^ DATA_SALT, ((size as u64) << 32) | replication as u64);
    model.generate(size, &mut rng)
}

/// Seed of the Monte Carlo draws shared by every policy.
pub fn benchmark_mc_seed(seed: u64) -> u64 {
    seed ^ MC_SALT
}

fn fit_seed(seed: u64, size: usize, replication: usize) -> u64 {
    (seed ^ FIT_SALT).wrapping_add(((size as u64) << 20) ^ replication as u64)
}

fn estimate_all(model: &SyntheticModel, policies: &[Policy<'_>], n: usize, seed: u64) -> Vec<MonteCarloEstimate> {
    monte_carlo_samples(model, policies, n, seed)
        .iter()
        .map(|s| MonteCarloEstimate::from_samples(s))
        .collect()
}

fn tune_values(
    config: &BenchmarkConfig,
    tuning: &BenchmarkTuning,
    data: &crate::Dataset,
    size: usize,
) -> Result<(Option<usize>, Option<usize>)> {
    let seed = fit_seed(config.seed, size, usize::MAX);
    let mut cts_value = None;
    let mut sma_value = None;
    for alg in &config.algorithms {
        match alg {
            Algorithm::Cts => {
                let mut base = config.cts.clone();
                base.seed = seed;
                base.ntree = tuning.ntree.unwrap_or(base.ntree);
                let train_per_treatment = match tuning.mode {
                    TuneMode::CrossValidation { folds } => size - size.div_ceil(folds),
                    TuneMode::Validation { fraction } => size - (size as f64 * fraction).round() as usize,
                };
                let grid = tuning
                    .cts_grid
                    .clone()
                    .unwrap_or_else(|| default_grid_for(train_per_treatment));
                cts_value = Some(tune_cts(data, &base, &grid, tuning.mode, seed, None)?.best);
            }
            Algorithm::SmaRf => {
                let mut base = config.sma.clone();
                base.seed = seed;
                base.ntree = tuning.ntree.unwrap_or(base.ntree);
                sma_value = Some(tune_sma(data, &base, &tuning.sma_grid, tuning.mode, seed, None)?.best);
            }
        }
    }
    Ok((cts_value, sma_value))
}

/// Runs the benchmark. Rows: the oracle policy and every constant policy
/// first, then one row per (size, replication, algorithm).
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkResult> {
    config.validate()?;
    let model = SyntheticModel::sample_with(config.seed, &config.synthetic)?;
    let mc_seed = benchmark_mc_seed(config.seed);
    let k = model.n_treatments;

    let mut names = vec!["oracle".to_string()];
    names.extend((0..k).map(|t| format!("constant-{t}")));
    let references = {
        let mut policies: Vec<Policy<'_>> = vec![Box::new(|x: &[f64]| model.oracle_policy(x))];
        for t in 0..k {
            policies.push(Box::new(move |_: &[f64]| t));
        }
        estimate_all(&model, &policies, config.mc_samples, mc_seed)
    };
    let mut rows: Vec<BenchmarkRow> = names
        .into_iter()
        .zip(references)
        .map(|(policy, e)| BenchmarkRow {
            size: None,
            replication: None,
            policy,
            tuned_value: None,
            estimate: e.estimate,
            std_error: e.std_error,
        })
        .collect();

    for &size in &config.sizes {
        let mut tuned = (None, None);
        for rep in 0..config.replications {
            let data = benchmark_data(&model, config.seed, size, rep)?;
            if rep == 0 {
                if let Some(tuning) = &config.tuning {
                    tuned = tune_values(config, tuning, &data, size)?;
                }
            }
            let seed = fit_seed(config.seed, size, rep);
            let mut fitted: Vec<(UpliftModel, Option<usize>)> = Vec::new();
            for alg in &config.algorithms {
                match alg {
                    Algorithm::Cts => {
                        let mut p = config.cts.clone();
                        p.seed = seed;
                        if let Some(v) = tuned.0 {
                            p.tree.min_split = v;
                        }
                        fitted.push((train_cts(&data, &p)?.into(), Some(p.tree.min_split)));
                    }
                    Algorithm::SmaRf => {
                        let mut p = config.sma.clone();
                        p.seed = seed;
                        if let Some(v) = tuned.1 {
                            p.min_samples_leaf = v;
                        }
                        fitted.push((train_sma(&data, &p)?.into(), Some(p.min_samples_leaf)));
                    }
                }
            }
            let policies: Vec<Policy<'_>> = fitted
                .iter()
                .map(|(m, _)| Box::new(move |x: &[f64]| m.predict_unchecked(x).chosen) as Policy<'_>)
                .collect();
            let estimates = estimate_all(&model, &policies, config.mc_samples, mc_seed);
            for ((m, value), e) in fitted.iter().zip(estimates) {
                rows.push(BenchmarkRow {
                    size: Some(size),
                    replication: Some(rep),
                    policy: m.algorithm().to_string(),
                    tuned_value: *value,
                    estimate: e.estimate,
                    std_error: e.std_error,
                });
            }
        }
    }
    Ok(BenchmarkResult { model, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BenchmarkConfig {
        let mut c = BenchmarkConfig::new(5, vec![40], vec![Algorithm::Cts, Algorithm::SmaRf], 2);
        c.synthetic.d = 5;
        c.synthetic.m = 4;
        c.synthetic.calibration_samples = 5_000;
        c.mc_samples = 4_000;
        c.cts = ForestParams::defaults_for(5);
        c.cts.ntree = 4;
        c.cts.tree.min_split = 10;
        c.sma = SmaParams::defaults_for(5);
        c.sma.ntree = 4;
        c
    }

    #[test]
    fn rows_and_references() {
        let r = run_benchmark(&small()).unwrap();
        assert_eq!(r.rows.len(), 5 + 2 * 2);
        assert!(r.reference("oracle").is_some());
        for t in 0..4 {
            assert!(r.reference(&format!("constant-{t}")).is_some());
        }
        let oracle = r.reference("oracle").unwrap().estimate;
        for row in &r.rows {
            assert!(row.estimate <= oracle + 1e-9, "{row:?}");
        }
        let mut out = Vec::new();
        r.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("size,replication,policy,tuned_value,estimate,std_error\n"));
        assert_eq!(text.lines().count(), 10);
    }

    #[test]
    fn deterministic() {
        assert_eq!(run_benchmark(&small()).unwrap(), run_benchmark(&small()).unwrap());
    }

    #[test]
    fn tuned_values_are_reported() {
        let mut c = small();
        c.tuning = Some(BenchmarkTuning {
            mode: TuneMode::Validation { fraction: 0.5 },
            ntree: Some(2),
            cts_grid: Some(vec![5, 10]),
            sma_grid: vec![2, 4],
        });
        let r = run_benchmark(&c).unwrap();
        let cts: Vec<_> = r.rows.iter().filter(|row| row.policy == "cts").collect();
        assert!(cts.iter().all(|row| [5, 10].contains(&row.tuned_value.unwrap())));
        assert_eq!(cts[0].tuned_value, cts[1].tuned_value);
    }

    #[test]
    fn rejects_empty_sizes() {
        let mut c = small();
        c.sizes.clear();
        assert!(run_benchmark(&c).is_err());
    }
}
