//! Synthetic multi-treatment benchmark with a known conditional mean.
//!
//! Features are uniform on `[0, 10]^d`. Under treatment `t` (stored label
//! `t`, acting on coordinate `t`) the response is
//!
//! ```text
//! y = f(x) + U[0, alpha · x_t] + N(0, sigma²)
//! f(x) = Σ_i a_i · exp(−Σ_j b_ij · |x_j − c_ij|)
//! ```
//!
//! so `E[Y | x, t] = f(x) + alpha · x_t / 2` and the optimal policy picks the
//! largest of the first `K` coordinates.

use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Column, ColumnRole, Dataset, FeatureColumn, Schema, TreatmentProbs};
use crate::error::{Result, UpliftError};
use crate::evaluation::{argmax_lowest, summarize};
use crate::rng::stream_rng;

pub const FEATURE_MAX: f64 = 10.0;
pub const TREATMENT_COLUMN: &str = "treatment";
pub const RESPONSE_COLUMN: &str = "response";
const SYNTHETIC_FORMAT_VERSION: u32 = 1;
const MC_SHARD: usize = 8192;

/// Distributions the model constants are drawn from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub d: usize,
    pub m: usize,
    pub n_treatments: usize,
    pub alpha: f64,
    pub sigma: f64,
    pub a_range: (f64, f64),
    pub b_range: (f64, f64),
    /// `a` is rescaled so that the Monte Carlo mean of `|f(X)|` equals this.
    pub target_mean_abs: f64,
    pub calibration_samples: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            d: 50,
            m: 50,
            n_treatments: 4,
            alpha: 0.4,
            sigma: 0.8,
            a_range: (-15.0, 15.0),
            b_range: (0.005, 0.03),
            target_mean_abs: 8.0,
            calibration_samples: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticModel {
    pub d: usize,
    pub m: usize,
    pub a: Vec<f64>,
    /// `m × d`, strictly positive.
    pub b: Vec<Vec<f64>>,
    /// `m × d`, in `[0, 10]`.
    pub c: Vec<Vec<f64>>,
    pub alpha: f64,
    pub sigma: f64,
    pub n_treatments: usize,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    model: SyntheticModel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

impl MonteCarloEstimate {
    /// Mean and standard error of the samples; one sample has standard error 0.
    pub fn from_samples(values: &[f64]) -> Self {
        let (estimate, std_error, _, _) = summarize(values, 0.95);
        MonteCarloEstimate { estimate, std_error }
    }
}

/// Draws a model with the default configuration.
pub fn sample_model(seed: u64) -> SyntheticModel {
    SyntheticModel::sample_with(seed, &SyntheticConfig::default())
        .expect("default synthetic configuration is valid")
}

impl SyntheticModel {
    pub fn sample_with(seed: u64, config: &SyntheticConfig) -> Result<Self> {
        if config.n_treatments < 2 || config.n_treatments > config.d {
            return Err(UpliftError::param("need 2 <= treatments <= d"));
        }
        if !(config.b_range.0 > 0.0 && config.b_range.0 <= config.b_range.1) {
            return Err(UpliftError::param("b range must be positive"));
        }
        if config.alpha < 0.0 || config.sigma < 0.0 || config.m == 0 {
            return Err(UpliftError::param("alpha and sigma must be non-negative, m positive"));
        }
        let mut rng = stream_rng(seed, 0);
        let (d, m) = (config.d, config.m);
        let c: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..d).map(|_| rng.random_range(0.0..=FEATURE_MAX)).collect())
            .collect();
        let b: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                (0..d)
                    .map(|_| rng.random_range(config.b_range.0..=config.b_range.1))
                    .collect()
            })
            .collect();
        let a: Vec<f64> = (0..m)
            .map(|_| rng.random_range(config.a_range.0..=config.a_range.1))
            .collect();
        let mut model = SyntheticModel {
            d,
            m,
            a,
            b,
            c,
            alpha: config.alpha,
            sigma: config.sigma,
            n_treatments: config.n_treatments,
        };
        if config.calibration_samples > 0 && config.target_mean_abs > 0.0 {
            let mean_abs = model.mean_abs_f(config.calibration_samples, seed);
            let scale = config.target_mean_abs / mean_abs;
            model.a.iter_mut().for_each(|a| *a *= scale);
        }
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let shape_ok = self.a.len() == self.m
            && self.b.len() == self.m
            && self.c.len() == self.m
            && self.b.iter().chain(&self.c).all(|row| row.len() == self.d);
        if !shape_ok {
            return Err(UpliftError::ModelFormat("constant arrays have wrong shape".into()));
        }
        if self.b.iter().flatten().any(|&b| !(b > 0.0)) {
            return Err(UpliftError::ModelFormat("b entries must be positive".into()));
        }
        if self.alpha < 0.0 || self.sigma < 0.0 {
            return Err(UpliftError::ModelFormat("alpha and sigma must be non-negative".into()));
        }
        if self.n_treatments < 2 || self.n_treatments > self.d {
            return Err(UpliftError::ModelFormat("need 2 <= treatments <= d".into()));
        }
        Ok(())
    }

    /// Mean of `|f(X)|` over `n` uniform draws from stream 1 of `seed`.
    pub fn mean_abs_f(&self, n: usize, seed: u64) -> f64 {
        let mut rng = stream_rng(seed, 1);
        let mut x = vec![0.0; self.d];
        let mut total = 0.0;
        for _ in 0..n {
            self.draw_x(&mut rng, &mut x);
            total += self.f(&x).abs();
        }
        total / n as f64
    }

    /// Treatment-independent main effect.
    pub fn f(&self, x: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(self.b.iter().zip(&self.c))
            .map(|(a, (b, c))| {
                let e: f64 = x
                    .iter()
                    .zip(b.iter().zip(c))
                    .map(|(xj, (bj, cj))| bj * (xj - cj).abs())
                    .sum();
                a * (-e).exp()
            })
            .sum()
    }

    pub fn draw_x<R: Rng + ?Sized>(&self, rng: &mut R, x: &mut Vec<f64>) {
        x.clear();
        x.extend((0..self.d).map(|_| rng.random_range(0.0..=FEATURE_MAX)));
    }

    /// `E[Y | X = x, T = t]` for stored label `t`.
    pub fn oracle_mean(&self, x: &[f64], t: usize) -> Result<f64> {
        if t >= self.n_treatments {
            return Err(UpliftError::param(format!(
                "treatment {t} outside 0..{}",
                self.n_treatments
            )));
        }
        Ok(self.f(x) + self.alpha * x[t] / 2.0)
    }

    /// Point-wise optimal treatment.
    pub fn oracle_policy(&self, x: &[f64]) -> usize {
        argmax_lowest(&x[..self.n_treatments])
    }

    fn draw_response<R: Rng + ?Sized>(&self, rng: &mut R, x: &[f64], t: usize) -> f64 {
        let u: f64 = rng.random();
        let eps: f64 = rng.sample(StandardNormal);
        self.f(x) + u * self.alpha * x[t] + self.sigma * eps
    }

    pub fn schema(&self) -> Schema {
        let mut columns: Vec<Column> = (1..=self.d)
            .map(|j| Column::new(format!("x{j}"), ColumnRole::NumericFeature))
            .collect();
        columns.push(Column::new(TREATMENT_COLUMN, ColumnRole::Treatment));
        columns.push(Column::new(RESPONSE_COLUMN, ColumnRole::Response));
        Schema::new(columns).expect("synthetic schema is valid")
    }

    fn build(&self, rows: Vec<(Vec<f64>, usize, f64)>) -> Result<Dataset> {
        let mut features = vec![Vec::with_capacity(rows.len()); self.d];
        let mut treatment = Vec::with_capacity(rows.len());
        let mut response = Vec::with_capacity(rows.len());
        for (x, t, y) in rows {
            for (col, v) in features.iter_mut().zip(x) {
                col.push(v);
            }
            treatment.push(t);
            response.push(y);
        }
        Dataset::with_treatment_count(
            self.schema(),
            features.into_iter().map(FeatureColumn::numeric).collect(),
            treatment,
            response,
            self.n_treatments,
        )
    }

    /// `n_per_treatment` rows for each treatment, grouped by label.
    pub fn generate<R: Rng + ?Sized>(&self, n_per_treatment: usize, rng: &mut R) -> Result<Dataset> {
        if n_per_treatment == 0 {
            return Err(UpliftError::param("n_per_treatment must be at least 1"));
        }
        let mut rows = Vec::with_capacity(n_per_treatment * self.n_treatments);
        let mut x = Vec::with_capacity(self.d);
        for t in 0..self.n_treatments {
            for _ in 0..n_per_treatment {
                self.draw_x(rng, &mut x);
                let y = self.draw_response(rng, &x, t);
                rows.push((x.clone(), t, y));
            }
        }
        self.build(rows)
    }

    /// `n` rows with treatments assigned independently with probabilities `probs`.
    pub fn generate_randomized<R: Rng + ?Sized>(
        &self,
        n: usize,
        probs: &TreatmentProbs,
        rng: &mut R,
    ) -> Result<Dataset> {
        if probs.len() != self.n_treatments {
            return Err(UpliftError::param("one probability per treatment required"));
        }
        if n == 0 {
            return Err(UpliftError::param("n must be at least 1"));
        }
        let assign = WeightedIndex::new(probs.as_slice())
            .map_err(|e| UpliftError::param(e.to_string()))?;
        let mut rows = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(self.d);
        for _ in 0..n {
            let t = assign.sample(rng);
            self.draw_x(rng, &mut x);
            let y = self.draw_response(rng, &x, t);
            rows.push((x.clone(), t, y));
        }
        self.build(rows)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile {
            format_version: SYNTHETIC_FORMAT_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| UpliftError::ModelFormat(e.to_string()))?;
        if file.format_version != SYNTHETIC_FORMAT_VERSION {
            return Err(UpliftError::VersionMismatch {
                found: file.format_version.to_string(),
                supported: SYNTHETIC_FORMAT_VERSION,
            });
        }
        file.model.validate()?;
        Ok(file.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| UpliftError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| UpliftError::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Oracle means of several policies on `n` common feature draws. Draws are
/// sharded into fixed-size blocks, block `k` using stream `k` of `seed`, so
/// results are independent of the worker count. Returns one sample vector
/// per policy.
pub fn monte_carlo_samples<P>(model: &SyntheticModel, policies: &[P], n: usize, seed: u64) -> Vec<Vec<f64>>
where
    P: Fn(&[f64]) -> usize + Sync,
{
    let shards = n.div_ceil(MC_SHARD);
    let blocks: Vec<Vec<Vec<f64>>> = (0..shards)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let len = MC_SHARD.min(n - k * MC_SHARD);
            let mut out = vec![Vec::with_capacity(len); policies.len()];
            let mut x = Vec::with_capacity(model.d);
            for _ in 0..len {
                model.draw_x(&mut rng, &mut x);
                let f = model.f(&x);
                for (values, policy) in out.iter_mut().zip(policies) {
                    let t = policy(&x);
                    assert!(t < model.n_treatments, "policy returned treatment {t}");
                    values.push(f + model.alpha * x[t] / 2.0);
                }
            }
            out
        })
        .collect();
    let mut samples = vec![Vec::with_capacity(n); policies.len()];
    for block in blocks {
        for (all, part) in samples.iter_mut().zip(block) {
            all.extend(part);
        }
    }
    samples
}

/// Monte Carlo value `E[Y | T = policy(X)]` using the exact conditional mean.
pub fn monte_carlo_value<P>(model: &SyntheticModel, policy: P, n: usize, seed: u64) -> Result<MonteCarloEstimate>
where
    P: Fn(&[f64]) -> usize + Sync,
{
    if n == 0 {
        return Err(UpliftError::param("n must be at least 1"));
    }
    let samples = monte_carlo_samples(model, &[policy], n, seed);
    Ok(MonteCarloEstimate::from_samples(&samples[0]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SyntheticConfig {
        SyntheticConfig {
            d: 6,
            m: 5,
            calibration_samples: 20_000,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn defaults_and_calibration() {
        let model = sample_model(3);
        assert_eq!(model.alpha, 0.4);
        assert_eq!(model.sigma, 0.8);
        assert_eq!((model.d, model.m, model.n_treatments), (50, 50, 4));
        let check = model.mean_abs_f(100_000, 99);
        assert!((check - 8.0).abs() <= 0.1, "E|f| = {check}");
        assert!(model.b.iter().flatten().all(|&b| b > 0.0));
        assert!(model.c.iter().flatten().all(|&c| (0.0..=10.0).contains(&c)));
    }

    #[test]
    fn generate_counts_and_noise_free_rows() {
        let config = SyntheticConfig {
            alpha: 0.0,
            sigma: 0.0,
            ..small_config()
        };
        let model = SyntheticModel::sample_with(1, &config).unwrap();
        let data = model.generate(25, &mut stream_rng(2, 0)).unwrap();
        assert_eq!(data.len(), 100);
        assert_eq!(data.treatment_counts(), vec![25; 4]);
        for i in 0..data.len() {
            assert_eq!(data.response()[i], model.f(&data.row(i)));
        }
    }

    #[test]
    fn oracle_mean_cases() {
        let model = SyntheticModel::sample_with(1, &small_config()).unwrap();
        let mut x = vec![3.0; 6];
        x[1] = 0.0;
        assert_eq!(model.oracle_mean(&x, 1).unwrap(), model.f(&x));
        x[2] = 10.0;
        assert!((model.oracle_mean(&x, 2).unwrap() - (model.f(&x) + 2.0)).abs() < 1e-12);
        assert!(model.oracle_mean(&x, 4).is_err());
        assert_eq!(model.oracle_policy(&[1.0, 9.0, 3.0, 9.0, 10.0, 0.0]), 1);
    }

    #[test]
    fn single_draw_has_zero_std_error() {
        let model = SyntheticModel::sample_with(1, &small_config()).unwrap();
        let mc = monte_carlo_value(&model, |_| 0, 1, 5).unwrap();
        assert_eq!(mc.std_error, 0.0);
        let mut rng = stream_rng(5, 0);
        let mut x = Vec::new();
        model.draw_x(&mut rng, &mut x);
        assert_eq!(mc.estimate, model.oracle_mean(&x, 0).unwrap());
        assert!(monte_carlo_value(&model, |_| 0, 0, 5).is_err());
    }

    #[test]
    fn constants_round_trip() {
        let model = SyntheticModel::sample_with(8, &small_config()).unwrap();
        let back = SyntheticModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(model, back);
        let bumped = model.to_json().unwrap().replace("\"format_version\": 1", "\"format_version\": 2");
        assert!(matches!(
            SyntheticModel::from_json(&bumped),
            Err(UpliftError::VersionMismatch { .. })
        ));
    }

    #[test]
    fn randomized_assignment_follows_probs() {
        let model = SyntheticModel::sample_with(1, &small_config()).unwrap();
        let probs = TreatmentProbs::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        let data = model.generate_randomized(20_000, &probs, &mut stream_rng(4, 0)).unwrap();
        let counts = data.treatment_counts();
        for (c, p) in counts.iter().zip(probs.as_slice()) {
            let frac = *c as f64 / 20_000.0;
            assert!((frac - p).abs() < 0.015, "{frac} vs {p}");
        }
    }
}
