//! Unbiased offline estimate of a treatment-assignment policy's expected
//! response from randomized-experiment data, and the modified uplift curve.
//!
//! For a row with logged treatment `t` and response `y`, the transformed
//! outcome is `z = y / p_t` when the policy picks `t` and `0` otherwise. The
//! sample mean of `z` is an unbiased estimate of `E[Y | T = h(X)]`; intervals
//! use the normal approximation on that mean.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::{Dataset, TreatmentProbs};
use crate::error::{Result, UpliftError};

/// Index of the largest entry; the lowest label wins exact ties.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (t, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = t;
        }
    }
    best
}

/// Predicted expected response under each treatment plus the chosen label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyPrediction {
    pub per_treatment: Vec<f64>,
    pub chosen: usize,
}

impl PolicyPrediction {
    pub fn from_estimates(per_treatment: Vec<f64>) -> Self {
        let chosen = argmax_lowest(&per_treatment);
        PolicyPrediction {
            per_treatment,
            chosen,
        }
    }

    /// A prediction that always picks `t` out of `n_treatments` with flat estimates.
    pub fn constant(t: usize, n_treatments: usize) -> Self {
        let mut per_treatment = vec![0.0; n_treatments];
        per_treatment[t] = 1.0;
        PolicyPrediction {
            per_treatment,
            chosen: t,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub estimate: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub conf_level: f64,
    pub n: usize,
    /// Per-treatment number of rows whose logged treatment equals the policy's choice.
    pub matched: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub fraction: f64,
    pub report: EvaluationReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpliftCurve {
    pub points: Vec<CurvePoint>,
}

impl UpliftCurve {
    /// CSV with columns `fraction,estimate,std_error,ci_low,ci_high`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["fraction", "estimate", "std_error", "ci_low", "ci_high"])?;
        for p in &self.points {
            let r = &p.report;
            wtr.write_record([
                p.fraction.to_string(),
                r.estimate.to_string(),
                r.std_error.to_string(),
                r.ci_low.to_string(),
                r.ci_high.to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| UpliftError::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Transformed outcome of one row.
pub fn z_value(y: f64, actual: usize, predicted: usize, probs: &TreatmentProbs) -> f64 {
    if predicted == actual {
        y / probs.get(actual)
    } else {
        0.0
    }
}

/// Two-sided standard-normal quantile for the given confidence level.
pub fn normal_quantile(conf_level: f64) -> f64 {
    Normal::standard().inverse_cdf((1.0 + conf_level) / 2.0)
}

fn check_conf_level(conf_level: f64) -> Result<()> {
    if !(conf_level > 0.0 && conf_level < 1.0) {
        return Err(UpliftError::param(format!(
            "confidence level {conf_level} outside (0, 1)"
        )));
    }
    Ok(())
}

/// Mean, standard error and normal interval of a sample. The standard error of
/// a single observation is reported as 0.
pub(crate) fn summarize(values: &[f64], conf_level: f64) -> (f64, f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std_error = if values.len() > 1 {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1.0)).sqrt() / n.sqrt()
    } else {
        0.0
    };
    let half = normal_quantile(conf_level) * std_error;
    (mean, std_error, mean - half, mean + half)
}

/// Evaluates a fixed per-row assignment.
pub fn evaluate_assignments(
    data: &Dataset,
    assignments: &[usize],
    probs: &TreatmentProbs,
    conf_level: f64,
) -> Result<EvaluationReport> {
    if data.is_empty() {
        return Err(UpliftError::EmptyDataset);
    }
    check_conf_level(conf_level)?;
    if assignments.len() != data.len() {
        return Err(UpliftError::param("one assignment per row required"));
    }
    if probs.len() != data.n_treatments() {
        return Err(UpliftError::param(format!(
            "{} probabilities given for {} treatments",
            probs.len(),
            data.n_treatments()
        )));
    }
    if let Some(&t) = assignments.iter().find(|&&t| t >= probs.len()) {
        return Err(UpliftError::param(format!(
            "policy assigns treatment {t} which has no positive probability"
        )));
    }
    let mut matched = vec![0; data.n_treatments()];
    let z: Vec<f64> = data
        .response()
        .iter()
        .zip(data.treatment())
        .zip(assignments)
        .map(|((&y, &t), &h)| {
            if h == t {
                matched[t] += 1;
            }
            z_value(y, t, h, probs)
        })
        .collect();
    let (estimate, std_error, ci_low, ci_high) = summarize(&z, conf_level);
    Ok(EvaluationReport {
        estimate,
        std_error,
        ci_low,
        ci_high,
        conf_level,
        n: data.len(),
        matched,
    })
}

/// Applies `policy` to every row of `data`.
pub fn predict_rows<P>(data: &Dataset, policy: P) -> Vec<PolicyPrediction>
where
    P: Fn(&[f64]) -> PolicyPrediction,
{
    let mut buf = Vec::with_capacity(data.n_features());
    (0..data.len())
        .map(|i| {
            data.row_into(i, &mut buf);
            policy(&buf)
        })
        .collect()
}

/// Unbiased estimate of the policy's expected response with a normal interval.
pub fn expected_response<P>(
    data: &Dataset,
    policy: P,
    probs: &TreatmentProbs,
    conf_level: f64,
) -> Result<EvaluationReport>
where
    P: Fn(&[f64]) -> PolicyPrediction,
{
    if data.is_empty() {
        return Err(UpliftError::EmptyDataset);
    }
    let predictions = predict_rows(data, policy);
    let chosen: Vec<usize> = predictions.iter().map(|p| p.chosen).collect();
    evaluate_assignments(data, &chosen, probs, conf_level)
}

/// `0, 0.05, …, 1`.
pub fn default_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.first() != Some(&0.0) || grid.last() != Some(&1.0) {
        return Err(UpliftError::param("curve grid must start at 0 and end at 1"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(UpliftError::param("curve grid must be strictly increasing"));
    }
    Ok(())
}

/// Number of rows treated at fraction `p`: `ceil(p * n)`, with a small slack
/// so that products like `0.15 * 20` that land a rounding error above an
/// integer do not take an extra row.
fn treated_count(p: f64, n: usize) -> usize {
    if p >= 1.0 {
        return n;
    }
    let raw = (p * n as f64 - 1e-9).ceil();
    (raw.max(0.0) as usize).min(n)
}

/// Modified uplift curve from precomputed per-row predictions.
pub fn uplift_curve_from_predictions(
    data: &Dataset,
    predictions: &[PolicyPrediction],
    probs: &TreatmentProbs,
    control: usize,
    grid: &[f64],
    conf_level: f64,
) -> Result<UpliftCurve> {
    check_grid(grid)?;
    if control >= data.n_treatments() {
        return Err(UpliftError::param(format!("control label {control} out of range")));
    }
    if predictions.len() != data.len() {
        return Err(UpliftError::param("one prediction per row required"));
    }
    let n = data.len();
    let delta: Vec<f64> = predictions
        .iter()
        .map(|p| p.per_treatment[p.chosen] - p.per_treatment[control])
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal gains keep row order
    order.sort_by(|&a, &b| delta[b].total_cmp(&delta[a]));

    let mut points = Vec::with_capacity(grid.len());
    let mut assignments = vec![control; n];
    for &p in grid {
        assignments.iter_mut().for_each(|a| *a = control);
        for &i in &order[..treated_count(p, n)] {
            assignments[i] = predictions[i].chosen;
        }
        let report = evaluate_assignments(data, &assignments, probs, conf_level)?;
        points.push(CurvePoint {
            fraction: p,
            report,
        });
    }
    Ok(UpliftCurve { points })
}

/// Expected response when only the top fraction of rows (ranked by predicted
/// gain of the chosen treatment over `control`) follow the policy.
pub fn modified_uplift_curve<P>(
    data: &Dataset,
    policy: P,
    probs: &TreatmentProbs,
    control: usize,
    grid: &[f64],
    conf_level: f64,
) -> Result<UpliftCurve>
where
    P: Fn(&[f64]) -> PolicyPrediction,
{
    if data.is_empty() {
        return Err(UpliftError::EmptyDataset);
    }
    let predictions = predict_rows(data, policy);
    uplift_curve_from_predictions(data, &predictions, probs, control, grid, conf_level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureColumn, Schema};

    fn four_rows() -> Dataset {
        Dataset::new(
            Schema::parse_spec("x:numeric,t:treatment,y:response").unwrap(),
            vec![FeatureColumn::numeric(vec![0.0, 1.0, 2.0, 3.0])],
            vec![0, 1, 0, 1],
            vec![2.0, 4.0, 6.0, 8.0],
        )
        .unwrap()
    }

    fn half() -> TreatmentProbs {
        TreatmentProbs::new(vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn z_value_cases() {
        let p = TreatmentProbs::new(vec![0.5, 0.25, 0.25]).unwrap();
        assert_eq!(z_value(1.0, 1, 1, &p), 4.0);
        assert_eq!(z_value(1.0, 1, 2, &p), 0.0);
        assert_eq!(z_value(0.0, 2, 2, &p), 0.0);
    }

    #[test]
    fn hand_enumerated_estimates() {
        let data = four_rows();
        let treat = expected_response(&data, |_| PolicyPrediction::constant(1, 2), &half(), 0.95)
            .unwrap();
        assert_eq!(treat.estimate, 6.0);
        assert_eq!(treat.matched, vec![0, 2]);
        let control = expected_response(&data, |_| PolicyPrediction::constant(0, 2), &half(), 0.95)
            .unwrap();
        assert_eq!(control.estimate, 4.0);
        // z = (4, 0, 12, 0): sample variance 96 / 3 = 32, se = sqrt(32) / 2
        let se = 32.0f64.sqrt() / 2.0;
        assert!((control.std_error - se).abs() < 1e-12);
        assert!(control.ci_low < 4.0 && control.ci_high > 4.0);
    }

    #[test]
    fn expected_response_errors() {
        let data = four_rows();
        let empty = data.subset(&[]);
        assert!(matches!(
            expected_response(&empty, |_| PolicyPrediction::constant(0, 2), &half(), 0.95),
            Err(UpliftError::EmptyDataset)
        ));
        assert!(expected_response(&data, |_| PolicyPrediction::constant(0, 2), &half(), 1.0).is_err());
        assert!(expected_response(&data, |_| PolicyPrediction::constant(2, 3), &half(), 0.95).is_err());
    }

    #[test]
    fn single_row_has_zero_std_error() {
        let data = four_rows().subset(&[1]);
        let r = evaluate_assignments(&data, &[1], &half(), 0.9).unwrap();
        assert_eq!(r.estimate, 8.0);
        assert_eq!(r.std_error, 0.0);
        assert_eq!((r.ci_low, r.ci_high), (8.0, 8.0));
    }

    #[test]
    fn normal_quantile_95() {
        assert!((normal_quantile(0.95) - 1.959963984540054).abs() < 1e-9);
    }

    #[test]
    fn argmax_tie_goes_to_lowest() {
        assert_eq!(argmax_lowest(&[2.0, 2.0, 1.0]), 0);
        assert_eq!(argmax_lowest(&[1.0, 3.0, 3.0]), 1);
    }

    #[test]
    fn curve_half_point_by_hand() {
        // per-row predictions: chosen treatment 1 everywhere; gains over control
        // 0.5, 3.0, 1.0, 2.0 → rows 1 and 3 treated at p = 0.5.
        let data = four_rows();
        let preds: Vec<PolicyPrediction> = [0.5, 3.0, 1.0, 2.0]
            .iter()
            .map(|g| PolicyPrediction::from_estimates(vec![0.0, *g]))
            .collect();
        let curve =
            uplift_curve_from_predictions(&data, &preds, &half(), 0, &[0.0, 0.5, 1.0], 0.95).unwrap();
        // p = 0.5: rows 0,2 control (t=0, y=2,6 → z=4,12), rows 1,3 treated (t=1, y=4,8 → z=8,16)
        assert_eq!(curve.points[1].report.estimate, (4.0 + 8.0 + 12.0 + 16.0) / 4.0);
        assert_eq!(curve.points[0].report.estimate, 4.0);
        assert_eq!(curve.points[2].report.estimate, 6.0);
    }

    #[test]
    fn curve_grid_validation() {
        let data = four_rows();
        let pol = |_: &[f64]| PolicyPrediction::constant(1, 2);
        assert!(modified_uplift_curve(&data, pol, &half(), 0, &[0.1, 1.0], 0.95).is_err());
        assert!(modified_uplift_curve(&data, pol, &half(), 0, &[0.0, 0.9], 0.95).is_err());
        assert!(modified_uplift_curve(&data, pol, &half(), 0, &[0.0, 0.6, 0.5, 1.0], 0.95).is_err());
        assert!(modified_uplift_curve(&data, pol, &half(), 2, &[0.0, 1.0], 0.95).is_err());
    }

    #[test]
    fn treated_count_rounding() {
        assert_eq!(treated_count(0.0, 20), 0);
        assert_eq!(treated_count(0.15, 20), 3);
        assert_eq!(treated_count(0.5, 3), 2);
        assert_eq!(treated_count(1.0, 7), 7);
        for i in 0..=20 {
            assert_eq!(treated_count(i as f64 / 20.0, 100), i * 5);
        }
    }
}
