use uplift_core::rng::stream_rng;
use uplift_core::synthetic::{monte_carlo_samples, MonteCarloEstimate, SyntheticConfig};
use uplift_core::{monte_carlo_value, sample_model, SyntheticModel};

fn mean_se(v: &[f64]) -> (f64, f64) {
    let e = MonteCarloEstimate::from_samples(v);
    (e.estimate, e.std_error)
}

#[test]
fn treatments_are_exchangeable() {
    let model = sample_model(11);
    let data = model.generate(20_000, &mut stream_rng(11, 5)).unwrap();
    let groups: Vec<Vec<f64>> = data
        .rows_by_treatment()
        .iter()
        .map(|rows| rows.iter().map(|&i| data.response()[i]).collect())
        .collect();
    for s in 0..4 {
        for t in s + 1..4 {
            let (ms, ss) = mean_se(&groups[s]);
            let (mt, st) = mean_se(&groups[t]);
            let tol = 4.0 * (ss * ss + st * st).sqrt();
            assert!((ms - mt).abs() <= tol, "treatments {s},{t}: {ms} vs {mt} (tol {tol})");
        }
    }
}

#[test]
fn oracle_gap_matches_analytic_value() {
    // alpha * (E[max of 4 U(0,10)] - E[U(0,10)]) / 2 = 0.4 * (8 - 5) / 2.
    let model = sample_model(12);
    let oracle = |x: &[f64]| model.oracle_policy(x);
    let first = |_: &[f64]| 0usize;
    let policies: [&(dyn Fn(&[f64]) -> usize + Sync); 2] = [&oracle, &first];
    let s = monte_carlo_samples(&model, &policies, 200_000, 3);
    let diff: Vec<f64> = s[0].iter().zip(&s[1]).map(|(a, b)| a - b).collect();
    let (gap, se) = mean_se(&diff);
    assert!((gap - 0.6).abs() <= 3.0 * se, "gap {gap} se {se}");
}

#[test]
fn oracle_mean_is_unbiased_for_generated_rows() {
    let model = sample_model(13);
    let data = model.generate(10_000, &mut stream_rng(13, 1)).unwrap();
    let resid: Vec<f64> = (0..data.len())
        .map(|i| data.response()[i] - model.oracle_mean(&data.row(i), data.treatment()[i]).unwrap())
        .collect();
    let (m, se) = mean_se(&resid);
    assert!(m.abs() <= 4.0 * se, "{m} {se}");
}

#[test]
fn noiseless_responses_stay_in_uniform_band() {
    let config = SyntheticConfig {
        sigma: 0.0,
        ..SyntheticConfig::default()
    };
    let model = SyntheticModel::sample_with(14, &config).unwrap();
    let data = model.generate(500, &mut stream_rng(14, 1)).unwrap();
    for i in 0..data.len() {
        let x = data.row(i);
        let t = data.treatment()[i];
        let base = model.f(&x);
        let y = data.response()[i];
        assert!(y >= base - 1e-9 && y <= base + model.alpha * x[t] + 1e-9);
    }
    assert!(model.oracle_mean(&data.row(0), 4).is_err());
}

#[test]
fn monte_carlo_is_seeded() {
    let model = sample_model(15);
    let p = |x: &[f64]| usize::from(x[0] > 5.0);
    let a = monte_carlo_value(&model, p, 20_000, 1).unwrap();
    assert_eq!(a, monte_carlo_value(&model, p, 20_000, 1).unwrap());
    assert_ne!(a, monte_carlo_value(&model, p, 20_000, 2).unwrap());
}

#[test]
fn constants_round_trip_through_json() {
    let model = sample_model(16);
    let back = SyntheticModel::from_json(&model.to_json().unwrap()).unwrap();
    assert_eq!(back, model);
}
