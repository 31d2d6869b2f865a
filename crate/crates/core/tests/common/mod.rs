#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uplift_core::dataset::{Dataset, FeatureColumn, FeatureKind, Schema};
use uplift_core::split::Split;
use uplift_core::TreeParams;

/// Small random split-search instance. Responses, features and parent
/// estimates are small multiples of 1/4, so every sum is exact and the
/// sweep's `total - left` equals a direct sum.
pub struct SplitCase {
    pub data: Dataset,
    pub rows: Vec<usize>,
    pub estimates: Vec<f64>,
    pub features: Vec<usize>,
    pub params: TreeParams,
}

fn quarter(rng: &mut impl Rng, lo: i32, hi: i32) -> f64 {
    f64::from(rng.random_range(lo * 4..=hi * 4)) / 4.0
}

pub fn random_split_case(seed: u64) -> SplitCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=200usize);
    let d = rng.random_range(1..=3usize);
    let k = rng.random_range(2..=4usize).min(n);
    let mut spec = Vec::new();
    let mut features = Vec::new();
    for j in 0..d {
        if rng.random_bool(0.4) {
            let levels = rng.random_range(1..=5u32);
            let codes: Vec<u32> = (0..n).map(|_| rng.random_range(0..levels)).collect();
            let dict = (0..levels).map(|c| format!("c{c}")).collect();
            spec.push(format!("f{j}:categorical"));
            features.push(FeatureColumn::categorical(codes, dict));
        } else {
            let spread = rng.random_range(1..=30);
            spec.push(format!("f{j}:numeric"));
            features.push(FeatureColumn::numeric((0..n).map(|_| quarter(&mut rng, 0, spread)).collect()));
        }
    }
    spec.push("t:treatment".into());
    spec.push("y:response".into());
    let treatment: Vec<usize> = (0..n)
        .map(|i| if i < k { i } else { rng.random_range(0..k) })
        .collect();
    let scale = rng.random_range(1..=20);
    let response = (0..n).map(|_| quarter(&mut rng, -scale, scale)).collect();
    let schema = Schema::parse_spec(&spec.join(",")).unwrap();
    let data = Dataset::new(schema, features, treatment, response).unwrap();

    let rows: Vec<usize> = if rng.random_bool(0.5) {
        (0..n).collect()
    } else {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    };
    let estimates = (0..k).map(|_| quarter(&mut rng, -10, 10)).collect();
    let mut params = TreeParams::new(rng.random_range(1..=20), rng.random_range(0..=5), 1);
    params.mtry = d;
    let mut features: Vec<usize> = (0..d).filter(|_| rng.random_bool(0.7)).collect();
    if features.is_empty() {
        features.push(rng.random_range(0..d));
    }
    SplitCase {
        data,
        rows,
        estimates,
        features,
        params,
    }
}

/// Gain of `split` computed from scratch: direct per-side sums, the
/// shrunken child estimate (or the parent value below `min_split`), and the
/// probability-weighted improvement of the best treatment.
pub fn oracle_gain(case: &SplitCase, split: &Split) -> Option<f64> {
    let k = case.estimates.len();
    let col = case.data.feature(split.feature);
    let mut count = [vec![0usize; k], vec![0usize; k]];
    let mut sum = [vec![0.0f64; k], vec![0.0f64; k]];
    for &i in &case.rows {
        let side = usize::from(!split.goes_left_value(col[i]));
        let t = case.data.treatment()[i];
        count[side][t] += 1;
        sum[side][t] += case.data.response()[i];
    }
    let n_left: usize = count[0].iter().sum();
    let n_right: usize = count[1].iter().sum();
    if n_left == 0 || n_right == 0 {
        return None;
    }
    let reg = case.params.n_reg as f64;
    let side_max = |s: usize| {
        (0..k)
            .map(|t| {
                if count[s][t] < case.params.min_split {
                    case.estimates[t]
                } else {
                    (sum[s][t] + case.estimates[t] * reg) / (count[s][t] as f64 + reg)
                }
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let parent = case.estimates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let p_left = n_left as f64 / (n_left + n_right) as f64;
    let p_right = 1.0 - p_left;
    Some(p_left * (side_max(0) - parent) + p_right * (side_max(1) - parent))
}

/// Every candidate split of the case's features, in (feature, threshold or
/// code) order.
pub fn enumerate_candidates(case: &SplitCase) -> Vec<Split> {
    let mut features = case.features.clone();
    features.sort_unstable();
    features.dedup();
    let kinds = case.data.feature_kinds();
    let mut out = Vec::new();
    for f in features {
        let col = case.data.feature(f);
        let mut values: Vec<f64> = case.rows.iter().map(|&i| col[i]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        match kinds[f] {
            FeatureKind::Numeric => {
                for w in values.windows(2) {
                    out.push(Split::numeric(f, (w[0] + w[1]) / 2.0));
                }
            }
            FeatureKind::Categorical => {
                if values.len() > 1 {
                    out.extend(values.iter().map(|&v| Split::categorical(f, v as u32)));
                }
            }
        }
    }
    out
}

/// Exhaustive best split: strictly largest non-negative gain, first in
/// enumeration order on ties.
pub fn oracle_best_split(case: &SplitCase) -> Option<(Split, f64)> {
    let mut best: Option<(Split, f64)> = None;
    for split in enumerate_candidates(case) {
        let Some(gain) = oracle_gain(case, &split) else {
            continue;
        };
        if gain >= 0.0 && best.is_none_or(|(_, g)| gain > g) {
            best = Some((split, gain));
        }
    }
    best
}
