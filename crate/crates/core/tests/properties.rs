mod common;

use std::collections::HashSet;

use proptest::prelude::*;
use uplift_core::dataset::{read_csv, stratified_bootstrap, stratified_split_indices, write_csv, FeatureColumn};
use uplift_core::evaluation::evaluate_assignments;
use uplift_core::rng::stream_rng;
use uplift_core::tree::{best_split, child_estimate, grow_tree_on_rows, NodeKind};
use uplift_core::{Dataset, PolicyPrediction, Schema, TreatmentProbs, TreeParams};

use common::{oracle_best_split, random_split_case};

fn mixed_dataset(seed: u64) -> Dataset {
    random_split_case(seed).data
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn best_split_matches_exhaustive_search(seed in any::<u64>()) {
        let case = random_split_case(seed);
        let fast = best_split(&case.data, &case.rows, &case.estimates, &case.features, &case.params);
        let slow = oracle_best_split(&case);
        prop_assert_eq!(fast.map(|(_, g)| g), slow.map(|(_, g)| g));
        prop_assert_eq!(fast.map(|(s, _)| s), slow.map(|(s, _)| s));
    }

    #[test]
    fn executed_splits_conserve_counts_and_inherit(seed in any::<u64>(), depth in prop::option::of(1usize..6)) {
        let case = random_split_case(seed);
        let mut params = case.params.clone();
        params.max_depth = depth;
        let root = uplift_core::tree::treatment_means(&case.data, &case.rows);
        prop_assume!(root.is_ok());
        let mut rng = stream_rng(seed, 3);
        let tree = grow_tree_on_rows(&case.data, &case.rows, &params, &root.unwrap(), &mut rng).unwrap();
        prop_assert_eq!(tree.nodes.len(), 2 * tree.n_leaves() - 1);
        if let Some(d) = depth {
            prop_assert!(tree.depth() <= d);
        }
        let total: usize = tree.root().counts.iter().sum();
        prop_assert_eq!(total, case.rows.len());
        for node in &tree.nodes {
            if let NodeKind::Internal { left, right, .. } = node.kind {
                let (l, r) = (&tree.nodes[left], &tree.nodes[right]);
                let n: usize = node.counts.iter().sum();
                let nl: usize = l.counts.iter().sum();
                let nr: usize = r.counts.iter().sum();
                prop_assert_eq!(n, nl + nr);
                prop_assert!(nl > 0 && nr > 0);
                for child in [l, r] {
                    for t in 0..node.counts.len() {
                        if child.counts[t] < params.min_split {
                            prop_assert_eq!(child.estimates[t], node.estimates[t]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn plain_mean_without_regularization(values in prop::collection::vec(-1000i32..1000, 1..60)) {
        let ys: Vec<f64> = values.iter().map(|&v| f64::from(v) / 8.0).collect();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        prop_assert_eq!(child_estimate(123.0, &ys, ys.len(), 0), mean);
        prop_assert_eq!(child_estimate(123.0, &ys, ys.len() + 1, 5), 123.0);
    }

    #[test]
    fn argmax_ignores_common_shift(values in prop::collection::vec(-50i32..50, 1..6), shift in -1000i32..1000) {
        let v: Vec<f64> = values.iter().map(|&x| f64::from(x)).collect();
        let shifted: Vec<f64> = v.iter().map(|x| x + f64::from(shift)).collect();
        prop_assert_eq!(
            PolicyPrediction::from_estimates(v).chosen,
            PolicyPrediction::from_estimates(shifted).chosen
        );
    }

    #[test]
    fn evaluation_scales_with_response(seed in any::<u64>(), power in -6i32..7) {
        let data = mixed_dataset(seed);
        let c = 2f64.powi(power);
        let k = data.n_treatments();
        let assign: Vec<usize> = (0..data.len()).map(|i| (i * 7 + 3) % k).collect();
        let probs = TreatmentProbs::new(vec![1.0 / k as f64; k]).unwrap();
        let base = evaluate_assignments(&data, &assign, &probs, 0.9).unwrap();
        let scaled = evaluate_assignments(&data.with_scaled_response(c), &assign, &probs, 0.9).unwrap();
        prop_assert_eq!(scaled.estimate, base.estimate * c);
        prop_assert_eq!(scaled.std_error, base.std_error * c);
        prop_assert_eq!(scaled.ci_low, base.ci_low * c);
        prop_assert_eq!(scaled.ci_high, base.ci_high * c);
    }

    #[test]
    fn csv_round_trip(seed in any::<u64>()) {
        let data = mixed_dataset(seed);
        let mut buf = Vec::new();
        write_csv(&data, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), data.schema(), &data.dictionaries(), None).unwrap();
        prop_assert_eq!(back.treatment(), data.treatment());
        prop_assert_eq!(back.response(), data.response());
        for j in 0..data.n_features() {
            prop_assert_eq!(back.feature(j), data.feature(j));
        }
    }

    #[test]
    fn bootstrap_rows_are_input_copies(seed in any::<u64>(), frac in 0.05f64..1.0) {
        let data = mixed_dataset(seed);
        let b = ((data.len() as f64 * frac).ceil() as usize).max(1);
        let boot = stratified_bootstrap(&data, b, &mut stream_rng(seed, 9)).unwrap();
        prop_assert_eq!(boot.len(), b);
        let key = |d: &Dataset, i: usize| {
            let mut k: Vec<u64> = d.row(i).iter().map(|v| v.to_bits()).collect();
            k.push(d.treatment()[i] as u64);
            k.push(d.response()[i].to_bits());
            k
        };
        let originals: HashSet<Vec<u64>> = (0..data.len()).map(|i| key(&data, i)).collect();
        for i in 0..boot.len() {
            prop_assert!(originals.contains(&key(&boot, i)));
        }
    }

    #[test]
    fn split_parts_partition_rows(seed in any::<u64>(), a in 1u32..10, b in 1u32..10, c in 1u32..10) {
        let data = mixed_dataset(seed);
        let s = f64::from(a + b + c);
        let fractions = [f64::from(a) / s, f64::from(b) / s, f64::from(c) / s];
        let parts = stratified_split_indices(&data, &fractions, &mut stream_rng(seed, 1)).unwrap();
        let mut all: Vec<usize> = parts.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..data.len()).collect::<Vec<_>>());
    }
}

#[test]
fn inheriting_split_keeps_parent_estimates() {
    // 10 rows per treatment and min_split 10: the root may split, every child
    // falls below the threshold and inherits, so every split has zero gain.
    let n = 20;
    let x: Vec<f64> = (0..n).map(|i| (i % 10) as f64).collect();
    let t: Vec<usize> = (0..n).map(|i| i / 10).collect();
    let y: Vec<f64> = (0..n).map(|i| ((i * 5) % 7) as f64).collect();
    let data = Dataset::new(
        Schema::parse_spec("x:numeric,t:treatment,y:response").unwrap(),
        vec![FeatureColumn::numeric(x)],
        t,
        y,
    )
    .unwrap();
    let rows: Vec<usize> = (0..n).collect();
    let root = uplift_core::tree::treatment_means(&data, &rows).unwrap();
    let params = TreeParams::new(10, 3, 1);
    let tree = grow_tree_on_rows(&data, &rows, &params, &root, &mut stream_rng(0, 0)).unwrap();
    assert!(tree.nodes.len() > 1);
    let (_, gain) = best_split(&data, &rows, &root, &[0], &params).unwrap();
    assert_eq!(gain, 0.0);
    for node in tree.nodes.iter().filter(|n| n.is_leaf()) {
        assert_eq!(node.estimates, root);
    }
}
