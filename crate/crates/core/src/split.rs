//! Split rules, candidate enumeration and the presorted row index shared by
//! the uplift trees and the regression-forest baseline.
//!
//! Candidates for a numeric feature are the midpoints between consecutive
//! distinct in-node values (left side: `value <= threshold`). Candidates for a
//! categorical feature are one-vs-rest equality tests, one per in-node code
//! (left side: `code == c`). Codes never seen in training therefore route right.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureKind};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitRule {
    NumericThreshold { threshold: f64 },
    CategoricalEquals { code: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    #[serde(flatten)]
    pub rule: SplitRule,
}

impl Split {
    pub fn numeric(feature: usize, threshold: f64) -> Self {
        Split {
            feature,
            rule: SplitRule::NumericThreshold { threshold },
        }
    }

    pub fn categorical(feature: usize, code: u32) -> Self {
        Split {
            feature,
            rule: SplitRule::CategoricalEquals { code },
        }
    }

    #[inline]
    pub fn goes_left_value(&self, value: f64) -> bool {
        match self.rule {
            SplitRule::NumericThreshold { threshold } => value <= threshold,
            SplitRule::CategoricalEquals { code } => value == f64::from(code),
        }
    }

    #[inline]
    pub fn goes_left(&self, x: &[f64]) -> bool {
        self.goes_left_value(x[self.feature])
    }

    pub(crate) fn matches_kind(&self, kind: FeatureKind) -> bool {
        matches!(
            (self.rule, kind),
            (SplitRule::NumericThreshold { .. }, FeatureKind::Numeric)
                | (SplitRule::CategoricalEquals { .. }, FeatureKind::Categorical)
        )
    }
}

/// Midpoint of two consecutive distinct values `lo < hi`, guaranteed to
/// satisfy `lo <= m < hi` so routing by `value <= m` separates them.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let mut m = (lo + hi) / 2.0;
    if !m.is_finite() {
        m = lo / 2.0 + hi / 2.0;
    }
    if m >= hi {
        m = lo;
    }
    m
}

/// Row count and response sum of one treatment inside a node.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TreatmentStats {
    pub count: usize,
    pub sum: f64,
}

impl TreatmentStats {
    #[inline]
    pub fn add(&mut self, y: f64) {
        self.count += 1;
        self.sum += y;
    }

    #[inline]
    pub fn minus(self, other: TreatmentStats) -> TreatmentStats {
        TreatmentStats {
            count: self.count - other.count,
            sum: self.sum - other.sum,
        }
    }
}

/// Column-major copy of the rows a tree is grown on.
pub(crate) struct TrainingSample {
    pub columns: Vec<Vec<f64>>,
    pub kinds: Vec<FeatureKind>,
    pub treatment: Vec<usize>,
    pub response: Vec<f64>,
    pub n_treatments: usize,
}

impl TrainingSample {
    pub fn gather(data: &Dataset, rows: &[usize]) -> Self {
        TrainingSample {
            columns: (0..data.n_features())
                .map(|j| {
                    let col = data.feature(j);
                    rows.iter().map(|&i| col[i]).collect()
                })
                .collect(),
            kinds: data.feature_kinds(),
            treatment: rows.iter().map(|&i| data.treatment()[i]).collect(),
            response: rows.iter().map(|&i| data.response()[i]).collect(),
            n_treatments: data.n_treatments(),
        }
    }

    /// Single-arm sample for per-treatment regression: every row gets slot 0.
    pub fn gather_single_arm(data: &Dataset, rows: &[usize]) -> Self {
        let mut sample = Self::gather(data, rows);
        sample.treatment.iter_mut().for_each(|t| *t = 0);
        sample.n_treatments = 1;
        sample
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn stats(&self, rows: &[u32]) -> Vec<TreatmentStats> {
        let mut stats = vec![TreatmentStats::default(); self.n_treatments];
        for &r in rows {
            let r = r as usize;
            stats[self.treatment[r]].add(self.response[r]);
        }
        stats
    }

    pub fn is_pure(&self, rows: &[u32]) -> bool {
        let Some(&first) = rows.first() else {
            return true;
        };
        let y0 = self.response[first as usize];
        rows.iter().all(|&r| self.response[r as usize] == y0)
    }
}

/// Per-feature row orderings. A node owns the same range `lo..hi` in every
/// ordering; splitting a node stably partitions that range in all of them.
pub(crate) struct SortedIndex {
    order: Vec<Vec<u32>>,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
}

impl SortedIndex {
    pub fn new(sample: &TrainingSample) -> Self {
        let n = sample.len();
        let order = sample
            .columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        SortedIndex {
            order,
            goes_left: vec![false; n],
            scratch: Vec::with_capacity(n),
        }
    }

    pub fn rows(&self, lo: usize, hi: usize) -> &[u32] {
        &self.order[0][lo..hi]
    }

    pub fn sorted(&self, feature: usize, lo: usize, hi: usize) -> &[u32] {
        &self.order[feature][lo..hi]
    }

    /// Partitions `lo..hi` by `split`; returns the start of the right child.
    pub fn partition(&mut self, sample: &TrainingSample, split: &Split, lo: usize, hi: usize) -> usize {
        let col = &sample.columns[split.feature];
        let mut n_left = 0;
        for &r in &self.order[0][lo..hi] {
            let left = split.goes_left_value(col[r as usize]);
            self.goes_left[r as usize] = left;
            n_left += usize::from(left);
        }
        for ord in &mut self.order {
            self.scratch.clear();
            let mut write = lo;
            for i in lo..hi {
                let r = ord[i];
                if self.goes_left[r as usize] {
                    ord[write] = r;
                    write += 1;
                } else {
                    self.scratch.push(r);
                }
            }
            ord[write..hi].copy_from_slice(&self.scratch);
        }
        lo + n_left
    }
}

/// Enumerates every candidate split on `feature` for the node `lo..hi`,
/// calling `visit(split, left_stats, n_left)` in ascending threshold/code
/// order. `left_stats` are accumulated from the rows on the left side.
pub(crate) fn scan_feature<F>(
    sample: &TrainingSample,
    index: &SortedIndex,
    feature: usize,
    lo: usize,
    hi: usize,
    left: &mut Vec<TreatmentStats>,
    mut visit: F,
) where
    F: FnMut(Split, &[TreatmentStats], usize),
{
    let rows = index.sorted(feature, lo, hi);
    let n = rows.len();
    let col = &sample.columns[feature];
    left.clear();
    left.resize(sample.n_treatments, TreatmentStats::default());
    match sample.kinds[feature] {
        FeatureKind::Numeric => {
            for k in 0..n.saturating_sub(1) {
                let r = rows[k] as usize;
                left[sample.treatment[r]].add(sample.response[r]);
                let v = col[r];
                let next = col[rows[k + 1] as usize];
                if next > v {
                    visit(Split::numeric(feature, midpoint(v, next)), left, k + 1);
                }
            }
        }
        FeatureKind::Categorical => {
            let mut group = 0;
            for k in 0..n {
                let r = rows[k] as usize;
                left[sample.treatment[r]].add(sample.response[r]);
                group += 1;
                let code = col[r];
                let group_ends = k + 1 == n || col[rows[k + 1] as usize] != code;
                if group_ends {
                    if group < n {
                        visit(Split::categorical(feature, code as u32), left, group);
                    }
                    left.iter_mut().for_each(|s| *s = TreatmentStats::default());
                    group = 0;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureColumn, Schema};

    fn sample() -> TrainingSample {
        let data = Dataset::new(
            Schema::parse_spec("a:numeric,b:categorical,t:treatment,y:response").unwrap(),
            vec![
                FeatureColumn::numeric(vec![3.0, 1.0, 2.0, 2.0, 5.0]),
                FeatureColumn::categorical(vec![0, 1, 0, 2, 1], vec!["x".into(), "y".into(), "z".into()]),
            ],
            vec![0, 1, 0, 1, 0],
            vec![1.0, 2.0, 3.0, 4.0, 5.0],
        )
        .unwrap();
        TrainingSample::gather(&data, &[0, 1, 2, 3, 4])
    }

    #[test]
    fn numeric_candidates_are_midpoints_of_distinct_values() {
        let s = sample();
        let idx = SortedIndex::new(&s);
        let mut buf = Vec::new();
        let mut seen = Vec::new();
        scan_feature(&s, &idx, 0, 0, 5, &mut buf, |split, left, n_left| {
            seen.push((split, n_left, left.to_vec()));
        });
        let thresholds: Vec<f64> = seen
            .iter()
            .map(|(s, _, _)| match s.rule {
                SplitRule::NumericThreshold { threshold } => threshold,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(thresholds, vec![1.5, 2.5, 4.0]);
        assert_eq!(seen.iter().map(|s| s.1).collect::<Vec<_>>(), vec![1, 3, 4]);
        // left of 2.5: rows 1 (t1,y2), 2 (t0,y3), 3 (t1,y4)
        assert_eq!(seen[1].2[0], TreatmentStats { count: 1, sum: 3.0 });
        assert_eq!(seen[1].2[1], TreatmentStats { count: 2, sum: 6.0 });
    }

    #[test]
    fn categorical_candidates_are_one_vs_rest() {
        let s = sample();
        let idx = SortedIndex::new(&s);
        let mut buf = Vec::new();
        let mut seen = Vec::new();
        scan_feature(&s, &idx, 1, 0, 5, &mut buf, |split, left, n_left| {
            seen.push((split, n_left, left.to_vec()));
        });
        assert_eq!(seen.len(), 3);
        assert_eq!(seen[0].0, Split::categorical(1, 0));
        assert_eq!(seen[0].1, 2);
        assert_eq!(seen[2].0, Split::categorical(1, 2));
        assert_eq!(seen[2].2[1], TreatmentStats { count: 1, sum: 4.0 });
    }

    #[test]
    fn partition_keeps_orderings_sorted() {
        let s = sample();
        let mut idx = SortedIndex::new(&s);
        let mid = idx.partition(&s, &Split::numeric(0, 2.5), 0, 5);
        assert_eq!(mid, 3);
        assert_eq!(idx.sorted(0, 0, 3), &[1, 2, 3]);
        assert_eq!(idx.sorted(0, 3, 5), &[0, 4]);
        assert_eq!(idx.sorted(1, 0, 3), &[2, 1, 3]);
        assert_eq!(idx.sorted(1, 3, 5), &[0, 4]);
    }

    #[test]
    fn midpoint_stays_below_upper_value() {
        assert_eq!(midpoint(1.0, 2.0), 1.5);
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let m = midpoint(a, b);
        assert!(a <= m && m < b);
        assert!(midpoint(f64::MAX / 1.5, f64::MAX).is_finite());
    }

    #[test]
    fn threshold_tie_routes_left() {
        let s = Split::numeric(0, 2.5);
        assert!(s.goes_left(&[2.5]));
        assert!(!s.goes_left(&[2.5000001]));
        let c = Split::categorical(0, 3);
        assert!(c.goes_left(&[3.0]));
        assert!(!c.goes_left(&[7.0]));
    }
}
