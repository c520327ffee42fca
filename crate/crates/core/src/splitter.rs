//! Candidate split search and the min-heap of per-rule best splits.
//!
//! A candidate bisects one rule on one attribute at the midpoint between two
//! consecutive distinct covered values. It is scored by the ratio
//! `delta_l / delta_e`: the growth in total rule length over the growth in
//! accumulated weighted purity. Smaller keys are cheaper splits.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::weighted_purity;
use crate::rules::Rule;
use crate::EPSILON;

/// A rule together with the training rows it covers.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveredRule {
    pub rule: Rule,
    pub covered: Vec<usize>,
}

impl CoveredRule {
    pub fn root(ds: &Dataset) -> Self {
        let covered: Vec<usize> = (0..ds.len()).collect();
        Self {
            rule: Rule::root(ds.histogram(&covered)),
            covered,
        }
    }

    /// Refines the rule and routes covered rows to the children.
    pub fn split(&self, ds: &Dataset, attr: usize, threshold: f64) -> Result<(CoveredRule, CoveredRule)> {
        let (left, right) = self.rule.refine(attr, threshold)?;
        let (lrows, rrows): (Vec<usize>, Vec<usize>) =
            self.covered.iter().partition(|&&i| ds.value(i, attr) <= threshold);
        Ok((
            CoveredRule {
                rule: left.with_histogram(ds.histogram(&lrows)),
                covered: lrows,
            },
            CoveredRule {
                rule: right.with_histogram(ds.histogram(&rrows)),
                covered: rrows,
            },
        ))
    }

    pub fn weighted_purity(&self) -> f64 {
        weighted_purity(&self.rule.histogram)
    }
}

/// One way to bisect a rule, with its effect on the objective totals.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSplit {
    pub rule_id: usize,
    pub attr: usize,
    pub threshold: f64,
    /// `L(left) + L(right) - L(parent)`.
    pub delta_l: usize,
    /// `n_left E(left) + n_right E(right) - n_parent E(parent)`.
    pub delta_e: f64,
    /// `delta_l / delta_e`.
    pub key: f64,
    pub left_histogram: Vec<usize>,
    pub right_histogram: Vec<usize>,
}

/// Relative tolerance under which two keys count as tied.
const KEY_TIE: f64 = 1e-12;

pub(crate) fn keys_tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= KEY_TIE * a.abs().max(b.abs())
}

/// Smaller key first; ties go to the smaller attribute, then the smaller
/// threshold.
pub fn candidate_order(a: &CandidateSplit, b: &CandidateSplit) -> Ordering {
    if !keys_tied(a.key, b.key) {
        return a.key.total_cmp(&b.key);
    }
    a.attr.cmp(&b.attr).then(a.threshold.total_cmp(&b.threshold))
}

/// Constraints on which candidates are admissible.
#[derive(Debug, Clone, Copy)]
pub struct SplitLimits {
    /// Maximum child rule length.
    pub len_max: usize,
    /// Optional cap on `delta_l`, used when growing to a length budget.
    pub max_delta_l: Option<usize>,
    /// Candidates need `delta_e > epsilon`.
    pub epsilon: f64,
}

impl SplitLimits {
    pub fn new(len_max: usize) -> Self {
        Self {
            len_max,
            max_delta_l: None,
            epsilon: EPSILON,
        }
    }
}

/// Midpoint of two consecutive distinct values that is strictly below `hi`.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) * 0.5;
    if mid >= lo && mid < hi {
        mid
    } else {
        lo
    }
}

/// Calls `visit` with every admissible candidate of `rule`, attribute by
/// attribute, thresholds ascending.
fn for_each_candidate<F: FnMut(CandidateSplit)>(
    rule: &Rule,
    ds: &Dataset,
    covered: &[usize],
    limits: SplitLimits,
    mut visit: F,
) {
    if covered.len() < 2 {
        return;
    }
    let parent_hist = &rule.histogram;
    let parent_wp = weighted_purity(parent_hist);
    let len = rule.length();
    let mut order: Vec<usize> = covered.to_vec();
    for attr in 0..ds.dim() {
        let child_len = if rule.constrains(attr) { len } else { len + 1 };
        if child_len > limits.len_max {
            continue;
        }
        let delta_l = 2 * child_len - len;
        if limits.max_delta_l.is_some_and(|m| delta_l > m) {
            continue;
        }
        order.sort_by(|&a, &b| ds.value(a, attr).total_cmp(&ds.value(b, attr)));
        let mut left = vec![0usize; parent_hist.len()];
        for w in 0..order.len() - 1 {
            left[ds.label(order[w])] += 1;
            let lo = ds.value(order[w], attr);
            let hi = ds.value(order[w + 1], attr);
            if lo >= hi {
                continue;
            }
            let right: Vec<usize> = parent_hist.iter().zip(&left).map(|(p, l)| p - l).collect();
            let delta_e = weighted_purity(&left) + weighted_purity(&right) - parent_wp;
            if delta_e <= limits.epsilon {
                continue;
            }
            visit(CandidateSplit {
                rule_id: 0,
                attr,
                threshold: midpoint(lo, hi),
                delta_l,
                delta_e,
                key: delta_l as f64 / delta_e,
                left_histogram: left.clone(),
                right_histogram: right,
            });
        }
    }
}

/// The admissible split of `rule` with the smallest key, or `None` when no
/// split reduces entropy within the length bound.
pub fn best_candidate(rule: &Rule, ds: &Dataset, covered: &[usize], len_max: usize) -> Option<CandidateSplit> {
    best_candidate_within(rule, ds, covered, SplitLimits::new(len_max))
}

pub fn best_candidate_within(
    rule: &Rule,
    ds: &Dataset,
    covered: &[usize],
    limits: SplitLimits,
) -> Option<CandidateSplit> {
    let mut best: Option<CandidateSplit> = None;
    for_each_candidate(rule, ds, covered, limits, |c| {
        if best.as_ref().is_none_or(|b| candidate_order(&c, b) == Ordering::Less) {
            best = Some(c);
        }
    });
    best
}

/// Every admissible split of `rule`.
pub fn enumerate_candidates(rule: &Rule, ds: &Dataset, covered: &[usize], len_max: usize) -> Vec<CandidateSplit> {
    let mut all = Vec::new();
    for_each_candidate(rule, ds, covered, SplitLimits::new(len_max), |c| all.push(c));
    all
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapKey {
    key: f64,
    rule_id: usize,
    generation: u64,
}

impl Eq for HeapKey {}

impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .total_cmp(&other.key)
            .then(self.rule_id.cmp(&other.rule_id))
            .then(self.generation.cmp(&other.generation))
    }
}

impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-heap of one candidate per rule, keyed by `delta_l / delta_e`.
///
/// Pushing a candidate for a rule that already has one replaces it; the
/// superseded heap entry is skipped lazily.
#[derive(Debug, Default)]
pub struct SplitHeap {
    heap: BinaryHeap<Reverse<HeapKey>>,
    table: HashMap<usize, (u64, CandidateSplit)>,
    generation: u64,
}

impl SplitHeap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn push(&mut self, cand: CandidateSplit) {
        self.generation += 1;
        self.heap.push(Reverse(HeapKey {
            key: cand.key,
            rule_id: cand.rule_id,
            generation: self.generation,
        }));
        self.table.insert(cand.rule_id, (self.generation, cand));
    }

    fn discard_stale(&mut self) {
        while let Some(Reverse(top)) = self.heap.peek() {
            match self.table.get(&top.rule_id) {
                Some((g, _)) if *g == top.generation => return,
                _ => {
                    self.heap.pop();
                }
            }
        }
    }

    pub fn peek(&mut self) -> Option<&CandidateSplit> {
        self.discard_stale();
        let top = self.heap.peek()?.0;
        self.table.get(&top.rule_id).map(|(_, c)| c)
    }

    pub fn peek_key(&mut self) -> Option<f64> {
        self.peek().map(|c| c.key)
    }

    pub fn pop_min(&mut self) -> Result<CandidateSplit> {
        self.discard_stale();
        let Reverse(top) = self.heap.pop().ok_or(Error::EmptyHeap)?;
        let (_, cand) = self.table.remove(&top.rule_id).expect("live entry");
        Ok(cand)
    }

    /// All live candidates, in no particular order.
    pub fn candidates(&self) -> impl Iterator<Item = &CandidateSplit> {
        self.table.values().map(|(_, c)| c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth;
    use proptest::prelude::*;

    fn cand(rule_id: usize, key: f64) -> CandidateSplit {
        CandidateSplit {
            rule_id,
            attr: 0,
            threshold: 0.0,
            delta_l: 1,
            delta_e: 1.0 / key,
            key,
            left_histogram: vec![],
            right_histogram: vec![],
        }
    }

    #[test]
    fn heap_pops_in_key_order() {
        let mut h = SplitHeap::new();
        for (id, k) in [(0, 3.0), (1, 1.0), (2, 2.0)] {
            h.push(cand(id, k));
        }
        let keys: Vec<f64> = (0..3).map(|_| h.pop_min().unwrap().key).collect();
        assert_eq!(keys, [1.0, 2.0, 3.0]);
        assert!(matches!(h.pop_min(), Err(Error::EmptyHeap)));
    }

    #[test]
    fn heap_peek() {
        let mut h = SplitHeap::new();
        assert_eq!(h.peek_key(), None);
        h.push(cand(4, 5.0));
        assert_eq!(h.peek_key(), Some(5.0));
        assert_eq!(h.len(), 1);
    }

    #[test]
    fn heap_replacement_skips_stale_entry() {
        let mut h = SplitHeap::new();
        h.push(cand(0, 1.0));
        h.push(cand(1, 2.0));
        h.push(cand(0, 3.0));
        assert_eq!(h.len(), 2);
        assert_eq!(h.pop_min().unwrap().rule_id, 1);
        assert_eq!(h.pop_min().unwrap().key, 3.0);
        assert!(h.is_empty());
    }

    proptest! {
        #[test]
        fn heap_matches_sorted_list(ops in prop::collection::vec(prop::option::of(0u32..1000), 1..200)) {
            let mut h = SplitHeap::new();
            let mut oracle: Vec<(f64, usize)> = Vec::new();
            for (id, op) in ops.into_iter().enumerate() {
                match op {
                    Some(k) => {
                        let key = k as f64 / 7.0;
                        h.push(cand(id, key));
                        oracle.push((key, id));
                        oracle.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    }
                    None => {
                        if oracle.is_empty() {
                            prop_assert!(h.pop_min().is_err());
                        } else {
                            let (key, id) = oracle.remove(0);
                            let got = h.pop_min().unwrap();
                            prop_assert_eq!((got.key, got.rule_id), (key, id));
                        }
                    }
                }
                prop_assert_eq!(h.peek_key(), oracle.first().map(|p| p.0));
            }
        }
    }

    #[test]
    fn band_root_splits_on_x1_boundary() {
        let ds = synth::gen_band2d(200, 40, 5);
        let root = CoveredRule::root(&ds);
        let c = best_candidate(&root.rule, &ds, &root.covered, 10).unwrap();
        assert_eq!(c.attr, 0);
        assert!((c.threshold.abs() - 2.0).abs() < 0.2, "threshold {}", c.threshold);
        assert_eq!(c.delta_l, 2);
        let n: usize = c.left_histogram.iter().chain(&c.right_histogram).sum();
        assert_eq!(n, ds.len());
    }

    #[test]
    fn pure_rule_has_no_candidate() {
        let ds = synth::gen_band2d(30, 0, 1);
        let root = CoveredRule::root(&ds);
        assert!(best_candidate(&root.rule, &ds, &root.covered, 10).is_none());
    }

    #[test]
    fn length_bound_blocks_new_attributes() {
        // x1 is already constrained and constant on the covered rows; only x2
        // separates them
        let ds = Dataset::new(
            vec!["x1".into(), "x2".into()],
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![0, 1, 0],
        )
        .unwrap();
        let root = CoveredRule::root(&ds);
        let (left, _) = root.split(&ds, 0, 0.5).unwrap();
        assert_eq!(left.covered, [0, 1]);
        assert!(best_candidate(&left.rule, &ds, &left.covered, 1).is_none());
        let c = best_candidate(&left.rule, &ds, &left.covered, 2).unwrap();
        assert_eq!((c.attr, c.delta_l), (1, 3));
    }

    #[test]
    fn delta_l_matches_length_change() {
        let ds = synth::gen_random(80, 3, 2, 0.0, 4);
        let root = CoveredRule::root(&ds);
        for c in enumerate_candidates(&root.rule, &ds, &root.covered, 10) {
            let (l, r) = root.split(&ds, c.attr, c.threshold).unwrap();
            assert_eq!(c.delta_l, l.rule.length() + r.rule.length() - root.rule.length());
            assert_eq!(l.rule.histogram, c.left_histogram);
            assert_eq!(r.rule.histogram, c.right_histogram);
            assert!(c.delta_e > EPSILON);
        }
    }

    #[test]
    fn midpoint_stays_below_upper() {
        assert_eq!(midpoint(1.0, 3.0), 2.0);
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let m = midpoint(a, b);
        assert!(m >= a && m < b);
    }
}
