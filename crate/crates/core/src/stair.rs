//! Greedy rule-set growth under the stabilized ratio objective
//! `sum(n_r E(r)) / (sum(L(r)) + M)`.
//!
//! Every rule keeps its cheapest admissible split in a min-heap keyed by
//! `delta_l / delta_e`. Each outer iteration raises the stabilizer `M` to the
//! boundary value of the cheapest split, `A0 * key - B0`, the smallest `M` at
//! which that split stops lowering the objective. It then executes every
//! split whose key is within the moving threshold `(M + B0) / A0` before
//! scoring the rule set.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{purity, weighted_purity, ObjectiveState, ScoreKind};
use crate::rules::{Rule, RuleSet};
use crate::splitter::{
    best_candidate_within, enumerate_candidates, CandidateSplit, CoveredRule, SplitHeap, SplitLimits,
};
use crate::{FitStatus, EPSILON};

/// How the accumulated purity `A0` is updated after a split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum A0Update {
    /// `A0 += n1 E(r1) + n2 E(r2) - n0 E(r0)`, consistent with the objective.
    #[default]
    Weighted,
    /// `A0 += E(r1) + E(r2) - E(r0)`; only for comparison runs.
    Unweighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StairConfig {
    /// The score must exceed this value.
    pub f1_min: f64,
    /// Maximum number of attributes in one rule.
    pub len_max: usize,
    /// Outer iterations without score improvement before giving up.
    pub stall_limit: usize,
    pub score: ScoreKind,
    pub epsilon: f64,
    pub a0_update: A0Update,
    /// Grow until the total length budget is spent instead of stopping on
    /// the score.
    pub length_budget: Option<usize>,
}

impl Default for StairConfig {
    fn default() -> Self {
        Self {
            f1_min: 0.8,
            len_max: 10,
            stall_limit: 5,
            score: ScoreKind::F1,
            epsilon: EPSILON,
            a0_update: A0Update::Weighted,
            length_budget: None,
        }
    }
}

impl StairConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.f1_min.is_finite() {
            return Err(Error::Config("f1_min must be finite".into()));
        }
        if self.len_max == 0 {
            return Err(Error::Config("len_max must be at least 1".into()));
        }
        if self.stall_limit == 0 {
            return Err(Error::Config("stall_limit must be at least 1".into()));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(Error::Config("epsilon must be non-negative".into()));
        }
        Ok(())
    }
}

/// State after one outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub iteration: usize,
    pub m: f64,
    pub rule_count: usize,
    pub total_length: usize,
    pub score: f64,
    pub splits: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub steps: Vec<TraceStep>,
}

impl TrainingTrace {
    /// Tab-separated `iteration, M, rule_count, total_length, score`.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iteration\tM\trule_count\ttotal_length\tscore")?;
        for s in &self.steps {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                s.iteration, s.m, s.rule_count, s.total_length, s.score
            )?;
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).expect("write to Vec");
        String::from_utf8(buf).expect("ascii")
    }
}

#[derive(Debug, Clone)]
pub struct StairFit {
    pub rules: RuleSet,
    pub trace: TrainingTrace,
    pub status: FitStatus,
    /// Training score of `rules`.
    pub score: f64,
    /// Objective totals at the end of training.
    pub state: ObjectiveState,
}

/// A split about to be executed, with the rule set it applies to.
pub struct SplitEvent<'a> {
    pub candidate: &'a CandidateSplit,
    pub leaves: &'a BTreeMap<usize, CoveredRule>,
    pub state: ObjectiveState,
}

/// Learns a rule set on `ds`.
pub fn stair_fit(ds: &Dataset, cfg: &StairConfig) -> Result<StairFit> {
    stair_fit_observed(ds, cfg, |_| {})
}

/// [`stair_fit`] with a callback invoked before every split.
pub fn stair_fit_observed<F>(ds: &Dataset, cfg: &StairConfig, mut observe: F) -> Result<StairFit>
where
    F: FnMut(&SplitEvent<'_>),
{
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::InvalidDataset("empty dataset".into()));
    }
    let limits = SplitLimits {
        len_max: cfg.len_max,
        max_delta_l: cfg.length_budget,
        epsilon: cfg.epsilon,
    };
    let budget_mode = cfg.length_budget.is_some();

    let root = CoveredRule::root(ds);
    let mut state = ObjectiveState {
        a0: root.weighted_purity(),
        b0: 0.0,
        m: 0.0,
    };
    let mut heap = SplitHeap::new();
    if let Some(mut c) = best_candidate_within(&root.rule, ds, &root.covered, limits) {
        c.rule_id = 0;
        heap.push(c);
    }
    let mut leaves = BTreeMap::from([(0usize, root)]);
    let mut next_id = 1;

    let score_of = |leaves: &BTreeMap<usize, CoveredRule>| {
        cfg.score
            .from_leaves(leaves.values().map(|l| (l.rule.label, l.rule.histogram.as_slice())))
    };
    let mut score = score_of(&leaves);
    let mut trace = TrainingTrace::default();

    if !budget_mode && score > cfg.f1_min {
        return Ok(finish(ds, &leaves, trace, FitStatus::Reached, score, state));
    }

    let mut best_score = score;
    let mut best_rules: Vec<Rule> = leaves.values().map(|l| l.rule.clone()).collect();
    let mut best_state = state;
    let mut stalled = 0;
    let mut iteration = 0;

    let status = loop {
        let Some(kappa) = heap.peek_key() else {
            break if !budget_mode && score <= cfg.f1_min {
                FitStatus::Exhausted
            } else {
                FitStatus::Reached
            };
        };
        iteration += 1;
        state.m = state.a0 * kappa - state.b0;

        let mut splits = 0;
        while let Some(top) = heap.peek() {
            let slack = cfg.epsilon * (state.m + state.b0).abs().max(1.0);
            if top.key * state.a0 > state.m + state.b0 + slack {
                break;
            }
            let cand = heap.pop_min()?;
            if let Some(budget) = cfg.length_budget {
                let spent = state.b0 as usize;
                if spent + cand.delta_l > budget {
                    let parent = &leaves[&cand.rule_id];
                    let tight = SplitLimits {
                        max_delta_l: Some(budget - spent),
                        ..limits
                    };
                    if let Some(mut c) = best_candidate_within(&parent.rule, ds, &parent.covered, tight) {
                        c.rule_id = cand.rule_id;
                        heap.push(c);
                    }
                    continue;
                }
            }
            observe(&SplitEvent {
                candidate: &cand,
                leaves: &leaves,
                state,
            });
            let parent = leaves.remove(&cand.rule_id).expect("heap entry has a leaf");
            let (left, right) = parent.split(ds, cand.attr, cand.threshold)?;
            state.a0 += match cfg.a0_update {
                A0Update::Weighted => cand.delta_e,
                A0Update::Unweighted => {
                    purity(&left.rule.histogram)? + purity(&right.rule.histogram)? - purity(&parent.rule.histogram)?
                }
            };
            state.b0 += cand.delta_l as f64;
            for child in [left, right] {
                let id = next_id;
                next_id += 1;
                if let Some(mut c) = best_candidate_within(&child.rule, ds, &child.covered, limits) {
                    c.rule_id = id;
                    heap.push(c);
                }
                leaves.insert(id, child);
            }
            splits += 1;
        }

        if cfg.a0_update == A0Update::Weighted {
            debug_assert!({
                let fresh = ObjectiveState::from_rules(leaves.values().map(|l| &l.rule), state.m);
                (fresh.a0 - state.a0).abs() <= 1e-6 * fresh.a0.max(1.0) && fresh.b0 == state.b0
            });
        }

        score = score_of(&leaves);
        trace.steps.push(TraceStep {
            iteration,
            m: state.m,
            rule_count: leaves.len(),
            total_length: state.b0 as usize,
            score,
            splits,
        });
        if budget_mode {
            continue;
        }
        if score > cfg.f1_min {
            break FitStatus::Reached;
        }
        if score > best_score + cfg.epsilon {
            best_score = score;
            best_rules = leaves.values().map(|l| l.rule.clone()).collect();
            best_state = state;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= cfg.stall_limit {
                log::warn!("score stalled at {best_score:.4} after {iteration} iterations; returning best rule set");
                let rules = RuleSet::new(ds.attributes().to_vec(), ds.class_count(), best_rules);
                return Ok(StairFit {
                    rules,
                    trace,
                    status: FitStatus::Stalled,
                    score: best_score,
                    state: best_state,
                });
            }
        }
    };
    if status == FitStatus::Exhausted {
        log::warn!("no admissible split left; score {score:.4} is not above {}", cfg.f1_min);
    }
    Ok(finish(ds, &leaves, trace, status, score, state))
}

fn finish(
    ds: &Dataset,
    leaves: &BTreeMap<usize, CoveredRule>,
    trace: TrainingTrace,
    status: FitStatus,
    score: f64,
    state: ObjectiveState,
) -> StairFit {
    let rules = leaves.values().map(|l| l.rule.clone()).collect();
    StairFit {
        rules: RuleSet::new(ds.attributes().to_vec(), ds.class_count(), rules),
        trace,
        status,
        score,
        state,
    }
}

/// The stabilizer at which `cand` leaves the objective unchanged:
/// `A0 * delta_l / delta_e - B0`.
pub fn boundary_m(state: &ObjectiveState, cand: &CandidateSplit) -> f64 {
    state.a0 * (cand.delta_l as f64 / cand.delta_e) - state.b0
}

/// Objective of the rule set after applying `cand`, at stabilizer `m`.
pub fn objective_after(state: &ObjectiveState, cand: &CandidateSplit, m: f64) -> Result<f64> {
    ObjectiveState {
        a0: state.a0 + cand.delta_e,
        b0: state.b0 + cand.delta_l as f64,
        m,
    }
    .objective()
}

/// The valid split that maximizes the objective at stabilizer `m`, as
/// `(leaf index, candidate, objective after the split)`. A split is valid when
/// it strictly increases the objective.
pub fn best_valid_split(
    ds: &Dataset,
    leaves: &[CoveredRule],
    len_max: usize,
    m: f64,
) -> Result<Option<(usize, CandidateSplit, f64)>> {
    let state = ObjectiveState::from_rules(leaves.iter().map(|l| &l.rule), m);
    let before = state.objective()?;
    let mut best: Option<(usize, CandidateSplit, f64)> = None;
    for (i, leaf) in leaves.iter().enumerate() {
        for c in enumerate_candidates(&leaf.rule, ds, &leaf.covered, len_max) {
            let after = objective_after(&state, &c, m)?;
            if after > before && best.as_ref().is_none_or(|b| after > b.2) {
                best = Some((i, c, after));
            }
        }
    }
    Ok(best)
}

/// Checks that raising the stabilizer from `m_b` to `m_a` strictly lowers the
/// best achievable objective after one valid split. Vacuously true when
/// either value admits no valid split.
pub fn verify_monotonicity(ds: &Dataset, leaves: &[CoveredRule], len_max: usize, m_a: f64, m_b: f64) -> Result<bool> {
    let a = best_valid_split(ds, leaves, len_max, m_a)?;
    let b = best_valid_split(ds, leaves, len_max, m_b)?;
    Ok(match (a, b) {
        (Some(a), Some(b)) => a.2 < b.2,
        _ => true,
    })
}

/// Recomputes `sum(n_r E(r))` and `sum(L(r))` over a rule set.
pub fn totals(rules: &RuleSet) -> (f64, usize) {
    let a: f64 = rules.rules.iter().map(|r| weighted_purity(&r.histogram)).sum();
    (a, rules.total_length())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth;
    use crate::metrics::stair_objective;

    fn cfg(f1_min: f64) -> StairConfig {
        StairConfig {
            f1_min,
            ..StairConfig::default()
        }
    }

    #[test]
    fn band_data_gives_three_rules() {
        let ds = synth::gen_band2d(100, 20, 7);
        let fit = stair_fit(&ds, &cfg(0.99)).unwrap();
        assert_eq!(fit.rules.len(), 3);
        assert_eq!(fit.rules.total_length(), 3);
        assert_eq!(fit.score, 1.0);
        assert_eq!(fit.status, FitStatus::Reached);
    }

    #[test]
    fn all_inliers_keep_root() {
        let ds = synth::gen_band2d(40, 0, 1);
        let c = StairConfig {
            score: ScoreKind::Accuracy,
            f1_min: 0.9,
            ..StairConfig::default()
        };
        let fit = stair_fit(&ds, &c).unwrap();
        assert_eq!(fit.rules.len(), 1);
        assert_eq!(fit.rules.rules[0].label, 0);
        assert_eq!(fit.status, FitStatus::Reached);
        assert!(fit.trace.steps.is_empty());
    }

    #[test]
    fn unreachable_threshold_is_flagged() {
        let ds = synth::gen_band2d(50, 10, 2);
        let fit = stair_fit(&ds, &cfg(1.01)).unwrap();
        assert_eq!(fit.status, FitStatus::Exhausted);
        assert_eq!(fit.score, 1.0);
    }

    #[test]
    fn config_is_validated() {
        let ds = synth::gen_band2d(5, 5, 2);
        for bad in [
            StairConfig { len_max: 0, ..cfg(0.8) },
            StairConfig {
                stall_limit: 0,
                ..cfg(0.8)
            },
            StairConfig {
                f1_min: f64::NAN,
                ..cfg(0.8)
            },
        ] {
            assert!(matches!(stair_fit(&ds, &bad), Err(Error::Config(_))));
        }
    }

    #[test]
    fn totals_match_final_state() {
        let ds = synth::gen_random(150, 4, 3, 0.05, 11);
        let fit = stair_fit(&ds, &cfg(0.95)).unwrap();
        let (a, b) = totals(&fit.rules);
        if fit.status != FitStatus::Stalled {
            assert!((a - fit.state.a0).abs() < 1e-9 * a.max(1.0));
            assert_eq!(b as f64, fit.state.b0);
        }
        assert!(fit.rules.max_length() <= 10);
    }

    #[test]
    fn boundary_m_arithmetic() {
        let state = ObjectiveState {
            a0: 10.0,
            b0: 4.0,
            m: 0.0,
        };
        let c = CandidateSplit {
            rule_id: 0,
            attr: 0,
            threshold: 0.0,
            delta_l: 2,
            delta_e: 5.0,
            key: 0.4,
            left_histogram: vec![],
            right_histogram: vec![],
        };
        assert_eq!(boundary_m(&state, &c), 0.0);
    }

    #[test]
    fn boundary_m_balances_objective() {
        let ds = synth::gen_random(120, 3, 2, 0.05, 3);
        let root = CoveredRule::root(&ds);
        let (l, r) = root.split(&ds, 0, 0.5).unwrap();
        let leaves = [l, r];
        let mut state = ObjectiveState::from_rules(leaves.iter().map(|x| &x.rule), 0.0);
        let c = leaves
            .iter()
            .filter_map(|x| crate::splitter::best_candidate(&x.rule, &ds, &x.covered, 10))
            .min_by(|a, b| a.key.total_cmp(&b.key))
            .unwrap();
        state.m = boundary_m(&state, &c);
        let before = stair_objective(&state).unwrap();
        let after = objective_after(&state, &c, state.m).unwrap();
        assert!((before - after).abs() < 1e-9);
        let m = state.m + 1.0;
        let before = stair_objective(&ObjectiveState { m, ..state }).unwrap();
        assert!(objective_after(&state, &c, m).unwrap() > before);
    }

    #[test]
    fn monotonicity_equal_m_chooses_same_split() {
        let ds = synth::gen_random(90, 3, 2, 0.05, 8);
        let leaves = [CoveredRule::root(&ds)];
        let a = best_valid_split(&ds, &leaves, 10, 3.0).unwrap();
        let b = best_valid_split(&ds, &leaves, 10, 3.0).unwrap();
        assert_eq!(a, b);
        assert!(verify_monotonicity(&ds, &leaves, 10, 4.0, 3.0).unwrap());
    }

    #[test]
    fn monotonicity_vacuous_without_split() {
        let ds = synth::gen_band2d(20, 0, 2);
        let leaves = [CoveredRule::root(&ds)];
        assert!(best_valid_split(&ds, &leaves, 10, 1.0).unwrap().is_none());
        assert!(verify_monotonicity(&ds, &leaves, 10, 2.0, 1.0).unwrap());
    }

    #[test]
    fn trace_tsv_has_header() {
        let ds = synth::gen_band2d(60, 10, 4);
        let fit = stair_fit(&ds, &cfg(0.99)).unwrap();
        let tsv = fit.trace.to_tsv();
        let mut lines = tsv.lines();
        assert_eq!(lines.next(), Some("iteration\tM\trule_count\ttotal_length\tscore"));
        assert_eq!(lines.count(), fit.trace.steps.len());
    }

    #[test]
    fn length_budget_is_respected() {
        let ds = synth::gen_random(200, 4, 3, 0.05, 21);
        for budget in [0, 1, 2, 5, 9] {
            let c = StairConfig {
                length_budget: Some(budget),
                ..cfg(0.8)
            };
            let fit = stair_fit(&ds, &c).unwrap();
            assert!(fit.rules.total_length() <= budget);
        }
    }

    #[test]
    fn unweighted_variant_runs() {
        let ds = synth::gen_band2d(80, 20, 9);
        let c = StairConfig {
            a0_update: A0Update::Unweighted,
            ..cfg(0.99)
        };
        let fit = stair_fit(&ds, &c).unwrap();
        assert_eq!(fit.score, 1.0);
    }
}
