mod common;

use proptest::prelude::*;
use stair::baselines::{cart_fit, id3_fit_depth, BaselineOptions};
use stair::dataset::synth;
use stair::kmeans::sq_dist;
use stair::lstair::{lstair_fit, partition_objective, reassign, LStairConfig};
use stair::rules::Rule;
use stair::splitter::CoveredRule;
use stair::stair::{stair_fit, stair_fit_observed, StairConfig};
use stair::{Dataset, RuleSet};

fn dataset() -> impl Strategy<Value = Dataset> {
    (any::<u64>(), 4usize..120, 1usize..5, 2usize..4, any::<bool>())
        .prop_map(|(seed, n, d, k, grid)| common::random_dataset(seed, n, d, k, grid))
}

/// Each row is covered by exactly one rule, whose counts match the data.
fn assert_partition(rules: &RuleSet, ds: &Dataset) {
    let mut rows_of = vec![Vec::new(); rules.len()];
    for (i, x) in ds.rows().enumerate() {
        let hits: Vec<usize> = (0..rules.len())
            .filter(|&r| rules.rules[r].covers(x).unwrap())
            .collect();
        assert_eq!(hits.len(), 1, "row {i} covered by {hits:?}");
        rows_of[hits[0]].push(i);
    }
    for (rule, rows) in rules.rules.iter().zip(&rows_of) {
        assert_eq!(rule.n_covered, rows.len());
        assert_eq!(rule.histogram, common::hist_of(ds, rows));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_executed_split_has_the_global_minimum_key(ds in dataset(), len_max in 1usize..4) {
        let cfg = StairConfig { f1_min: 0.95, len_max, ..StairConfig::default() };
        let mut events = 0;
        stair_fit_observed(&ds, &cfg, |ev| {
            let best = ev
                .leaves
                .values()
                .filter_map(|l| common::best_split(&l.rule, &ds, &l.covered, len_max))
                .map(|s| s.key)
                .fold(f64::INFINITY, f64::min);
            assert!(
                (ev.candidate.key - best).abs() <= 1e-9 * best.abs().max(1.0),
                "executed key {} but the minimum is {best}",
                ev.candidate.key
            );
            events += 1;
        })
        .unwrap();
        prop_assert!(events < ds.len());
    }

    #[test]
    fn learned_rule_sets_partition_the_data(ds in dataset(), len_max in 1usize..4) {
        let cfg = StairConfig { f1_min: 0.9, len_max, ..StairConfig::default() };
        let st = stair_fit(&ds, &cfg).unwrap();
        assert_partition(&st.rules, &ds);
        prop_assert!(st.rules.max_length() <= len_max);
        let opts = BaselineOptions::default();
        assert_partition(&id3_fit_depth(&ds, 3, &opts).unwrap().rules, &ds);
        assert_partition(&cart_fit(&ds, 0.9, &opts).unwrap().rules, &ds);
    }

    #[test]
    fn budget_mode_respects_budget(ds in dataset(), budget in 0usize..8) {
        let cfg = StairConfig { length_budget: Some(budget), ..StairConfig::default() };
        let fit = stair_fit(&ds, &cfg).unwrap();
        prop_assert!(fit.rules.total_length() <= budget);
        assert_partition(&fit.rules, &ds);
    }

    #[test]
    fn refine_counts_distinct_attributes(
        cuts in proptest::collection::vec((0usize..4, -5.0f64..5.0), 0..8),
    ) {
        let mut rule = Rule::root(vec![1, 1]);
        for (attr, t) in cuts {
            let iv = rule.interval(attr);
            if !(t > iv.lower && t < iv.upper) {
                continue;
            }
            let before = rule.length();
            let had = rule.constrains(attr);
            let (l, r) = rule.refine(attr, t).unwrap();
            let expect = if had { before } else { before + 1 };
            prop_assert_eq!(l.length(), expect);
            prop_assert_eq!(r.length(), expect);
            prop_assert_eq!(l.interval(attr).upper, t);
            prop_assert_eq!(r.interval(attr).lower, t);
            rule = if t > 0.0 { l } else { r };
        }
        let distinct = rule.predicates.keys().count();
        prop_assert_eq!(rule.length(), distinct);
    }

    #[test]
    fn csv_round_trip(ds in dataset()) {
        let mut buf = Vec::new();
        ds.write_csv(&mut buf, "label").unwrap();
        let back = Dataset::read_csv(buf.as_slice(), "label").unwrap();
        prop_assert_eq!(back.attributes(), ds.attributes());
        prop_assert_eq!(back.labels(), ds.labels());
        for (a, b) in back.rows().zip(ds.rows()) {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn rule_export_round_trip(ds in dataset()) {
        let fit = stair_fit(&ds, &StairConfig::default()).unwrap();
        let back = RuleSet::from_json(&fit.rules.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, fit.rules);
    }
}

/// Partitioning objective recomputed from its definition.
fn objective_oracle(model: &stair::lstair::LStairModel, ds: &Dataset) -> f64 {
    let p = &model.standardization;
    let mut total = 0.0;
    for (i, &k) in model.partitioning.assignments.iter().enumerate() {
        let x = ds.row(i);
        let pred = model.trees[k].predict(x).unwrap();
        let err = if ds.class_count() == 2 {
            f64::from(u8::from(pred != ds.label(i)))
        } else {
            // squared distance between one-hot vectors
            (0..ds.class_count())
                .map(|c| {
                    let d = f64::from(u8::from(c == pred)) - f64::from(u8::from(c == ds.label(i)));
                    d * d
                })
                .sum()
        };
        let z: Vec<f64> = x
            .iter()
            .zip(&p.mean)
            .zip(&p.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect();
        let dist: f64 = z
            .iter()
            .zip(&model.partitioning.centers[k])
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        total += err + model.lambda * dist;
    }
    total
}

#[test]
fn partition_objective_matches_oracle() {
    for seed in 0..10 {
        let ds = if seed % 2 == 0 {
            synth::gen_random(180, 3, 2, 0.1, seed)
        } else {
            synth::gen_three_class(40, seed)
        };
        let cfg = LStairConfig {
            stair: StairConfig {
                f1_min: 0.95,
                len_max: 2,
                score: if ds.class_count() > 2 {
                    stair::ScoreKind::Accuracy
                } else {
                    stair::ScoreKind::F1
                },
                ..StairConfig::default()
            },
            n_init: 3,
            max_iter: 4,
            seed,
            ..LStairConfig::default()
        };
        let fit = lstair_fit(&ds, &cfg).unwrap();
        let got = partition_objective(&fit.model, &ds).unwrap();
        let want = objective_oracle(&fit.model, &ds);
        assert!((got - want).abs() <= 1e-9 * want.max(1.0), "{got} vs {want}");
    }
}

#[test]
fn reassignment_is_pointwise_argmin() {
    for seed in 0..8 {
        let ds = synth::gen_random(150, 3, 2, 0.1, 100 + seed);
        let cfg = LStairConfig {
            n_init: 3,
            max_iter: 2,
            seed,
            ..LStairConfig::default()
        };
        let model = lstair_fit(&ds, &cfg).unwrap().model;
        let part = reassign(&model, &ds).unwrap();
        let p = &model.standardization;
        for i in 0..ds.len() {
            let z = p.apply(ds.row(i));
            let cost = |k: usize| {
                let pred = model.trees[k].predict(ds.row(i)).unwrap();
                f64::from(u8::from(pred != ds.label(i))) + model.lambda * sq_dist(&z, &model.partitioning.centers[k])
            };
            let costs: Vec<f64> = (0..model.trees.len()).map(cost).collect();
            let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
            let first = costs.iter().position(|&c| c == min).unwrap();
            assert_eq!(part.assignments[i], first, "row {i}: costs {costs:?}");
        }
        // centers move to member means
        for (k, c) in part.centers.iter().enumerate() {
            let members: Vec<usize> = (0..ds.len()).filter(|&i| part.assignments[i] == k).collect();
            if members.is_empty() {
                continue;
            }
            for (j, cj) in c.iter().enumerate() {
                let mean = members.iter().map(|&i| p.apply(ds.row(i))[j]).sum::<f64>() / members.len() as f64;
                assert!((cj - mean).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn covered_rule_split_matches_refine() {
    let ds = synth::gen_band2d(50, 10, 3);
    let root = CoveredRule::root(&ds);
    let (l, r) = root.split(&ds, 0, 0.5).unwrap();
    assert_eq!(l.covered.len() + r.covered.len(), ds.len());
    assert!(l.covered.iter().all(|&i| ds.value(i, 0) <= 0.5));
    assert!(r.covered.iter().all(|&i| ds.value(i, 0) > 0.5));
    assert_eq!(l.rule.histogram, common::hist_of(&ds, &l.covered));
}
