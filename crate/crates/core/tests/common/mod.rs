//! Reference implementations used by the integration tests. They share no
//! code with the library beyond its data types.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stair::rules::Rule;
use stair::Dataset;

pub fn entropy(hist: &[usize]) -> f64 {
    let n: usize = hist.iter().sum();
    let mut h = 0.0;
    for &c in hist {
        if c > 0 {
            let p = c as f64 / n as f64;
            h -= p * p.log2();
        }
    }
    h
}

/// `1 - H`, with `H` scaled to `[0, 1]` by `log2 K` when `K > 2`.
pub fn purity(hist: &[usize]) -> f64 {
    let k = hist.len();
    let scale = if k > 2 { (k as f64).log2() } else { 1.0 };
    1.0 - entropy(hist) / scale
}

pub fn weighted(hist: &[usize]) -> f64 {
    let n: usize = hist.iter().sum();
    if n == 0 {
        0.0
    } else {
        n as f64 * purity(hist)
    }
}

pub fn hist_of(ds: &Dataset, rows: &[usize]) -> Vec<usize> {
    let mut h = vec![0; ds.class_count()];
    for &i in rows {
        h[ds.label(i)] += 1;
    }
    h
}

pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) * 0.5;
    if mid >= lo && mid < hi {
        mid
    } else {
        lo
    }
}

/// Every `(attr, threshold)` between consecutive distinct covered values.
pub fn thresholds(ds: &Dataset, covered: &[usize]) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for a in 0..ds.dim() {
        let mut v: Vec<f64> = covered.iter().map(|&i| ds.value(i, a)).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        for w in v.windows(2) {
            out.push((a, midpoint(w[0], w[1])));
        }
    }
    out
}

fn partition(ds: &Dataset, covered: &[usize], a: usize, t: f64) -> (Vec<usize>, Vec<usize>) {
    covered.iter().partition(|&&i| ds.value(i, a) <= t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSplit {
    pub attr: usize,
    pub threshold: f64,
    pub delta_l: usize,
    pub delta_e: f64,
    pub key: f64,
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Smallest `delta_l / delta_e` split by exhaustive search; ties go to the
/// smaller attribute, then the smaller threshold.
pub fn best_split(rule: &Rule, ds: &Dataset, covered: &[usize], len_max: usize) -> Option<OracleSplit> {
    let parent = weighted(&hist_of(ds, covered));
    let len = rule.predicates.len();
    let mut best: Option<OracleSplit> = None;
    for (a, t) in thresholds(ds, covered) {
        let child_len = if rule.predicates.contains_key(&a) { len } else { len + 1 };
        if child_len > len_max {
            continue;
        }
        let (l, r) = partition(ds, covered, a, t);
        let delta_e = weighted(&hist_of(ds, &l)) + weighted(&hist_of(ds, &r)) - parent;
        if delta_e <= 1e-9 {
            continue;
        }
        let delta_l = 2 * child_len - len;
        let key = delta_l as f64 / delta_e;
        let better = match &best {
            None => true,
            Some(b) => {
                if tied(key, b.key) {
                    (a, t) < (b.attr, b.threshold)
                } else {
                    key < b.key
                }
            }
        };
        if better {
            best = Some(OracleSplit {
                attr: a,
                threshold: t,
                delta_l,
                delta_e,
                key,
            });
        }
    }
    best
}

/// Largest information gain split above `min_gain`; ties go to the smaller
/// attribute, then the smaller threshold.
pub fn best_gain(ds: &Dataset, covered: &[usize], min_gain: f64) -> Option<(usize, f64, f64)> {
    let parent = hist_of(ds, covered);
    let n = covered.len() as f64;
    let mut best: Option<(usize, f64, f64)> = None;
    for (a, t) in thresholds(ds, covered) {
        let (l, r) = partition(ds, covered, a, t);
        let gain = entropy(&parent)
            - l.len() as f64 / n * entropy(&hist_of(ds, &l))
            - r.len() as f64 / n * entropy(&hist_of(ds, &r));
        if gain <= min_gain {
            continue;
        }
        if best.is_none_or(|b| gain > b.2 && !tied(gain, b.2)) {
            best = Some((a, t, gain));
        }
    }
    best
}

/// Random labeled data; with `grid`, features take few distinct values so
/// ties and duplicate points occur.
pub fn random_dataset(seed: u64, n: usize, d: usize, classes: usize, grid: bool) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| {
                    if grid {
                        rng.gen_range(0..6) as f64
                    } else {
                        rng.gen_range(-3.0..3.0)
                    }
                })
                .collect()
        })
        .collect();
    // labels follow a noisy threshold on the first feature
    let labels: Vec<usize> = rows
        .iter()
        .map(|r| {
            if rng.gen_bool(0.25) {
                rng.gen_range(0..classes)
            } else {
                ((r[0] + 3.0) / 6.0 * classes as f64)
                    .floor()
                    .clamp(0.0, (classes - 1) as f64) as usize
            }
        })
        .collect();
    let names = (1..=d).map(|j| format!("x{j}")).collect();
    Dataset::with_class_count(names, rows, labels, classes).expect("valid random data")
}
