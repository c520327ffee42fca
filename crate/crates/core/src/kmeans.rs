//! Seeded Lloyd k-means with k-means++ initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn mean(points: &[Vec<f64>], members: impl IntoIterator<Item = usize>) -> Option<Vec<f64>> {
    let mut acc: Option<Vec<f64>> = None;
    let mut n = 0usize;
    for i in members {
        let p = &points[i];
        match acc.as_mut() {
            None => acc = Some(p.clone()),
            Some(a) => a.iter_mut().zip(p).for_each(|(s, v)| *s += v),
        }
        n += 1;
    }
    acc.map(|mut a| {
        a.iter_mut().for_each(|s| *s /= n as f64);
        a
    })
}

/// Index of the nearest center, ties going to the smaller index.
pub fn nearest(x: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, c) in centers.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best_d {
            best = k;
            best_d = d;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centers: Vec<Vec<f64>>,
    /// Cluster id per point, in `0..centers.len()`.
    pub assignments: Vec<usize>,
}

impl Clustering {
    /// Sum of squared distances to assigned centers.
    pub fn inertia(&self, points: &[Vec<f64>]) -> f64 {
        points
            .iter()
            .zip(&self.assignments)
            .map(|(p, &a)| sq_dist(p, &self.centers[a]))
            .sum()
    }
}

/// Adds centers by D^2 sampling until there are `k` or every point
/// coincides with a center.
fn seed_more(points: &[Vec<f64>], centers: &mut Vec<Vec<f64>>, k: usize, rng: &mut ChaCha8Rng) {
    while centers.len() < k {
        let d2: Vec<f64> = points
            .iter()
            .map(|p| centers.iter().map(|c| sq_dist(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.gen::<f64>() * total;
        let mut pick = d2.len() - 1;
        for (i, &d) in d2.iter().enumerate() {
            if d > 0.0 && target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        if d2[pick] == 0.0 {
            pick = d2.iter().rposition(|&d| d > 0.0).expect("positive total");
        }
        centers.push(points[pick].clone());
    }
}

/// Lloyd iterations from the given centers. Empty clusters are dropped.
fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>, max_iter: usize) -> Clustering {
    let mut assignments: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
    for _ in 0..max_iter {
        let k = centers.len();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &a) in assignments.iter().enumerate() {
            members[a].push(i);
        }
        centers = members.iter().filter_map(|m| mean(points, m.iter().copied())).collect();
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
        let done = next == assignments && centers.len() == k;
        assignments = next;
        if done {
            break;
        }
    }
    // final compaction: recompute means of the last assignment
    let k = centers.len();
    let mut remap = vec![usize::MAX; k];
    let mut new_centers = Vec::new();
    for (c, slot) in remap.iter_mut().enumerate() {
        if let Some(m) = mean(
            points,
            assignments.iter().enumerate().filter(|(_, &a)| a == c).map(|(i, _)| i),
        ) {
            *slot = new_centers.len();
            new_centers.push(m);
        }
    }
    let assignments = assignments.into_iter().map(|a| remap[a]).collect();
    Clustering {
        centers: new_centers,
        assignments,
    }
}

/// k-means with k-means++ seeding. Returns fewer than `k` clusters when the
/// points have fewer distinct positions.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Clustering {
    assert!(!points.is_empty() && k >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.gen_range(0..points.len());
    let mut centers = vec![points[first].clone()];
    seed_more(points, &mut centers, k, &mut rng);
    lloyd(points, centers, max_iter)
}

/// Splits one cluster into up to `k` pieces. The first seed is the cluster
/// mean, so the result never has larger inertia than the unsplit cluster.
pub fn split_cluster(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Clustering {
    assert!(!points.is_empty() && k >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![mean(points, 0..points.len()).expect("non-empty")];
    seed_more(points, &mut centers, k, &mut rng);
    lloyd(points, centers, max_iter)
}
