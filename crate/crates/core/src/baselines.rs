//! Information-gain decision trees used as comparison baselines: a greedy
//! ID3 tree swept over depth, and a fully grown tree pruned back towards a
//! score threshold.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{info_gain, ScoreKind};
use crate::rules::{Rule, RuleSet};
use crate::splitter::{keys_tied, midpoint};
use crate::{FitStatus, EPSILON};

/// Hard cap on the depth sweep.
pub const MAX_SWEEP_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineOptions {
    pub score: ScoreKind,
    /// Optional bound on rule length; splits that would exceed it are skipped.
    pub len_max: Option<usize>,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self {
            score: ScoreKind::F1,
            len_max: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSplit {
    pub attr: usize,
    pub threshold: f64,
    pub gain: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub rule: Rule,
    pub covered: Vec<usize>,
    pub depth: usize,
    pub split: Option<NodeSplit>,
}

/// A binary interval tree; node 0 is the root. Collapsed subtrees stay in
/// `nodes` but are unreachable.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    attributes: Vec<String>,
    class_count: usize,
}

/// The split of a node with the largest information gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSplit {
    pub attr: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Largest-gain split of the covered rows, ties going to the smaller
/// attribute and then the smaller threshold. With `min_gain = None` any split
/// is admissible; otherwise the gain must exceed it.
pub fn best_gain_split(
    rule: &Rule,
    ds: &Dataset,
    covered: &[usize],
    len_max: Option<usize>,
    min_gain: Option<f64>,
) -> Option<GainSplit> {
    if covered.len() < 2 {
        return None;
    }
    let parent = &rule.histogram;
    let mut best: Option<GainSplit> = None;
    let mut order = covered.to_vec();
    for attr in 0..ds.dim() {
        let child_len = rule.length() + usize::from(!rule.constrains(attr));
        if len_max.is_some_and(|m| child_len > m) {
            continue;
        }
        order.sort_by(|&a, &b| ds.value(a, attr).total_cmp(&ds.value(b, attr)));
        let mut left = vec![0usize; parent.len()];
        for w in 0..order.len() - 1 {
            left[ds.label(order[w])] += 1;
            let lo = ds.value(order[w], attr);
            let hi = ds.value(order[w + 1], attr);
            if lo >= hi {
                continue;
            }
            let right: Vec<usize> = parent.iter().zip(&left).map(|(p, l)| p - l).collect();
            let gain = info_gain(parent, &left, &right).expect("consistent counts");
            if min_gain.is_some_and(|g| gain <= g) {
                continue;
            }
            // sweeping attributes and thresholds in ascending order, only a
            // strictly larger gain replaces the incumbent
            let better = match best {
                None => true,
                Some(b) => gain > b.gain && !keys_tied(gain, b.gain),
            };
            if better {
                best = Some(GainSplit {
                    attr,
                    threshold: midpoint(lo, hi),
                    gain,
                });
            }
        }
    }
    best
}

impl DecisionTree {
    fn with_root(ds: &Dataset) -> Self {
        let covered: Vec<usize> = (0..ds.len()).collect();
        Self {
            nodes: vec![TreeNode {
                rule: Rule::root(ds.histogram(&covered)),
                covered,
                depth: 0,
                split: None,
            }],
            attributes: ds.attributes().to_vec(),
            class_count: ds.class_count(),
        }
    }

    fn split_node(&mut self, ds: &Dataset, id: usize, s: GainSplit) -> Result<(usize, usize)> {
        let node = &self.nodes[id];
        let (lrule, rrule) = node.rule.refine(s.attr, s.threshold)?;
        let (lrows, rrows): (Vec<usize>, Vec<usize>) =
            node.covered.iter().partition(|&&i| ds.value(i, s.attr) <= s.threshold);
        let depth = node.depth + 1;
        let left = self.nodes.len();
        let right = left + 1;
        self.nodes.push(TreeNode {
            rule: lrule.with_histogram(ds.histogram(&lrows)),
            covered: lrows,
            depth,
            split: None,
        });
        self.nodes.push(TreeNode {
            rule: rrule.with_histogram(ds.histogram(&rrows)),
            covered: rrows,
            depth,
            split: None,
        });
        self.nodes[id].split = Some(NodeSplit {
            attr: s.attr,
            threshold: s.threshold,
            gain: s.gain,
            left,
            right,
        });
        Ok((left, right))
    }

    /// Reachable node ids, depth first, left before right.
    pub fn reachable(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(id) = stack.pop() {
            out.push(id);
            if let Some(s) = self.nodes[id].split {
                stack.push(s.right);
                stack.push(s.left);
            }
        }
        out
    }

    pub fn leaves(&self) -> Vec<usize> {
        self.reachable()
            .into_iter()
            .filter(|&id| self.nodes[id].split.is_none())
            .collect()
    }

    pub fn internal_nodes(&self) -> Vec<usize> {
        self.reachable()
            .into_iter()
            .filter(|&id| self.nodes[id].split.is_some())
            .collect()
    }

    pub fn max_depth(&self) -> usize {
        self.reachable()
            .iter()
            .map(|&id| self.nodes[id].depth)
            .max()
            .unwrap_or(0)
    }

    pub fn total_length(&self) -> usize {
        self.leaves().iter().map(|&id| self.nodes[id].rule.length()).sum()
    }

    pub fn score(&self, kind: ScoreKind) -> f64 {
        let leaves = self.leaves();
        kind.from_leaves(
            leaves
                .iter()
                .map(|&id| (self.nodes[id].rule.label, self.nodes[id].rule.histogram.as_slice())),
        )
    }

    pub fn to_rule_set(&self) -> RuleSet {
        RuleSet::new(
            self.attributes.clone(),
            self.class_count,
            self.leaves()
                .into_iter()
                .map(|id| self.nodes[id].rule.clone())
                .collect(),
        )
    }

    /// Turns an internal node into a leaf.
    pub fn collapse(&mut self, id: usize) {
        self.nodes[id].split = None;
    }

    /// Internal nodes whose children are both leaves.
    fn prunable(&self) -> Vec<usize> {
        self.internal_nodes()
            .into_iter()
            .filter(|&id| {
                let s = self.nodes[id].split.expect("internal");
                self.nodes[s.left].split.is_none() && self.nodes[s.right].split.is_none()
            })
            .collect()
    }

    /// Score after hypothetically collapsing `id`.
    fn score_without(&self, id: usize, kind: ScoreKind) -> f64 {
        let s = self.nodes[id].split.expect("internal");
        let leaves = self.leaves();
        let cells = leaves
            .iter()
            .filter(|&&l| l != s.left && l != s.right)
            .chain(std::iter::once(&id))
            .map(|&l| (self.nodes[l].rule.label, self.nodes[l].rule.histogram.as_slice()));
        kind.from_leaves(cells)
    }

    /// The collapse that costs the least score, preferring the larger length
    /// reduction and then the smaller node id. Returns `(node, score after)`.
    fn cheapest_collapse(&self, kind: ScoreKind) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, usize)> = None;
        for id in self.prunable() {
            let s = self.nodes[id].split.expect("internal");
            let saved =
                self.nodes[s.left].rule.length() + self.nodes[s.right].rule.length() - self.nodes[id].rule.length();
            let after = self.score_without(id, kind);
            let better = match best {
                None => true,
                Some((_, b_after, b_saved)) => {
                    if (after - b_after).abs() > 1e-12 {
                        after > b_after
                    } else {
                        saved > b_saved
                    }
                }
            };
            if better {
                best = Some((id, after, saved));
            }
        }
        best.map(|(id, after, _)| (id, after))
    }
}

/// A baseline model and how it was obtained.
#[derive(Debug, Clone)]
pub struct BaselineFit {
    pub tree: DecisionTree,
    pub rules: RuleSet,
    pub score: f64,
    pub status: FitStatus,
    /// Depth limit used (ID3) or the full tree's depth (CART).
    pub depth: usize,
}

impl BaselineFit {
    fn new(tree: DecisionTree, kind: ScoreKind, status: FitStatus, depth: usize) -> Self {
        let score = tree.score(kind);
        Self {
            rules: tree.to_rule_set(),
            tree,
            score,
            status,
            depth,
        }
    }
}

/// Grows a tree breadth first, splitting each node on its largest-gain split
/// while `depth` allows.
fn grow(ds: &Dataset, max_depth: usize, opts: &BaselineOptions, min_gain: Option<f64>) -> Result<DecisionTree> {
    let mut tree = DecisionTree::with_root(ds);
    let mut frontier = vec![0usize];
    while let Some(id) = frontier.pop() {
        let node = &tree.nodes[id];
        if node.depth >= max_depth || node.rule.histogram.iter().filter(|&&c| c > 0).count() < 2 {
            continue;
        }
        if let Some(s) = best_gain_split(&node.rule, ds, &node.covered, opts.len_max, min_gain) {
            let (l, r) = tree.split_node(ds, id, s)?;
            frontier.push(r);
            frontier.push(l);
        }
    }
    Ok(tree)
}

/// Greedy information-gain tree of at most `depth` levels.
pub fn id3_fit_depth(ds: &Dataset, depth: usize, opts: &BaselineOptions) -> Result<BaselineFit> {
    if depth == 0 {
        return Err(Error::Config("depth must be at least 1".into()));
    }
    let tree = grow(ds, depth, opts, Some(EPSILON))?;
    Ok(BaselineFit::new(tree, opts.score, FitStatus::Reached, depth))
}

/// ID3 trees for depth `0, 1, ...` until the tree stops growing, capped at
/// [`MAX_SWEEP_DEPTH`].
pub fn id3_depth_path(ds: &Dataset, opts: &BaselineOptions) -> Result<Vec<BaselineFit>> {
    let mut out = vec![BaselineFit::new(
        DecisionTree::with_root(ds),
        opts.score,
        FitStatus::Reached,
        0,
    )];
    for depth in 1..=sweep_cap(ds) {
        let fit = id3_fit_depth(ds, depth, opts)?;
        let grew = fit.tree.max_depth() == depth;
        out.push(fit);
        if !grew {
            break;
        }
    }
    Ok(out)
}

fn sweep_cap(ds: &Dataset) -> usize {
    MAX_SWEEP_DEPTH.min(ds.dim().saturating_mul(ds.len()))
}

/// The shallowest ID3 tree, starting at `depth_start`, whose score exceeds
/// `f1_min`. When none does, the deepest tree is returned as exhausted.
pub fn id3_sweep(ds: &Dataset, f1_min: f64, depth_start: usize, opts: &BaselineOptions) -> Result<BaselineFit> {
    let cap = sweep_cap(ds).max(depth_start);
    let mut depth = depth_start.max(1);
    loop {
        let mut fit = id3_fit_depth(ds, depth, opts)?;
        if fit.score > f1_min {
            return Ok(fit);
        }
        if fit.tree.max_depth() < depth || depth >= cap {
            fit.status = FitStatus::Exhausted;
            return Ok(fit);
        }
        depth += 1;
    }
}

/// Fully grown tree: every impure node with a usable threshold is split.
pub fn grow_full(ds: &Dataset, opts: &BaselineOptions) -> Result<DecisionTree> {
    grow(ds, usize::MAX, opts, None)
}

/// Grows a full tree, then collapses the cheapest prunable node while the
/// score stays above `f1_min`.
pub fn cart_fit(ds: &Dataset, f1_min: f64, opts: &BaselineOptions) -> Result<BaselineFit> {
    let mut tree = grow_full(ds, opts)?;
    let depth = tree.max_depth();
    if tree.score(opts.score) <= f1_min {
        return Ok(BaselineFit::new(tree, opts.score, FitStatus::Exhausted, depth));
    }
    while let Some((id, after)) = tree.cheapest_collapse(opts.score) {
        if after <= f1_min {
            break;
        }
        tree.collapse(id);
    }
    Ok(BaselineFit::new(tree, opts.score, FitStatus::Reached, depth))
}

/// Grows a full tree and prunes in the same order as [`cart_fit`] until the
/// total rule length is within `budget`.
pub fn cart_prune_to_length(ds: &Dataset, budget: usize, opts: &BaselineOptions) -> Result<BaselineFit> {
    let mut tree = grow_full(ds, opts)?;
    let depth = tree.max_depth();
    while tree.total_length() > budget {
        let (id, _) = tree.cheapest_collapse(opts.score).expect("a non-root tree is prunable");
        tree.collapse(id);
    }
    Ok(BaselineFit::new(tree, opts.score, FitStatus::Reached, depth))
}
