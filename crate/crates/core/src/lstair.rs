//! Localized rule learning: partition the data and learn one rule set per
//! partition, alternating between tree fitting and reassignment.
//!
//! The partitioning objective is
//! `sum_i sum_{x in C_i} err(DT_i(x), y) + lambda * ||z(x) - center_i||^2`,
//! where `z` z-scores the features and `err` counts misclassifications
//! (squared 0/1 error for binary labels, squared one-hot error otherwise).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, StandardizationParams};
use crate::error::{Error, Result};
use crate::kmeans::{self, nearest, sq_dist};
use crate::rules::{ModelInfo, RuleSet, RuleSetDocument, FORMAT_VERSION};
use crate::stair::{stair_fit, StairConfig};
use crate::FitStatus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LStairConfig {
    pub stair: StairConfig,
    /// Number of initial k-means partitions.
    pub n_init: usize,
    /// Weight of the locality term, in `(0, 1)`.
    pub lambda: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Pieces a low-scoring partition is split into.
    pub split_into: usize,
    /// Try dissolving partitions whose points fit elsewhere at no cost.
    pub merge_redundant: bool,
    pub kmeans_iter: usize,
}

impl Default for LStairConfig {
    fn default() -> Self {
        Self {
            stair: StairConfig::default(),
            n_init: 2,
            lambda: 0.1,
            max_iter: 10,
            seed: 0,
            split_into: 2,
            merge_redundant: false,
            kmeans_iter: 100,
        }
    }
}

impl LStairConfig {
    pub fn validate(&self) -> Result<()> {
        self.stair.validate()?;
        if self.n_init == 0 {
            return Err(Error::Config("n_init must be at least 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::Config("lambda must lie in (0, 1)".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if self.split_into < 2 {
            return Err(Error::Config("split_into must be at least 2".into()));
        }
        Ok(())
    }
}

/// Partition id per point plus partition centers in z-scored space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partitioning {
    pub assignments: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
}

impl Partitioning {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.centers.len()];
        for (i, &a) in self.assignments.iter().enumerate() {
            m[a].push(i);
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LStairModel {
    pub partitioning: Partitioning,
    /// One rule set per partition.
    pub trees: Vec<RuleSet>,
    pub standardization: StandardizationParams,
    pub lambda: f64,
}

/// Squared error between a predicted and a true class.
fn point_error(pred: usize, truth: usize, class_count: usize) -> f64 {
    match (pred == truth, class_count) {
        (true, _) => 0.0,
        (false, 2) => 1.0,
        (false, _) => 2.0,
    }
}

/// Precomputed z-scores and the cost terms of the partitioning objective.
struct Workspace<'a> {
    ds: &'a Dataset,
    z: Vec<Vec<f64>>,
    lambda: f64,
}

impl<'a> Workspace<'a> {
    fn new(ds: &'a Dataset, params: &StandardizationParams, lambda: f64) -> Self {
        Self {
            ds,
            z: ds.rows().map(|r| params.apply(r)).collect(),
            lambda,
        }
    }

    fn error(&self, i: usize, tree: &RuleSet) -> Result<f64> {
        let pred = tree.predict(self.ds.row(i))?;
        Ok(point_error(pred, self.ds.label(i), self.ds.class_count()))
    }

    fn cost(&self, i: usize, tree: &RuleSet, center: &[f64]) -> Result<f64> {
        Ok(self.error(i, tree)? + self.lambda * sq_dist(&self.z[i], center))
    }

    fn objective(&self, part: &Partitioning, trees: &[RuleSet]) -> Result<f64> {
        let mut total = 0.0;
        for (i, &k) in part.assignments.iter().enumerate() {
            total += self.cost(i, &trees[k], &part.centers[k])?;
        }
        Ok(total)
    }

    /// Moves every point to its cheapest partition (ties to the smaller id)
    /// and recenters. Centers of emptied partitions are left in place.
    fn reassign(&self, part: &Partitioning, trees: &[RuleSet]) -> Result<Partitioning> {
        let assignments = (0..self.ds.len())
            .into_par_iter()
            .map(|i| {
                let mut best = 0;
                let mut best_cost = f64::INFINITY;
                for (k, (tree, center)) in trees.iter().zip(&part.centers).enumerate() {
                    let c = self.cost(i, tree, center)?;
                    if c < best_cost {
                        best = k;
                        best_cost = c;
                    }
                }
                Ok(best)
            })
            .collect::<Result<Vec<usize>>>()?;
        Ok(self.recenter(assignments, &part.centers))
    }

    fn recenter(&self, assignments: Vec<usize>, previous: &[Vec<f64>]) -> Partitioning {
        let mut part = Partitioning {
            assignments,
            centers: previous.to_vec(),
        };
        for (k, members) in part.members().into_iter().enumerate() {
            if let Some(c) = kmeans::mean(&self.z, members) {
                part.centers[k] = c;
            }
        }
        part
    }

    fn score(
        &self,
        part: &Partitioning,
        trees: &[RuleSet],
        members: Option<&[usize]>,
        cfg: &StairConfig,
    ) -> Result<f64> {
        let rows: Vec<usize> = match members {
            Some(m) => m.to_vec(),
            None => (0..self.ds.len()).collect(),
        };
        let mut truth = Vec::with_capacity(rows.len());
        let mut pred = Vec::with_capacity(rows.len());
        for i in rows {
            truth.push(self.ds.label(i));
            pred.push(trees[part.assignments[i]].predict(self.ds.row(i))?);
        }
        cfg.score.evaluate(&truth, &pred)
    }
}

/// Drops partitions with no points, renumbering the rest in order.
pub fn remove_empty(part: &Partitioning, trees: &[RuleSet]) -> (Partitioning, Vec<RuleSet>) {
    let members = part.members();
    let mut remap = vec![usize::MAX; part.len()];
    let mut centers = Vec::new();
    let mut kept = Vec::new();
    for (k, m) in members.iter().enumerate() {
        if !m.is_empty() {
            remap[k] = centers.len();
            centers.push(part.centers[k].clone());
            kept.push(trees[k].clone());
        }
    }
    let assignments = part.assignments.iter().map(|&a| remap[a]).collect();
    (Partitioning { assignments, centers }, kept)
}

/// Value of the partitioning objective for a model on `ds`.
pub fn partition_objective(model: &LStairModel, ds: &Dataset) -> Result<f64> {
    model.check(ds)?;
    Workspace::new(ds, &model.standardization, model.lambda).objective(&model.partitioning, &model.trees)
}

/// One reassignment step with the model's trees held fixed.
pub fn reassign(model: &LStairModel, ds: &Dataset) -> Result<Partitioning> {
    model.check(ds)?;
    Workspace::new(ds, &model.standardization, model.lambda).reassign(&model.partitioning, &model.trees)
}

impl LStairModel {
    fn check(&self, ds: &Dataset) -> Result<()> {
        if ds.dim() != self.standardization.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.standardization.dim(),
                got: ds.dim(),
            });
        }
        if ds.len() != self.partitioning.assignments.len() {
            return Err(Error::LengthMismatch {
                left: self.partitioning.assignments.len(),
                right: ds.len(),
            });
        }
        Ok(())
    }

    pub fn partition_count(&self) -> usize {
        self.trees.len()
    }

    pub fn total_length(&self) -> usize {
        self.trees.iter().map(RuleSet::total_length).sum()
    }

    pub fn rule_count(&self) -> usize {
        self.trees.iter().map(RuleSet::len).sum()
    }

    pub fn max_length(&self) -> usize {
        self.trees.iter().map(RuleSet::max_length).max().unwrap_or(0)
    }

    /// Partition of an unlabeled point: nearest center in z-scored space.
    pub fn partition_of(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.standardization.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.standardization.dim(),
                got: x.len(),
            });
        }
        Ok(nearest(&self.standardization.apply(x), &self.partitioning.centers))
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        self.trees[self.partition_of(x)?].predict(x)
    }

    pub fn predict_all(&self, ds: &Dataset) -> Result<Vec<usize>> {
        ds.rows().map(|r| self.predict(r)).collect()
    }

    pub fn to_document(&self) -> LStairDocument {
        LStairDocument {
            format: LSTAIR_FORMAT.to_string(),
            version: FORMAT_VERSION,
            info: None,
            lambda: self.lambda,
            standardization: self.standardization.clone(),
            centers: self.partitioning.centers.clone(),
            partitions: self.trees.iter().map(RuleSet::to_document).collect(),
        }
    }

    /// Rebuilds a model for prediction. Training assignments are not stored,
    /// so the result has none.
    pub fn from_document(doc: &LStairDocument) -> Result<LStairModel> {
        if doc.format != LSTAIR_FORMAT {
            return Err(Error::Malformed(format!("unexpected format `{}`", doc.format)));
        }
        if doc.version != FORMAT_VERSION {
            return Err(Error::Malformed(format!("unsupported version {}", doc.version)));
        }
        let d = doc.standardization.dim();
        if doc.standardization.std.len() != d || doc.standardization.std.iter().any(|s| s.is_nan() || *s <= 0.0) {
            return Err(Error::Malformed("bad standardization parameters".into()));
        }
        if doc.centers.is_empty() || doc.centers.len() != doc.partitions.len() {
            return Err(Error::Malformed("need one center per partition".into()));
        }
        if doc
            .centers
            .iter()
            .any(|c| c.len() != d || c.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Malformed("center dimension mismatch".into()));
        }
        let trees = doc
            .partitions
            .iter()
            .map(RuleSet::from_document)
            .collect::<Result<Vec<_>>>()?;
        if trees.iter().any(|t| t.attributes.len() != d) {
            return Err(Error::Malformed("partition rule set dimension mismatch".into()));
        }
        Ok(LStairModel {
            partitioning: Partitioning {
                assignments: Vec::new(),
                centers: doc.centers.clone(),
            },
            trees,
            standardization: doc.standardization.clone(),
            lambda: doc.lambda,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, tree) in self.trees.iter().enumerate() {
            out.push_str(&format!("# partition {k}\n"));
            out.push_str(&tree.render());
        }
        out
    }

    /// CSV with the row index and partition id of every training point.
    pub fn write_assignments<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["row", "partition"])?;
        for (i, a) in self.partitioning.assignments.iter().enumerate() {
            wtr.write_record([i.to_string(), a.to_string()])?;
        }
        wtr.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

pub const LSTAIR_FORMAT: &str = "lstair-model";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LStairDocument {
    pub format: String,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub info: Option<ModelInfo>,
    pub lambda: f64,
    pub standardization: StandardizationParams,
    pub centers: Vec<Vec<f64>>,
    pub partitions: Vec<RuleSetDocument>,
}

/// Objective values and sizes recorded in one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LStairStep {
    pub iteration: usize,
    /// After fitting a rule set on every partition.
    pub objective_built: f64,
    /// After reassignment and recentering.
    pub objective_reassigned: f64,
    /// After dropping empty partitions (and the optional merge pass).
    pub objective_cleaned: f64,
    /// After splitting low-scoring partitions, when any was split.
    pub objective_split: Option<f64>,
    pub partition_count: usize,
    pub score: f64,
    pub total_length: usize,
    pub splits: usize,
}

#[derive(Debug, Clone)]
pub struct LStairFit {
    pub model: LStairModel,
    pub trace: Vec<LStairStep>,
    pub status: FitStatus,
    pub score: f64,
}

fn fit_trees(ds: &Dataset, part: &Partitioning, cfg: &StairConfig) -> Result<Vec<RuleSet>> {
    part.members()
        .par_iter()
        .map(|m| Ok(stair_fit(&ds.subset(m)?, cfg)?.rules))
        .collect()
}

/// Dissolves each partition in turn into the others when that does not raise
/// the objective.
fn merge_redundant(
    ws: &Workspace<'_>,
    mut part: Partitioning,
    mut trees: Vec<RuleSet>,
) -> Result<(Partitioning, Vec<RuleSet>)> {
    let mut k = 0;
    while k < part.len() && part.len() > 1 {
        let current = ws.objective(&part, &trees)?;
        let mut assignments = part.assignments.clone();
        for (i, a) in assignments.iter_mut().enumerate() {
            if *a != k {
                continue;
            }
            let mut best = usize::MAX;
            let mut best_cost = f64::INFINITY;
            for (j, (tree, center)) in trees.iter().zip(&part.centers).enumerate() {
                if j == k {
                    continue;
                }
                let c = ws.cost(i, tree, center)?;
                if c < best_cost {
                    best = j;
                    best_cost = c;
                }
            }
            *a = best;
        }
        let candidate = ws.recenter(assignments, &part.centers);
        let (candidate, cand_trees) = remove_empty(&candidate, &trees);
        if ws.objective(&candidate, &cand_trees)? <= current {
            part = candidate;
            trees = cand_trees;
        } else {
            k += 1;
        }
    }
    Ok((part, trees))
}

/// Jointly learns a partitioning and one rule set per partition.
pub fn lstair_fit(ds: &Dataset, cfg: &LStairConfig) -> Result<LStairFit> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::InvalidDataset("empty dataset".into()));
    }
    let (_, params) = ds.standardize();
    let ws = Workspace::new(ds, &params, cfg.lambda);
    let init = kmeans::kmeans(&ws.z, cfg.n_init.min(ds.len()), cfg.seed, cfg.kmeans_iter);
    let mut part = Partitioning {
        assignments: init.assignments,
        centers: init.centers,
    };
    let tol = |v: f64| 1e-9 * v.abs().max(1.0);

    let mut trace = Vec::new();
    let mut status = FitStatus::Exhausted;
    let mut trees;
    let mut score;
    let mut iteration = 0;
    loop {
        iteration += 1;
        let start_assign = part.assignments.clone();
        trees = fit_trees(ds, &part, &cfg.stair)?;
        let objective_built = ws.objective(&part, &trees)?;

        part = ws.reassign(&part, &trees)?;
        let objective_reassigned = ws.objective(&part, &trees)?;
        debug_assert!(objective_reassigned <= objective_built + tol(objective_built));

        (part, trees) = remove_empty(&part, &trees);
        if cfg.merge_redundant {
            (part, trees) = merge_redundant(&ws, part, trees)?;
        }
        let objective_cleaned = ws.objective(&part, &trees)?;

        score = ws.score(&part, &trees, None, &cfg.stair)?;
        let mut step = LStairStep {
            iteration,
            objective_built,
            objective_reassigned,
            objective_cleaned,
            objective_split: None,
            partition_count: part.len(),
            score,
            total_length: trees.iter().map(RuleSet::total_length).sum(),
            splits: 0,
        };
        if score > cfg.stair.f1_min {
            trace.push(step);
            status = FitStatus::Reached;
            break;
        }
        if iteration >= cfg.max_iter {
            trace.push(step);
            break;
        }

        // split partitions whose own score is too low; pieces inherit the
        // parent's rule set until the next rebuild
        let members = part.members();
        let mut new_members: Vec<Vec<usize>> = Vec::new();
        let mut new_trees = Vec::new();
        for (k, m) in members.iter().enumerate() {
            let own = ws.score(&part, &trees, Some(m), &cfg.stair)?;
            if own <= cfg.stair.f1_min && m.len() >= 2 {
                let pts: Vec<Vec<f64>> = m.iter().map(|&i| ws.z[i].clone()).collect();
                let seed = cfg.seed.wrapping_add(1_000 * iteration as u64 + k as u64);
                let pieces = kmeans::split_cluster(&pts, cfg.split_into, seed, cfg.kmeans_iter);
                if pieces.centers.len() > 1 {
                    step.splits += 1;
                    let mut split = vec![Vec::new(); pieces.centers.len()];
                    for (j, &a) in pieces.assignments.iter().enumerate() {
                        split[a].push(m[j]);
                    }
                    for piece in split {
                        new_members.push(piece);
                        new_trees.push(trees[k].clone());
                    }
                    continue;
                }
            }
            new_members.push(m.clone());
            new_trees.push(trees[k].clone());
        }
        if step.splits > 0 {
            let mut assignments = vec![0; ds.len()];
            for (k, m) in new_members.iter().enumerate() {
                for &i in m {
                    assignments[i] = k;
                }
            }
            part = ws.recenter(assignments, &vec![Vec::new(); new_members.len()]);
            trees = new_trees;
            let objective_split = ws.objective(&part, &trees)?;
            debug_assert!(objective_split <= objective_cleaned + tol(objective_cleaned));
            step.objective_split = Some(objective_split);
            step.partition_count = part.len();
        }
        trace.push(step);
        if trace.last().is_some_and(|s| s.splits == 0) && part.assignments == start_assign {
            // fixed point: rebuilding would reproduce the same trees
            break;
        }
    }

    Ok(LStairFit {
        model: LStairModel {
            partitioning: part,
            trees,
            standardization: params,
            lambda: cfg.lambda,
        },
        trace,
        status,
        score,
    })
}
