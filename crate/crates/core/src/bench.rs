//! Experiment harness: rule length at a fixed score, score at a fixed
//! length, and hyperparameter grids, all reported as flat rows.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{cart_fit, cart_prune_to_length, id3_depth_path, id3_sweep, BaselineOptions};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::lstair::{lstair_fit, LStairConfig, LStairModel};
use crate::metrics::ScoreKind;
use crate::rules::{ModelInfo, RuleSet};
use crate::stair::{stair_fit, StairConfig};
use crate::FitStatus;

/// Depth the ID3 sweep starts from.
pub const ID3_START_DEPTH: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub dataset: String,
    pub score: ScoreKind,
    pub seed: u64,
    pub lambda: f64,
    pub max_iter: usize,
    /// Initial partition counts tried for L-STAIR; the best run is kept.
    pub lstair_inits: Vec<usize>,
    /// Fraction of rows held out for a test score. `None` trains and scores
    /// on every row.
    pub holdout: Option<f64>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            dataset: "data".into(),
            score: ScoreKind::F1,
            seed: 0,
            lambda: 0.1,
            max_iter: 10,
            lstair_inits: vec![2, 4, 8],
            holdout: None,
        }
    }
}

impl BenchOptions {
    fn validate(&self) -> Result<()> {
        if self.lstair_inits.is_empty() || self.lstair_inits.contains(&0) {
            return Err(Error::Config("lstair_inits must be non-empty and positive".into()));
        }
        if let Some(f) = self.holdout {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config("holdout fraction must lie in (0, 1)".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    pub dataset: String,
    /// Score threshold; absent for fixed-length runs.
    pub f1_min: Option<f64>,
    pub len_max: usize,
    /// Total length budget, for fixed-length runs.
    pub budget: Option<usize>,
    pub total_length: usize,
    pub rule_count: usize,
    pub partition_count: usize,
    pub score: f64,
    pub test_score: Option<f64>,
    pub status: FitStatus,
    /// Seconds spent in the learner.
    pub wall_time: f64,
    /// File name of the exported model.
    pub artifact: String,
}

impl BenchRow {
    /// Whether the learner met its score requirement.
    pub fn feasible(&self) -> bool {
        !self.status.is_flagged()
    }
}

/// A fitted model in exportable form.
#[derive(Debug, Clone)]
pub enum BenchModel {
    Rules(RuleSet),
    Partitioned(LStairModel),
}

impl BenchModel {
    pub fn total_length(&self) -> usize {
        match self {
            BenchModel::Rules(r) => r.total_length(),
            BenchModel::Partitioned(m) => m.total_length(),
        }
    }

    pub fn rule_count(&self) -> usize {
        match self {
            BenchModel::Rules(r) => r.len(),
            BenchModel::Partitioned(m) => m.rule_count(),
        }
    }

    pub fn partition_count(&self) -> usize {
        match self {
            BenchModel::Rules(_) => 1,
            BenchModel::Partitioned(m) => m.partition_count(),
        }
    }

    pub fn predict_all(&self, ds: &Dataset) -> Result<Vec<usize>> {
        match self {
            BenchModel::Rules(r) => r.predict_all(ds),
            BenchModel::Partitioned(m) => m.predict_all(ds),
        }
    }

    pub fn to_json(&self, info: ModelInfo) -> Result<String> {
        let text = match self {
            BenchModel::Rules(r) => {
                let mut doc = r.to_document();
                doc.info = Some(info);
                serde_json::to_string_pretty(&doc)?
            }
            BenchModel::Partitioned(m) => {
                let mut doc = m.to_document();
                doc.info = Some(info);
                serde_json::to_string_pretty(&doc)?
            }
        };
        Ok(text)
    }
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Soft-check violations and other remarks.
    pub notes: Vec<String>,
    /// `(file name, contents)` of exported models and traces.
    pub artifacts: Vec<(String, String)>,
}

const TSV_HEADER: [&str; 14] = [
    "method",
    "dataset",
    "f1_min",
    "len_max",
    "budget",
    "total_length",
    "rule_count",
    "partition_count",
    "score",
    "test_score",
    "status",
    "feasible",
    "wall_time",
    "artifact",
];

impl BenchReport {
    fn fields(row: &BenchRow) -> Vec<String> {
        vec![
            row.method.clone(),
            row.dataset.clone(),
            row.f1_min.map(|f| f.to_string()).unwrap_or_default(),
            row.len_max.to_string(),
            row.budget.map(|b| b.to_string()).unwrap_or_default(),
            row.total_length.to_string(),
            row.rule_count.to_string(),
            row.partition_count.to_string(),
            format!("{:.4}", row.score),
            row.test_score.map(|s| format!("{s:.4}")).unwrap_or_default(),
            row.status.to_string(),
            row.feasible().to_string(),
            format!("{:.4}", row.wall_time),
            row.artifact.clone(),
        ]
    }

    pub fn to_tsv(&self) -> String {
        let mut out = TSV_HEADER.join("\t");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&Self::fields(row).join("\t"));
            out.push('\n');
        }
        out
    }

    /// Column-aligned table; wall time and artifact names are omitted.
    pub fn to_table(&self) -> String {
        let keep = [0usize, 2, 3, 4, 5, 6, 7, 8, 9, 10];
        let mut cells: Vec<Vec<String>> = vec![keep.iter().map(|&i| TSV_HEADER[i].to_string()).collect()];
        for row in &self.rows {
            let f = Self::fields(row);
            cells.push(keep.iter().map(|&i| f[i].clone()).collect());
        }
        let widths: Vec<usize> = (0..keep.len())
            .map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (n, r) in cells.iter().enumerate() {
            let line: Vec<String> = r.iter().zip(&widths).map(|(v, w)| format!("{v:<w$}")).collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
            if n == 0 {
                let _ = writeln!(
                    out,
                    "{}",
                    "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))
                );
            }
        }
        out
    }

    /// Writes the report, notes, config echo and artifacts into `dir`.
    pub fn write_run<C: Serialize>(&self, dir: impl AsRef<Path>, config: &C) -> Result<()> {
        let dir = dir.as_ref();
        let io = |path: &Path, source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let mut files = vec![
            ("config.json".to_string(), serde_json::to_string_pretty(config)?),
            ("report.tsv".to_string(), self.to_tsv()),
            ("report.txt".to_string(), self.to_table()),
            (
                "notes.txt".to_string(),
                self.notes.iter().map(|n| format!("{n}\n")).collect(),
            ),
        ];
        files.extend(self.artifacts.iter().cloned());
        for (name, text) in files {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| io(&path, e))?;
        }
        Ok(())
    }

    fn push(&mut self, ctx: &Ctx<'_>, cell: Cell, run: Run) -> Result<()> {
        let artifact = format!(
            "{}_{}.json",
            cell.method.to_lowercase().replace(['-', ' '], "_"),
            self.rows.len()
        );
        let info = ModelInfo {
            method: cell.method.to_string(),
            status: run.status,
            score_kind: ctx.opts.score,
            score: run.score,
            threshold: cell.f1_min,
        };
        self.artifacts.push((artifact.clone(), run.model.to_json(info)?));
        if let Some(trace) = run.trace {
            self.artifacts.push((artifact.replace(".json", "_trace.tsv"), trace));
        }
        let test_score = match ctx.test {
            Some(test) => Some(ctx.opts.score.evaluate(test.labels(), &run.model.predict_all(test)?)?),
            None => None,
        };
        self.rows.push(BenchRow {
            method: cell.method.to_string(),
            dataset: ctx.opts.dataset.clone(),
            f1_min: cell.f1_min,
            len_max: cell.len_max,
            budget: cell.budget,
            total_length: run.model.total_length(),
            rule_count: run.model.rule_count(),
            partition_count: run.model.partition_count(),
            score: run.score,
            test_score,
            status: run.status,
            wall_time: run.wall_time,
            artifact,
        });
        Ok(())
    }

    /// Rows of one method, in insertion order.
    pub fn method_rows<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a BenchRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method)
    }
}

pub const ID3: &str = "ID3";
pub const CART: &str = "CART";
pub const STAIR: &str = "STAIR";
pub const LSTAIR: &str = "L-STAIR";

struct Ctx<'a> {
    train: Dataset,
    test: Option<&'a Dataset>,
    opts: &'a BenchOptions,
}

struct Cell {
    method: &'static str,
    f1_min: Option<f64>,
    len_max: usize,
    budget: Option<usize>,
}

struct Run {
    model: BenchModel,
    score: f64,
    status: FitStatus,
    wall_time: f64,
    trace: Option<String>,
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64()))
}

/// Splits rows into train and test parts with a seeded shuffle.
pub fn holdout_split(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((ds.len() as f64) * fraction).round() as usize;
    if n_test == 0 || n_test >= ds.len() {
        return Err(Error::Config("holdout leaves an empty train or test part".into()));
    }
    let (test, train) = idx.split_at(n_test);
    let mut train = train.to_vec();
    let mut test = test.to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.subset(&train)?, ds.subset(&test)?))
}

fn with_ctx<T>(ds: &Dataset, opts: &BenchOptions, f: impl FnOnce(&Ctx<'_>) -> Result<T>) -> Result<T> {
    opts.validate()?;
    match opts.holdout {
        Some(frac) => {
            let (train, test) = holdout_split(ds, frac, opts.seed)?;
            f(&Ctx {
                train,
                test: Some(&test),
                opts,
            })
        }
        None => f(&Ctx {
            train: ds.clone(),
            test: None,
            opts,
        }),
    }
}

fn stair_config(opts: &BenchOptions, f1_min: f64, len_max: usize) -> StairConfig {
    StairConfig {
        f1_min,
        len_max,
        score: opts.score,
        ..StairConfig::default()
    }
}

fn baseline_options(opts: &BenchOptions, len_max: usize) -> BaselineOptions {
    BaselineOptions {
        score: opts.score,
        len_max: Some(len_max),
    }
}

fn run_id3(ctx: &Ctx<'_>, f1_min: f64, len_max: usize) -> Result<Run> {
    let (fit, t) = timed(|| {
        id3_sweep(
            &ctx.train,
            f1_min,
            ID3_START_DEPTH,
            &baseline_options(ctx.opts, len_max),
        )
    })?;
    Ok(Run {
        score: fit.score,
        status: fit.status,
        model: BenchModel::Rules(fit.rules),
        wall_time: t,
        trace: None,
    })
}

fn run_cart(ctx: &Ctx<'_>, f1_min: f64, len_max: usize) -> Result<Run> {
    let (fit, t) = timed(|| cart_fit(&ctx.train, f1_min, &baseline_options(ctx.opts, len_max)))?;
    Ok(Run {
        score: fit.score,
        status: fit.status,
        model: BenchModel::Rules(fit.rules),
        wall_time: t,
        trace: None,
    })
}

fn run_stair(ctx: &Ctx<'_>, cfg: &StairConfig) -> Result<Run> {
    let (fit, t) = timed(|| stair_fit(&ctx.train, cfg))?;
    Ok(Run {
        score: fit.score,
        status: fit.status,
        model: BenchModel::Rules(fit.rules),
        wall_time: t,
        trace: Some(fit.trace.to_tsv()),
    })
}

/// Best L-STAIR run over the configured initial partition counts: the
/// shortest run that meets the threshold, else the highest score.
fn run_lstair(ctx: &Ctx<'_>, f1_min: f64, len_max: usize) -> Result<Run> {
    let mut best: Option<Run> = None;
    for &n_init in &ctx.opts.lstair_inits {
        let cfg = LStairConfig {
            stair: stair_config(ctx.opts, f1_min, len_max),
            n_init,
            lambda: ctx.opts.lambda,
            max_iter: ctx.opts.max_iter,
            seed: ctx.opts.seed,
            ..LStairConfig::default()
        };
        let (fit, t) = timed(|| lstair_fit(&ctx.train, &cfg))?;
        let trace = serde_json::to_string_pretty(&fit.trace)?;
        let run = Run {
            score: fit.score,
            status: fit.status,
            model: BenchModel::Partitioned(fit.model),
            wall_time: t,
            trace: Some(trace),
        };
        let better = match &best {
            None => true,
            Some(b) => match (run.status.is_flagged(), b.status.is_flagged()) {
                (false, true) => true,
                (true, false) => false,
                (false, false) => run.model.total_length() < b.model.total_length(),
                (true, true) => run.score > b.score,
            },
        };
        if better {
            let prev = best.as_ref().map_or(0.0, |b| b.wall_time);
            best = Some(Run {
                wall_time: run.wall_time + prev,
                ..run
            });
        } else if let Some(b) = best.as_mut() {
            b.wall_time += run.wall_time;
        }
    }
    Ok(best.expect("at least one initial partition count"))
}

fn run_all(report: &mut BenchReport, ctx: &Ctx<'_>, f1_min: f64, len_max: usize) -> Result<()> {
    let cell = |method| Cell {
        method,
        f1_min: Some(f1_min),
        len_max,
        budget: None,
    };
    report.push(ctx, cell(ID3), run_id3(ctx, f1_min, len_max)?)?;
    report.push(ctx, cell(CART), run_cart(ctx, f1_min, len_max)?)?;
    report.push(
        ctx,
        cell(STAIR),
        run_stair(ctx, &stair_config(ctx.opts, f1_min, len_max))?,
    )?;
    report.push(ctx, cell(LSTAIR), run_lstair(ctx, f1_min, len_max)?)?;
    Ok(())
}

/// Total rule length each method needs to exceed `f1_min`.
pub fn run_length_comparison(ds: &Dataset, opts: &BenchOptions, f1_min: f64, len_max: usize) -> Result<BenchReport> {
    with_ctx(ds, opts, |ctx| {
        let mut report = BenchReport::default();
        run_all(&mut report, ctx, f1_min, len_max)?;
        for row in report.rows.iter().filter(|r| !r.feasible()) {
            report.notes.push(format!(
                "{} did not reach f1_min {}: {}",
                row.method, f1_min, row.status
            ));
        }
        Ok(report)
    })
}

/// Score of ID3, CART and STAIR when each is held to a total length of at
/// most `budget`, for every budget.
pub fn run_f1_vs_length(ds: &Dataset, opts: &BenchOptions, budgets: &[usize], len_max: usize) -> Result<BenchReport> {
    with_ctx(ds, opts, |ctx| {
        let mut report = BenchReport::default();
        let bopts = baseline_options(opts, len_max);
        let (path, path_time) = timed(|| id3_depth_path(&ctx.train, &bopts))?;
        for &budget in budgets {
            let cell = |method| Cell {
                method,
                f1_min: None,
                len_max,
                budget: Some(budget),
            };
            // deepest tree on the depth path that fits the budget
            let id3 = path
                .iter()
                .rev()
                .find(|f| f.tree.total_length() <= budget)
                .expect("the root tree has length 0");
            let run = Run {
                score: id3.score,
                status: FitStatus::Reached,
                model: BenchModel::Rules(id3.rules.clone()),
                wall_time: path_time,
                trace: None,
            };
            report.push(ctx, cell(ID3), run)?;

            let (cart, t) = timed(|| cart_prune_to_length(&ctx.train, budget, &bopts))?;
            let run = Run {
                score: cart.score,
                status: FitStatus::Reached,
                model: BenchModel::Rules(cart.rules),
                wall_time: t,
                trace: None,
            };
            report.push(ctx, cell(CART), run)?;

            let cfg = StairConfig {
                length_budget: Some(budget),
                ..stair_config(opts, 1.0, len_max)
            };
            report.push(ctx, cell(STAIR), run_stair(ctx, &cfg)?)?;
        }
        let stair: Vec<&BenchRow> = report.method_rows(STAIR).collect();
        let mut notes = Vec::new();
        for pair in stair.windows(2) {
            if pair[0].budget <= pair[1].budget && pair[1].score + 1e-12 < pair[0].score {
                notes.push(format!(
                    "STAIR score fell from {:.4} to {:.4} as the budget grew from {:?} to {:?}",
                    pair[0].score, pair[1].score, pair[0].budget, pair[1].budget
                ));
            }
        }
        report.notes.extend(notes);
        Ok(report)
    })
}

/// Every method on a grid of `L_m` values (at `f1_min`) and of `F1_m`
/// values (at `len_max`). Cells that miss the threshold stay in the report
/// with their status flagged.
pub fn run_sweeps(
    ds: &Dataset,
    opts: &BenchOptions,
    lm_values: &[usize],
    f1m_values: &[f64],
    f1_min: f64,
    len_max: usize,
) -> Result<BenchReport> {
    with_ctx(ds, opts, |ctx| {
        let mut report = BenchReport::default();
        for &lm in lm_values {
            run_all(&mut report, ctx, f1_min, lm)?;
        }
        let lm_rows = report.rows.len();
        for &f1m in f1m_values {
            run_all(&mut report, ctx, f1m, len_max)?;
        }
        let stair: Vec<&BenchRow> = report.rows[..lm_rows]
            .iter()
            .filter(|r| r.method == STAIR && r.feasible())
            .collect();
        let mut notes = Vec::new();
        for pair in stair.windows(2) {
            if pair[1].len_max > pair[0].len_max && pair[1].total_length > pair[0].total_length {
                notes.push(format!(
                    "STAIR total length rose from {} to {} as L_m grew from {} to {}",
                    pair[0].total_length, pair[1].total_length, pair[0].len_max, pair[1].len_max
                ));
            }
        }
        for row in report.rows.iter().filter(|r| !r.feasible()) {
            notes.push(format!(
                "infeasible: {} at f1_min {} len_max {} scored {:.4}",
                row.method,
                row.f1_min.unwrap_or(f64::NAN),
                row.len_max,
                row.score
            ));
        }
        report.notes.extend(notes);
        Ok(report)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth;
    use crate::lstair::LStairDocument;
    use crate::rules::RuleSetDocument;

    fn quick() -> BenchOptions {
        BenchOptions {
            dataset: "band".into(),
            lstair_inits: vec![2],
            ..BenchOptions::default()
        }
    }

    fn artifact<'a>(report: &'a BenchReport, name: &str) -> &'a str {
        &report.artifacts.iter().find(|(n, _)| n == name).unwrap().1
    }

    #[test]
    fn band_lengths_are_three() {
        let ds = synth::gen_band2d(300, 40, 1);
        let report = run_length_comparison(&ds, &quick(), 0.8, 10).unwrap();
        assert_eq!(report.rows.len(), 4);
        for row in &report.rows {
            assert!(row.feasible(), "{row:?}");
            if row.method == LSTAIR {
                // every partition needs its own boundary rules
                assert!(row.total_length >= 3);
            } else {
                assert_eq!(row.total_length, 3, "{}", row.method);
            }
        }
    }

    #[test]
    fn reported_lengths_match_artifacts() {
        let ds = synth::gen_random(150, 3, 2, 0.05, 3);
        let report = run_length_comparison(&ds, &quick(), 0.8, 10).unwrap();
        for row in &report.rows {
            let text = artifact(&report, &row.artifact);
            let len = if row.method == LSTAIR {
                let doc: LStairDocument = serde_json::from_str(text).unwrap();
                LStairModel::from_document(&doc).unwrap().total_length()
            } else {
                let doc: RuleSetDocument = serde_json::from_str(text).unwrap();
                RuleSet::from_document(&doc).unwrap().total_length()
            };
            assert_eq!(len, row.total_length, "{}", row.method);
        }
    }

    #[test]
    fn zero_budget_scores_root() {
        let ds = synth::gen_band2d(100, 20, 2);
        let report = run_f1_vs_length(&ds, &quick(), &[0, 1, 3], 10).unwrap();
        let root = ScoreKind::F1.evaluate(ds.labels(), &vec![0; ds.len()]).unwrap();
        for row in report.rows.iter().filter(|r| r.budget == Some(0)) {
            assert_eq!(row.total_length, 0);
            assert_eq!(row.score, root, "{}", row.method);
        }
        for row in &report.rows {
            assert!(row.total_length <= row.budget.unwrap());
        }
    }

    #[test]
    fn sweeps_flag_infeasible_cells() {
        // identical points with conflicting labels cap every learner
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i / 4) as f64, (i % 2) as f64]).collect();
        let labels = (0..40).map(|i| usize::from(i % 4 >= 2)).collect();
        let ds = Dataset::new(vec!["a".into(), "b".into()], rows, labels).unwrap();
        let report = run_sweeps(&ds, &quick(), &[1, 2], &[0.3, 0.99], 0.95, 10).unwrap();
        assert_eq!(report.rows.len(), 16);
        let infeasible = report.rows.iter().filter(|r| !r.feasible()).count();
        assert!(report
            .rows
            .iter()
            .filter(|r| r.f1_min != Some(0.3))
            .all(|r| !r.feasible()));
        assert_eq!(
            report.notes.iter().filter(|n| n.starts_with("infeasible")).count(),
            infeasible
        );
    }

    #[test]
    fn deterministic_reports() {
        let ds = synth::gen_random(120, 2, 2, 0.05, 8);
        let a = run_length_comparison(&ds, &quick(), 0.8, 10).unwrap();
        let b = run_length_comparison(&ds, &quick(), 0.8, 10).unwrap();
        let strip = |r: &BenchReport| {
            r.rows
                .iter()
                .map(|x| (x.method.clone(), x.total_length, x.score.to_bits(), x.status))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.artifacts, b.artifacts);
    }

    #[test]
    fn holdout_adds_test_scores() {
        let ds = synth::gen_band2d(200, 40, 5);
        let opts = BenchOptions {
            holdout: Some(0.25),
            ..quick()
        };
        let report = run_length_comparison(&ds, &opts, 0.8, 10).unwrap();
        assert!(report.rows.iter().all(|r| r.test_score.is_some()));
        assert!(run_length_comparison(
            &ds,
            &BenchOptions {
                holdout: Some(1.5),
                ..quick()
            },
            0.8,
            10
        )
        .is_err());
    }

    #[test]
    fn write_run_creates_files() {
        let ds = synth::gen_band2d(80, 10, 5);
        let report = run_length_comparison(&ds, &quick(), 0.8, 10).unwrap();
        let dir = tempfile::tempdir().unwrap();
        report.write_run(dir.path(), &quick()).unwrap();
        let tsv = std::fs::read_to_string(dir.path().join("report.tsv")).unwrap();
        assert_eq!(tsv.lines().count(), 5);
        assert!(dir.path().join("config.json").exists());
        assert!(dir.path().join(&report.rows[0].artifact).exists());
        assert!(report.to_table().contains("STAIR"));
    }
}
