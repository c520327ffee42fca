use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use stair::baselines::{cart_fit, id3_sweep, BaselineOptions};
use stair::bench::{run_f1_vs_length, run_length_comparison, run_sweeps, BenchOptions, BenchReport, ID3_START_DEPTH};
use stair::dataset::{synth, DEFAULT_LABEL_COLUMN};
use stair::lstair::{lstair_fit, LStairConfig, LStairDocument, LStairModel, LSTAIR_FORMAT};
use stair::rules::{ModelInfo, RuleSetDocument, RULES_FORMAT};
use stair::stair::{stair_fit, StairConfig};
use stair::{Dataset, Error, FitStatus, Result, RuleSet, ScoreKind};

#[derive(Parser)]
#[command(
    name = "stair",
    version,
    about = "Learn short interpretable rule sets from labeled data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic labeled dataset as CSV.
    Gen(GenArgs),
    /// Learn a model and write it as JSON.
    Fit(FitArgs),
    /// Print the rules of a model file.
    Explain {
        #[arg(long)]
        model: PathBuf,
    },
    /// Predict a class for every row of a CSV file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = DEFAULT_LABEL_COLUMN)]
        label_col: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment and write its report directory.
    Bench {
        #[arg(value_enum)]
        kind: BenchKind,
        #[command(flatten)]
        args: BenchArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Band2d,
    PimaLike,
    Xor,
    ThreeClass,
    Random,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "band2d")]
    kind: GenKind,
    #[arg(long, default_value_t = 1000)]
    inliers: usize,
    #[arg(long, default_value_t = 100)]
    outliers: usize,
    /// Row count for xor and random; rows per class for three-class.
    #[arg(long, default_value_t = 500)]
    rows: usize,
    /// Feature count for random.
    #[arg(long, default_value_t = 4)]
    dim: usize,
    /// Label noise for random.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = DEFAULT_LABEL_COLUMN)]
    label_col: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum Method {
    Stair,
    Lstair,
    Id3,
    Cart,
}

#[derive(Args, Clone)]
struct LearnerArgs {
    #[arg(long, default_value_t = 0.8)]
    f1_min: f64,
    #[arg(long, default_value_t = 10)]
    len_max: usize,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = 10)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Score the threshold applies to: f1 or accuracy.
    #[arg(long, default_value = "f1")]
    score: ScoreKind,
}

impl LearnerArgs {
    fn stair(&self) -> StairConfig {
        StairConfig {
            f1_min: self.f1_min,
            len_max: self.len_max,
            score: self.score,
            ..StairConfig::default()
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_enum, default_value = "stair")]
    method: Method,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = DEFAULT_LABEL_COLUMN)]
    label_col: String,
    #[command(flatten)]
    learner: LearnerArgs,
    /// Initial partition count for lstair.
    #[arg(long, default_value_t = 2)]
    clusters: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchKind {
    LengthComparison,
    F1VsLength,
    Sweeps,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = DEFAULT_LABEL_COLUMN)]
    label_col: String,
    #[command(flatten)]
    learner: LearnerArgs,
    /// Initial partition counts tried for lstair.
    #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
    inits: Vec<usize>,
    /// Total length budgets for f1-vs-length.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,6,8,10,12,16,20")]
    budgets: Vec<usize>,
    /// L_m grid for sweeps.
    #[arg(long, value_delimiter = ',', default_value = "2,4,6,8,10,12")]
    lm_values: Vec<usize>,
    /// F1_m grid for sweeps.
    #[arg(long, value_delimiter = ',', default_value = "0.7,0.75,0.8,0.85,0.9,0.95")]
    f1m_values: Vec<f64>,
    /// Hold out this fraction of rows and report test scores too.
    #[arg(long)]
    holdout: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

/// Failure of a command, mapped to the process exit code.
enum Failure {
    Invalid(Error),
    BelowThreshold,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Invalid(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::BelowThreshold) => ExitCode::from(2),
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> std::result::Result<(), Failure> {
    match cmd {
        Command::Gen(args) => gen(&args)?,
        Command::Fit(args) => return fit(&args),
        Command::Explain { model } => explain(&model)?,
        Command::Predict {
            model,
            data,
            label_col,
            out,
        } => predict(&model, &data, &label_col, &out)?,
        Command::Bench { kind, args } => bench(kind, &args)?,
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn gen(args: &GenArgs) -> Result<()> {
    let ds = match args.kind {
        GenKind::Band2d => synth::gen_band2d(args.inliers, args.outliers, args.seed),
        GenKind::PimaLike => synth::gen_pima_like(args.seed),
        GenKind::Xor => synth::gen_xor(args.rows, args.seed),
        GenKind::ThreeClass => synth::gen_three_class(args.rows, args.seed),
        GenKind::Random => {
            if args.dim < 2 || !(0.0..=1.0).contains(&args.noise) {
                return Err(Error::Config(
                    "random data needs --dim >= 2 and --noise in [0, 1]".into(),
                ));
            }
            synth::gen_random(args.rows, args.dim, 2, args.noise, args.seed)
        }
    };
    if ds.is_empty() {
        return Err(Error::Config("generated dataset is empty".into()));
    }
    ds.save_csv(&args.out, &args.label_col)?;
    println!(
        "wrote {} rows, {} features to {}",
        ds.len(),
        ds.dim(),
        args.out.display()
    );
    Ok(())
}

fn lstair_config(args: &FitArgs) -> LStairConfig {
    LStairConfig {
        stair: args.learner.stair(),
        n_init: args.clusters,
        lambda: args.learner.lambda,
        max_iter: args.learner.max_iter,
        seed: args.learner.seed,
        ..LStairConfig::default()
    }
}

fn fit(args: &FitArgs) -> std::result::Result<(), Failure> {
    let lcfg = lstair_config(args);
    lcfg.validate()?;
    let ds = Dataset::load_csv(&args.data, &args.label_col)?;
    info!("loaded {} rows, {} features", ds.len(), ds.dim());
    let kind = args.learner.score;
    let f1_min = args.learner.f1_min;
    let bopts = BaselineOptions {
        score: kind,
        len_max: Some(args.learner.len_max),
    };
    let info = |status, score| ModelInfo {
        method: format!("{:?}", args.method).to_lowercase(),
        status,
        score_kind: kind,
        score,
        threshold: Some(f1_min),
    };
    let (text, status, score, summary, trace) = match args.method {
        Method::Lstair => {
            let fit = lstair_fit(&ds, &lcfg)?;
            let mut doc = fit.model.to_document();
            doc.info = Some(info(fit.status, fit.score));
            let mut tsv = String::from("iteration\tobjective_built\tobjective_reassigned\tobjective_cleaned\tobjective_split\tpartitions\tscore\ttotal_length\tsplits\n");
            for s in &fit.trace {
                tsv.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                    s.iteration,
                    s.objective_built,
                    s.objective_reassigned,
                    s.objective_cleaned,
                    s.objective_split.map(|v| v.to_string()).unwrap_or_default(),
                    s.partition_count,
                    s.score,
                    s.total_length,
                    s.splits
                ));
            }
            let summary = format!(
                "{} partitions, {} rules, total length {}",
                fit.model.partition_count(),
                fit.model.rule_count(),
                fit.model.total_length()
            );
            (
                serde_json::to_string_pretty(&doc).map_err(Error::from)?,
                fit.status,
                fit.score,
                summary,
                Some(tsv),
            )
        }
        method => {
            let (rules, status, score, trace) = match method {
                Method::Stair => {
                    let fit = stair_fit(&ds, &lcfg.stair)?;
                    (fit.rules, fit.status, fit.score, Some(fit.trace.to_tsv()))
                }
                Method::Id3 => {
                    let fit = id3_sweep(&ds, f1_min, ID3_START_DEPTH, &bopts)?;
                    (fit.rules, fit.status, fit.score, None)
                }
                _ => {
                    let fit = cart_fit(&ds, f1_min, &bopts)?;
                    (fit.rules, fit.status, fit.score, None)
                }
            };
            let mut doc = rules.to_document();
            doc.info = Some(info(status, score));
            let summary = format!("{} rules, total length {}", rules.len(), rules.total_length());
            (
                serde_json::to_string_pretty(&doc).map_err(Error::from)?,
                status,
                score,
                summary,
                trace,
            )
        }
    };
    write_file(&args.out, &text)?;
    match (&args.trace, trace) {
        (Some(path), Some(tsv)) => write_file(path, &tsv)?,
        (Some(_), None) => warn!("no trace is recorded for this method"),
        _ => {}
    }
    println!("{summary}; {kind} {score:.4}; status {status}");
    if status == FitStatus::Reached {
        Ok(())
    } else {
        eprintln!(
            "warning: {kind} did not exceed {f1_min}; flagged model written to {}",
            args.out.display()
        );
        Err(Failure::BelowThreshold)
    }
}

enum Model {
    Rules(RuleSet, Option<ModelInfo>),
    Partitioned(LStairModel, Option<ModelInfo>),
}

fn load_model(path: &Path) -> Result<Model> {
    let text = read_file(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    match value.get("format").and_then(|f| f.as_str()) {
        Some(RULES_FORMAT) => {
            let doc: RuleSetDocument = serde_json::from_value(value)?;
            Ok(Model::Rules(RuleSet::from_document(&doc)?, doc.info))
        }
        Some(LSTAIR_FORMAT) => {
            let doc: LStairDocument = serde_json::from_value(value)?;
            Ok(Model::Partitioned(LStairModel::from_document(&doc)?, doc.info))
        }
        other => Err(Error::Malformed(format!("unknown model format {other:?}"))),
    }
}

fn explain(path: &Path) -> Result<()> {
    let (text, info) = match load_model(path)? {
        Model::Rules(r, info) => (r.render(), info),
        Model::Partitioned(m, info) => (m.render(), info),
    };
    if let Some(i) = info {
        println!("# {} ({}), {} {:.4}", i.method, i.status, i.score_kind, i.score);
    }
    print!("{text}");
    Ok(())
}

fn predict(model: &Path, data: &Path, label_col: &str, out: &Path) -> Result<()> {
    let model = load_model(model)?;
    let (_, rows) = Dataset::load_features(data, label_col)?;
    let mut wtr = csv::Writer::from_path(out).map_err(Error::Csv)?;
    match &model {
        Model::Rules(..) => wtr.write_record(["row", "prediction"])?,
        Model::Partitioned(..) => wtr.write_record(["row", "prediction", "partition"])?,
    }
    let mut records = Vec::with_capacity(rows.len());
    for (i, x) in rows.iter().enumerate() {
        let rec = match &model {
            Model::Rules(r, _) => vec![i.to_string(), r.predict(x)?.to_string()],
            Model::Partitioned(m, _) => vec![i.to_string(), m.predict(x)?.to_string(), m.partition_of(x)?.to_string()],
        };
        records.push(rec);
    }
    for rec in records {
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::Csv(e.into()))?;
    println!("wrote {} predictions to {}", rows.len(), out.display());
    Ok(())
}

fn bench(kind: BenchKind, args: &BenchArgs) -> Result<()> {
    let l = &args.learner;
    l.stair().validate()?;
    let opts = BenchOptions {
        dataset: args
            .data
            .file_stem()
            .map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned()),
        score: l.score,
        seed: l.seed,
        lambda: l.lambda,
        max_iter: l.max_iter,
        lstair_inits: args.inits.clone(),
        holdout: args.holdout,
    };
    if !(l.lambda > 0.0 && l.lambda < 1.0) || l.max_iter == 0 {
        return Err(Error::Config(
            "lambda must lie in (0, 1) and max-iter be positive".into(),
        ));
    }
    let ds = Dataset::load_csv(&args.data, &args.label_col)?;
    let report: BenchReport = match kind {
        BenchKind::LengthComparison => run_length_comparison(&ds, &opts, l.f1_min, l.len_max)?,
        BenchKind::F1VsLength => run_f1_vs_length(&ds, &opts, &args.budgets, l.len_max)?,
        BenchKind::Sweeps => run_sweeps(&ds, &opts, &args.lm_values, &args.f1m_values, l.f1_min, l.len_max)?,
    };
    let echo = serde_json::json!({
        "options": opts,
        "f1_min": l.f1_min,
        "len_max": l.len_max,
        "budgets": args.budgets,
        "lm_values": args.lm_values,
        "f1m_values": args.f1m_values,
        "data": args.data.display().to_string(),
    });
    report.write_run(&args.out, &echo)?;
    print!("{}", report.to_table());
    for note in &report.notes {
        println!("note: {note}");
    }
    Ok(())
}
