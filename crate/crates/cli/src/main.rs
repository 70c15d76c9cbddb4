//! Command-line front end: train, predict, evaluate, crossval, inspect, bench.

mod bench;
mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use gkmnc::dataset::{AttributeKind, DataTable, DatasetError, NormalizationParams, Schema};
use gkmnc::infogain::{gain_ratio_report, partition_by_attribute};
use gkmnc::kmeans::{select_k, KMeansError};
use gkmnc::pipeline::{
    cross_validate, evaluate, load_model, save_model, train_gkmnc, GkmncModel, PipelineConfig, PipelineError,
};

use manifest::Manifest;

/// Exit status for each failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Failure {
    Usage = 2,
    Data = 3,
    Training = 4,
    Io = 5,
}

struct CliError {
    kind: Failure,
    error: anyhow::Error,
}

type CliResult<T> = Result<T, CliError>;

fn fail(kind: Failure) -> impl FnOnce(anyhow::Error) -> CliError {
    move |error| CliError { kind, error }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        kind: Failure::Usage,
        error: anyhow!(message.into()),
    }
}

fn dataset_kind(e: &DatasetError) -> Failure {
    match e {
        DatasetError::Io { .. } => Failure::Io,
        _ => Failure::Data,
    }
}

fn pipeline_kind(e: &PipelineError) -> Failure {
    match e {
        PipelineError::Config { .. } | PipelineError::InvalidConfig(_) | PipelineError::NotNominal(_) => Failure::Usage,
        PipelineError::Dataset(d) => dataset_kind(d),
        PipelineError::InfoGain(_)
        | PipelineError::EmptyTraining
        | PipelineError::EmptyValidation
        | PipelineError::UnseenNominalLabel { .. }
        | PipelineError::SchemaMismatch { .. } => Failure::Data,
        PipelineError::Clustering { .. }
        | PipelineError::Leaf { .. }
        | PipelineError::Classifier(_)
        | PipelineError::ZeroTotal
        | PipelineError::WorkerPool(_) => Failure::Training,
        PipelineError::FormatVersionMismatch { .. } | PipelineError::CorruptFile(_) | PipelineError::Io(_) => Failure::Io,
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError {
            kind: pipeline_kind(&e),
            error: e.into(),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError {
            kind: dataset_kind(&e),
            error: e.into(),
        }
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(fail(Failure::Io))
}

#[derive(Parser)]
#[command(name = "gkmnc", version, about = "Grouped, clustered nonlinear classification for tabular data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it with its reports.
    Train(TrainArgs),
    /// Classify every row of a file with a saved model.
    Predict(PredictArgs),
    /// Score a saved model on labeled rows.
    Evaluate(EvaluateArgs),
    /// k-fold cross-validation.
    Crossval(CrossvalArgs),
    /// Gain ratios of the nominal attributes, and optionally per-group index curves.
    Inspect(InspectArgs),
    /// Per-leaf timing and scaling benchmark.
    Bench(bench::BenchArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Comma-delimited data with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Schema sidecar (`name = kind` lines).
    #[arg(long)]
    schema: PathBuf,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Pipeline configuration (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "GKMNC_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "GKMNC_WORKERS")]
    workers: Option<usize>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn config(&self) -> CliResult<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))
                    .map_err(fail(Failure::Io))?;
                PipelineConfig::parse(&text)?
            }
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(workers) = self.workers {
            config.worker_count = workers;
        }
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            config.set(k.trim(), v.trim()).map_err(usage)?;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Model file to write; reports go next to it.
    #[arg(long)]
    out: PathBuf,
    /// Labeled rows used only to pick the MLP hidden size.
    #[arg(long)]
    validation: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Evaluation table; the confusion counts go to a sibling file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CrossvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(2..))]
    folds: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Nominal attribute (name or 1-based position) whose groups get index curves.
    #[arg(long)]
    group_attr: Option<String>,
    #[arg(long, default_value_t = 8)]
    k_max: usize,
    #[arg(long, env = "GKMNC_SEED", default_value_t = 0)]
    seed: u64,
}

fn load_schema(path: &Path) -> CliResult<Arc<Schema>> {
    Ok(Arc::new(Schema::from_file(path)?))
}

fn load_table(args: &DataArgs) -> CliResult<DataTable> {
    let schema = load_schema(&args.schema)?;
    Ok(DataTable::load(&args.data, schema)?)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn cmd_train(args: TrainArgs) -> CliResult<()> {
    let start = Instant::now();
    let config = args.run.config()?;
    let table = load_table(&args.data)?;
    let validation = match &args.validation {
        Some(p) => Some(DataTable::load(p, table.schema().clone())?),
        None => None,
    };
    let loaded = start.elapsed().as_secs_f64();
    let (model, report) = train_gkmnc(&table, validation.as_ref(), &config)?;
    save_model(&model, &args.out)?;

    let mut outputs = vec![args.out.clone()];
    let mut emit = |suffix: &str, text: String| -> CliResult<()> {
        let path = sibling(&args.out, suffix);
        write_file(&path, &text)?;
        outputs.push(path);
        Ok(())
    };
    if let Some(gain) = &report.gain_report {
        emit("gain.csv", gain.to_csv())?;
    }
    emit("groups.csv", report.groups_csv())?;
    emit("dbi.csv", report.dbi_csv())?;
    if let Some(hidden) = report.hidden_csv() {
        emit("hidden.csv", hidden)?;
    }
    emit("timings.csv", report.timings_csv())?;

    let manifest_path = sibling(&args.out, "manifest");
    let mut m = Manifest::new("train", &config, &table);
    m.push("model.name", &model.name());
    if let Some(a) = model.architecture() {
        m.push("model.architecture", &a);
    }
    m.push("model.leaves", &model.leaf_count());
    m.push("timing.load_seconds", &format!("{loaded:.6}"));
    m.push("timing.leaf_phase_seconds", &format!("{:.6}", report.leaf_phase_seconds));
    m.push("timing.train_seconds", &format!("{:.6}", report.total_seconds));
    for t in &report.leaf_timings {
        m.push(&format!("timing.leaf.{}.{}", t.group, t.cluster), &format!("{:.6}", t.seconds));
    }
    m.push("timing.total_seconds", &format!("{:.6}", start.elapsed().as_secs_f64()));
    m.outputs(&outputs);
    write_file(&manifest_path, &m.render())?;

    println!("trained {} on {} rows", model.name(), table.len());
    if let Some(gain) = &report.gain_report {
        print!("{}", gain.to_csv());
    }
    Ok(())
}

fn read_model(path: &Path) -> CliResult<GkmncModel> {
    Ok(load_model(path)?)
}

fn cmd_predict(args: PredictArgs) -> CliResult<()> {
    let model = read_model(&args.model)?;
    let table = DataTable::load_unlabeled(&args.data, model.schema.clone())?;
    let forecasts = model.forecast_table(&table)?;
    let mut out = String::from("row,id,class,probability,group,cluster,unseen_label\n");
    for (i, (row, f)) in table.rows().iter().zip(&forecasts).enumerate() {
        let id = row.identifiers.first().map(String::as_str).unwrap_or("");
        let p = f.probability.map(|p| p.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{i},{id},{},{p},{},{},{}\n",
            f.class,
            f.route.group,
            f.route.cluster,
            u8::from(f.route.unseen_label)
        ));
    }
    write_file(&args.out, &out)?;
    let unseen = forecasts.iter().filter(|f| f.route.unseen_label).count();
    if unseen > 0 {
        eprintln!("note: {unseen} rows had an unseen grouping label and were routed to the largest group");
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> CliResult<()> {
    let model = read_model(&args.model)?;
    let table = DataTable::load(&args.data, model.schema.clone())?;
    let report = evaluate(&model, &table)?;
    println!("{report}");
    print!("{}", report.to_csv());
    print!("{}", report.confusion_csv());
    if let Some(out) = &args.out {
        write_file(out, &report.to_csv())?;
        write_file(&sibling(out, "confusion.csv"), &report.confusion_csv())?;
    }
    Ok(())
}

fn cmd_crossval(args: CrossvalArgs) -> CliResult<()> {
    let start = Instant::now();
    let config = args.run.config()?;
    let table = load_table(&args.data)?;
    let cv = cross_validate(&table, args.folds as usize, &config)?;
    let csv = cv.to_csv();
    print!("{csv}");
    if let Some(out) = &args.out {
        write_file(out, &csv)?;
        let mut outputs = vec![out.clone()];
        if let Some(gain) = &cv.mean_gain_report {
            let path = sibling(out, "gain.csv");
            write_file(&path, &gain.to_csv())?;
            outputs.push(path);
        }
        let mut m = Manifest::new("crossval", &config, &table);
        m.push("folds", &args.folds);
        m.push("mean_accuracy", &format!("{:.6}", cv.mean_accuracy));
        m.push("timing.total_seconds", &format!("{:.6}", start.elapsed().as_secs_f64()));
        m.outputs(&outputs);
        write_file(&sibling(out, "manifest"), &m.render())?;
    }
    Ok(())
}

fn cmd_inspect(args: InspectArgs) -> CliResult<()> {
    let table = load_table(&args.data)?;
    let schema = table.schema().clone();
    let group_attr = match &args.group_attr {
        Some(name) => {
            let index = schema
                .index_of(name)
                .or_else(|| name.parse::<usize>().ok().and_then(|p| p.checked_sub(1)))
                .ok_or_else(|| usage(format!("unknown attribute {name:?}")))?;
            if schema.attributes()[index].kind != AttributeKind::Nominal {
                return Err(usage(format!("--group-attr {name:?} is not a nominal attribute")));
            }
            if args.k_max < 2 {
                return Err(usage("--k-max must be at least 2"));
            }
            Some(index)
        }
        None => None,
    };

    if schema.nominal_indices().is_empty() {
        println!("attribute,name,values,info_gain,split_info,gain_ratio,rank,note");
        eprintln!("note: the schema has no nominal attributes");
        return Ok(());
    }
    let report = gain_ratio_report(&table).map_err(|e| fail(Failure::Data)(e.into()))?;
    print!("{}", report.to_csv());

    if let Some(attr) = group_attr {
        println!();
        println!("group,rows,k,dbi");
        let groups = partition_by_attribute(&table, attr).map_err(|e| fail(Failure::Data)(e.into()))?;
        for (label, part) in groups {
            let raw = part.numeric_rows();
            let z = NormalizationParams::fit(&raw)?.apply_all(&raw)?;
            match select_k(&z, args.k_max, args.seed, gkmnc::kmeans::DEFAULT_RESTARTS) {
                Ok(sel) => {
                    for (k, d) in sel.curve {
                        println!("{label},{},{k},{d:.6}", part.len());
                    }
                }
                Err(KMeansError::KExceedsRows { .. }) => println!("{label},{},,", part.len()),
                Err(e) => return Err(fail(Failure::Training)(e.into())),
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Crossval(a) => cmd_crossval(a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Bench(a) => bench::cmd_bench(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError { kind, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(kind as u8)
        }
    }
}
