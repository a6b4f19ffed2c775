mod config;

use std::collections::HashSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use entail_core::cleaner::{self, CleanConfig, Embedder, FoldConfig, LogisticConfig};
use entail_core::eval::{self, ConditionReport, EvalReport, Summary};
use entail_core::harmonizer::{self, IngestSpec};
use entail_core::nli;
use entail_core::report;
use entail_core::rng::derive_seed;
use entail_core::verbalizer::{build_catalog, CatalogSource};
use entail_core::zeroshot::{
    classify, BackendSpec, ClassificationRequest, HttpOptions, RecordingBackend, DEFAULT_TEMPLATE,
};
use entail_core::{HypothesisCatalog, LabeledDataset, NliDataset, ScoringBackend, Split};

const EXIT_DATA: u8 = 1;
const EXIT_USAGE: u8 = 2;

/// Zero-shot classification through entailment: dataset preparation,
/// NLI reformatting, scoring and evaluation.
#[derive(Debug, Parser)]
#[command(name = "entail", version, arg_required_else_help = true)]
struct Cli {
    /// Root seed; every stage derives its own seed from it.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// JSON file of default flag values; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ingest a raw CSV/JSONL source into the canonical dataset format.
    Harmonize(HarmonizeArgs),
    /// Remove probable label errors.
    Clean(CleanArgs),
    /// Cap examples per class and per dataset.
    Downsample(DownsampleArgs),
    /// Reformat a dataset into balanced NLI training pairs.
    FormatTrain(FormatArgs),
    /// Reformat a dataset into one NLI pair per text and class.
    FormatTest(FormatArgs),
    /// Merge native and reformatted NLI training files.
    Concat(ConcatArgs),
    /// Zero-shot classify texts against candidate labels.
    Classify(ClassifyArgs),
    /// Score an NLI test set and compute metrics.
    Evaluate(EvaluateArgs),
    /// Write the held-out training plan.
    HeldoutPlan(HeldoutPlanArgs),
    /// Combine evaluation reports into a summary.
    Aggregate(AggregateArgs),
    /// Render a summary as tables and a chart.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct HarmonizeArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Ingest statistics as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Assign a stratified test split of this fraction.
    #[arg(long)]
    test_fraction: Option<f64>,
}

#[derive(Debug, Args)]
struct CleanArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Copy the input unchanged.
    #[arg(long)]
    skip: bool,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0.5)]
    max_removal_fraction: f64,
    #[arg(long, default_value_t = 1.0)]
    l2: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Hashed TF-IDF dimensionality.
    #[arg(long, default_value_t = cleaner::DEFAULT_DIMS)]
    dims: usize,
    /// Base URL of an embedding service; replaces hashed TF-IDF.
    #[arg(long)]
    embed_url: Option<String>,
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
}

#[derive(Debug, Args)]
struct DownsampleArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = cleaner::DEFAULT_PER_CLASS_CAP)]
    per_class: usize,
    #[arg(long, default_value_t = cleaner::DEFAULT_PER_DATASET_CAP)]
    per_dataset: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitChoice {
    Train,
    Test,
    All,
}

#[derive(Debug, Args)]
struct CatalogArgs {
    /// Hypothesis catalog JSON.
    #[arg(long, conflicts_with = "template")]
    catalog: Option<PathBuf>,
    /// Template with one `{}` placeholder, applied to every class name.
    #[arg(long)]
    template: Option<String>,
}

#[derive(Debug, Args)]
struct FormatArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    catalog: CatalogArgs,
    /// Examples to use; defaults to the split matching the subcommand.
    #[arg(long, value_enum)]
    split: Option<SplitChoice>,
}

#[derive(Debug, Args)]
struct ConcatArgs {
    /// Native NLI JSONL (three-way or binary labels).
    #[arg(long)]
    native: Option<PathBuf>,
    /// Reformatted NLI JSONL files.
    #[arg(long = "in", num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BackendArgs {
    /// mock, mock:planted=PATH, mock:inverted=PATH, mock:table=PATH,
    /// file:PATH or an http(s) URL.
    #[arg(long)]
    backend: String,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
    /// Save every returned score for later replay with `file:`.
    #[arg(long)]
    record: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    /// Texts: JSONL of strings or objects with a `text` field.
    #[arg(long = "in", conflicts_with = "text", required_unless_present = "text")]
    input: Option<PathBuf>,
    /// A single text.
    #[arg(long)]
    text: Option<String>,
    /// Comma-separated candidate labels.
    #[arg(long, value_delimiter = ',', required = true)]
    labels: Vec<String>,
    #[arg(long, default_value = DEFAULT_TEMPLATE)]
    template: String,
    #[arg(long)]
    multi_label: bool,
    /// One JSON object per text.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Canonical dataset; its test split is formatted on the fly.
    #[arg(long = "in", conflicts_with = "nli_test", required_unless_present = "nli_test")]
    input: Option<PathBuf>,
    /// Pre-formatted NLI test JSONL.
    #[arg(long)]
    nli_test: Option<PathBuf>,
    /// Dataset id for `--nli-test`; defaults to the file stem.
    #[arg(long)]
    dataset_id: Option<String>,
    #[command(flatten)]
    catalog: CatalogArgs,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitChoice,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Debug, Args)]
struct HeldoutPlanArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    datasets: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    nli: Vec<String>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct AggregateArgs {
    /// CONDITION=PATH to an evaluation report; repeatable.
    #[arg(long = "report", required = true, value_parser = parse_condition_report)]
    reports: Vec<(String, PathBuf)>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    summary: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_condition_report(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((cond, path)) if !cond.is_empty() && !path.is_empty() => Ok((cond.to_string(), path.into())),
        _ => Err(format!("expected CONDITION=PATH, got `{s}`")),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match config::apply_config(argv, &Cli::command()) {
        Ok(argv) => argv,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::new().filter_level(cli.log_level).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_DATA)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let seed = cli.seed;
    match &cli.command {
        Command::Harmonize(a) => harmonize(a, seed),
        Command::Clean(a) => clean(a, seed),
        Command::Downsample(a) => {
            let ds = LabeledDataset::read_jsonl(&a.input)?;
            let out = cleaner::downsample(&ds, a.per_class, a.per_dataset, derive_seed(seed, "downsample"))?;
            log::info!("kept {} of {} examples", out.examples.len(), ds.examples.len());
            Ok(out.write_jsonl(&a.out)?)
        }
        Command::FormatTrain(a) => {
            let ds = select_split(
                LabeledDataset::read_jsonl(&a.input)?,
                a.split.unwrap_or(SplitChoice::Train),
            );
            let catalog = load_catalog(&ds, &a.catalog)?;
            let out = nli::format_nli_trainset(&ds, &catalog, derive_seed(seed, "format-train"))?;
            Ok(out.write_jsonl(&a.out)?)
        }
        Command::FormatTest(a) => {
            let ds = select_split(
                LabeledDataset::read_jsonl(&a.input)?,
                a.split.unwrap_or(SplitChoice::Test),
            );
            let catalog = load_catalog(&ds, &a.catalog)?;
            Ok(nli::format_nli_testset(&ds, &catalog)?.write_jsonl(&a.out)?)
        }
        Command::Concat(a) => {
            let native = match &a.native {
                Some(path) => {
                    let content = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    nli::parse_native_nli(&content).with_context(|| format!("parsing {}", path.display()))?
                }
                None => NliDataset::default(),
            };
            let parts = a
                .inputs
                .iter()
                .map(NliDataset::read_jsonl)
                .collect::<Result<Vec<_>, _>>()?;
            Ok(nli::concat_train(&native, &parts, derive_seed(seed, "concat")).write_jsonl(&a.out)?)
        }
        Command::Classify(a) => run_classify(a),
        Command::Evaluate(a) => evaluate(a),
        Command::HeldoutPlan(a) => {
            let runs = eval::plan_heldout_runs(&a.datasets, &a.nli)?;
            eval::write_run_specs(&runs, &a.out_dir)?;
            log::info!("wrote {} run specs", runs.len());
            Ok(())
        }
        Command::Aggregate(a) => {
            let reports = a
                .reports
                .iter()
                .map(|(condition, path)| {
                    Ok(ConditionReport {
                        condition: condition.clone(),
                        report: EvalReport::read_json(path)?,
                    })
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            Ok(eval::aggregate_reports(&reports).write_json(&a.out)?)
        }
        Command::Report(a) => Ok(report::write_report(&Summary::read_json(&a.summary)?, &a.out_dir)?),
    }
}

fn harmonize(a: &HarmonizeArgs, seed: u64) -> anyhow::Result<()> {
    let spec = IngestSpec::read_json(&a.spec)?;
    let (mut ds, ingest_report) = harmonizer::ingest(&spec)?;
    if let Some(fraction) = a.test_fraction {
        let outcome = harmonizer::train_test_split(&ds, fraction, derive_seed(seed, "harmonize.split"))?;
        for w in &outcome.warnings {
            log::warn!("{w}");
        }
        let test: HashSet<&str> = outcome.test.examples.iter().map(|e| e.text.as_str()).collect();
        let examples = ds
            .examples
            .iter()
            .map(|e| {
                let mut e = e.clone();
                e.split = if test.contains(e.text.as_str()) {
                    Split::Test
                } else {
                    Split::Train
                };
                e
            })
            .collect();
        ds = ds.with_examples(examples);
    }
    for issue in entail_core::model::validate_dataset(&ds) {
        log::warn!("{issue}");
    }
    ds.write_jsonl(&a.out)?;
    if let Some(path) = &a.report {
        let mut s = serde_json::to_string_pretty(&ingest_report)?;
        s.push('\n');
        fs::write(path, s).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn clean(a: &CleanArgs, seed: u64) -> anyhow::Result<()> {
    let ds = LabeledDataset::read_jsonl(&a.input)?;
    let embedder = match &a.embed_url {
        Some(url) => Embedder::Sidecar {
            url: url.clone(),
            timeout_secs: a.timeout_secs,
        },
        None => Embedder::HashedTfIdf { dims: a.dims },
    };
    let config = CleanConfig {
        embedder,
        folds: FoldConfig {
            k: a.folds,
            seed: derive_seed(seed, "clean.folds"),
            logistic: LogisticConfig {
                l2: a.l2,
                max_iter: a.max_iter,
                tol: a.tol,
            },
        },
        max_removal_fraction: a.max_removal_fraction,
        skip: a.skip,
    };
    let (cleaned, report) = cleaner::clean(&ds, &config)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    log::info!("removed {} of {} examples", report.flagged.len(), ds.examples.len());
    cleaned.write_jsonl(&a.out)?;
    if let Some(path) = &a.report {
        report.write_json(path)?;
    }
    Ok(())
}

fn select_split(ds: LabeledDataset, split: SplitChoice) -> LabeledDataset {
    match split {
        SplitChoice::Train => ds.filter_split(Split::Train),
        SplitChoice::Test => ds.filter_split(Split::Test),
        SplitChoice::All => ds,
    }
}

fn load_catalog(ds: &LabeledDataset, args: &CatalogArgs) -> anyhow::Result<HypothesisCatalog> {
    let catalog = match &args.catalog {
        Some(path) => {
            let catalog = HypothesisCatalog::read_json(path)?;
            catalog.validate()?;
            if catalog.num_classes() != ds.num_classes() {
                bail!(
                    "catalog covers {} classes, dataset has {}",
                    catalog.num_classes(),
                    ds.num_classes()
                );
            }
            catalog
        }
        None => build_catalog(
            ds,
            CatalogSource::Template(args.template.as_deref().unwrap_or(DEFAULT_TEMPLATE)),
        )?,
    };
    Ok(catalog)
}

fn open_backend(args: &BackendArgs) -> anyhow::Result<RecordingBackend<Box<dyn ScoringBackend>>> {
    let spec: BackendSpec = args.backend.parse()?;
    let backend = spec.open(HttpOptions {
        batch_size: args.batch_size,
        timeout: Duration::from_secs(args.timeout_secs),
    })?;
    Ok(RecordingBackend::new(backend))
}

fn save_recording(args: &BackendArgs, backend: &RecordingBackend<Box<dyn ScoringBackend>>) -> anyhow::Result<()> {
    if let Some(path) = &args.record {
        backend.score_file().write_json(path)?;
    }
    Ok(())
}

fn read_texts(path: &Path) -> anyhow::Result<Vec<String>> {
    let content = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut texts = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).with_context(|| format!("{}: line {}", path.display(), i + 1))?;
        let text = match &value {
            serde_json::Value::String(s) => s.clone(),
            other => match other.get("text").and_then(serde_json::Value::as_str) {
                Some(s) => s.to_string(),
                None => bail!("{}: line {} has no `text`", path.display(), i + 1),
            },
        };
        texts.push(text);
    }
    Ok(texts)
}

fn run_classify(a: &ClassifyArgs) -> anyhow::Result<()> {
    let texts = match (&a.input, &a.text) {
        (Some(path), _) => read_texts(path)?,
        (None, Some(text)) => vec![text.clone()],
        (None, None) => bail!("either --in or --text is required"),
    };
    let request = ClassificationRequest {
        texts,
        candidate_labels: a.labels.clone(),
        hypothesis_template: a.template.clone(),
        multi_label: a.multi_label,
    };
    let backend = open_backend(&a.backend)?;
    let predictions = classify(&request, &backend)?;
    save_recording(&a.backend, &backend)?;

    let mut out = String::new();
    for p in &predictions {
        let ranked = p.ranked();
        if a.json {
            let value = serde_json::json!({
                "text": request.texts[p.text_id],
                "labels": ranked.iter().map(|&c| &request.candidate_labels[c]).collect::<Vec<_>>(),
                "scores": ranked.iter().map(|&c| p.class_probs[c]).collect::<Vec<_>>(),
                "predicted_label": request.candidate_labels[p.predicted_class],
            });
            out.push_str(&value.to_string());
            out.push('\n');
        } else {
            out.push_str(&request.texts[p.text_id]);
            out.push('\n');
            for &c in &ranked {
                out.push_str(&format!("  {:.4}  {}\n", p.class_probs[c], request.candidate_labels[c]));
            }
        }
    }
    match &a.out {
        Some(path) => fs::write(path, out).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(out.as_bytes())?,
    }
    Ok(())
}

fn evaluate(a: &EvaluateArgs) -> anyhow::Result<()> {
    let backend = open_backend(&a.backend)?;
    let report = match (&a.input, &a.nli_test) {
        (Some(path), _) => {
            let ds = select_split(LabeledDataset::read_jsonl(path)?, a.split);
            if ds.examples.is_empty() {
                bail!("{} has no examples in the selected split", path.display());
            }
            let catalog = load_catalog(&ds, &a.catalog)?;
            eval::evaluate_dataset(&ds, &catalog, &backend)?
        }
        (None, Some(path)) => {
            let test = NliDataset::read_jsonl(path)?;
            let id = match &a.dataset_id {
                Some(id) => id.clone(),
                None => path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
            };
            eval::evaluate_nli_testset(&id, &test, &backend)?
        }
        (None, None) => bail!("either --in or --nli-test is required"),
    };
    save_recording(&a.backend, &backend)?;
    log::info!(
        "{}: balanced accuracy {:.4}",
        report.dataset_id,
        report.balanced_accuracy
    );
    Ok(report.write_json(&a.out)?)
}
