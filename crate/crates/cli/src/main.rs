use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use perceptual::bias::{low_score_samples, prior_shift_table, GroupRule};
use perceptual::modality::{parse_modalities, parse_subsets};
use perceptual::protocol::{
    compute_baselines, ingest_predictions, read_plan, read_predictions, read_samples, render_report, score_run,
    write_plan, Format, SampleRecord, ScoreOptions, ScoreReport, Split,
};
use perceptual::synth::{
    average_over_seeds, render_sweep_csv, render_sweep_table, run_variance_sweep, ModelKind, SweepConfig,
};
use perceptual::{build_plan, Metric, Mode, PredictionSpec, RunConfig, TaskKind};

#[derive(Parser)]
#[command(name = "perceptual", version, about = "Permutation-based modality reliance scores")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a permutation plan for the test split of a samples file.
    Plan(PlanArgs),
    /// Join predictions to a plan and compute the perceptual scores.
    Score(ScoreArgs),
    /// Render a machine report as a table or JSON.
    Report(ReportArgs),
    /// Print the train-split baseline scored on the test split.
    Majority(MajorityArgs),
    /// Run the synthetic variance sweep.
    Synth(SynthArgs),
    /// Prior-shift table and lowest-scoring samples.
    Bias(BiasArgs),
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    samples: PathBuf,
    /// Comma-separated modality names.
    #[arg(long)]
    modalities: String,
    /// Semicolon-separated subsets, `+` joins modalities: `image;question;image+question`.
    #[arg(long)]
    subsets: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    permutations: u32,
    #[arg(long, default_value_t = 5)]
    repeats: u32,
    #[arg(long)]
    exclude_self: bool,
    /// Use every test sample once as donor instead of sampling.
    #[arg(long)]
    exact: bool,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    clip_norm: Switch,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long, value_parser = parse_metric)]
    metric: Metric,
    /// Sample field holding the group, e.g. `group`.
    #[arg(long)]
    group_by: Option<String>,
    /// Overrides the clipping choice recorded in the plan.
    #[arg(long, value_enum)]
    clip_norm: Option<Switch>,
    /// Baseline fraction, required with `--metric precomputed`.
    #[arg(long)]
    baseline: Option<f64>,
    /// Machine report destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also print the table to stderr.
    #[arg(long)]
    show: bool,
}

#[derive(Args)]
struct ReportArgs {
    report: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MajorityArgs {
    #[arg(long)]
    samples: PathBuf,
    #[arg(long, value_parser = parse_metric)]
    metric: Metric,
    #[arg(long)]
    group_by: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Comma-separated variances of the `c` block.
    #[arg(long, default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")]
    var_c_grid: String,
    #[arg(long, value_enum, default_value_t = ModelChoice::Both)]
    model: ModelChoice,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value_t = 2000)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of seeds, starting at `--seed`; rows are averaged over them.
    #[arg(long, default_value_t = 1)]
    replicates: u64,
    #[arg(long, default_value_t = 20)]
    permutations: u32,
    #[arg(long, default_value_t = 10)]
    repeats: u32,
    /// Keep one row per seed instead of averaging.
    #[arg(long)]
    per_seed: bool,
    #[arg(long, value_enum, default_value_t = SweepFormat::Table)]
    out: SweepFormat,
    /// Destination file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BiasArgs {
    #[arg(long)]
    samples: PathBuf,
    /// Plan and predictions supply the clean predictions for the prior-shift table.
    #[arg(long, requires = "predictions")]
    plan: Option<PathBuf>,
    #[arg(long, requires = "plan")]
    predictions: Option<PathBuf>,
    /// `token`, `token:<field>` or `field:<name>`.
    #[arg(long, default_value = "token")]
    group_rule: String,
    /// Comma-separated bigram allowlist for the token rule.
    #[arg(long)]
    bigrams: Option<String>,
    #[arg(long, default_value = "yes,no")]
    classes: String,
    /// Machine report used for low-score mining.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Subset to mine, e.g. `image`; defaults to the report's first subset.
    #[arg(long)]
    subset: Option<String>,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    /// Also write the prior-shift table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Table,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepFormat {
    Csv,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelChoice {
    Logistic,
    Mlp,
    Both,
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse().map_err(|e: perceptual::Error| e.to_string())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    let mut out = sink(path)?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn test_ids(samples: &[SampleRecord]) -> Vec<String> {
    samples
        .iter()
        .filter(|r| r.split == Split::Test)
        .map(|r| r.sample_id.clone())
        .collect()
}

fn plan(args: PlanArgs) -> Result<()> {
    let samples = read_samples(open(&args.samples)?)?;
    let modalities = parse_modalities(&args.modalities)?;
    let subsets = parse_subsets(args.subsets.as_deref(), &modalities)?;
    let config = RunConfig {
        permutations: args.permutations,
        repeats: args.repeats,
        master_seed: args.seed,
        exclude_self: args.exclude_self,
        clip_task_norm: args.clip_norm == Switch::On,
        mode: if args.exact { Mode::Exact } else { Mode::MonteCarlo },
    };
    let ids = test_ids(&samples);
    let mut plan = build_plan(&ids, &subsets, &config)?;
    plan.modalities = modalities;
    let out = sink(args.out.as_deref())?;
    write_plan(&plan, out)?;
    log::info!("{} tasks for {} samples", plan.tasks.len(), ids.len());
    Ok(())
}

fn group_map(samples: &[SampleRecord], field: &str) -> BTreeMap<String, String> {
    samples
        .iter()
        .filter(|r| r.split == Split::Test)
        .filter_map(|r| r.field(field).map(|g| (r.sample_id.clone(), g)))
        .collect()
}

fn score(args: ScoreArgs) -> Result<()> {
    let samples = read_samples(open(&args.samples)?)?;
    let mut plan = read_plan(open(&args.plan)?)?;
    if let Some(clip) = args.clip_norm {
        plan.config.clip_task_norm = clip == Switch::On;
    }
    let labels: HashMap<String, _> = samples
        .iter()
        .filter(|r| r.split == Split::Test)
        .map(|r| (r.sample_id.clone(), r.label.clone()))
        .collect();
    let ingested = ingest_predictions(&plan, &labels, args.metric, open(&args.predictions)?)?;
    let baselines = compute_baselines(&samples, args.metric, args.group_by.as_deref(), args.baseline)?;
    let options = ScoreOptions {
        metric: Some(args.metric),
        modalities: plan.modalities.clone(),
        subsets: plan.subsets.clone(),
        group_of: args.group_by.as_deref().map(|f| group_map(&samples, f)),
        precomputed: ingested.precomputed,
    };
    let report = score_run(&ingested.evaluations, &baselines, &plan.config, &options)?;
    emit(args.out.as_deref(), &render_report(&report, Format::Json)?)?;
    if args.show {
        eprint!("{}", render_report(&report, Format::Table)?);
    }
    Ok(())
}

fn read_report(path: &Path) -> Result<ScoreReport> {
    let report: ScoreReport =
        serde_json::from_reader(open(path)?).with_context(|| format!("parsing {}", path.display()))?;
    Ok(report)
}

fn report(args: ReportArgs) -> Result<()> {
    let report = read_report(&args.report)?;
    let format = match args.format {
        ReportFormat::Table => Format::Table,
        ReportFormat::Json => Format::Json,
    };
    emit(args.out.as_deref(), &render_report(&report, format)?)
}

fn majority(args: MajorityArgs) -> Result<()> {
    let samples = read_samples(open(&args.samples)?)?;
    let b = compute_baselines(&samples, args.metric, args.group_by.as_deref(), None)?;
    let mut text = format!("all\t{:.2}\n", b.majority_fraction * 100.0);
    for (g, v) in &b.per_group {
        text.push_str(&format!("{g}\t{:.2}\n", v * 100.0));
    }
    emit(args.out.as_deref(), &text)
}

fn synth(args: SynthArgs) -> Result<()> {
    let grid = args
        .var_c_grid
        .split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad variance `{v}`")))
        .collect::<Result<Vec<_>>>()?;
    let models = match args.model {
        ModelChoice::Logistic => vec![ModelKind::Logistic],
        ModelChoice::Mlp => vec![ModelKind::Mlp],
        ModelChoice::Both => vec![ModelKind::Logistic, ModelKind::Mlp],
    };
    if args.replicates == 0 {
        bail!("--replicates must be at least 1");
    }
    let mut config = SweepConfig {
        grid,
        models,
        permutations: args.permutations,
        repeats: args.repeats,
        seeds: (args.seed..args.seed + args.replicates).collect(),
        ..SweepConfig::default()
    };
    config.train.hidden = args.hidden;
    config.train.max_epochs = args.epochs;
    config.train.learning_rate = args.lr;

    let rows = run_variance_sweep(&config)?;
    let rows = if args.per_seed { rows } else { average_over_seeds(&rows) };
    let text = match args.out {
        SweepFormat::Csv => render_sweep_csv(&rows),
        SweepFormat::Table => render_sweep_table(&rows),
    };
    emit(args.output.as_deref(), &text)
}

fn clean_predictions(plan: &Path, predictions: &Path) -> Result<HashMap<String, String>> {
    let plan = read_plan(open(plan)?)?;
    let clean: HashMap<u64, &str> = plan
        .tasks
        .iter()
        .filter(|t| t.kind == TaskKind::Clean)
        .map(|t| (t.task_id, t.sample_id.as_str()))
        .collect();
    let mut out = HashMap::new();
    for record in read_predictions(open(predictions)?) {
        let record = record?;
        if let (Some(id), Some(PredictionSpec::ClassLabel(c))) = (clean.get(&record.task_id), &record.prediction) {
            out.insert(id.to_string(), c.clone());
        }
    }
    Ok(out)
}

fn bias(args: BiasArgs) -> Result<()> {
    let samples = read_samples(open(&args.samples)?)?;
    let mut rule = GroupRule::parse(&args.group_rule)?;
    if let (GroupRule::Token { bigrams, .. }, Some(list)) = (&mut rule, &args.bigrams) {
        *bigrams = list
            .split(',')
            .map(|b| b.trim().to_lowercase())
            .filter(|b| !b.is_empty())
            .collect();
    }
    let classes: Vec<String> = args.classes.split(',').map(|c| c.trim().to_string()).collect();
    let predictions = match (&args.plan, &args.predictions) {
        (Some(p), Some(q)) => clean_predictions(p, q)?,
        _ => HashMap::new(),
    };
    let train: Vec<&SampleRecord> = samples.iter().filter(|r| r.split == Split::Train).collect();
    let test: Vec<&SampleRecord> = samples.iter().filter(|r| r.split == Split::Test).collect();
    let table = prior_shift_table(&train, &test, &predictions, &rule, &classes)?;
    let mut text = table.to_table();
    if let Some(csv) = &args.csv {
        emit(Some(csv), &table.to_csv())?;
    }

    if let Some(path) = &args.report {
        let report = read_report(path)?;
        let subset = match &args.subset {
            Some(name) => report
                .subsets
                .iter()
                .find(|s| s.subset.to_string() == *name)
                .with_context(|| format!("report has no subset `{name}`"))?,
            None => report.subsets.first().context("report has no subsets")?,
        };
        let (low, warning) = low_score_samples(&subset.samples, args.top_k);
        text.push_str(&format!("\nlowest sample scores, subset {}\n", subset.subset));
        for s in low {
            text.push_str(&format!(
                "{}\t{:.4}\t{}\n",
                s.sample_id,
                s.score,
                s.group.unwrap_or_default()
            ));
        }
        if let Some(w) = warning {
            text.push_str(&format!("warning: {w}\n"));
        }
    }
    emit(args.out.as_deref(), &text)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<perceptual::Error>() {
        Some(e) if e.is_incomplete() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan(a) => plan(a),
        Command::Score(a) => score(a),
        Command::Report(a) => report(a),
        Command::Majority(a) => majority(a),
        Command::Synth(a) => synth(a),
        Command::Bias(a) => bias(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
