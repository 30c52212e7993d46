//! `gep`: command-line driver for group evolution prediction.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use gep_core::chains::{build_chains, remove_duplicates, write_chains_csv, DedupMode};
use gep_core::community::{cover_stats, write_covers_jsonl, Detector};
use gep_core::evaluate::{confusion, report, write_comparison_csv};
use gep_core::features::{read_features_csv, write_features_csv};
use gep_core::ingest::{stream_summary, write_stream, DatasetManifest, TemporalEventStream};
use gep_core::learn::{split_train_val_test, train, Balancing, CvScheme};
use gep_core::pipeline::{
    build_artifacts, compare_classifiers, drift_experiment, enrich_experiment, load_stream, run_pipeline,
    track_stream, transfer, write_text, PipelineConfig, PipelineError, Stage, StreamSource, TransferOptions,
};
use gep_core::select::{evolve, rank_features, write_ranking_csv};
use gep_core::synth::{generate_with_truth, planned_histogram, SynthConfig};
use gep_core::tracking::{event_histogram, write_events_csv, EventHistogram, EventType};
use gep_core::windowing::{make_windows, WindowIndexEntry};
use gep_core::{ClassifierKind, Dataset, GaConfig, TrainedModel};
use serde::de::DeserializeOwned;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "gep",
    version,
    about = "Predict community evolution events in temporal interaction networks"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Node, edge and record counts of the input stream.
    Summary(Stage0),
    /// Window boundaries and record counts.
    Windows(Stage0),
    /// Community covers of every window (covers.jsonl).
    Detect(Stage0),
    /// Evolution events between consecutive windows (events.csv).
    Track(Stage0),
    /// Evolution chains after deduplication (chains.csv).
    Chains(Stage0),
    /// Feature matrix of the chains (features.csv).
    Features(Stage0),
    /// Every stage plus cross-validation of the configured classifier.
    Run(Stage0),
    /// Fits a classifier on a features CSV and stores it as JSON.
    Train(TrainArgs),
    /// Scores a stored model on a features CSV.
    Evaluate(EvaluateArgs),
    /// Cross-validates several classifiers on the same folds.
    Compare(CompareArgs),
    /// One genetic feature-selection run on a features CSV.
    Select(GaArgs),
    /// Feature occurrence ranking over repeated GA runs.
    Rank(GaArgs),
    /// Trains on one configuration's chains and tests on another's.
    Transfer(TransferArgs),
    /// Adds external chains of chosen classes to every training fold.
    Enrich(EnrichArgs),
    /// Per-period models against models trained on the whole span.
    Drift(DriftArgs),
    /// Writes a synthetic interaction stream with planted evolution.
    Synth(SynthArgs),
}

/// Pipeline configuration: a JSON file plus flag overrides. Without
/// `--config` a default synthetic stream is used.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset manifest replacing the configured stream source.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    window_size: Option<u64>,
    /// `modularity[:seed]` or `cpm[:k]`.
    #[arg(long, value_parser = parse_detector)]
    detector: Option<Detector>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    chain_length: Option<usize>,
    #[arg(long, value_parser = kebab::<DedupMode>)]
    dedup: Option<DedupMode>,
    #[arg(long)]
    classifier: Option<ClassifierKind>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long, value_parser = kebab::<Balancing>)]
    balancing: Option<Balancing>,
    /// Stratified folds; 0 selects 5x2 cross-validation.
    #[arg(long)]
    folds: Option<usize>,
}

#[derive(Args)]
struct Stage0 {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Run directory.
    #[arg(short, long, default_value = "gep-run")]
    out: PathBuf,
}

#[derive(Args)]
struct LearnFlags {
    #[arg(long, default_value = "random-forest")]
    classifier: ClassifierKind,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    features: PathBuf,
    #[command(flatten)]
    learn: LearnFlags,
    #[arg(long, value_parser = kebab::<Balancing>, default_value = "none")]
    balancing: Balancing,
    #[arg(short, long, default_value = "gep-run")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    model: PathBuf,
    features: PathBuf,
    #[arg(short, long, default_value = "gep-run")]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    stage: Stage0,
    /// Comma-separated classifier names.
    #[arg(long, value_delimiter = ',', default_values_t = ClassifierKind::ALL.to_vec())]
    kinds: Vec<ClassifierKind>,
}

#[derive(Args)]
struct GaArgs {
    features: PathBuf,
    #[arg(long, default_value_t = 20)]
    generations: usize,
    #[arg(long, default_value_t = 50)]
    population: usize,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(short, long, default_value = "gep-run")]
    out: PathBuf,
}

#[derive(Args)]
struct TransferArgs {
    /// Configuration of the training side.
    #[arg(long)]
    train: PathBuf,
    /// Configuration of the test side.
    #[arg(long)]
    test: PathBuf,
    /// Equal-size sampling of the training side.
    #[arg(long)]
    balance: bool,
    /// Z-score both sides with the training statistics.
    #[arg(long)]
    standardize: bool,
    #[arg(short, long, default_value = "gep-run")]
    out: PathBuf,
}

#[derive(Args)]
struct EnrichArgs {
    #[command(flatten)]
    stage: Stage0,
    /// Configuration producing the external chains.
    #[arg(long)]
    external: PathBuf,
    /// Comma-separated event classes to borrow.
    #[arg(long, value_delimiter = ',', default_value = "growing,merging,splitting")]
    classes: Vec<EventType>,
}

#[derive(Args)]
struct DriftArgs {
    #[command(flatten)]
    stage: Stage0,
    #[arg(long, default_value_t = 5)]
    periods: usize,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    windows: Option<usize>,
    #[arg(long)]
    communities: Option<usize>,
    #[arg(long)]
    noise_edges: Option<usize>,
    #[arg(long)]
    regime_change: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(short, long, default_value = "gep-run")]
    out: PathBuf,
}

fn kebab<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(json!(s)).map_err(|e| e.to_string())
}

fn parse_detector(s: &str) -> Result<Detector, String> {
    let (name, arg) = s.split_once(':').map_or((s, None), |(n, a)| (n, Some(a)));
    let num = |d: u64| arg.map_or(Ok(d), |a| a.parse::<u64>().map_err(|e| format!("{a}: {e}")));
    match name {
        "modularity" | "louvain" => Ok(Detector::Modularity { seed: num(7)? }),
        "cpm" => Ok(Detector::Cpm { k: num(3)? as usize }),
        _ => Err(format!("unknown detector {name}")),
    }
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::synthetic(SynthConfig::default()),
        };
        if let Some(path) = &self.manifest {
            cfg.source = StreamSource::Manifest { path: path.clone() };
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(size) = self.window_size {
            cfg.windows.size = size;
        }
        if let Some(d) = self.detector {
            cfg.detector = d;
        }
        if let Some(a) = self.alpha {
            cfg.tracking.alpha = a;
        }
        if let Some(b) = self.beta {
            cfg.tracking.beta = b;
        }
        if let Some(l) = self.chain_length {
            cfg.chain_length = l;
        }
        if let Some(d) = self.dedup {
            cfg.dedup = d;
        }
        if let Some(k) = self.classifier {
            cfg.classifier = k;
        }
        if let Some(t) = self.trees {
            cfg.hyperparameters.forest_trees = t;
        }
        if let Some(b) = self.balancing {
            cfg.balancing = b;
        }
        match self.folds {
            Some(0) => cfg.cv = CvScheme::FiveByTwo,
            Some(folds) => cfg.cv = CvScheme::Stratified { folds },
            None => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn stage<E: std::error::Error + Send + Sync + 'static>(stage: Stage) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        source: Box::new(e),
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Creates the run directory and records what produced it.
fn open_run(out: &Path, manifest: &str) -> Result<(), PipelineError> {
    fs::create_dir_all(out).map_err(io(out))?;
    write_text(out, "manifest.json", manifest)
}

fn open_pipeline_run(s: &Stage0) -> Result<PipelineConfig, PipelineError> {
    let cfg = s.cfg.resolve()?;
    open_run(&s.out, &cfg.to_json())?;
    Ok(cfg)
}

fn writer(dir: &Path, name: &str) -> Result<(BufWriter<File>, PathBuf), PipelineError> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(io(&path))?;
    Ok((BufWriter::new(file), path))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), PipelineError> {
    w.flush().map_err(io(path))
}

fn read_features(path: &Path) -> Result<Dataset, PipelineError> {
    let file = File::open(path).map_err(io(path))?;
    read_features_csv(BufReader::new(file)).map_err(stage(Stage::Features))
}

fn pretty<S: serde::Serialize>(value: &S) -> String {
    serde_json::to_string_pretty(value).expect("outputs serialize")
}

fn stream_of(cfg: &PipelineConfig) -> Result<TemporalEventStream, PipelineError> {
    load_stream(&cfg.source)
}

fn execute(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Summary(s) => {
            let cfg = open_pipeline_run(&s)?;
            let summary = pretty(&stream_summary(&stream_of(&cfg)?));
            write_text(&s.out, "summary.json", &summary)?;
            println!("{summary}");
        }
        Command::Windows(s) => {
            let cfg = open_pipeline_run(&s)?;
            let windows = make_windows(&stream_of(&cfg)?, &cfg.windows).map_err(stage(Stage::Windowing))?;
            let index: Vec<WindowIndexEntry> = windows.iter().map(WindowIndexEntry::from).collect();
            write_text(&s.out, "windows.json", &pretty(&index))?;
            println!("{} windows", index.len());
        }
        Command::Detect(s) => {
            let cfg = open_pipeline_run(&s)?;
            let t = track_stream(&cfg, stream_of(&cfg)?)?;
            let (mut w, path) = writer(&s.out, "covers.jsonl")?;
            write_covers_jsonl(&t.covers, t.stream.symbols(), &mut w).map_err(stage(Stage::Community))?;
            finish(w, &path)?;
            let stats: Vec<_> = t.covers.iter().map(cover_stats).collect();
            write_text(&s.out, "cover_stats.json", &pretty(&stats))?;
            let groups: usize = t.covers.iter().map(|c| c.communities.len()).sum();
            println!("{groups} communities over {} windows", t.covers.len());
        }
        Command::Track(s) => {
            let cfg = open_pipeline_run(&s)?;
            let t = track_stream(&cfg, stream_of(&cfg)?)?;
            let (mut w, path) = writer(&s.out, "events.csv")?;
            write_events_csv(&t.events, &mut w).map_err(stage(Stage::Tracking))?;
            finish(w, &path)?;
            let h = event_histogram(&t.events);
            let table = format!("{}\n{}\n", EventHistogram::HEADER, h.csv_line());
            write_text(&s.out, "histogram.csv", &table)?;
            print!("{table}");
        }
        Command::Chains(s) => {
            let cfg = open_pipeline_run(&s)?;
            let t = track_stream(&cfg, stream_of(&cfg)?)?;
            let raw = build_chains(&t.events, cfg.chain_length).map_err(stage(Stage::Chains))?;
            let total = raw.len();
            let chains = remove_duplicates(raw, cfg.dedup);
            let (mut w, path) = writer(&s.out, "chains.csv")?;
            write_chains_csv(&chains, &mut w).map_err(stage(Stage::Chains))?;
            finish(w, &path)?;
            println!("{} chains ({total} before deduplication)", chains.len());
        }
        Command::Features(s) => {
            let cfg = open_pipeline_run(&s)?;
            let a = build_artifacts::<f64>(&cfg)?;
            let (mut w, path) = writer(&s.out, "features.csv")?;
            write_features_csv(&a.dataset, &mut w).map_err(stage(Stage::Features))?;
            finish(w, &path)?;
            println!("{} rows x {} columns", a.dataset.len(), a.dataset.n_features());
        }
        Command::Run(s) => {
            let cfg = s.cfg.resolve()?;
            let run = run_pipeline::<f64>(&cfg, Some(&s.out))?;
            println!(
                "{} chains, plain-average F {:.4} ({} on {} folds)",
                run.artifacts.chains.len(),
                run.report.mean_plain_f,
                cfg.classifier,
                run.report.folds.len()
            );
        }
        Command::Train(a) => {
            open_run(
                &a.out,
                &pretty(&json!({
                    "command": "train",
                    "features": a.features,
                    "classifier": a.learn.classifier,
                    "trees": a.learn.trees,
                    "balancing": a.balancing,
                    "seed": a.learn.seed,
                })),
            )?;
            let data = a.balancing.apply(&read_features(&a.features)?, a.learn.seed);
            let mut hp = gep_core::Hyperparameters::default();
            if let Some(t) = a.learn.trees {
                hp.forest_trees = t;
            }
            let model = train(&data, a.learn.classifier, &hp, a.learn.seed).map_err(stage(Stage::Learn))?;
            let (w, path) = writer(&a.out, "model.json")?;
            model.save(w).map_err(stage(Stage::Learn))?;
            println!(
                "{} trained on {} rows -> {}",
                a.learn.classifier,
                data.len(),
                path.display()
            );
        }
        Command::Evaluate(a) => {
            open_run(
                &a.out,
                &pretty(&json!({ "command": "evaluate", "model": a.model, "features": a.features })),
            )?;
            let file = File::open(&a.model).map_err(io(&a.model))?;
            let model = TrainedModel::load(BufReader::new(file)).map_err(stage(Stage::Learn))?;
            let data = read_features(&a.features)?;
            let predicted = model.predict_labels(&data).map_err(stage(Stage::Learn))?;
            let cm =
                confusion(&data.labels, &predicted, &data.class_names).map_err(stage(Stage::Evaluate))?;
            let r = report::<f64>(&cm);
            write_text(&a.out, "evaluation.json", &r.to_json())?;
            println!("plain-average F {:.4}, accuracy {:.4}", r.plain_f, r.accuracy);
        }
        Command::Compare(a) => {
            let cfg = open_pipeline_run(&a.stage)?;
            let c = compare_classifiers::<f64>(&cfg, &a.kinds)?;
            write_text(&a.stage.out, "comparison.json", &pretty(&c))?;
            let names: Vec<String> = c
                .outcomes
                .iter()
                .filter(|o| o.report.is_some())
                .map(|o| o.kind.to_string())
                .collect();
            let scores: Vec<Vec<f64>> = c
                .outcomes
                .iter()
                .filter_map(|o| o.report.as_ref())
                .map(|r| r.folds.iter().map(|f| f.plain_f).collect())
                .collect();
            let (mut w, path) = writer(&a.stage.out, "comparison.csv")?;
            let folds: Vec<String> = (1..=scores.first().map_or(0, Vec::len))
                .map(|f| format!("fold{f}"))
                .collect();
            write_comparison_csv("classifier", &names, &folds, &scores, &mut w)
                .map_err(stage(Stage::Evaluate))?;
            finish(w, &path)?;
            for (i, (kind, score)) in c.scores().into_iter().enumerate() {
                let rank = c.friedman.as_ref().and_then(|f| {
                    names
                        .iter()
                        .position(|n| *n == kind.to_string())
                        .map(|p| f.average_ranks[p])
                });
                match (score, rank) {
                    (Some(s), Some(r)) => println!("{:>2} {kind:<15} F {s:.4}  rank {r:.2}", i + 1),
                    (Some(s), None) => println!("{:>2} {kind:<15} F {s:.4}", i + 1),
                    _ => println!(
                        "{:>2} {kind:<15} failed: {}",
                        i + 1,
                        c.outcomes[i].error.as_deref().unwrap_or("?")
                    ),
                }
            }
        }
        Command::Select(a) => {
            let ga = ga_config(&a, "select")?;
            let data = read_features(&a.features)?;
            let (train_set, val_set, _) = split_train_val_test(&data, a.seed).map_err(stage(Stage::Learn))?;
            let outcome = evolve(&train_set, &val_set, &ga, a.seed).map_err(stage(Stage::Learn))?;
            let columns: Vec<&str> = outcome
                .best
                .indices()
                .into_iter()
                .map(|i| data.columns[i].as_str())
                .collect();
            write_text(
                &a.out,
                "selection.json",
                &pretty(&json!({
                    "columns": columns,
                    "best_fitness": outcome.best_fitness,
                    "history": outcome.history,
                })),
            )?;
            println!(
                "{} of {} columns, fitness {:.4}",
                columns.len(),
                data.n_features(),
                outcome.best_fitness
            );
        }
        Command::Rank(a) => {
            let ga = ga_config(&a, "rank")?;
            let data = read_features(&a.features)?;
            let ranking = rank_features(&data, &ga, a.seed).map_err(stage(Stage::Learn))?;
            let (mut w, path) = writer(&a.out, "ranking.csv")?;
            write_ranking_csv(&ranking, &mut w).map_err(stage(Stage::Learn))?;
            finish(w, &path)?;
            for (i, e) in ranking.entries.iter().take(10).enumerate() {
                println!(
                    "{:>2} {} {} ({})",
                    i + 1,
                    e.feature,
                    e.occurrences,
                    e.feature_type
                );
            }
        }
        Command::Transfer(a) => {
            let train_cfg = PipelineConfig::load(&a.train)?;
            let test_cfg = PipelineConfig::load(&a.test)?;
            open_run(
                &a.out,
                &pretty(&json!({ "command": "transfer", "train": train_cfg, "test": test_cfg })),
            )?;
            let options = TransferOptions {
                balance: a.balance,
                standardize: a.standardize,
            };
            let r = transfer::<f64>(&train_cfg, &test_cfg, options)?;
            write_text(&a.out, "transfer.json", &r.to_json())?;
            println!("plain-average F {:.4}", r.plain_f);
        }
        Command::Enrich(a) => {
            let cfg = a.stage.cfg.resolve()?;
            let external = PipelineConfig::load(&a.external)?;
            open_run(
                &a.stage.out,
                &pretty(
                    &json!({ "command": "enrich", "base": cfg, "external": external, "classes": a.classes }),
                ),
            )?;
            let r = enrich_experiment::<f64>(&cfg, &external, &a.classes)?;
            write_text(&a.stage.out, "enrichment.json", &pretty(&r))?;
            println!("{} external rows added", r.added_rows);
            for d in &r.deltas {
                println!(
                    "{:<12} {:.4} -> {:.4} ({:+.4})",
                    d.class, d.before, d.after, d.delta
                );
            }
        }
        Command::Drift(a) => {
            let cfg = a.stage.cfg.resolve()?;
            open_run(
                &a.stage.out,
                &pretty(&json!({ "command": "drift", "config": cfg, "periods": a.periods })),
            )?;
            let r = drift_experiment::<f64>(&cfg, a.periods)?;
            write_text(&a.stage.out, "drift.json", &pretty(&r))?;
            for p in &r.periods {
                println!(
                    "windows {}..={}: {} chains, per-period F {:.4}, whole-span F {:.4}",
                    p.windows.0, p.windows.1, p.chains, p.per_period.mean_plain_f, p.whole_span.mean_plain_f
                );
            }
        }
        Command::Synth(a) => {
            let mut sc = SynthConfig {
                seed: a.seed,
                regime_change: a.regime_change,
                ..SynthConfig::default()
            };
            if let Some(w) = a.windows {
                sc.windows = w;
            }
            if let Some(c) = a.communities {
                sc.communities = c;
            }
            if let Some(n) = a.noise_edges {
                sc.noise_edges = n;
            }
            open_run(&a.out, &pretty(&json!({ "command": "synth", "synth": sc })))?;
            let out = generate_with_truth(&sc).map_err(stage(Stage::Ingest))?;
            let (mut w, path) = writer(&a.out, "stream.csv")?;
            write_stream(&out.stream, &mut w).map_err(stage(Stage::Ingest))?;
            finish(w, &path)?;
            let dataset = DatasetManifest {
                path: "stream.csv".into(),
                format: Default::default(),
                directed: false,
                self_loops: Default::default(),
                header: Default::default(),
            };
            write_text(&a.out, "dataset.json", &pretty(&dataset))?;
            write_text(&a.out, "planned.json", &pretty(&out.planned))?;
            let h = planned_histogram(&out.planned);
            println!(
                "{} records over {} windows",
                out.stream.record_count(),
                sc.windows
            );
            for (e, n) in h {
                println!("{e:<12} {n}");
            }
        }
    }
    Ok(())
}

fn ga_config(a: &GaArgs, command: &str) -> Result<GaConfig, PipelineError> {
    let ga = GaConfig {
        generations: a.generations,
        population: a.population,
        runs_per_fold: a.runs,
        ..GaConfig::default()
    };
    ga.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
    open_run(
        &a.out,
        &pretty(&json!({ "command": command, "features": a.features, "ga": ga, "seed": a.seed })),
    )?;
    Ok(ga)
}

/// Process exit status for a failed run.
fn exit_code(e: &PipelineError) -> u8 {
    match e {
        PipelineError::Config(_) => 3,
        PipelineError::Io { .. } => 4,
        PipelineError::Stage {
            stage: Stage::Ingest, ..
        } => 4,
        PipelineError::Stage { .. } => 5,
        PipelineError::NoEvents(_) => 6,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command).context("gep failed") {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<PipelineError>().map_or(1, exit_code);
            ExitCode::from(code)
        }
    }
}
