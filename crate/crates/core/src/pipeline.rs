//! End-to-end runs and the experiment scenarios built on them.
//!
//! A [`PipelineConfig`] is the full parameter sheet of a run. It is written
//! to `manifest.json` in the run directory, and replaying that file
//! reproduces every artifact.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chains::{build_chains, remove_duplicates, write_chains_csv, DedupMode, EvolutionChain};
use crate::community::{detect, write_covers_jsonl, CommunityCover, Detector};
use crate::evaluate::{friedman_ranks, report, EvaluationReport, FriedmanResult};
use crate::features::{build_dataset, write_features_csv, FeatureSubset};
use crate::ingest::{stream_summary, DatasetManifest, TemporalEventStream};
use crate::learn::{
    cross_validate, cross_validate_pairs, fold_pairs, train, Balancing, ClassifierKind, CvReport, CvScheme,
    Dataset, Hyperparameters, LearnError,
};
use crate::rng;
use crate::snapshot::{build_snapshot, GraphBuildSpec, MeasuredSnapshot, SnapshotError, SnapshotGraph};
use crate::synth::{self, SynthConfig};
use crate::tracking::{
    event_histogram, track, write_events_csv, EventHistogram, EventType, EvolutionEvent, TrackingConfig,
};
use crate::windowing::{make_windows, TimeWindow, WindowIndexEntry, WindowSpec};
use crate::Scalar;

/// Pipeline stage, used to tag errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Windowing,
    Snapshot,
    Community,
    Tracking,
    Chains,
    Features,
    Learn,
    Evaluate,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Ingest => "ingest",
            Stage::Windowing => "windowing",
            Stage::Snapshot => "snapshot",
            Stage::Community => "community",
            Stage::Tracking => "tracking",
            Stage::Chains => "chains",
            Stage::Features => "features",
            Stage::Learn => "learn",
            Stage::Evaluate => "evaluate",
        };
        f.write_str(s)
    }
}

type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: BoxError,
    },
    #[error("no events to predict: {0}")]
    NoEvents(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    pub fn stage(&self) -> Option<Stage> {
        match self {
            PipelineError::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

fn at<E: std::error::Error + Send + Sync + 'static>(stage: Stage) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        source: Box::new(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum StreamSource {
    Manifest { path: PathBuf },
    Synthetic(SynthConfig),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "preset")]
pub enum FeaturePreset {
    #[default]
    Full,
    LastStates {
        k: usize,
    },
    Custom {
        names: Vec<String>,
    },
}

impl FeaturePreset {
    pub fn subset(&self) -> Result<FeatureSubset, PipelineError> {
        match self {
            FeaturePreset::Full => Ok(FeatureSubset::all()),
            FeaturePreset::LastStates { k } => Ok(FeatureSubset::all().with_last_states(*k)),
            FeaturePreset::Custom { names } => {
                FeatureSubset::from_names(names).map_err(|e| PipelineError::Config(e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub source: StreamSource,
    pub windows: WindowSpec,
    pub graph: GraphBuildSpec,
    pub detector: Detector,
    pub tracking: TrackingConfig,
    pub chain_length: usize,
    #[serde(default)]
    pub dedup: DedupMode,
    #[serde(default)]
    pub features: FeaturePreset,
    pub classifier: ClassifierKind,
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
    #[serde(default)]
    pub balancing: Balancing,
    #[serde(default)]
    pub cv: CvScheme,
    pub seed: u64,
}

impl PipelineConfig {
    /// A run over a synthetic stream with windows matching the generator.
    pub fn synthetic(synth: SynthConfig) -> Self {
        let size = synth.window_length.max(1) as u64;
        Self {
            seed: synth.seed,
            source: StreamSource::Synthetic(synth),
            windows: WindowSpec::disjoint(size),
            graph: GraphBuildSpec::default(),
            detector: Detector::Modularity { seed: 7 },
            tracking: TrackingConfig::default(),
            chain_length: 2,
            dedup: DedupMode::LastState,
            features: FeaturePreset::Full,
            classifier: ClassifierKind::RandomForest,
            hyperparameters: Hyperparameters::default(),
            balancing: Balancing::None,
            cv: CvScheme::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |e: &dyn std::fmt::Display| PipelineError::Config(e.to_string());
        if let StreamSource::Manifest { path } = &self.source {
            if !path.is_file() {
                return Err(PipelineError::Config(format!(
                    "manifest {} not found",
                    path.display()
                )));
            }
        }
        self.windows.validate().map_err(|e| bad(&e))?;
        self.graph.validate().map_err(|e| bad(&e))?;
        self.tracking.validate().map_err(|e| bad(&e))?;
        self.hyperparameters.validate().map_err(|e| bad(&e))?;
        if let Detector::Cpm { k } = self.detector {
            if k < 3 {
                return Err(PipelineError::Config(format!("clique size {k} below 3")));
            }
        }
        if self.chain_length == 0 {
            return Err(PipelineError::Config("chain length must be at least 1".into()));
        }
        if let FeaturePreset::LastStates { k } = self.features {
            if k == 0 || k > self.chain_length {
                return Err(PipelineError::Config(format!(
                    "last-states preset {k} outside 1..={}",
                    self.chain_length
                )));
            }
        }
        if let CvScheme::Stratified { folds } = self.cv {
            if folds < 2 {
                return Err(PipelineError::Config("at least two folds are needed".into()));
            }
        }
        self.features.subset()?;
        Ok(())
    }
}

/// Everything a run produces before learning.
#[derive(Debug, Clone)]
pub struct Artifacts<T: Scalar> {
    pub stream: TemporalEventStream,
    pub windows: Vec<TimeWindow>,
    pub snapshots: Vec<MeasuredSnapshot<T>>,
    pub covers: Vec<CommunityCover>,
    pub events: Vec<EvolutionEvent>,
    /// Chains after deduplication, in the dataset's row order.
    pub chains: Vec<EvolutionChain>,
    pub raw_chain_count: usize,
    pub dataset: Dataset<T>,
}

impl<T: Scalar> Artifacts<T> {
    pub fn histogram(&self) -> EventHistogram {
        event_histogram(&self.events)
    }
}

pub fn load_stream(source: &StreamSource) -> Result<TemporalEventStream, PipelineError> {
    match source {
        StreamSource::Manifest { path } => {
            let manifest = DatasetManifest::load(path).map_err(at(Stage::Ingest))?;
            manifest.open().map_err(at(Stage::Ingest))
        }
        StreamSource::Synthetic(cfg) => synth::generate(cfg).map_err(at(Stage::Ingest)),
    }
}

/// Snapshot graphs of every window; empty windows give empty graphs.
pub fn build_snapshots(
    stream: &TemporalEventStream,
    windows: &[TimeWindow],
    spec: &GraphBuildSpec,
) -> Result<Vec<SnapshotGraph>, PipelineError> {
    windows
        .par_iter()
        .map(
            |w| match build_snapshot(&stream.records()[w.records.clone()], w.index, spec) {
                Err(SnapshotError::EmptySlice) => Ok(SnapshotGraph::empty(w.index, spec.directed)),
                other => other.map_err(at(Stage::Snapshot)),
            },
        )
        .collect()
}

/// Runs every stage up to the feature matrix.
pub fn build_artifacts<T: Scalar>(cfg: &PipelineConfig) -> Result<Artifacts<T>, PipelineError> {
    cfg.validate()?;
    let stream = load_stream(&cfg.source)?;
    build_artifacts_from(cfg, stream)
}

/// Output of the stages up to tracking.
#[derive(Debug, Clone)]
pub struct Tracked {
    pub stream: TemporalEventStream,
    pub windows: Vec<TimeWindow>,
    pub graphs: Vec<SnapshotGraph>,
    pub covers: Vec<CommunityCover>,
    pub events: Vec<EvolutionEvent>,
}

/// Windows, snapshots, communities and events of `stream`.
pub fn track_stream(cfg: &PipelineConfig, stream: TemporalEventStream) -> Result<Tracked, PipelineError> {
    let windows = make_windows(&stream, &cfg.windows).map_err(at(Stage::Windowing))?;
    log::info!("{} windows", windows.len());
    let graphs = build_snapshots(&stream, &windows, &cfg.graph)?;
    let covers = graphs
        .par_iter()
        .map(|g| detect(g, &cfg.detector))
        .collect::<Result<Vec<_>, _>>()
        .map_err(at(Stage::Community))?;
    let events = track(&covers, &graphs, &cfg.tracking).map_err(at(Stage::Tracking))?;
    Ok(Tracked {
        stream,
        windows,
        graphs,
        covers,
        events,
    })
}

pub fn build_artifacts_from<T: Scalar>(
    cfg: &PipelineConfig,
    stream: TemporalEventStream,
) -> Result<Artifacts<T>, PipelineError> {
    let Tracked {
        stream,
        windows,
        graphs,
        covers,
        events,
    } = track_stream(cfg, stream)?;
    let raw = build_chains(&events, cfg.chain_length).map_err(at(Stage::Chains))?;
    let raw_chain_count = raw.len();
    let chains = remove_duplicates(raw, cfg.dedup);
    log::info!(
        "{} events, {raw_chain_count} chains, {} after dedup",
        events.len(),
        chains.len()
    );
    if chains.is_empty() {
        return Err(PipelineError::NoEvents(format!(
            "{} windows and {} events yield no chain of length {}",
            windows.len(),
            events.len(),
            cfg.chain_length
        )));
    }
    let snapshots: Vec<MeasuredSnapshot<T>> = graphs.into_par_iter().map(MeasuredSnapshot::new).collect();
    let subset = cfg.features.subset()?;
    let mut dataset = build_dataset(&chains, cfg.chain_length, &subset, &covers, &snapshots)
        .map_err(at(Stage::Features))?;
    dataset.provenance.dataset = match &cfg.source {
        StreamSource::Manifest { path } => path.display().to_string(),
        StreamSource::Synthetic(s) => format!("synthetic:{}", s.seed),
    };
    dataset.provenance.windows = Some((0, windows.len() - 1));
    Ok(Artifacts {
        stream,
        windows,
        snapshots,
        covers,
        events,
        chains,
        raw_chain_count,
        dataset,
    })
}

#[derive(Debug, Clone)]
pub struct PipelineRun<T: Scalar> {
    pub artifacts: Artifacts<T>,
    pub report: CvReport<T>,
}

/// Runs all stages and cross-validates the configured classifier. When
/// `out` is given every stage's output is written there.
pub fn run_pipeline<T: Scalar>(
    cfg: &PipelineConfig,
    out: Option<&Path>,
) -> Result<PipelineRun<T>, PipelineError> {
    let artifacts = build_artifacts::<T>(cfg)?;
    let report = cross_validate(
        &artifacts.dataset,
        cfg.classifier,
        &cfg.hyperparameters,
        cfg.cv,
        cfg.balancing,
        cfg.seed,
    )
    .map_err(at(Stage::Learn))?;
    if let Some(dir) = out {
        persist(cfg, &artifacts, &report, dir)?;
    }
    Ok(PipelineRun { artifacts, report })
}

fn create(path: &Path) -> Result<BufWriter<File>, PipelineError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| PipelineError::Io {
            path: path.to_owned(),
            source,
        })
}

/// Writes `text` to `dir/name`.
pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), PipelineError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|source| PipelineError::Io { path, source })
}

fn flush(mut w: BufWriter<File>, path: &Path) -> Result<(), PipelineError> {
    w.flush().map_err(|source| PipelineError::Io {
        path: path.to_owned(),
        source,
    })
}

fn persist<T: Scalar>(
    cfg: &PipelineConfig,
    a: &Artifacts<T>,
    report: &CvReport<T>,
    dir: &Path,
) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
        path: dir.to_owned(),
        source,
    })?;
    write_text(dir, "manifest.json", &cfg.to_json())?;
    let summary = serde_json::to_string_pretty(&stream_summary(&a.stream)).expect("summary serializes");
    write_text(dir, "summary.json", &summary)?;
    let index: Vec<WindowIndexEntry> = a.windows.iter().map(WindowIndexEntry::from).collect();
    write_text(
        dir,
        "windows.json",
        &serde_json::to_string_pretty(&index).expect("windows serialize"),
    )?;

    let path = dir.join("covers.jsonl");
    let mut w = create(&path)?;
    write_covers_jsonl(&a.covers, a.stream.symbols(), &mut w).map_err(at(Stage::Community))?;
    flush(w, &path)?;

    let path = dir.join("events.csv");
    let mut w = create(&path)?;
    write_events_csv(&a.events, &mut w).map_err(at(Stage::Tracking))?;
    flush(w, &path)?;

    write_text(
        dir,
        "histogram.csv",
        &format!("{}\n{}\n", EventHistogram::HEADER, a.histogram().csv_line()),
    )?;

    let path = dir.join("chains.csv");
    let mut w = create(&path)?;
    write_chains_csv(&a.chains, &mut w).map_err(at(Stage::Chains))?;
    flush(w, &path)?;

    let path = dir.join("features.csv");
    let mut w = create(&path)?;
    write_features_csv(&a.dataset, &mut w).map_err(at(Stage::Features))?;
    flush(w, &path)?;

    write_text(dir, "report.json", &report_json(report))
}

pub fn report_json<T: Scalar>(report: &CvReport<T>) -> String {
    serde_json::to_string_pretty(report).expect("reports serialize")
}

// ---------------------------------------------------------------------------
// Classifier comparison

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KindOutcome<T> {
    pub kind: ClassifierKind,
    pub report: Option<CvReport<T>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Comparison<T> {
    pub outcomes: Vec<KindOutcome<T>>,
    /// Ranks over the kinds that trained, with folds as datasets.
    pub friedman: Option<FriedmanResult<T>>,
}

impl<T: Scalar> Comparison<T> {
    /// Mean plain-average F per kind; `None` for kinds that failed.
    pub fn scores(&self) -> Vec<(ClassifierKind, Option<T>)> {
        self.outcomes
            .iter()
            .map(|o| (o.kind, o.report.as_ref().map(|r| r.mean_plain_f)))
            .collect()
    }
}

/// Cross-validates every kind on the same folds.
pub fn compare_on_dataset<T: Scalar>(
    data: &Dataset<T>,
    kinds: &[ClassifierKind],
    hp: &Hyperparameters,
    scheme: CvScheme,
    balancing: Balancing,
    seed: u64,
) -> Result<Comparison<T>, PipelineError> {
    if kinds.len() < 2 {
        return Err(PipelineError::Config(
            "comparison needs at least two classifiers".into(),
        ));
    }
    let outcomes: Vec<KindOutcome<T>> = kinds
        .iter()
        .map(
            |&kind| match cross_validate(data, kind, hp, scheme, balancing, seed) {
                Ok(r) => KindOutcome {
                    kind,
                    report: Some(r),
                    error: None,
                },
                Err(e) => {
                    log::warn!("{kind}: {e}");
                    KindOutcome {
                        kind,
                        report: None,
                        error: Some(e.to_string()),
                    }
                }
            },
        )
        .collect();
    let scores: Vec<Vec<T>> = outcomes
        .iter()
        .filter_map(|o| o.report.as_ref())
        .map(|r| r.folds.iter().map(|f| f.plain_f).collect())
        .collect();
    let friedman = if scores.len() >= 2 {
        Some(friedman_ranks(&scores).map_err(at(Stage::Evaluate))?)
    } else {
        None
    };
    Ok(Comparison { outcomes, friedman })
}

pub fn compare_classifiers<T: Scalar>(
    cfg: &PipelineConfig,
    kinds: &[ClassifierKind],
) -> Result<Comparison<T>, PipelineError> {
    if kinds.len() < 2 {
        return Err(PipelineError::Config(
            "comparison needs at least two classifiers".into(),
        ));
    }
    let a = build_artifacts::<T>(cfg)?;
    compare_on_dataset(
        &a.dataset,
        kinds,
        &cfg.hyperparameters,
        cfg.cv,
        cfg.balancing,
        cfg.seed,
    )
}

// ---------------------------------------------------------------------------
// Transfer

/// Per-column mean and standard deviation of a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer<T> {
    mean: Vec<T>,
    std: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    pub fn fit(data: &Dataset<T>) -> Self {
        let d = data.n_features();
        let n = T::of_usize(data.len().max(1));
        let mut mean = vec![T::zero(); d];
        for row in &data.rows {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut var = vec![T::zero(); d];
        for row in &data.rows {
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let std = var
            .into_iter()
            .map(|v| if v > T::zero() { v.sqrt() } else { T::one() })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, data: &Dataset<T>) -> Dataset<T> {
        let mut out = data.clone();
        for row in &mut out.rows {
            for ((v, &m), &s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TransferOptions {
    /// Equal-size sampling of the training dataset only.
    pub balance: bool,
    /// Z-score both datasets with the training set's statistics.
    pub standardize: bool,
}

/// Fits on `source` and scores on `target`.
pub fn transfer_datasets<T: Scalar>(
    source: &Dataset<T>,
    target: &Dataset<T>,
    kind: ClassifierKind,
    hp: &Hyperparameters,
    options: TransferOptions,
    seed: u64,
) -> Result<EvaluationReport<T>, PipelineError> {
    if source.columns != target.columns {
        return Err(at(Stage::Learn)(LearnError::SignatureMismatch {
            expected: source.n_features(),
            found: target.n_features(),
        }));
    }
    let train_set = if options.balance {
        Balancing::EqualSize.apply(source, seed)
    } else {
        source.clone()
    };
    let (train_set, test_set) = if options.standardize {
        let z = Standardizer::fit(&train_set);
        (z.apply(&train_set), z.apply(target))
    } else {
        (train_set, target.clone())
    };
    let model = train(&train_set, kind, hp, seed).map_err(at(Stage::Learn))?;
    let predicted = model.predict_labels(&test_set).map_err(at(Stage::Learn))?;
    let cm = crate::evaluate::confusion(&test_set.labels, &predicted, &test_set.class_names)
        .map_err(at(Stage::Evaluate))?;
    Ok(report(&cm))
}

/// Trains on the chains of `train_cfg`'s dataset, tests on `test_cfg`'s.
pub fn transfer<T: Scalar>(
    train_cfg: &PipelineConfig,
    test_cfg: &PipelineConfig,
    options: TransferOptions,
) -> Result<EvaluationReport<T>, PipelineError> {
    if train_cfg.chain_length != test_cfg.chain_length {
        return Err(PipelineError::Config(format!(
            "chain lengths differ: {} vs {}",
            train_cfg.chain_length, test_cfg.chain_length
        )));
    }
    let a = build_artifacts::<T>(train_cfg)?;
    let b = build_artifacts::<T>(test_cfg)?;
    transfer_datasets(
        &a.dataset,
        &b.dataset,
        train_cfg.classifier,
        &train_cfg.hyperparameters,
        options,
        train_cfg.seed,
    )
}

// ---------------------------------------------------------------------------
// Enrichment

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ClassDelta<T> {
    pub class: String,
    pub before: T,
    pub after: T,
    pub delta: T,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EnrichmentReport<T> {
    pub before: CvReport<T>,
    pub after: CvReport<T>,
    pub deltas: Vec<ClassDelta<T>>,
    /// External rows added to every training fold.
    pub added_rows: usize,
}

/// External rows whose label is in `classes`, with ids prefixed so they
/// can never collide with the base rows.
pub fn external_rows<T: Scalar>(external: &Dataset<T>, classes: &[usize]) -> Dataset<T> {
    let picked: Vec<usize> = (0..external.len())
        .filter(|&i| classes.contains(&external.labels[i]))
        .collect();
    let mut out = external.subset(&picked);
    if out.row_ids.len() == out.rows.len() {
        out.row_ids = out.row_ids.iter().map(|id| format!("external/{id}")).collect();
    }
    out
}

/// Cross-validates on `base` twice with identical folds and seeds, once as
/// is and once with the selected external rows added to each training fold.
#[allow(clippy::too_many_arguments)]
pub fn enrich_datasets<T: Scalar>(
    base: &Dataset<T>,
    external: &Dataset<T>,
    classes: &[usize],
    kind: ClassifierKind,
    hp: &Hyperparameters,
    scheme: CvScheme,
    balancing: Balancing,
    seed: u64,
) -> Result<EnrichmentReport<T>, PipelineError> {
    if base.columns != external.columns {
        return Err(at(Stage::Learn)(LearnError::SignatureMismatch {
            expected: base.n_features(),
            found: external.n_features(),
        }));
    }
    if base.len() < 2 {
        return Err(at(Stage::Learn)(LearnError::TooFewRows {
            needed: 2,
            found: base.len(),
        }));
    }
    let extra = external_rows(external, classes);
    let pairs = fold_pairs(&base.labels, scheme, seed);
    let before =
        cross_validate_pairs(base, &pairs, kind, hp, balancing, None, seed).map_err(at(Stage::Learn))?;
    let after = cross_validate_pairs(base, &pairs, kind, hp, balancing, Some(&extra), seed)
        .map_err(at(Stage::Learn))?;
    let deltas = before
        .aggregate
        .per_class
        .iter()
        .zip(&after.aggregate.per_class)
        .zip(&base.class_names)
        .map(|((b, a), name)| ClassDelta {
            class: name.clone(),
            before: b.f_measure,
            after: a.f_measure,
            delta: a.f_measure - b.f_measure,
        })
        .collect();
    Ok(EnrichmentReport {
        before,
        after,
        deltas,
        added_rows: extra.len(),
    })
}

pub fn enrich_experiment<T: Scalar>(
    base: &PipelineConfig,
    external: &PipelineConfig,
    classes: &[EventType],
) -> Result<EnrichmentReport<T>, PipelineError> {
    let indices = classes
        .iter()
        .map(|e| {
            e.class_index()
                .ok_or_else(|| PipelineError::Config(format!("{e} is not a prediction class")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let a = build_artifacts::<T>(base)?;
    let b = build_artifacts::<T>(external)?;
    enrich_datasets(
        &a.dataset,
        &b.dataset,
        &indices,
        base.classifier,
        &base.hyperparameters,
        base.cv,
        base.balancing,
        base.seed,
    )
}

// ---------------------------------------------------------------------------
// Concept drift

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PeriodResult<T> {
    /// Inclusive window range of the period.
    pub windows: (usize, usize),
    pub chains: usize,
    /// Trained on the period's own training folds.
    pub per_period: CvReport<T>,
    /// Trained on the same folds plus every chain outside the period.
    pub whole_span: CvReport<T>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DriftReport<T> {
    pub periods: Vec<PeriodResult<T>>,
}

impl<T: Scalar> DriftReport<T> {
    /// (per-period, whole-span) mean plain-average F for every period.
    pub fn scores(&self) -> Vec<(T, T)> {
        self.periods
            .iter()
            .map(|p| (p.per_period.mean_plain_f, p.whole_span.mean_plain_f))
            .collect()
    }
}

/// Equal window ranges covering `windows` windows.
pub fn period_ranges(windows: usize, periods: usize) -> Vec<(usize, usize)> {
    (0..periods)
        .map(|i| (i * windows / periods, (i + 1) * windows / periods - 1))
        .collect()
}

/// Splits the run into `periods` equal window ranges. Each period is
/// cross-validated on its own chains; the whole-span arm adds every chain
/// that shares no window with the period to each training fold.
pub fn drift_on_artifacts<T: Scalar>(
    a: &Artifacts<T>,
    cfg: &PipelineConfig,
    periods: usize,
) -> Result<DriftReport<T>, PipelineError> {
    let n = a.windows.len();
    if periods == 0 || n < 2 * periods {
        return Err(PipelineError::Config(format!(
            "{n} windows cannot form {periods} periods of two"
        )));
    }
    let mut out = Vec::with_capacity(periods);
    for (p, (lo, hi)) in period_ranges(n, periods).into_iter().enumerate() {
        let mut inside = Vec::new();
        let mut outside = Vec::new();
        for (i, c) in a.chains.iter().enumerate() {
            if c.states.iter().all(|s| (lo..=hi).contains(&s.window)) {
                inside.push(i);
            } else if c.states.iter().all(|s| !(lo..=hi).contains(&s.window)) {
                outside.push(i);
            }
        }
        if inside.len() < 4 {
            return Err(PipelineError::NoEvents(format!(
                "period {p} (windows {lo}..={hi}) has {} chains",
                inside.len()
            )));
        }
        let data = a.dataset.subset(&inside);
        let extra = a.dataset.subset(&outside);
        let seed = rng::mix(cfg.seed, p as u64);
        let pairs = fold_pairs(&data.labels, cfg.cv, seed);
        let run = |x: Option<&Dataset<T>>| {
            cross_validate_pairs(
                &data,
                &pairs,
                cfg.classifier,
                &cfg.hyperparameters,
                cfg.balancing,
                x,
                seed,
            )
            .map_err(at(Stage::Learn))
        };
        out.push(PeriodResult {
            windows: (lo, hi),
            chains: inside.len(),
            per_period: run(None)?,
            whole_span: run(Some(&extra))?,
        });
    }
    Ok(DriftReport { periods: out })
}

pub fn drift_experiment<T: Scalar>(
    cfg: &PipelineConfig,
    periods: usize,
) -> Result<DriftReport<T>, PipelineError> {
    let a = build_artifacts::<T>(cfg)?;
    drift_on_artifacts(&a, cfg, periods)
}

/// Chains per label, keyed by class name.
pub fn chain_label_table(chains: &[EvolutionChain]) -> BTreeMap<String, usize> {
    crate::chains::label_counts(chains)
        .into_iter()
        .map(|(e, n)| (e.name().to_owned(), n))
        .collect()
}
