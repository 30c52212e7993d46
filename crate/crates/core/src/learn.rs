//! Datasets, classifiers, class balancing and cross-validation.
//!
//! All randomness derives from an explicit seed; ensembles give every tree
//! its own ChaCha stream so results do not depend on thread scheduling.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluate::{confusion, report, ConfusionMatrix, EvaluationReport};
use crate::rng;
use crate::tracking::EventType;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{0} needs at least two classes in the training data")]
    SingleClass(ClassifierKind),
    #[error("column signature mismatch: model has {expected} columns, data has {found}")]
    SignatureMismatch { expected: usize, found: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("row {row} has {found} values, expected {expected}")]
    RowLength {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("label {0} outside the class list")]
    BadLabel(usize),
    #[error("{labels} labels for {rows} rows")]
    LabelCount { rows: usize, labels: usize },
    #[error("need at least {needed} rows, got {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("unknown classifier {0:?}")]
    UnknownKind(String),
    #[error("test row {0:?} also appears in the training set")]
    Leak(String),
    #[error("model io: {0}")]
    Io(#[from] std::io::Error),
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
}

// ---------------------------------------------------------------------------
// Dataset

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset: String,
    /// Inclusive window range the rows were drawn from.
    pub windows: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Dataset<T> {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<T>>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    #[serde(default)]
    pub provenance: Provenance,
    /// Optional per-row identifiers (chain keys), kept in step with `rows`.
    #[serde(default)]
    pub row_ids: Vec<String>,
}

pub fn event_class_names() -> Vec<String> {
    EventType::CLASSES.iter().map(|e| e.name().to_owned()).collect()
}

impl<T: Scalar> Dataset<T> {
    /// Dataset over the six event classes.
    pub fn new(columns: Vec<String>, rows: Vec<Vec<T>>, labels: Vec<usize>) -> Result<Self, LearnError> {
        Self::with_classes(columns, rows, labels, event_class_names())
    }

    pub fn with_classes(
        columns: Vec<String>,
        rows: Vec<Vec<T>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self, LearnError> {
        if rows.len() != labels.len() {
            return Err(LearnError::LabelCount {
                rows: rows.len(),
                labels: labels.len(),
            });
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != columns.len() {
                return Err(LearnError::RowLength {
                    row: i,
                    expected: columns.len(),
                    found: r.len(),
                });
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(LearnError::BadLabel(bad));
        }
        Ok(Self {
            columns,
            rows,
            labels,
            class_names,
            provenance: Provenance::default(),
            row_ids: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn classes_present(&self) -> usize {
        self.class_counts().iter().filter(|&&c| c > 0).count()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            columns: self.columns.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            provenance: self.provenance.clone(),
            row_ids: if self.row_ids.len() == self.rows.len() {
                indices.iter().map(|&i| self.row_ids[i].clone()).collect()
            } else {
                Vec::new()
            },
        }
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Self {
        Self {
            columns: columns.iter().map(|&c| self.columns[c].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| columns.iter().map(|&c| r[c]).collect())
                .collect(),
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
            provenance: self.provenance.clone(),
            row_ids: self.row_ids.clone(),
        }
    }

    /// Appends rows of a dataset with the same columns and classes.
    pub fn append(&mut self, other: &Dataset<T>) -> Result<(), LearnError> {
        check_signature(&self.columns, &other.columns)?;
        if self.class_names != other.class_names {
            return Err(LearnError::InvalidHyperparameter("class lists differ".into()));
        }
        let keep_ids = self.row_ids.len() == self.rows.len() && other.row_ids.len() == other.rows.len();
        self.rows.extend(other.rows.iter().cloned());
        self.labels.extend(other.labels.iter().copied());
        if keep_ids {
            self.row_ids.extend(other.row_ids.iter().cloned());
        } else {
            self.row_ids.clear();
        }
        Ok(())
    }

    /// The same data in another scalar type.
    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            columns: self.columns.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|v| U::of(v.as_f64())).collect())
                .collect(),
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
            provenance: self.provenance.clone(),
            row_ids: self.row_ids.clone(),
        }
    }
}

fn check_signature(expected: &[String], found: &[String]) -> Result<(), LearnError> {
    if expected != found {
        return Err(LearnError::SignatureMismatch {
            expected: expected.len(),
            found: found.len(),
        });
    }
    Ok(())
}

/// Index of the largest value; the lowest index wins ties.
fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    ZeroR,
    Knn,
    NaiveBayes,
    Cart,
    BaggingCart,
    RandomForest,
    AdaboostStump,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 7] = [
        ClassifierKind::ZeroR,
        ClassifierKind::Knn,
        ClassifierKind::NaiveBayes,
        ClassifierKind::Cart,
        ClassifierKind::BaggingCart,
        ClassifierKind::RandomForest,
        ClassifierKind::AdaboostStump,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::ZeroR => "zero-r",
            ClassifierKind::Knn => "knn",
            ClassifierKind::NaiveBayes => "naive-bayes",
            ClassifierKind::Cart => "cart",
            ClassifierKind::BaggingCart => "bagging-cart",
            ClassifierKind::RandomForest => "random-forest",
            ClassifierKind::AdaboostStump => "adaboost-stump",
        }
    }
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = LearnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| LearnError::UnknownKind(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::All => d,
            MaxFeatures::Sqrt => ((d as f64).sqrt().round() as usize).clamp(1, d.max(1)),
            MaxFeatures::Count(m) => m.clamp(1, d.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub knn_k: usize,
    pub forest_trees: usize,
    /// Features tried per split by the random forest.
    pub forest_max_features: MaxFeatures,
    pub bagging_iterations: usize,
    pub boosting_rounds: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub variance_floor: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            knn_k: 3,
            forest_trees: 50,
            forest_max_features: MaxFeatures::Sqrt,
            bagging_iterations: 10,
            boosting_rounds: 50,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            variance_floor: 1e-9,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |what: &str| Err(LearnError::InvalidHyperparameter(what.to_owned()));
        if self.knn_k == 0 {
            return bad("knn k must be >= 1");
        }
        if self.forest_trees == 0 || self.bagging_iterations == 0 || self.boosting_rounds == 0 {
            return bad("ensemble sizes must be >= 1");
        }
        if self.min_samples_split < 2 || self.min_samples_leaf == 0 {
            return bad("min samples per split must be >= 2 and per leaf >= 1");
        }
        if self.max_depth == Some(0) {
            return bad("max depth must be >= 1");
        }
        if let MaxFeatures::Count(0) = self.forest_max_features {
            return bad("max features must be >= 1");
        }
        if self.variance_floor.is_nan() || self.variance_floor <= 0.0 {
            return bad("variance floor must be positive");
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Decision trees

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", tag = "node", rename_all = "lowercase")]
pub enum TreeNode<T> {
    Leaf {
        /// Weighted class distribution of the training rows that reached it.
        distribution: Vec<f64>,
    },
    Split {
        feature: usize,
        /// Rows with `value <= threshold` go left.
        threshold: T,
        left: Box<TreeNode<T>>,
        right: Box<TreeNode<T>>,
    },
}

impl<T: Scalar> TreeNode<T> {
    fn leaf<'a>(&'a self, row: &[T]) -> &'a [f64] {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { distribution } => return distribution,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, row: &[T]) -> usize {
        argmax(self.leaf(row))
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

struct TreeParams {
    max_depth: Option<usize>,
    min_samples_split: usize,
    min_samples_leaf: usize,
    max_features: usize,
}

struct TreeBuilder<'a, T> {
    rows: &'a [Vec<T>],
    labels: &'a [usize],
    n_classes: usize,
    params: TreeParams,
}

fn gini(dist: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - dist.iter().map(|c| (c / total).powi(2)).sum::<f64>()
}

struct SplitChoice<T> {
    feature: usize,
    threshold: T,
    impurity: f64,
}

impl<'a, T: Scalar> TreeBuilder<'a, T> {
    fn distribution(&self, samples: &[(usize, f64)]) -> Vec<f64> {
        let mut dist = vec![0.0; self.n_classes];
        for &(i, w) in samples {
            dist[self.labels[i]] += w;
        }
        dist
    }

    fn best_split_on(
        &self,
        samples: &[(usize, f64)],
        feature: usize,
        total: &[f64],
    ) -> Option<SplitChoice<T>> {
        let mut order: Vec<(T, usize, f64)> = samples
            .iter()
            .map(|&(i, w)| (self.rows[i][feature], i, w))
            .collect();
        order.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .expect("finite features")
                .then(a.1.cmp(&b.1))
        });
        let weight_total: f64 = total.iter().sum();
        let mut left = vec![0.0; self.n_classes];
        let mut left_weight = 0.0;
        let mut best: Option<SplitChoice<T>> = None;
        let n = order.len();
        for pos in 0..n - 1 {
            let (value, i, w) = order[pos];
            left[self.labels[i]] += w;
            left_weight += w;
            let next = order[pos + 1].0;
            if next <= value {
                continue;
            }
            let left_count = pos + 1;
            if left_count < self.params.min_samples_leaf || n - left_count < self.params.min_samples_leaf {
                continue;
            }
            let right: Vec<f64> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
            let right_weight = weight_total - left_weight;
            let impurity = (left_weight * gini(&left, left_weight)
                + right_weight * gini(&right, right_weight))
                / weight_total;
            if best.as_ref().is_none_or(|b| impurity < b.impurity - 1e-12) {
                let mut threshold = (value + next) / T::of(2.0);
                if threshold >= next {
                    threshold = value;
                }
                best = Some(SplitChoice {
                    feature,
                    threshold,
                    impurity,
                });
            }
        }
        best
    }

    fn build(&self, samples: Vec<(usize, f64)>, depth: usize, rng: &mut ChaCha8Rng) -> TreeNode<T> {
        let dist = self.distribution(&samples);
        let pure = dist.iter().filter(|&&c| c > 0.0).count() <= 1;
        let depth_reached = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || samples.len() < self.params.min_samples_split {
            return TreeNode::Leaf { distribution: dist };
        }
        let d = self.rows[0].len();
        let features: Vec<usize> = if self.params.max_features >= d {
            (0..d).collect()
        } else {
            let mut f: Vec<usize> = (0..d).collect();
            f.shuffle(rng);
            f
        };
        let mut best: Option<SplitChoice<T>> = None;
        for (tried, &f) in features.iter().enumerate() {
            if tried >= self.params.max_features && best.is_some() {
                break;
            }
            if let Some(c) = self.best_split_on(&samples, f, &dist) {
                if best.as_ref().is_none_or(|b| c.impurity < b.impurity - 1e-12) {
                    best = Some(c);
                }
            }
        }
        let Some(split) = best else {
            return TreeNode::Leaf { distribution: dist };
        };
        let (left, right): (Vec<_>, Vec<_>) = samples
            .into_iter()
            .partition(|&(i, _)| self.rows[i][split.feature] <= split.threshold);
        TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(self.build(left, depth + 1, rng)),
            right: Box::new(self.build(right, depth + 1, rng)),
        }
    }
}

fn grow_tree<T: Scalar>(
    data: &Dataset<T>,
    samples: Vec<(usize, f64)>,
    params: TreeParams,
    rng: &mut ChaCha8Rng,
) -> TreeNode<T> {
    let builder = TreeBuilder {
        rows: &data.rows,
        labels: &data.labels,
        n_classes: data.n_classes(),
        params,
    };
    builder.build(samples, 0, rng)
}

/// Bootstrap sample as (row, multiplicity) pairs.
fn bootstrap(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, f64)> {
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.gen_range(0..n)] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .map(|(i, c)| (i, c as f64))
        .collect()
}

// ---------------------------------------------------------------------------
// Models

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", tag = "kind", rename_all = "kebab-case")]
pub enum FittedModel<T> {
    ZeroR {
        class: usize,
    },
    Knn {
        k: usize,
        rows: Vec<Vec<T>>,
        labels: Vec<usize>,
        minimum: Vec<T>,
        range: Vec<T>,
    },
    NaiveBayes {
        /// Log prior per class; `None` for classes absent from training.
        log_prior: Vec<Option<f64>>,
        mean: Vec<Vec<f64>>,
        variance: Vec<Vec<f64>>,
    },
    Tree {
        root: TreeNode<T>,
    },
    Vote {
        trees: Vec<TreeNode<T>>,
    },
    Boost {
        stumps: Vec<TreeNode<T>>,
        weights: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrainedModel<T> {
    pub kind: ClassifierKind,
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
    /// Column names the model was trained on.
    pub columns: Vec<String>,
    pub class_names: Vec<String>,
    pub fitted: FittedModel<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Prediction<T> {
    pub label: usize,
    /// Per-class vote fractions; they sum to 1.
    pub votes: Vec<T>,
}

pub fn train<T: Scalar>(
    data: &Dataset<T>,
    kind: ClassifierKind,
    hp: &Hyperparameters,
    seed: u64,
) -> Result<TrainedModel<T>, LearnError> {
    hp.validate()?;
    if data.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    if kind != ClassifierKind::ZeroR && data.classes_present() < 2 {
        return Err(LearnError::SingleClass(kind));
    }
    let d = data.n_features();
    let n = data.len();
    let all_rows = || -> Vec<(usize, f64)> { (0..n).map(|i| (i, 1.0)).collect() };
    let cart_params = |max_features: usize| TreeParams {
        max_depth: hp.max_depth,
        min_samples_split: hp.min_samples_split,
        min_samples_leaf: hp.min_samples_leaf,
        max_features,
    };
    let fitted = match kind {
        ClassifierKind::ZeroR => FittedModel::ZeroR {
            class: argmax(&data.class_counts()),
        },
        ClassifierKind::Knn => {
            let mut minimum = vec![T::infinity(); d];
            let mut maximum = vec![T::neg_infinity(); d];
            for row in &data.rows {
                for (j, &v) in row.iter().enumerate() {
                    minimum[j] = minimum[j].min(v);
                    maximum[j] = maximum[j].max(v);
                }
            }
            let range = minimum.iter().zip(&maximum).map(|(&lo, &hi)| hi - lo).collect();
            FittedModel::Knn {
                k: hp.knn_k,
                rows: data.rows.clone(),
                labels: data.labels.clone(),
                minimum,
                range,
            }
        }
        ClassifierKind::NaiveBayes => {
            let counts = data.class_counts();
            let c = data.n_classes();
            let mut mean = vec![vec![0.0; d]; c];
            let mut variance = vec![vec![0.0; d]; c];
            for (row, &l) in data.rows.iter().zip(&data.labels) {
                for (j, v) in row.iter().enumerate() {
                    mean[l][j] += v.as_f64();
                }
            }
            for (k, m) in mean.iter_mut().enumerate() {
                if counts[k] > 0 {
                    m.iter_mut().for_each(|x| *x /= counts[k] as f64);
                }
            }
            for (row, &l) in data.rows.iter().zip(&data.labels) {
                for (j, v) in row.iter().enumerate() {
                    variance[l][j] += (v.as_f64() - mean[l][j]).powi(2);
                }
            }
            for (k, var) in variance.iter_mut().enumerate() {
                for x in var.iter_mut() {
                    *x = (*x / counts[k].max(1) as f64).max(hp.variance_floor);
                }
            }
            FittedModel::NaiveBayes {
                log_prior: counts
                    .iter()
                    .map(|&k| (k > 0).then(|| (k as f64 / n as f64).ln()))
                    .collect(),
                mean,
                variance,
            }
        }
        ClassifierKind::Cart => {
            let mut rng = rng::stream(seed, 0);
            FittedModel::Tree {
                root: grow_tree(data, all_rows(), cart_params(d), &mut rng),
            }
        }
        ClassifierKind::BaggingCart | ClassifierKind::RandomForest => {
            let (count, max_features) = if kind == ClassifierKind::BaggingCart {
                (hp.bagging_iterations, d)
            } else {
                (hp.forest_trees, hp.forest_max_features.resolve(d))
            };
            let trees = (0..count)
                .into_par_iter()
                .map(|t| {
                    let mut rng = rng::stream(seed, t as u64);
                    let sample = bootstrap(n, &mut rng);
                    grow_tree(data, sample, cart_params(max_features), &mut rng)
                })
                .collect();
            FittedModel::Vote { trees }
        }
        ClassifierKind::AdaboostStump => {
            let classes = data.classes_present() as f64;
            let mut w = vec![1.0 / n as f64; n];
            let mut stumps = Vec::new();
            let mut weights = Vec::new();
            let mut rng = rng::stream(seed, 0);
            for _ in 0..hp.boosting_rounds {
                let samples: Vec<(usize, f64)> = w.iter().copied().enumerate().collect();
                let params = TreeParams {
                    max_depth: Some(1),
                    min_samples_split: 2,
                    min_samples_leaf: 1,
                    max_features: d,
                };
                let stump = grow_tree(data, samples, params, &mut rng);
                let miss: Vec<bool> = data
                    .rows
                    .iter()
                    .zip(&data.labels)
                    .map(|(r, &l)| stump.predict(r) != l)
                    .collect();
                let err: f64 = w.iter().zip(&miss).filter(|(_, &m)| m).map(|(x, _)| x).sum();
                if err <= 1e-12 {
                    stumps.push(stump);
                    weights.push(1.0);
                    break;
                }
                if err >= 1.0 - 1.0 / classes {
                    if stumps.is_empty() {
                        stumps.push(stump);
                        weights.push(1.0);
                    }
                    break;
                }
                let alpha = ((1.0 - err) / err).ln() + (classes - 1.0).ln();
                for (x, &m) in w.iter_mut().zip(&miss) {
                    if m {
                        *x *= alpha.exp();
                    }
                }
                let sum: f64 = w.iter().sum();
                w.iter_mut().for_each(|x| *x /= sum);
                stumps.push(stump);
                weights.push(alpha);
            }
            FittedModel::Boost { stumps, weights }
        }
    };
    Ok(TrainedModel {
        kind,
        hyperparameters: *hp,
        seed,
        columns: data.columns.clone(),
        class_names: data.class_names.clone(),
        fitted,
    })
}

fn normalized<T: Scalar>(scores: Vec<f64>) -> Prediction<T> {
    let total: f64 = scores.iter().sum();
    let label = argmax(&scores);
    let votes = if total > 0.0 {
        scores.iter().map(|s| T::of(s / total)).collect()
    } else {
        let mut v = vec![T::zero(); scores.len()];
        v[label] = T::one();
        v
    };
    Prediction { label, votes }
}

impl<T: Scalar> TrainedModel<T> {
    fn predict_row(&self, row: &[T]) -> Prediction<T> {
        let c = self.class_names.len();
        match &self.fitted {
            FittedModel::ZeroR { class } => {
                let mut scores = vec![0.0; c];
                scores[*class] = 1.0;
                normalized(scores)
            }
            FittedModel::Knn {
                k,
                rows,
                labels,
                minimum,
                range,
            } => {
                let scale = |v: T, j: usize| {
                    if range[j] > T::zero() {
                        (v - minimum[j]) / range[j]
                    } else {
                        T::zero()
                    }
                };
                let mut dist: Vec<(T, usize)> = rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| {
                        let d: T = r
                            .iter()
                            .zip(row)
                            .enumerate()
                            .map(|(j, (&a, &b))| (scale(a, j) - scale(b, j)).powi(2))
                            .sum();
                        (d, i)
                    })
                    .collect();
                dist.sort_by(|a, b| {
                    a.0.partial_cmp(&b.0)
                        .expect("finite distances")
                        .then(a.1.cmp(&b.1))
                });
                let mut scores = vec![0.0; c];
                for &(_, i) in dist.iter().take(*k) {
                    scores[labels[i]] += 1.0;
                }
                normalized(scores)
            }
            FittedModel::NaiveBayes {
                log_prior,
                mean,
                variance,
            } => {
                let log_post: Vec<f64> = (0..c)
                    .map(|k| match log_prior[k] {
                        None => f64::NEG_INFINITY,
                        Some(p) => {
                            p + row
                                .iter()
                                .enumerate()
                                .map(|(j, v)| {
                                    let var = variance[k][j];
                                    let diff = v.as_f64() - mean[k][j];
                                    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + diff * diff / var)
                                })
                                .sum::<f64>()
                        }
                    })
                    .collect();
                let top = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let scores: Vec<f64> = log_post.iter().map(|&l| (l - top).exp()).collect();
                normalized(scores)
            }
            FittedModel::Tree { root } => normalized(root.leaf(row).to_vec()),
            FittedModel::Vote { trees } => {
                let mut scores = vec![0.0; c];
                for t in trees {
                    scores[t.predict(row)] += 1.0;
                }
                normalized(scores)
            }
            FittedModel::Boost { stumps, weights } => {
                let mut scores = vec![0.0; c];
                for (s, &w) in stumps.iter().zip(weights) {
                    scores[s.predict(row)] += w;
                }
                normalized(scores)
            }
        }
    }

    /// Predicts raw rows, which must follow the model's column order.
    pub fn predict_rows(&self, rows: &[Vec<T>]) -> Vec<Prediction<T>> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }

    /// Predicts a dataset after checking that its columns match the model's.
    pub fn predict(&self, data: &Dataset<T>) -> Result<Vec<Prediction<T>>, LearnError> {
        check_signature(&self.columns, &data.columns)?;
        Ok(self.predict_rows(&data.rows))
    }

    pub fn predict_labels(&self, data: &Dataset<T>) -> Result<Vec<usize>, LearnError> {
        Ok(self.predict(data)?.into_iter().map(|p| p.label).collect())
    }

    pub fn save<W: Write>(&self, writer: W) -> Result<(), LearnError> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<Self, LearnError> {
        Ok(serde_json::from_reader(reader)?)
    }
}

pub fn predict<T: Scalar>(
    model: &TrainedModel<T>,
    data: &Dataset<T>,
) -> Result<Vec<Prediction<T>>, LearnError> {
    model.predict(data)
}

// ---------------------------------------------------------------------------
// Balancing

fn indices_by_class<T: Scalar>(data: &Dataset<T>) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); data.n_classes()];
    for (i, &l) in data.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    by_class
}

/// Undersamples every present class, without replacement, to the minority
/// count. Surviving rows keep their original order.
pub fn balance_equal_size<T: Scalar>(data: &Dataset<T>, seed: u64) -> Dataset<T> {
    let by_class = indices_by_class(data);
    let Some(target) = by_class.iter().map(Vec::len).filter(|&c| c > 0).min() else {
        return data.clone();
    };
    let mut keep = Vec::new();
    for (c, mut idx) in by_class.into_iter().enumerate() {
        let mut rng = rng::stream(seed, c as u64);
        idx.shuffle(&mut rng);
        keep.extend(idx.into_iter().take(target));
    }
    keep.sort_unstable();
    data.subset(&keep)
}

/// Duplicates random rows of every present class, with replacement, up to
/// the majority count. Originals come first, then the extra copies.
pub fn oversample<T: Scalar>(data: &Dataset<T>, seed: u64) -> Dataset<T> {
    let by_class = indices_by_class(data);
    let target = by_class.iter().map(Vec::len).max().unwrap_or(0);
    let mut keep: Vec<usize> = (0..data.len()).collect();
    for (c, idx) in by_class.iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        let mut rng = rng::stream(seed, c as u64);
        for _ in idx.len()..target {
            keep.push(idx[rng.gen_range(0..idx.len())]);
        }
    }
    data.subset(&keep)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Balancing {
    #[default]
    None,
    EqualSize,
    Oversample,
}

impl Balancing {
    pub fn apply<T: Scalar>(self, data: &Dataset<T>, seed: u64) -> Dataset<T> {
        match self {
            Balancing::None => data.clone(),
            Balancing::EqualSize => balance_equal_size(data, seed),
            Balancing::Oversample => oversample(data, seed),
        }
    }
}

// ---------------------------------------------------------------------------
// Resampling schemes

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvScheme {
    Stratified { folds: usize },
    FiveByTwo,
}

impl Default for CvScheme {
    fn default() -> Self {
        CvScheme::Stratified { folds: 10 }
    }
}

/// Test-index lists of stratified folds. Each class is shuffled, classes are
/// concatenated in class order and rows are dealt round-robin, so every fold
/// holds each class to within one row of its share.
pub fn stratified_folds(labels: &[usize], folds: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut out = vec![Vec::new(); folds];
    let mut pos = 0;
    for mut idx in by_class {
        idx.shuffle(rng);
        for i in idx {
            out[pos % folds].push(i);
            pos += 1;
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    out
}

/// Number of stratified folds actually used for `labels`; shrinks when the
/// smallest class cannot populate every fold.
pub fn effective_folds(labels: &[usize], requested: usize) -> usize {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    let smallest = counts.values().copied().min().unwrap_or(0);
    let mut folds = requested.min(labels.len()).max(2);
    if smallest < folds {
        folds = smallest.max(2);
        log::warn!("smallest class has {smallest} rows; using {folds} folds instead of {requested}");
    }
    folds
}

/// (train, test) index pairs for a scheme.
pub fn fold_pairs(labels: &[usize], scheme: CvScheme, seed: u64) -> Vec<(Vec<usize>, Vec<usize>)> {
    let complement = |test: &[usize]| -> Vec<usize> {
        let mut in_test = vec![false; labels.len()];
        test.iter().for_each(|&i| in_test[i] = true);
        (0..labels.len()).filter(|&i| !in_test[i]).collect()
    };
    match scheme {
        CvScheme::Stratified { folds } => {
            let k = effective_folds(labels, folds);
            let mut rng = rng::stream(seed, 0);
            stratified_folds(labels, k, &mut rng)
                .into_iter()
                .map(|test| (complement(&test), test))
                .collect()
        }
        CvScheme::FiveByTwo => {
            let mut pairs = Vec::with_capacity(10);
            for repeat in 0..5u64 {
                let mut rng = rng::stream(seed, repeat);
                let halves = stratified_folds(labels, 2, &mut rng);
                pairs.push((halves[0].clone(), halves[1].clone()));
                pairs.push((halves[1].clone(), halves[0].clone()));
            }
            pairs
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CvReport<T> {
    pub folds: Vec<EvaluationReport<T>>,
    /// Report of the confusion matrix pooled over all folds.
    pub aggregate: EvaluationReport<T>,
    pub mean_plain_f: T,
    pub confusion: ConfusionMatrix,
}

/// Trains on each training split (after optional balancing) and scores the
/// held-out split. Folds run in parallel.
pub fn cross_validate<T: Scalar>(
    data: &Dataset<T>,
    kind: ClassifierKind,
    hp: &Hyperparameters,
    scheme: CvScheme,
    balancing: Balancing,
    seed: u64,
) -> Result<CvReport<T>, LearnError> {
    if data.len() < 2 {
        return Err(LearnError::TooFewRows {
            needed: 2,
            found: data.len(),
        });
    }
    let pairs = fold_pairs(&data.labels, scheme, seed);
    cross_validate_pairs(data, &pairs, kind, hp, balancing, None, seed)
}

/// Cross-validation on explicit (train, test) pairs. `extra` rows are
/// appended to every (balanced) training split and never to a test split.
/// When rows carry ids, each fold is audited: a test id showing up in its
/// training set is an error.
pub fn cross_validate_pairs<T: Scalar>(
    data: &Dataset<T>,
    pairs: &[(Vec<usize>, Vec<usize>)],
    kind: ClassifierKind,
    hp: &Hyperparameters,
    balancing: Balancing,
    extra: Option<&Dataset<T>>,
    seed: u64,
) -> Result<CvReport<T>, LearnError> {
    if pairs.is_empty() {
        return Err(LearnError::TooFewRows {
            needed: 2,
            found: data.len(),
        });
    }
    if let Some(x) = extra {
        check_signature(&data.columns, &x.columns)?;
    }
    let results = pairs
        .par_iter()
        .enumerate()
        .map(|(f, (train_idx, test_idx))| {
            let fold_seed = rng::mix(seed, f as u64 + 1);
            let mut train_set = balancing.apply(&data.subset(train_idx), fold_seed);
            if let Some(x) = extra.filter(|x| !x.is_empty()) {
                train_set.append(x)?;
            }
            let test_set = data.subset(test_idx);
            audit_fold(&train_set, &test_set)?;
            let model = match train(&train_set, kind, hp, fold_seed) {
                Err(LearnError::SingleClass(_)) => train(&train_set, ClassifierKind::ZeroR, hp, fold_seed)?,
                other => other?,
            };
            let predicted = model.predict_labels(&test_set)?;
            Ok(confusion(&test_set.labels, &predicted, &data.class_names)
                .expect("folds are non-empty and labels valid"))
        })
        .collect::<Result<Vec<ConfusionMatrix>, LearnError>>()?;
    let mut pooled = ConfusionMatrix::zeros(&data.class_names);
    let folds: Vec<EvaluationReport<T>> = results
        .iter()
        .map(|cm| {
            pooled.merge(cm);
            report(cm)
        })
        .collect();
    let mean_plain_f = folds.iter().map(|r| r.plain_f).sum::<T>() / T::of_usize(folds.len());
    Ok(CvReport {
        aggregate: report(&pooled),
        folds,
        mean_plain_f,
        confusion: pooled,
    })
}

/// Fails when a test row id also names a training row.
pub fn audit_fold<T: Scalar>(train_set: &Dataset<T>, test_set: &Dataset<T>) -> Result<(), LearnError> {
    if train_set.row_ids.is_empty() || test_set.row_ids.is_empty() {
        return Ok(());
    }
    let seen: std::collections::HashSet<&str> = train_set.row_ids.iter().map(String::as_str).collect();
    match test_set.row_ids.iter().find(|id| seen.contains(id.as_str())) {
        Some(id) => Err(LearnError::Leak(id.clone())),
        None => Ok(()),
    }
}

/// Train, validation and test parts.
pub type Split<T> = (Dataset<T>, Dataset<T>, Dataset<T>);

/// Stratified 0.375 / 0.125 / 0.5 split into train, validation and test.
pub fn split_train_val_test<T: Scalar>(data: &Dataset<T>, seed: u64) -> Result<Split<T>, LearnError> {
    let n = data.len();
    if n < 8 {
        return Err(LearnError::TooFewRows { needed: 8, found: n });
    }
    let order = stratified_order(&data.labels, seed);
    let a = (0.375 * n as f64).round() as usize;
    let b = (0.5 * n as f64).round() as usize;
    let part = |r: std::ops::Range<usize>| {
        let mut idx = order[r].to_vec();
        idx.sort_unstable();
        data.subset(&idx)
    };
    Ok((part(0..a), part(a..b), part(b..n)))
}

/// All rows interleaved so every prefix is close to stratified: each class
/// is shuffled and row `i` of a class of size `m` is placed at `(i + 0.5) / m`.
pub fn stratified_order(labels: &[usize], seed: u64) -> Vec<usize> {
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut keyed: Vec<(f64, usize, usize)> = Vec::with_capacity(labels.len());
    for (c, mut idx) in by_class.into_iter().enumerate() {
        let mut rng = rng::stream(seed, c as u64);
        idx.shuffle(&mut rng);
        let m = idx.len() as f64;
        for (rank, i) in idx.into_iter().enumerate() {
            keyed.push(((rank as f64 + 0.5) / m, c, i));
        }
    }
    keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite keys").then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, _, i)| i).collect()
}

/// Appends external rows to a training set, optionally only those whose
/// label is in `classes`.
pub fn enrich_training<T: Scalar>(
    base: &Dataset<T>,
    external: &Dataset<T>,
    classes: Option<&[usize]>,
) -> Result<Dataset<T>, LearnError> {
    check_signature(&base.columns, &external.columns)?;
    let picked: Vec<usize> = (0..external.len())
        .filter(|&i| classes.is_none_or(|cs| cs.contains(&external.labels[i])))
        .collect();
    let mut out = base.clone();
    out.append(&external.subset(&picked))?;
    Ok(out)
}
