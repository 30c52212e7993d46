//! Evolutionary feature selection and occurrence-based feature ranking.
//!
//! A mask's fitness is `gamma * F1 - delta * selected / d`, where F1 is the
//! weighted F-measure of a small random forest trained on the masked
//! training split and scored on the masked validation split.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluate::{confusion, report};
use crate::features::catalog;
use crate::learn::{
    cross_validate, fold_pairs, stratified_order, train, Balancing, ClassifierKind, CvScheme, Dataset,
    Hyperparameters, LearnError, MaxFeatures,
};
use crate::rng;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("invalid GA configuration: {0}")]
    InvalidConfig(String),
    #[error("mask has {found} bits, dataset has {expected} columns")]
    MaskLength { expected: usize, found: usize },
    #[error("dataset too small: {0}")]
    TooSmall(String),
    #[error("rankings cover different features")]
    MismatchedRankings,
    #[error("no rankings to merge")]
    NoRankings,
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("ranking csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureMask {
    bits: Vec<bool>,
}

impl FeatureMask {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn full(d: usize) -> Self {
        Self { bits: vec![true; d] }
    }

    pub fn from_indices(d: usize, indices: &[usize]) -> Self {
        let mut bits = vec![false; d];
        for &i in indices {
            bits[i] = true;
        }
        Self { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn selected_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&i| self.bits[i]).collect()
    }

    fn digest(&self) -> u64 {
        self.bits
            .chunks(64)
            .enumerate()
            .fold(0x5EED_u64, |acc, (k, chunk)| {
                let word = chunk
                    .iter()
                    .enumerate()
                    .fold(0u64, |w, (i, &b)| w | ((b as u64) << i));
                rng::mix(acc ^ word, k as u64)
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct GaConfig<T> {
    pub generations: usize,
    pub population: usize,
    pub mutation: T,
    pub crossover: T,
    pub tournament: usize,
    pub elitism: usize,
    pub gamma: T,
    pub delta: T,
    pub runs_per_fold: usize,
    /// Trees in the forest used to score a mask.
    pub forest_trees: usize,
}

impl<T: Scalar> Default for GaConfig<T> {
    fn default() -> Self {
        Self {
            generations: 100,
            population: 500,
            mutation: T::of(0.02),
            crossover: T::of(0.7),
            tournament: 3,
            elitism: 1,
            gamma: T::of(0.8),
            delta: T::of(0.2),
            runs_per_fold: 100,
            forest_trees: 20,
        }
    }
}

impl<T: Scalar> GaConfig<T> {
    /// Small settings for quick runs: 20 generations of 50 individuals.
    pub fn desk() -> Self {
        Self {
            generations: 20,
            population: 50,
            runs_per_fold: 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SelectError> {
        let prob = |p: T| p >= T::zero() && p <= T::one();
        if !prob(self.mutation) || !prob(self.crossover) {
            return Err(SelectError::InvalidConfig(
                "probabilities must lie in [0, 1]".into(),
            ));
        }
        if self.generations == 0
            || self.population == 0
            || self.tournament == 0
            || self.runs_per_fold == 0
            || self.forest_trees == 0
        {
            return Err(SelectError::InvalidConfig("counts must be >= 1".into()));
        }
        if self.elitism > self.population {
            return Err(SelectError::InvalidConfig("elitism exceeds population".into()));
        }
        Ok(())
    }
}

/// `gamma * f1 - delta * selected / d`; an empty mask scores -1.
pub fn fitness_value<T: Scalar>(f1: T, selected: usize, d: usize, cfg: &GaConfig<T>) -> T {
    if selected == 0 || d == 0 {
        return -T::one();
    }
    cfg.gamma * f1 - cfg.delta * T::of_usize(selected) / T::of_usize(d)
}

/// Weighted F of a forest trained on the masked training split and scored
/// on the masked validation split.
pub fn mask_f1<T: Scalar>(
    mask: &FeatureMask,
    train_set: &Dataset<T>,
    val_set: &Dataset<T>,
    cfg: &GaConfig<T>,
    seed: u64,
) -> Result<T, SelectError> {
    if mask.len() != train_set.n_features() {
        return Err(SelectError::MaskLength {
            expected: train_set.n_features(),
            found: mask.len(),
        });
    }
    let cols = mask.indices();
    let hp = Hyperparameters {
        forest_trees: cfg.forest_trees,
        forest_max_features: MaxFeatures::Sqrt,
        ..Hyperparameters::default()
    };
    let model = train(
        &train_set.select_columns(&cols),
        ClassifierKind::RandomForest,
        &hp,
        rng::mix(seed, mask.digest()),
    )?;
    let val = val_set.select_columns(&cols);
    let predicted = model.predict_labels(&val)?;
    let cm = confusion(&val.labels, &predicted, &val.class_names)
        .map_err(|e| SelectError::TooSmall(e.to_string()))?;
    Ok(report::<T>(&cm).weighted_f)
}

pub fn fitness<T: Scalar>(
    mask: &FeatureMask,
    train_set: &Dataset<T>,
    val_set: &Dataset<T>,
    cfg: &GaConfig<T>,
    seed: u64,
) -> Result<T, SelectError> {
    let selected = mask.selected_count();
    if selected == 0 {
        return Ok(-T::one());
    }
    let f1 = mask_f1(mask, train_set, val_set, cfg, seed)?;
    Ok(fitness_value(f1, selected, mask.len(), cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GaOutcome<T> {
    pub best: FeatureMask,
    pub best_fitness: T,
    /// Best fitness seen so far, after each generation.
    pub history: Vec<T>,
}

fn tournament<'a, T: Scalar>(
    population: &'a [FeatureMask],
    scores: &[T],
    size: usize,
    rng: &mut ChaCha8Rng,
) -> &'a FeatureMask {
    let mut best = rng.gen_range(0..population.len());
    for _ in 1..size {
        let c = rng.gen_range(0..population.len());
        if scores[c] > scores[best] {
            best = c;
        }
    }
    &population[best]
}

/// Generational GA from a random Bernoulli(0.5) population.
pub fn evolve<T: Scalar>(
    train_set: &Dataset<T>,
    val_set: &Dataset<T>,
    cfg: &GaConfig<T>,
    seed: u64,
) -> Result<GaOutcome<T>, SelectError> {
    let d = train_set.n_features();
    let mut rng = rng::stream(seed, u64::MAX);
    let initial = (0..cfg.population)
        .map(|_| FeatureMask::new((0..d).map(|_| rng.gen_bool(0.5)).collect()))
        .collect();
    evolve_with_population(train_set, val_set, cfg, seed, initial)
}

/// Generational GA from a given starting population: tournament selection,
/// one-point crossover, bit-flip mutation and elitism. Returns the best mask
/// ever evaluated.
pub fn evolve_with_population<T: Scalar>(
    train_set: &Dataset<T>,
    val_set: &Dataset<T>,
    cfg: &GaConfig<T>,
    seed: u64,
    mut population: Vec<FeatureMask>,
) -> Result<GaOutcome<T>, SelectError> {
    cfg.validate()?;
    let d = train_set.n_features();
    if d == 0 || population.is_empty() {
        return Err(SelectError::TooSmall("no features or empty population".into()));
    }
    if let Some(m) = population.iter().find(|m| m.len() != d) {
        return Err(SelectError::MaskLength {
            expected: d,
            found: m.len(),
        });
    }
    let mut cache: HashMap<FeatureMask, T> = HashMap::new();
    let mut best: Option<(FeatureMask, T)> = None;
    let mut history = Vec::with_capacity(cfg.generations);
    for generation in 0..cfg.generations {
        let mut fresh: Vec<FeatureMask> = population
            .iter()
            .filter(|m| !cache.contains_key(*m))
            .cloned()
            .collect();
        fresh.sort_by(|a, b| a.bits.cmp(&b.bits));
        fresh.dedup();
        let scored = fresh
            .into_par_iter()
            .map(|m| fitness(&m, train_set, val_set, cfg, seed).map(|f| (m, f)))
            .collect::<Result<Vec<_>, _>>()?;
        cache.extend(scored);
        let scores: Vec<T> = population.iter().map(|m| cache[m]).collect();
        for (m, &s) in population.iter().zip(&scores) {
            if best.as_ref().is_none_or(|(_, b)| s > *b) {
                best = Some((m.clone(), s));
            }
        }
        history.push(best.as_ref().expect("population is non-empty").1);
        if generation + 1 == cfg.generations {
            break;
        }

        let mut rng = rng::stream(seed, generation as u64);
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .expect("finite fitness")
                .then(a.cmp(&b))
        });
        let mut next: Vec<FeatureMask> = order
            .iter()
            .take(cfg.elitism)
            .map(|&i| population[i].clone())
            .collect();
        while next.len() < cfg.population {
            let mut a = tournament(&population, &scores, cfg.tournament, &mut rng)
                .bits
                .clone();
            let mut b = tournament(&population, &scores, cfg.tournament, &mut rng)
                .bits
                .clone();
            if d > 1 && rng.gen::<f64>() < cfg.crossover.as_f64() {
                let cut = rng.gen_range(1..d);
                for i in cut..d {
                    std::mem::swap(&mut a[i], &mut b[i]);
                }
            }
            for child in [a, b] {
                if next.len() == cfg.population {
                    break;
                }
                let mutated = child
                    .into_iter()
                    .map(|bit| bit ^ (rng.gen::<f64>() < cfg.mutation.as_f64()))
                    .collect();
                next.push(FeatureMask::new(mutated));
            }
        }
        population = next;
    }
    let (best, best_fitness) = best.expect("at least one generation ran");
    Ok(GaOutcome {
        best,
        best_fitness,
        history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub feature: String,
    pub occurrences: f64,
    pub feature_type: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    /// Sorted by descending occurrences; ties keep column order.
    pub entries: Vec<RankEntry>,
    pub folds: usize,
    pub runs_per_fold: usize,
}

impl FeatureRanking {
    pub fn total_masks(&self) -> usize {
        self.folds * self.runs_per_fold
    }

    pub fn top(&self, n: usize) -> Vec<&str> {
        self.entries.iter().take(n).map(|e| e.feature.as_str()).collect()
    }

    fn sorted(mut entries: Vec<RankEntry>, folds: usize, runs_per_fold: usize) -> Self {
        entries.sort_by(|a, b| b.occurrences.partial_cmp(&a.occurrences).expect("finite counts"));
        Self {
            entries,
            folds,
            runs_per_fold,
        }
    }
}

/// Catalog type of a dataset column such as `avg_group_degree_in_T-2`.
pub fn column_feature_type(column: &str) -> String {
    let base = column.rsplit_once("_T-").map_or(column, |(b, _)| b);
    catalog()
        .features
        .iter()
        .find(|f| f.name == base)
        .map_or_else(|| "unknown".to_owned(), |f| f.feature_type.name().to_owned())
}

/// Splits a training set 3:1 into train and validation parts, stratified.
fn train_val<T: Scalar>(data: &Dataset<T>, seed: u64) -> (Dataset<T>, Dataset<T>) {
    let order = stratified_order(&data.labels, seed);
    let cut = (0.75 * data.len() as f64).round() as usize;
    let mut a = order[..cut].to_vec();
    let mut b = order[cut..].to_vec();
    a.sort_unstable();
    b.sort_unstable();
    (data.subset(&a), data.subset(&b))
}

/// Runs the GA `runs_per_fold` times on each of the 5x2 training halves and
/// counts how often every column is selected.
pub fn rank_features<T: Scalar>(
    data: &Dataset<T>,
    cfg: &GaConfig<T>,
    seed: u64,
) -> Result<FeatureRanking, SelectError> {
    cfg.validate()?;
    if data.len() < 8 || data.classes_present() < 2 {
        return Err(SelectError::TooSmall(format!(
            "{} rows over {} classes",
            data.len(),
            data.classes_present()
        )));
    }
    let pairs = fold_pairs(&data.labels, CvScheme::FiveByTwo, seed);
    let jobs: Vec<(usize, usize)> = (0..pairs.len())
        .flat_map(|f| (0..cfg.runs_per_fold).map(move |r| (f, r)))
        .collect();
    let masks = jobs
        .par_iter()
        .map(|&(f, r)| {
            let (train_set, val_set) = train_val(&data.subset(&pairs[f].0), rng::mix(seed, f as u64));
            let run_seed = rng::mix(seed, (f * cfg.runs_per_fold + r) as u64 + 1_000_003);
            evolve(&train_set, &val_set, cfg, run_seed).map(|o| o.best)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut counts = vec![0usize; data.n_features()];
    for m in &masks {
        for i in m.indices() {
            counts[i] += 1;
        }
    }
    let entries = data
        .columns
        .iter()
        .zip(counts)
        .map(|(c, n)| RankEntry {
            feature: c.clone(),
            occurrences: n as f64,
            feature_type: column_feature_type(c),
        })
        .collect();
    Ok(FeatureRanking::sorted(entries, pairs.len(), cfg.runs_per_fold))
}

/// Averages occurrences feature by feature; all rankings must cover the
/// same feature names.
pub fn merge_rankings(rankings: &[FeatureRanking]) -> Result<FeatureRanking, SelectError> {
    let first = rankings.first().ok_or(SelectError::NoRankings)?;
    let mut names: Vec<&str> = first.entries.iter().map(|e| e.feature.as_str()).collect();
    names.sort_unstable();
    let mut sums: BTreeMap<String, (f64, String, usize)> = BTreeMap::new();
    for (pos, e) in first.entries.iter().enumerate() {
        sums.insert(e.feature.clone(), (0.0, e.feature_type.clone(), pos));
    }
    for r in rankings {
        let mut other: Vec<&str> = r.entries.iter().map(|e| e.feature.as_str()).collect();
        other.sort_unstable();
        if other != names {
            return Err(SelectError::MismatchedRankings);
        }
        for e in &r.entries {
            sums.get_mut(&e.feature).expect("names checked").0 += e.occurrences;
        }
    }
    let k = rankings.len() as f64;
    let mut entries: Vec<(usize, RankEntry)> = sums
        .into_iter()
        .map(|(feature, (sum, feature_type, pos))| {
            (
                pos,
                RankEntry {
                    feature,
                    occurrences: sum / k,
                    feature_type,
                },
            )
        })
        .collect();
    entries.sort_by_key(|(pos, _)| *pos);
    Ok(FeatureRanking::sorted(
        entries.into_iter().map(|(_, e)| e).collect(),
        first.folds,
        first.runs_per_fold,
    ))
}

#[derive(Debug, Serialize, Deserialize)]
struct RankRow {
    rank: usize,
    feature: String,
    occurrences: f64,
    feature_type: String,
}

pub fn write_ranking_csv<W: Write>(ranking: &FeatureRanking, writer: W) -> Result<(), SelectError> {
    let mut w = csv::Writer::from_writer(writer);
    for (i, e) in ranking.entries.iter().enumerate() {
        w.serialize(RankRow {
            rank: i + 1,
            feature: e.feature.clone(),
            occurrences: e.occurrences,
            feature_type: e.feature_type.clone(),
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads a ranking back; fold and run counts are not part of the CSV and
/// must be supplied.
pub fn read_ranking_csv<R: Read>(
    reader: R,
    folds: usize,
    runs_per_fold: usize,
) -> Result<FeatureRanking, SelectError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut rows: Vec<RankRow> = r.deserialize().collect::<Result<_, _>>()?;
    rows.sort_by_key(|row| row.rank);
    Ok(FeatureRanking {
        entries: rows
            .into_iter()
            .map(|row| RankEntry {
                feature: row.feature,
                occurrences: row.occurrences,
                feature_type: row.feature_type,
            })
            .collect(),
        folds,
        runs_per_fold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EliminationStep<T> {
    pub removed: String,
    pub score: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EliminationOutcome<T> {
    pub mask: FeatureMask,
    pub initial_score: T,
    pub steps: Vec<EliminationStep<T>>,
}

/// Greedy backward elimination on cross-validated plain-average F. Each
/// step drops the column whose removal scores best, as long as that score
/// is not below the current one. At least one column always survives.
pub fn backward_elimination<T: Scalar>(
    data: &Dataset<T>,
    kind: ClassifierKind,
    hp: &Hyperparameters,
    scheme: CvScheme,
    seed: u64,
) -> Result<EliminationOutcome<T>, SelectError> {
    let d = data.n_features();
    if d == 0 {
        return Err(SelectError::TooSmall("no columns".into()));
    }
    let score = |cols: &[usize]| -> Result<T, SelectError> {
        Ok(cross_validate(
            &data.select_columns(cols),
            kind,
            hp,
            scheme,
            Balancing::None,
            seed,
        )?
        .aggregate
        .plain_f)
    };
    let mut kept: Vec<usize> = (0..d).collect();
    let initial_score = score(&kept)?;
    let mut current = initial_score;
    let mut steps = Vec::new();
    while kept.len() > 1 {
        let candidates = (0..kept.len())
            .into_par_iter()
            .map(|drop| {
                let cols: Vec<usize> = kept
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != drop)
                    .map(|(_, &c)| c)
                    .collect();
                score(&cols).map(|s| (drop, s))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let (drop, best) = candidates
            .into_iter()
            .fold(None::<(usize, T)>, |acc, (i, s)| match acc {
                Some((_, b)) if s <= b => acc,
                _ => Some((i, s)),
            })
            .expect("at least two candidates");
        if best < current - T::of(1e-12) {
            break;
        }
        steps.push(EliminationStep {
            removed: data.columns[kept[drop]].clone(),
            score: best,
        });
        kept.remove(drop);
        current = best;
    }
    Ok(EliminationOutcome {
        mask: FeatureMask::from_indices(d, &kept),
        initial_score,
        steps,
    })
}
