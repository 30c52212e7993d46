//! Classification quality measures and rank aggregation over classifiers.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum EvaluateError {
    #[error("actual and predicted lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("nothing to evaluate")]
    Empty,
    #[error("label {0} outside the class list")]
    UnknownLabel(usize),
    #[error("score table needs at least 2 algorithms and 2 datasets")]
    TooSmall,
    #[error("missing or non-finite score at algorithm {algorithm}, dataset {dataset}")]
    MissingCell { algorithm: usize, dataset: usize },
    #[error("score table is ragged")]
    Ragged,
}

/// Rows are actual classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: &[String]) -> Self {
        Self {
            classes: classes.to_vec(),
            counts: vec![vec![0; classes.len()]; classes.len()],
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, class: usize) -> usize {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> usize {
        self.counts.iter().map(|row| row[class]).sum()
    }

    pub fn true_positives(&self, class: usize) -> usize {
        self.counts[class][class]
    }

    /// Adds another matrix over the same classes.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

pub fn confusion(
    actual: &[usize],
    predicted: &[usize],
    classes: &[String],
) -> Result<ConfusionMatrix, EvaluateError> {
    if actual.len() != predicted.len() {
        return Err(EvaluateError::LengthMismatch(actual.len(), predicted.len()));
    }
    if actual.is_empty() {
        return Err(EvaluateError::Empty);
    }
    let mut cm = ConfusionMatrix::zeros(classes);
    for (&a, &p) in actual.iter().zip(predicted) {
        for label in [a, p] {
            if label >= classes.len() {
                return Err(EvaluateError::UnknownLabel(label));
            }
        }
        cm.counts[a][p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ClassMetrics<T> {
    pub class: String,
    pub precision: T,
    pub recall: T,
    pub f_measure: T,
    pub support: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EvaluationReport<T> {
    pub per_class: Vec<ClassMetrics<T>>,
    /// Mean of per-class F over classes that occur in the actual or
    /// predicted labels.
    pub plain_f: T,
    pub macro_precision: T,
    pub macro_recall: T,
    pub macro_f: T,
    pub micro_precision: T,
    pub micro_recall: T,
    pub micro_f: T,
    pub weighted_f: T,
    pub accuracy: T,
    pub class_distribution: Vec<usize>,
    pub total: usize,
}

fn div<T: Scalar>(num: T, den: T) -> T {
    if den == T::zero() {
        T::zero()
    } else {
        num / den
    }
}

fn harmonic<T: Scalar>(p: T, r: T) -> T {
    div(T::of(2.0) * p * r, p + r)
}

/// Arithmetic mean of per-class F values.
pub fn plain_average<T: Scalar>(f: &[T]) -> T {
    div(f.iter().copied().sum(), T::of_usize(f.len()))
}

/// Support-weighted mean of per-class F values.
pub fn weighted_average<T: Scalar>(f: &[T], support: &[usize]) -> T {
    let total: usize = support.iter().sum();
    let acc: T = f.iter().zip(support).map(|(&v, &s)| v * T::of_usize(s)).sum();
    div(acc, T::of_usize(total))
}

pub fn report<T: Scalar>(cm: &ConfusionMatrix) -> EvaluationReport<T> {
    let k = cm.classes.len();
    let total = cm.total();
    let mut per_class = Vec::with_capacity(k);
    let (mut tp_sum, mut fp_sum, mut fn_sum) = (0usize, 0usize, 0usize);
    for c in 0..k {
        let tp = cm.true_positives(c);
        let support = cm.support(c);
        let predicted = cm.predicted(c);
        tp_sum += tp;
        fp_sum += predicted - tp;
        fn_sum += support - tp;
        let precision = div(T::of_usize(tp), T::of_usize(predicted));
        let recall = div(T::of_usize(tp), T::of_usize(support));
        per_class.push(ClassMetrics {
            class: cm.classes[c].clone(),
            precision,
            recall,
            f_measure: harmonic(precision, recall),
            support,
            predicted,
        });
    }
    let observed: Vec<&ClassMetrics<T>> = per_class
        .iter()
        .filter(|m| m.support > 0 || m.predicted > 0)
        .collect();
    let f_values: Vec<T> = observed.iter().map(|m| m.f_measure).collect();
    let macro_precision = plain_average(&observed.iter().map(|m| m.precision).collect::<Vec<_>>());
    let macro_recall = plain_average(&observed.iter().map(|m| m.recall).collect::<Vec<_>>());
    let micro_precision = div(T::of_usize(tp_sum), T::of_usize(tp_sum + fp_sum));
    let micro_recall = div(T::of_usize(tp_sum), T::of_usize(tp_sum + fn_sum));
    let all_f: Vec<T> = per_class.iter().map(|m| m.f_measure).collect();
    let supports: Vec<usize> = per_class.iter().map(|m| m.support).collect();
    EvaluationReport {
        plain_f: plain_average(&f_values),
        macro_precision,
        macro_recall,
        macro_f: harmonic(macro_precision, macro_recall),
        micro_precision,
        micro_recall,
        micro_f: harmonic(micro_precision, micro_recall),
        weighted_f: weighted_average(&all_f, &supports),
        accuracy: div(T::of_usize(tp_sum), T::of_usize(total)),
        class_distribution: supports,
        total,
        per_class,
    }
}

impl<T: Scalar> EvaluationReport<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FriedmanResult<T> {
    /// Rank 1 is best.
    pub average_ranks: Vec<T>,
    pub statistic: T,
    pub p_value: T,
    pub algorithms: usize,
    pub datasets: usize,
}

/// 1-based ranks of `values` where larger is better; ties share the mean rank.
pub fn rank_descending<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).expect("finite scores"));
    let mut ranks = vec![T::zero(); values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mean = T::of((i + j) as f64 / 2.0 + 1.0);
        for &idx in &order[i..=j] {
            ranks[idx] = mean;
        }
        i = j + 1;
    }
    ranks
}

/// Friedman test over `scores[algorithm][dataset]`, higher scores better.
pub fn friedman_ranks<T: Scalar>(scores: &[Vec<T>]) -> Result<FriedmanResult<T>, EvaluateError> {
    let k = scores.len();
    if k < 2 {
        return Err(EvaluateError::TooSmall);
    }
    let n = scores[0].len();
    if n < 2 {
        return Err(EvaluateError::TooSmall);
    }
    if scores.iter().any(|row| row.len() != n) {
        return Err(EvaluateError::Ragged);
    }
    for (a, row) in scores.iter().enumerate() {
        if let Some(d) = row.iter().position(|v| !v.is_finite()) {
            return Err(EvaluateError::MissingCell {
                algorithm: a,
                dataset: d,
            });
        }
    }
    let mut sums = vec![0.0f64; k];
    for d in 0..n {
        let column: Vec<T> = scores.iter().map(|row| row[d]).collect();
        for (a, r) in rank_descending(&column).into_iter().enumerate() {
            sums[a] += r.as_f64();
        }
    }
    let avg: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
    let (kf, nf) = (k as f64, n as f64);
    let sum_sq: f64 = avg.iter().map(|r| r * r).sum();
    let statistic = (12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0).powi(2) / 4.0)).max(0.0);
    let dist = ChiSquared::new(kf - 1.0).expect("k >= 2 gives positive degrees of freedom");
    let p_value = 1.0 - dist.cdf(statistic);
    Ok(FriedmanResult {
        average_ranks: avg.into_iter().map(T::of).collect(),
        statistic: T::of(statistic),
        p_value: T::of(p_value),
        algorithms: k,
        datasets: n,
    })
}

/// Row-labelled grid such as classifier x event F-measures.
pub fn write_comparison_csv<T: Scalar, W: Write>(
    corner: &str,
    row_names: &[String],
    column_names: &[String],
    values: &[Vec<T>],
    writer: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![corner.to_owned()];
    header.extend(column_names.iter().cloned());
    w.write_record(&header)?;
    for (name, row) in row_names.iter().zip(values) {
        let mut record = vec![name.clone()];
        record.extend(row.iter().map(|v| format!("{:.4}", v.as_f64())));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn tabulation() {
        let cm = confusion(&[0, 0, 1], &[0, 1, 1], &names(2)).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1], vec![0, 1]]);
        let perfect = confusion(&[0, 1, 2], &[0, 1, 2], &names(3)).unwrap();
        assert_eq!(perfect.counts, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        assert_eq!(confusion(&[], &[], &names(2)), Err(EvaluateError::Empty));
        assert_eq!(
            confusion(&[0], &[0, 1], &names(2)),
            Err(EvaluateError::LengthMismatch(1, 2))
        );
    }

    #[test]
    fn perfect_class() {
        let cm = confusion(&[0; 5], &[0; 5], &names(2)).unwrap();
        let r = report::<f64>(&cm);
        let m = &r.per_class[0];
        assert_eq!((m.precision, m.recall, m.f_measure), (1.0, 1.0, 1.0));
        // class 1 never occurs, so it does not drag the plain average down
        assert_eq!(r.plain_f, 1.0);
    }

    #[test]
    fn never_predicted_class_scores_zero() {
        let cm = confusion(&[0, 0, 1, 1], &[0, 0, 0, 0], &names(2)).unwrap();
        let r = report::<f64>(&cm);
        assert_eq!(r.per_class[1].f_measure, 0.0);
        assert!((r.per_class[0].f_measure - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.plain_f - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.micro_f - r.accuracy).abs() < 1e-12);
    }

    #[test]
    fn table_eleven_sample_two() {
        let f = [0.359, 0.000, 0.390, 0.286, 0.491, 0.725];
        let support = [62, 9, 78, 29, 90, 38];
        // hand sums: 2.251 / 6 and 132.6290 / 306
        assert!((plain_average::<f64>(&f) - 0.3752).abs() < 5e-5);
        assert!((weighted_average::<f64>(&f, &support) - 0.4339).abs() < 0.002);
    }

    #[test]
    fn friedman_examples() {
        let same = vec![vec![0.5; 4]; 3];
        let r = friedman_ranks::<f64>(&same).unwrap();
        assert!(r.average_ranks.iter().all(|&x| x == 2.0));
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);

        let two = vec![vec![0.9, 0.8, 0.7], vec![0.1, 0.2, 0.3]];
        let r = friedman_ranks::<f64>(&two).unwrap();
        assert_eq!(r.average_ranks, vec![1.0, 2.0]);
        // chi2 = 12*3/(2*3) * (1 + 4 - 4.5) = 3
        assert!((r.statistic - 3.0).abs() < 1e-12);

        let missing = vec![vec![0.1, f64::NAN], vec![0.2, 0.3]];
        assert_eq!(
            friedman_ranks(&missing),
            Err(EvaluateError::MissingCell {
                algorithm: 0,
                dataset: 1
            })
        );
        assert_eq!(friedman_ranks(&[vec![1.0, 2.0]]), Err(EvaluateError::TooSmall));
    }

    #[test]
    fn tie_ranks() {
        assert_eq!(rank_descending(&[3.0, 1.0, 3.0, 2.0]), vec![1.5, 4.0, 1.5, 3.0]);
    }

    #[test]
    fn comparison_csv() {
        let mut buf = Vec::new();
        write_comparison_csv(
            "classifier",
            &["rf".to_owned()],
            &["growing".to_owned(), "merging".to_owned()],
            &[vec![0.5f64, 0.25]],
            &mut buf,
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "classifier,growing,merging\nrf,0.5000,0.2500\n"
        );
    }
}
