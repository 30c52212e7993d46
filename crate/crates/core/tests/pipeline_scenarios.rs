//! End-to-end scenarios over the experiment drivers.

mod common;

use gep_core::community::Detector;
use gep_core::ingest::TemporalEventStream;
use gep_core::learn::{Balancing, CvScheme};
use gep_core::pipeline::{
    build_artifacts, build_artifacts_from, compare_on_dataset, drift_on_artifacts, enrich_datasets,
    report_json, transfer, transfer_datasets, PipelineConfig, PipelineError, TransferOptions,
};
use gep_core::synth::SynthConfig;
use gep_core::{ClassifierKind, Hyperparameters};

fn small(seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig::synthetic(SynthConfig {
        windows: 16,
        communities: 10,
        seed,
        ..SynthConfig::default()
    });
    cfg.detector = Detector::Modularity { seed: 7 };
    cfg.hyperparameters.forest_trees = 20;
    cfg.cv = CvScheme::Stratified { folds: 4 };
    cfg
}

#[test]
fn disjoint_windows_yield_no_events() {
    // every window is a fresh triangle, so nothing carries over
    let mut triples = Vec::new();
    for w in 0..6 {
        let t = w * 100;
        let n = |k: i64| format!("w{w}n{k}");
        triples.push((n(0), n(1), t));
        triples.push((n(1), n(2), t + 10));
        triples.push((n(2), n(0), t + 20));
    }
    let stream = TemporalEventStream::from_triples(&triples, false).unwrap();
    let err = build_artifacts_from::<f64>(&small(1), stream).unwrap_err();
    assert!(matches!(err, PipelineError::NoEvents(_)), "{err}");
}

#[test]
fn forest_beats_zero_r_and_ties_share_ranks() {
    let data = common::planted_dataset(150, 8, &[0, 1, 2], 3);
    let hp = Hyperparameters {
        forest_trees: 20,
        ..Hyperparameters::default()
    };
    let scheme = CvScheme::Stratified { folds: 5 };
    let kinds = [ClassifierKind::RandomForest, ClassifierKind::ZeroR];
    let c = compare_on_dataset(&data, &kinds, &hp, scheme, Balancing::None, 1).unwrap();
    let s = c.scores();
    assert!(s[0].1.unwrap() > s[1].1.unwrap());
    let f = c.friedman.unwrap();
    assert!(f.average_ranks[0] < f.average_ranks[1]);

    let same = [
        ClassifierKind::ZeroR,
        ClassifierKind::ZeroR,
        ClassifierKind::ZeroR,
    ];
    let tied = compare_on_dataset(&data, &same, &hp, scheme, Balancing::None, 1).unwrap();
    for r in tied.friedman.unwrap().average_ranks {
        assert!((r - 2.0).abs() < 1e-12);
    }
    assert!(matches!(
        compare_on_dataset(&data, &kinds[..1], &hp, scheme, Balancing::None, 1),
        Err(PipelineError::Config(_))
    ));
}

#[test]
fn self_transfer_is_resubstitution() {
    let data = common::planted_dataset(90, 5, &[0, 1], 8);
    let r = transfer_datasets(
        &data,
        &data,
        ClassifierKind::Cart,
        &Hyperparameters::default(),
        TransferOptions::default(),
        4,
    )
    .unwrap();
    assert_eq!(r.accuracy, 1.0);
}

#[test]
fn transfer_checks_chain_length() {
    let a = small(1);
    let mut b = small(2);
    b.chain_length = 3;
    assert!(matches!(
        transfer::<f64>(&a, &b, TransferOptions::default()),
        Err(PipelineError::Config(_))
    ));
}

#[test]
fn same_family_streams_transfer_well() {
    let source = small(11);
    let target = small(12);
    let cross = transfer::<f64>(&source, &target, TransferOptions::default()).unwrap();
    let b = build_artifacts::<f64>(&target).unwrap();
    let own = gep_core::learn::cross_validate(
        &b.dataset,
        target.classifier,
        &target.hyperparameters,
        target.cv,
        target.balancing,
        target.seed,
    )
    .unwrap();
    assert!(
        (cross.plain_f - own.mean_plain_f).abs() <= 0.1,
        "transfer {} vs in-domain {}",
        cross.plain_f,
        own.mean_plain_f
    );
}

#[test]
fn enrichment_without_rows_changes_nothing() {
    let cfg = small(21);
    let base = build_artifacts::<f64>(&cfg).unwrap().dataset;
    let other = build_artifacts::<f64>(&small(22)).unwrap().dataset;
    let run = |classes: &[usize], external| {
        enrich_datasets(
            &base,
            external,
            classes,
            cfg.classifier,
            &cfg.hyperparameters,
            cfg.cv,
            cfg.balancing,
            cfg.seed,
        )
        .unwrap()
    };
    let empty = run(&[], &other);
    assert_eq!(empty.added_rows, 0);
    assert_eq!(report_json(&empty.before), report_json(&empty.after));

    let absent = other.subset(
        &(0..other.len())
            .filter(|&i| other.labels[i] != 0)
            .collect::<Vec<_>>(),
    );
    let none = run(&[0], &absent);
    assert_eq!(none.added_rows, 0);
    assert_eq!(report_json(&none.before), report_json(&none.after));
}

#[test]
fn enrichment_helps_minority_classes() {
    let cfg = small(31);
    let base = build_artifacts::<f64>(&cfg).unwrap().dataset;
    let mut big = small(32);
    big.source = gep_core::pipeline::StreamSource::Synthetic(SynthConfig {
        windows: 40,
        communities: 14,
        seed: 32,
        ..SynthConfig::default()
    });
    let external = build_artifacts::<f64>(&big).unwrap().dataset;
    let counts = base.class_counts();
    let mean = counts.iter().sum::<usize>() as f64 / counts.iter().filter(|&&c| c > 0).count() as f64;
    let minority: Vec<usize> = (0..counts.len())
        .filter(|&c| counts[c] > 0 && (counts[c] as f64) < mean)
        .collect();
    let r = enrich_datasets(
        &base,
        &external,
        &minority,
        cfg.classifier,
        &cfg.hyperparameters,
        cfg.cv,
        cfg.balancing,
        cfg.seed,
    )
    .unwrap();
    assert!(r.added_rows > 0);
    let gained: f64 = minority.iter().map(|&c| r.deltas[c].delta).sum();
    assert!(gained >= 0.0, "minority F moved by {gained}");
}

#[test]
fn drift_single_period_and_regime_change() {
    let cfg = small(41);
    let a = build_artifacts::<f64>(&cfg).unwrap();
    let one = drift_on_artifacts(&a, &cfg, 1).unwrap();
    assert_eq!(
        report_json(&one.periods[0].per_period),
        report_json(&one.periods[0].whole_span)
    );

    let mut shifted = PipelineConfig::synthetic(SynthConfig {
        windows: 30,
        communities: 14,
        regime_change: true,
        seed: 43,
        ..SynthConfig::default()
    });
    shifted.hyperparameters.forest_trees = 20;
    shifted.cv = CvScheme::Stratified { folds: 4 };
    let a = build_artifacts::<f64>(&shifted).unwrap();
    let d = drift_on_artifacts(&a, &shifted, 2).unwrap();
    let (own, whole) = d.scores()[1];
    assert!(
        own >= whole,
        "post-change period: own {own} vs whole span {whole}"
    );
}
