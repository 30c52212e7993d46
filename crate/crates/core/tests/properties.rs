//! Module invariants as property tests.

mod common;

use std::collections::HashSet;

use gep_core::chains::{build_chains, remove_duplicates, DedupMode};
use gep_core::community::{detect_modularity, louvain, modularity, CommunityId};
use gep_core::evaluate::{confusion, friedman_ranks, report};
use gep_core::features::{catalog, structural_features, FeatureType};
use gep_core::ingest::{parse_reader, write_stream, ParseOptions, StreamFormat, TemporalEventStream};
use gep_core::learn::{
    balance_equal_size, fold_pairs, train, ClassifierKind, CvScheme, Dataset, Hyperparameters,
};
use gep_core::select::{fitness_value, GaConfig};
use gep_core::snapshot::{node_measures, MeasuredSnapshot, SnapshotGraph};
use gep_core::tracking::{match_windows, EventType, EvolutionEvent, TrackingConfig};
use gep_core::windowing::{make_windows, WindowSpec};
use gep_core::{Community, CommunityCover, NodeId};
use proptest::prelude::*;

fn arb_triples() -> impl Strategy<Value = Vec<(String, String, i64)>> {
    prop::collection::vec((0u8..15, 0u8..15, 0i64..1000), 1..80).prop_map(|v| {
        v.into_iter()
            .map(|(a, b, t)| (format!("u{a}"), format!("u{}", if a == b { b + 1 } else { b }), t))
            .collect()
    })
}

fn arb_graph(max_n: u32) -> impl Strategy<Value = SnapshotGraph> {
    (2u32..=max_n, any::<bool>()).prop_flat_map(|(n, directed)| {
        prop::collection::vec((0..n, 0..n), 0..(3 * n as usize)).prop_map(move |edges| {
            let e: Vec<_> = edges.iter().map(|&(u, v)| (NodeId(u), NodeId(v), 1.0)).collect();
            let nodes: Vec<_> = (0..n).map(NodeId).collect();
            SnapshotGraph::from_weighted_edges(0, directed, &e, &nodes)
        })
    })
}

fn membership_of(cover: &CommunityCover, g: &SnapshotGraph) -> Vec<usize> {
    let mut m = vec![usize::MAX; g.node_count()];
    for (c, comm) in cover.communities.iter().enumerate() {
        for &node in &comm.members {
            m[g.local_index(node).unwrap()] = c;
        }
    }
    // nodes outside every community become singletons
    let mut next = cover.communities.len();
    for x in &mut m {
        if *x == usize::MAX {
            *x = next;
            next += 1;
        }
    }
    m
}

/// Random event graph over `windows` windows with up to three groups each.
fn arb_events() -> impl Strategy<Value = Vec<EvolutionEvent>> {
    let kinds = [
        EventType::Continuing,
        EventType::Growing,
        EventType::Shrinking,
        EventType::Splitting,
        EventType::Merging,
        EventType::Dissolving,
    ];
    (2usize..6).prop_flat_map(move |windows| {
        prop::collection::vec((0..windows - 1, 0usize..3, 0usize..3, 0usize..6), 1..25).prop_map(move |raw| {
            let mut seen = HashSet::new();
            raw.into_iter()
                .filter(|&(w, a, b, _)| seen.insert((w, a, b)))
                .map(|(w, a, b, k)| {
                    let event = kinds[k];
                    EvolutionEvent {
                        window_from: w,
                        group_from: Some(a),
                        window_to: w + 1,
                        group_to: (event != EventType::Dissolving).then_some(b),
                        event,
                        inclusion_fwd: 60.0,
                        inclusion_bwd: 60.0,
                    }
                })
                .collect()
        })
    })
}

fn arb_dataset() -> impl Strategy<Value = Dataset<f64>> {
    (2usize..5, 1usize..4).prop_flat_map(|(classes, d)| {
        prop::collection::vec((prop::collection::vec(-10.0f64..10.0, d), 0..classes), 6..60).prop_map(
            move |rows| {
                let (x, y): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
                let cols = (0..d).map(|j| format!("x{j}")).collect();
                Dataset::with_classes(cols, x, y, (0..classes).map(|c| format!("c{c}")).collect()).unwrap()
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stream_write_parse_round_trip(triples in arb_triples(), directed in any::<bool>()) {
        let stream = TemporalEventStream::from_triples(&triples, directed).unwrap();
        let mut buf = Vec::new();
        write_stream(&stream, &mut buf).unwrap();
        let options = ParseOptions { directed, ..ParseOptions::default() };
        let back = parse_reader(&buf[..], StreamFormat::Csv, &options).unwrap();
        let key = |s: &TemporalEventStream| {
            let mut v: Vec<(String, String, i64)> = s
                .records()
                .iter()
                .map(|r| (s.symbols().name(r.source).to_owned(), s.symbols().name(r.target).to_owned(), r.timestamp))
                .collect();
            v.sort();
            v
        };
        prop_assert_eq!(key(&stream), key(&back));
        prop_assert!(back.records().windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    }

    #[test]
    fn windows_cover_every_record(triples in arb_triples(), size in 1u64..300, step in 1u64..300) {
        let stream = TemporalEventStream::from_triples(&triples, false).unwrap();
        let n = stream.record_count();
        let disjoint = make_windows(&stream, &WindowSpec::disjoint(size)).unwrap();
        let mut hits = vec![0usize; n];
        for w in &disjoint {
            for i in w.records.clone() { hits[i] += 1; }
        }
        prop_assert!(hits.iter().all(|&h| h == 1));

        let increasing = make_windows(&stream, &WindowSpec::increasing(size)).unwrap();
        for pair in increasing.windows(2) {
            prop_assert!(pair[0].records.start == pair[1].records.start && pair[0].records.end <= pair[1].records.end);
        }
        prop_assert_eq!(increasing.last().unwrap().records.end, n);

        if step < size {
            let over = make_windows(&stream, &WindowSpec::overlapping(size, step)).unwrap();
            let ceil = size.div_ceil(step) as usize;
            let last_start = over.last().unwrap().start;
            let (lo, _) = stream.span();
            for (i, r) in stream.records().iter().enumerate() {
                let count = over.iter().filter(|w| w.records.contains(&i)).count();
                prop_assert!(count >= 1);
                if r.timestamp >= lo + size as i64 && r.timestamp < last_start {
                    prop_assert!(count == ceil || count + 1 == ceil, "{} windows, ceil {}", count, ceil);
                }
            }
        }
    }

    #[test]
    fn betweenness_totals_count_interior_incidences(g in arb_graph(20)) {
        let table = node_measures::<f64>(&g);
        let mut interior = 0usize;
        for s in 0..g.node_count() {
            let d = common::bfs(&g, s);
            interior += d[s + 1..].iter().flatten().map(|k| k - 1).sum::<usize>();
        }
        let total: f64 = table.betweenness.iter().sum();
        prop_assert!((total - interior as f64).abs() <= 1e-9 * (1.0 + interior as f64));
    }

    #[test]
    fn louvain_never_loses_modularity(g in arb_graph(24), seed in any::<u64>()) {
        let trace = louvain(&g, seed);
        prop_assert!(trace.level_modularity.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        let singleton: Vec<usize> = (0..g.node_count()).collect();
        let cover = detect_modularity(&g, seed);
        let q = modularity(&g, &membership_of(&cover, &g));
        prop_assert!(q >= modularity(&g, &singleton) - 1e-12);
        let mut seen = HashSet::new();
        for c in &cover.communities {
            for m in &c.members { prop_assert!(seen.insert(*m), "node in two communities"); }
        }
    }

    #[test]
    fn zero_overlap_pairs_never_match(
        a in arb_graph(16), b in arb_graph(16), alpha in 1.0f64..100.0, beta in 1.0f64..100.0, seed in any::<u64>()
    ) {
        let earlier = detect_modularity(&a, seed);
        let mut later = detect_modularity(&b, seed);
        later.window = 1;
        for (o, c) in later.communities.iter_mut().enumerate() { c.id = CommunityId::new(1, o); }
        let b = SnapshotGraph::from_weighted_edges(1, b.is_directed(), &b.edges(), b.nodes());
        let cfg = TrackingConfig { alpha, beta, ..TrackingConfig::default() };
        let events = match_windows(&earlier, &later, &a, &b, &cfg).unwrap();
        for e in &events {
            prop_assert!((0.0..=100.0).contains(&e.inclusion_fwd) && (0.0..=100.0).contains(&e.inclusion_bwd));
            match (e.group_from, e.group_to) {
                (Some(i), Some(j)) => {
                    prop_assert!(earlier.communities[i].overlap(&later.communities[j]) > 0);
                }
                (Some(_), None) => prop_assert_eq!(e.event, EventType::Dissolving),
                (None, Some(_)) => prop_assert_eq!(e.event, EventType::Forming),
                (None, None) => prop_assert!(false, "event without groups"),
            }
        }
    }

    #[test]
    fn chain_invariants(events in arb_events()) {
        let one = remove_duplicates(build_chains(&events, 1).unwrap(), DedupMode::LastState);
        let mut keys = HashSet::new();
        for c in &one { prop_assert!(keys.insert((c.last_state(), c.label))); }

        let mut previous = usize::MAX;
        for length in 1..=5 {
            let chains = build_chains(&events, length).unwrap();
            for c in &chains {
                for (i, &t) in c.transitions.iter().enumerate() {
                    let (from, to) = (c.states[i], c.states[i + 1]);
                    prop_assert!(events.iter().any(|e| e.from() == Some(from) && e.to() == Some(to) && e.event == t));
                }
            }
            let count = remove_duplicates(chains, DedupMode::LastState).len();
            prop_assert!(count <= previous);
            previous = count;
        }
    }

    #[test]
    fn external_edges_leave_group_measures_alone(
        g in arb_graph(18), pick in prop::collection::vec(any::<bool>(), 18), u in 0u32..18, v in 0u32..18
    ) {
        let n = g.node_count() as u32;
        let members: Vec<NodeId> = (0..n).filter(|&i| pick[i as usize]).map(NodeId).collect();
        prop_assume!(!members.is_empty());
        let (u, v) = (u % n, v % n);
        prop_assume!(u != v && !(pick[u as usize] && pick[v as usize]));
        let lu = g.local_index(NodeId(u)).unwrap();
        let lv = g.local_index(NodeId(v)).unwrap();
        prop_assume!(!g.has_edge(lu, lv) && !g.has_edge(lv, lu));

        let group = Community::new(CommunityId::new(0, 0), members, "test");
        let mut edges = g.edges();
        edges.push((NodeId(u), NodeId(v), 1.0));
        let bigger = SnapshotGraph::from_weighted_edges(0, g.is_directed(), &edges, g.nodes());
        let before = structural_features(&group, &MeasuredSnapshot::<f64>::new(g)).unwrap();
        let after = structural_features(&group, &MeasuredSnapshot::<f64>::new(bigger)).unwrap();
        for (k, f) in catalog().features.iter().enumerate() {
            if f.feature_type == FeatureType::MicroscopicLocal {
                prop_assert_eq!(before[k], after[k], "{} moved", &f.name);
            }
        }
        let edges_slot = catalog().index_of("network_edges").unwrap();
        prop_assert_eq!(after[edges_slot], before[edges_slot] + 1.0);
    }

    #[test]
    fn equal_size_balancing_is_exact(data in arb_dataset(), seed in any::<u64>()) {
        let balanced = balance_equal_size(&data, seed);
        let smallest = data.class_counts().into_iter().filter(|&c| c > 0).min().unwrap();
        prop_assert!(balanced.class_counts().into_iter().filter(|&c| c > 0).all(|c| c == smallest));
    }

    #[test]
    fn cart_fits_distinct_rows(data in arb_dataset(), seed in any::<u64>()) {
        let mut seen = HashSet::new();
        let distinct = data.rows.iter().all(|r| seen.insert(r.iter().map(|v| v.to_bits()).collect::<Vec<_>>()));
        prop_assume!(distinct && data.classes_present() >= 2);
        let model = train(&data, ClassifierKind::Cart, &Hyperparameters::default(), seed).unwrap();
        prop_assert_eq!(model.predict_labels(&data).unwrap(), data.labels.clone());
    }

    #[test]
    fn stratified_folds_track_class_shares(labels in prop::collection::vec(0usize..4, 20..120), folds in 2usize..6, seed in any::<u64>()) {
        let n = labels.len();
        let counts: Vec<usize> = (0..4).map(|c| labels.iter().filter(|&&l| l == c).count()).collect();
        for (_, test) in fold_pairs(&labels, CvScheme::Stratified { folds }, seed) {
            let size = test.len() as f64;
            for (c, &count) in counts.iter().enumerate() {
                let share = test.iter().filter(|&&i| labels[i] == c).count() as f64 / size;
                let global = count as f64 / n as f64;
                prop_assert!((share - global).abs() <= 1.0 / size + 1e-12, "class {}: {} vs {}", c, share, global);
            }
        }
    }

    #[test]
    fn evaluation_identities(pairs in prop::collection::vec((0usize..5, 0usize..5), 1..200)) {
        let classes: Vec<String> = (0..5).map(|c| format!("c{c}")).collect();
        let (actual, predicted): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let r = report::<f64>(&confusion(&actual, &predicted, &classes).unwrap());
        prop_assert!((r.micro_precision - r.accuracy).abs() <= 1e-12);
        prop_assert!((r.micro_recall - r.accuracy).abs() <= 1e-12);
        prop_assert!((r.micro_f - r.accuracy).abs() <= 1e-12);
        let observed: Vec<f64> = r
            .per_class
            .iter()
            .enumerate()
            .filter(|(c, _)| actual.contains(c) || predicted.contains(c))
            .map(|(_, m)| m.f_measure)
            .collect();
        let lo = observed.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = observed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo - 1e-12 <= r.plain_f && r.plain_f <= hi + 1e-12);
    }

    #[test]
    fn friedman_ranks_sum(scores in (2usize..7, 2usize..9).prop_flat_map(|(k, n)| {
        prop::collection::vec(prop::collection::vec(0u8..4, n), k)
    })) {
        let k = scores.len();
        let table: Vec<Vec<f64>> = scores.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        let r = friedman_ranks(&table).unwrap();
        prop_assert!((r.average_ranks.iter().sum::<f64>() - (k * (k + 1)) as f64 / 2.0).abs() <= 1e-9);
        prop_assert!((0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn fitness_is_linear_in_selected_count(f1 in 0.0f64..1.0, a in 1usize..100, b in 1usize..100) {
        let d = 100;
        let cfg = GaConfig::<f64>::default();
        let diff = fitness_value(f1, a, d, &cfg) - fitness_value(f1, b, d, &cfg);
        let expected = -cfg.delta * (a as f64 - b as f64) / d as f64;
        prop_assert!((diff - expected).abs() <= 1e-12);
    }
}
