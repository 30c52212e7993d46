//! Shared generators and brute-force oracles for the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeSet, VecDeque};

use gep_core::ingest::NodeId;
use gep_core::learn::Dataset;
use gep_core::snapshot::SnapshotGraph;
use gep_core::tracking::{EventType, EvolutionEvent};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// G(n, p) over nodes `0..n`, all of them present even when isolated.
pub fn random_graph(rng: &mut ChaCha8Rng, n: u32, p: f64, directed: bool) -> SnapshotGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u == v || (!directed && v < u) {
                continue;
            }
            if rng.gen::<f64>() < p {
                edges.push((NodeId(u), NodeId(v), 1.0));
            }
        }
    }
    let nodes: Vec<NodeId> = (0..n).map(NodeId).collect();
    SnapshotGraph::from_weighted_edges(0, directed, &edges, &nodes)
}

/// Dense symmetric adjacency matrix (direction ignored).
pub fn adjacency(g: &SnapshotGraph) -> Vec<Vec<bool>> {
    let n = g.node_count();
    let mut a = vec![vec![false; n]; n];
    for u in 0..n {
        for &(v, _) in g.out_edges(u) {
            a[u][v] = true;
            a[v][u] = true;
        }
    }
    a
}

// ---------------------------------------------------------------------------
// k-clique percolation by exhaustive enumeration

fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Communities as sets of node ids: unions of k-cliques connected through
/// shared (k-1)-subsets.
pub fn cpm_oracle(g: &SnapshotGraph, k: usize) -> BTreeSet<Vec<u32>> {
    let a = adjacency(g);
    let n = g.node_count();
    let cliques: Vec<Vec<usize>> = k_subsets(n, k)
        .into_iter()
        .filter(|s| {
            s.iter()
                .enumerate()
                .all(|(i, &u)| s[i + 1..].iter().all(|&v| a[u][v]))
        })
        .collect();
    let mut parent: Vec<usize> = (0..cliques.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        if p[x] != x {
            let r = find(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    for i in 0..cliques.len() {
        for j in i + 1..cliques.len() {
            let shared = cliques[i].iter().filter(|x| cliques[j].contains(x)).count();
            if shared == k - 1 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, BTreeSet<u32>> = Default::default();
    for (i, c) in cliques.iter().enumerate() {
        let r = find(&mut parent, i);
        groups
            .entry(r)
            .or_default()
            .extend(c.iter().map(|&v| g.nodes()[v].0));
    }
    groups.into_values().map(|s| s.into_iter().collect()).collect()
}

// ---------------------------------------------------------------------------
// Centralities from all-pairs distances

pub struct CentralityOracle {
    pub betweenness: Vec<f64>,
    pub closeness: Vec<f64>,
    pub eccentricity: Vec<usize>,
}

const INF: usize = usize::MAX / 4;

/// Floyd-Warshall distances plus path counts, then pair-by-pair
/// betweenness on the symmetrized graph.
pub fn centrality_oracle(g: &SnapshotGraph) -> CentralityOracle {
    let a = adjacency(g);
    let n = a.len();
    let mut d = vec![vec![INF; n]; n];
    for u in 0..n {
        d[u][u] = 0;
        for v in 0..n {
            if a[u][v] {
                d[u][v] = 1;
            }
        }
    }
    for m in 0..n {
        for u in 0..n {
            for v in 0..n {
                if d[u][m] + d[m][v] < d[u][v] {
                    d[u][v] = d[u][m] + d[m][v];
                }
            }
        }
    }
    // sigma[s][t]: number of shortest s-t paths, filled in order of distance
    let mut sigma = vec![vec![0f64; n]; n];
    for s in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&t| d[s][t] < INF).collect();
        order.sort_by_key(|&t| d[s][t]);
        sigma[s][s] = 1.0;
        for &t in &order[1..] {
            sigma[s][t] = (0..n)
                .filter(|&u| a[u][t] && d[s][u] + 1 == d[s][t])
                .map(|u| sigma[s][u])
                .sum();
        }
    }
    let mut betweenness = vec![0f64; n];
    for s in 0..n {
        for t in s + 1..n {
            if d[s][t] >= INF {
                continue;
            }
            for v in 0..n {
                if v != s && v != t && d[s][v] + d[v][t] == d[s][t] {
                    betweenness[v] += sigma[s][v] * sigma[v][t] / sigma[s][t];
                }
            }
        }
    }
    let closeness = (0..n)
        .map(|v| {
            let reach: Vec<usize> = (0..n).filter(|&t| d[v][t] < INF).map(|t| d[v][t]).collect();
            let total: usize = reach.iter().sum();
            if total == 0 {
                0.0
            } else {
                (reach.len() - 1) as f64 / total as f64
            }
        })
        .collect();
    let eccentricity = (0..n)
        .map(|v| {
            (0..n)
                .filter(|&t| d[v][t] < INF)
                .map(|t| d[v][t])
                .max()
                .unwrap_or(0)
        })
        .collect();
    CentralityOracle {
        betweenness,
        closeness,
        eccentricity,
    }
}

/// Fixed-count power iteration with A + I, no early exit.
pub fn eigenvector_oracle(g: &SnapshotGraph, iterations: usize) -> Vec<f64> {
    let a = adjacency(g);
    let n = a.len();
    let lists: Vec<Vec<usize>> = (0..n).map(|u| (0..n).filter(|&v| a[u][v]).collect()).collect();
    let mut x = vec![1.0; n];
    for _ in 0..iterations {
        let y: Vec<f64> = (0..n)
            .map(|u| x[u] + lists[u].iter().map(|&v| x[v]).sum::<f64>())
            .collect();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = y.into_iter().map(|v| v / norm).collect();
    }
    x
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 && nb == 0.0 {
        1.0
    } else {
        dot / (na * nb)
    }
}

/// Hop distances from `s` by plain BFS on the symmetrized graph.
pub fn bfs(g: &SnapshotGraph, s: usize) -> Vec<Option<usize>> {
    let a = adjacency(g);
    let mut dist = vec![None; a.len()];
    dist[s] = Some(0);
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        for v in 0..a.len() {
            if a[u][v] && dist[v].is_none() {
                dist[v] = Some(dist[u].unwrap() + 1);
                q.push_back(v);
            }
        }
    }
    dist
}

// ---------------------------------------------------------------------------
// Fixtures

fn ev(from: (usize, usize), to: (usize, usize), event: EventType, fwd: f64, bwd: f64) -> EvolutionEvent {
    EvolutionEvent {
        window_from: from.0,
        group_from: Some(from.1),
        window_to: to.0,
        group_to: Some(to.1),
        event,
        inclusion_fwd: fwd,
        inclusion_bwd: bwd,
    }
}

/// Five windows: G(1,1) grows into G(1,2), which splits into G(1,3) and
/// G(2,3); they merge into G(1,4), which shrinks into G(1,5). `G(j,i)` is
/// window `i-1`, ordinal `j-1`.
pub fn split_merge_events() -> Vec<EvolutionEvent> {
    vec![
        ev((0, 0), (1, 0), EventType::Growing, 90.0, 60.0),
        ev((1, 0), (2, 0), EventType::Splitting, 30.0, 100.0),
        ev((1, 0), (2, 1), EventType::Splitting, 25.0, 100.0),
        ev((2, 0), (3, 0), EventType::Merging, 100.0, 40.0),
        ev((2, 1), (3, 0), EventType::Merging, 100.0, 35.0),
        ev((3, 0), (4, 0), EventType::Shrinking, 70.0, 100.0),
    ]
}

/// `rows` rows over `d` columns, three classes decided by the first
/// `informative` columns; the rest is uniform noise.
pub fn planted_dataset(rows: usize, d: usize, informative: &[usize], seed: u64) -> Dataset<f64> {
    let mut r = rng(seed);
    let mut data_rows = Vec::with_capacity(rows);
    let mut labels = Vec::with_capacity(rows);
    for i in 0..rows {
        let label = i % 3;
        let mut row: Vec<f64> = (0..d).map(|_| r.gen::<f64>()).collect();
        for (k, &c) in informative.iter().enumerate() {
            // each informative column separates one class pair, with overlap
            let centre = match (label + k) % 3 {
                0 => 0.2,
                1 => 0.5,
                _ => 0.8,
            };
            row[c] = centre + (r.gen::<f64>() - 0.5) * 0.5;
        }
        data_rows.push(row);
        labels.push(label);
    }
    let columns = (0..d).map(|j| format!("f{j}")).collect();
    Dataset::with_classes(
        columns,
        data_rows,
        labels,
        (0..3).map(|c| format!("c{c}")).collect(),
    )
    .unwrap()
}
