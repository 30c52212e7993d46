//! Per-window graphs and their structural measures.
//!
//! All distance-based measures (closeness, betweenness, eccentricity, path
//! lengths) and eigenvector centrality use hop counts on the symmetrized
//! graph. Degrees follow the graph's own directedness.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{InteractionRecord, NodeId, SymbolTable};
use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum SnapshotError {
    #[error("cannot build a snapshot from an empty slice")]
    EmptySlice,
    #[error("node {0:?} is not part of the snapshot")]
    UnknownNode(NodeId),
    #[error("invalid graph spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WeightRule {
    #[default]
    CountOfInteractions,
    SumOfWeights,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct GraphBuildSpec {
    #[serde(default)]
    pub directed: bool,
    #[serde(default)]
    pub weighted: bool,
    #[serde(default)]
    pub weight_rule: WeightRule,
}

impl GraphBuildSpec {
    pub fn new(directed: bool, weight_rule: WeightRule) -> Self {
        Self {
            directed,
            weighted: weight_rule != WeightRule::Binary,
            weight_rule,
        }
    }

    pub fn validate(&self) -> Result<(), SnapshotError> {
        if self.weight_rule == WeightRule::Binary && self.weighted {
            return Err(SnapshotError::InvalidSpec(
                "binary weight rule cannot be weighted".into(),
            ));
        }
        Ok(())
    }
}

/// Graph of one time window. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotGraph {
    window: usize,
    directed: bool,
    nodes: Vec<NodeId>,
    local: HashMap<NodeId, usize>,
    /// Outgoing (target, weight), sorted by target. Undirected graphs store
    /// each edge in both directions.
    out: Vec<Vec<(usize, f64)>>,
    inc: Vec<Vec<(usize, f64)>>,
    /// Symmetrized simple adjacency, sorted.
    neighbors: Vec<Vec<usize>>,
    edge_count: usize,
}

impl SnapshotGraph {
    pub fn empty(window: usize, directed: bool) -> Self {
        Self::from_weighted_edges(window, directed, &[], &[])
    }

    /// Builds a graph from `(u, v, w)` edges plus optional isolated nodes.
    /// Parallel edges are summed; self-loops and non-positive weights are
    /// ignored.
    pub fn from_weighted_edges(
        window: usize,
        directed: bool,
        edges: &[(NodeId, NodeId, f64)],
        extra_nodes: &[NodeId],
    ) -> Self {
        let mut folded: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
        let mut node_set: Vec<NodeId> = extra_nodes.to_vec();
        for &(u, v, w) in edges {
            node_set.push(u);
            node_set.push(v);
            if u == v || w <= 0.0 {
                continue;
            }
            let key = if directed || u < v { (u, v) } else { (v, u) };
            *folded.entry(key).or_insert(0.0) += w;
        }
        node_set.sort_unstable();
        node_set.dedup();
        let local: HashMap<NodeId, usize> = node_set.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let n = node_set.len();
        let mut out = vec![Vec::new(); n];
        let mut inc = vec![Vec::new(); n];
        let mut neighbors = vec![Vec::new(); n];
        for (&(u, v), &w) in &folded {
            let (a, b) = (local[&u], local[&v]);
            out[a].push((b, w));
            inc[b].push((a, w));
            if !directed {
                out[b].push((a, w));
                inc[a].push((b, w));
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in out.iter_mut().chain(inc.iter_mut()) {
            list.sort_by_key(|&(t, _)| t);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Self {
            window,
            directed,
            nodes: node_set,
            local,
            out,
            inc,
            neighbors,
            edge_count: folded.len(),
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Directed edges for directed graphs, unordered pairs otherwise.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Global ids, sorted ascending; position = local index.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn local_index(&self, node: NodeId) -> Option<usize> {
        self.local.get(&node).copied()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.local.contains_key(&node)
    }

    pub fn out_edges(&self, local: usize) -> &[(usize, f64)] {
        &self.out[local]
    }

    pub fn in_edges(&self, local: usize) -> &[(usize, f64)] {
        &self.inc[local]
    }

    /// Symmetrized neighbours of a local node.
    pub fn neighbors(&self, local: usize) -> &[usize] {
        &self.neighbors[local]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.out[u].binary_search_by_key(&v, |&(t, _)| t).is_ok()
    }

    /// Edges as `(u, v, w)` over global ids; undirected edges once with `u < v`.
    pub fn edges(&self) -> Vec<(NodeId, NodeId, f64)> {
        let mut edges = Vec::with_capacity(self.edge_count);
        for (u, list) in self.out.iter().enumerate() {
            for &(v, w) in list {
                if self.directed || u < v {
                    edges.push((self.nodes[u], self.nodes[v], w));
                }
            }
        }
        edges
    }

    /// Subgraph on `nodes`, keeping edges with both endpoints inside.
    pub fn induced_subgraph(&self, nodes: &[NodeId]) -> Result<SnapshotGraph, SnapshotError> {
        let mut keep = vec![false; self.node_count()];
        for &n in nodes {
            keep[self.local_index(n).ok_or(SnapshotError::UnknownNode(n))?] = true;
        }
        let edges: Vec<_> = self
            .edges()
            .into_iter()
            .filter(|(u, v, _)| keep[self.local[u]] && keep[self.local[v]])
            .collect();
        Ok(Self::from_weighted_edges(
            self.window,
            self.directed,
            &edges,
            nodes,
        ))
    }

    /// Symmetrized graph components as lists of local indices.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut components = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut i = 0;
            while i < comp.len() {
                for &v in &self.neighbors[comp[i]] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                    }
                }
                i += 1;
            }
            comp.sort_unstable();
            components.push(comp);
        }
        components
    }
}

/// Builds the graph of one window from its record slice.
pub fn build_snapshot(
    records: &[InteractionRecord],
    window: usize,
    spec: &GraphBuildSpec,
) -> Result<SnapshotGraph, SnapshotError> {
    spec.validate()?;
    if records.is_empty() {
        return Err(SnapshotError::EmptySlice);
    }
    let edges: Vec<(NodeId, NodeId, f64)> = records
        .iter()
        .map(|r| {
            let w = match spec.weight_rule {
                WeightRule::CountOfInteractions => 1.0,
                WeightRule::SumOfWeights => r.weight,
                WeightRule::Binary => 1.0,
            };
            (r.source, r.target, w)
        })
        .collect();
    let nodes: Vec<NodeId> = records.iter().flat_map(|r| [r.source, r.target]).collect();
    let mut graph = SnapshotGraph::from_weighted_edges(window, spec.directed, &edges, &nodes);
    if spec.weight_rule == WeightRule::Binary || !spec.weighted {
        for list in graph.out.iter_mut().chain(graph.inc.iter_mut()) {
            for e in list.iter_mut() {
                e.1 = 1.0;
            }
        }
    }
    Ok(graph)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NodeMeasureTable<T> {
    pub degree_in: Vec<usize>,
    pub degree_out: Vec<usize>,
    pub degree_total: Vec<usize>,
    pub closeness: Vec<T>,
    pub betweenness: Vec<T>,
    pub eigenvector: Vec<T>,
    pub eccentricity: Vec<usize>,
    /// Nodes reachable from each node, itself included.
    pub reached: Vec<usize>,
    /// Sum of hop distances to every reachable node.
    pub distance_sum: Vec<u64>,
    /// False when power iteration hit the iteration cap; the last iterate is kept.
    pub eigenvector_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NetworkMeasureRecord<T> {
    pub node_count: usize,
    pub edge_count: usize,
    pub density: T,
    pub reciprocity: T,
    pub leadership: T,
    pub clustering: T,
    pub component_count: usize,
    /// Largest eccentricity.
    pub diameter: usize,
    /// Mean hop distance over ordered reachable pairs; 0 without such pairs.
    pub avg_path_length: T,
}

pub const EIGENVECTOR_TOLERANCE: f64 = 1e-8;
pub const EIGENVECTOR_MAX_ITERATIONS: usize = 1000;

struct SourceSweep {
    dependency: Vec<f64>,
    distance_sum: u64,
    reached: usize,
    eccentricity: usize,
}

/// BFS from `s` with Brandes dependency accumulation.
fn sweep(g: &SnapshotGraph, s: usize) -> SourceSweep {
    let n = g.node_count();
    let mut dist = vec![usize::MAX; n];
    let mut sigma = vec![0f64; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    dist[s] = 0;
    sigma[s] = 1.0;
    queue.push_back(s);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &w in g.neighbors(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
            if dist[w] == dist[v] + 1 {
                sigma[w] += sigma[v];
            }
        }
    }
    let mut dependency = vec![0f64; n];
    for &w in order.iter().rev() {
        for &v in g.neighbors(w) {
            if dist[v] != usize::MAX && dist[v] + 1 == dist[w] {
                dependency[v] += sigma[v] / sigma[w] * (1.0 + dependency[w]);
            }
        }
    }
    dependency[s] = 0.0;
    let mut distance_sum = 0u64;
    let mut eccentricity = 0;
    for &v in &order {
        distance_sum += dist[v] as u64;
        eccentricity = eccentricity.max(dist[v]);
    }
    SourceSweep {
        dependency,
        distance_sum,
        reached: order.len(),
        eccentricity,
    }
}

fn eigenvector_centrality(g: &SnapshotGraph) -> (Vec<f64>, bool) {
    let n = g.node_count();
    if n == 0 {
        return (Vec::new(), true);
    }
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    for _ in 0..EIGENVECTOR_MAX_ITERATIONS {
        // (A + I) x keeps bipartite graphs from oscillating.
        let mut next: Vec<f64> = (0..n)
            .map(|v| x[v] + g.neighbors(v).iter().map(|&u| x[u]).sum::<f64>())
            .collect();
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        next.iter_mut().for_each(|v| *v /= norm);
        let change = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        x = next;
        if change < EIGENVECTOR_TOLERANCE {
            return (x, true);
        }
    }
    log::debug!(
        "eigenvector centrality did not converge in {EIGENVECTOR_MAX_ITERATIONS} iterations (window {})",
        g.window()
    );
    (x, false)
}

pub fn node_measures<T: Scalar>(g: &SnapshotGraph) -> NodeMeasureTable<T> {
    let n = g.node_count();
    let sweeps: Vec<SourceSweep> = (0..n).into_par_iter().map(|s| sweep(g, s)).collect();
    let mut betweenness = vec![0f64; n];
    for sw in &sweeps {
        for (b, d) in betweenness.iter_mut().zip(&sw.dependency) {
            *b += d;
        }
    }
    // Each unordered pair was counted from both ends.
    let betweenness = betweenness.into_iter().map(|b| T::of(b / 2.0)).collect();
    let closeness = sweeps
        .iter()
        .map(|sw| {
            if sw.distance_sum == 0 {
                T::zero()
            } else {
                T::of((sw.reached - 1) as f64 / sw.distance_sum as f64)
            }
        })
        .collect();
    let (eigen, converged) = eigenvector_centrality(g);
    let degree_out: Vec<usize> = (0..n).map(|v| g.out[v].len()).collect();
    let degree_in: Vec<usize> = (0..n).map(|v| g.inc[v].len()).collect();
    let degree_total = if g.directed {
        degree_in.iter().zip(&degree_out).map(|(a, b)| a + b).collect()
    } else {
        degree_out.clone()
    };
    NodeMeasureTable {
        degree_in,
        degree_out,
        degree_total,
        closeness,
        betweenness,
        eigenvector: eigen.into_iter().map(T::of).collect(),
        eccentricity: sweeps.iter().map(|sw| sw.eccentricity).collect(),
        reached: sweeps.iter().map(|sw| sw.reached).collect(),
        distance_sum: sweeps.iter().map(|sw| sw.distance_sum).collect(),
        eigenvector_converged: converged,
    }
}

/// Closed-pair and connected-triple totals on the symmetrized graph.
fn triangle_counts(g: &SnapshotGraph) -> (u64, u64) {
    let mut closed = 0u64;
    let mut triples = 0u64;
    for v in 0..g.node_count() {
        let nb = g.neighbors(v);
        let d = nb.len() as u64;
        triples += d * d.saturating_sub(1) / 2;
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if g.neighbors(a).binary_search(&b).is_ok() {
                    closed += 1;
                }
            }
        }
    }
    (closed, triples)
}

pub fn network_measures<T: Scalar>(
    g: &SnapshotGraph,
    nodes: &NodeMeasureTable<T>,
) -> NetworkMeasureRecord<T> {
    let n = g.node_count();
    let m = g.edge_count();
    let pairs = n as f64 * n.saturating_sub(1) as f64;
    let density = if n < 2 {
        0.0
    } else if g.directed {
        m as f64 / pairs
    } else {
        2.0 * m as f64 / pairs
    };
    let reciprocity = if !g.directed {
        1.0
    } else if m == 0 {
        0.0
    } else {
        let mutual = (0..n)
            .flat_map(|u| g.out[u].iter().map(move |&(v, _)| (u, v)))
            .filter(|&(u, v)| g.has_edge(v, u))
            .count();
        mutual as f64 / m as f64
    };
    let leadership = if n < 3 {
        0.0
    } else {
        let max = nodes.degree_total.iter().copied().max().unwrap_or(0);
        let spread: usize = nodes.degree_total.iter().map(|&d| max - d).sum();
        let scale = if g.directed { 2.0 } else { 1.0 };
        spread as f64 / (scale * (n - 1) as f64 * (n - 2) as f64)
    };
    let (closed, triples) = triangle_counts(g);
    let clustering = if n < 3 || triples == 0 {
        0.0
    } else {
        closed as f64 / triples as f64
    };
    let components = g.components();
    let dist_sum: u64 = nodes.distance_sum.iter().sum();
    let reachable_pairs: usize = nodes.reached.iter().map(|r| r - 1).sum();
    NetworkMeasureRecord {
        node_count: n,
        edge_count: m,
        density: T::of(density),
        reciprocity: T::of(reciprocity),
        leadership: T::of(leadership),
        clustering: T::of(clustering),
        component_count: components.len(),
        diameter: nodes.eccentricity.iter().copied().max().unwrap_or(0),
        avg_path_length: if reachable_pairs == 0 {
            T::zero()
        } else {
            T::of(dist_sum as f64 / reachable_pairs as f64)
        },
    }
}

/// A snapshot together with its node and network measures.
#[derive(Debug, Clone)]
pub struct MeasuredSnapshot<T: Scalar> {
    graph: SnapshotGraph,
    nodes: NodeMeasureTable<T>,
    network: NetworkMeasureRecord<T>,
}

impl<T: Scalar> MeasuredSnapshot<T> {
    pub fn new(graph: SnapshotGraph) -> Self {
        let nodes = node_measures(&graph);
        let network = network_measures(&graph, &nodes);
        Self {
            graph,
            nodes,
            network,
        }
    }

    pub fn graph(&self) -> &SnapshotGraph {
        &self.graph
    }

    pub fn nodes(&self) -> &NodeMeasureTable<T> {
        &self.nodes
    }

    pub fn network(&self) -> &NetworkMeasureRecord<T> {
        &self.network
    }

    pub fn induced(&self, members: &[NodeId]) -> Result<MeasuredSnapshot<T>, SnapshotError> {
        Ok(Self::new(self.graph.induced_subgraph(members)?))
    }
}

/// `source,target,weight` edge list with external node names.
pub fn write_edge_list<W: Write>(
    g: &SnapshotGraph,
    symbols: &SymbolTable,
    writer: W,
) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["source", "target", "weight"])?;
    for (u, v, w) in g.edges() {
        out.write_record([symbols.name(u), symbols.name(v), &w.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_node_measures<W: Write, T: Scalar>(
    snapshot: &MeasuredSnapshot<T>,
    symbols: &SymbolTable,
    writer: W,
) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record([
        "node",
        "degree_in",
        "degree_out",
        "degree_total",
        "closeness",
        "betweenness",
        "eigenvector",
        "eccentricity",
    ])?;
    let t = snapshot.nodes();
    for (i, &node) in snapshot.graph().nodes().iter().enumerate() {
        out.write_record([
            symbols.name(node).to_owned(),
            t.degree_in[i].to_string(),
            t.degree_out[i].to_string(),
            t.degree_total[i].to_string(),
            t.closeness[i].to_string(),
            t.betweenness[i].to_string(),
            t.eigenvector[i].to_string(),
            t.eccentricity[i].to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
pub(crate) mod test_graphs {
    use super::*;

    pub fn undirected(n: u32, edges: &[(u32, u32)]) -> SnapshotGraph {
        let e: Vec<_> = edges.iter().map(|&(u, v)| (NodeId(u), NodeId(v), 1.0)).collect();
        let nodes: Vec<_> = (0..n).map(NodeId).collect();
        SnapshotGraph::from_weighted_edges(0, false, &e, &nodes)
    }

    pub fn complete(n: u32) -> SnapshotGraph {
        let edges: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        undirected(n, &edges)
    }
}

#[cfg(test)]
mod tests {
    use super::test_graphs::*;
    use super::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    fn record(s: u32, t: u32) -> InteractionRecord {
        InteractionRecord {
            source: NodeId(s),
            target: NodeId(t),
            timestamp: 0,
            weight: 0.5,
        }
    }

    #[test]
    fn counting_rule_folds_multi_edges() {
        let recs = [record(0, 1), record(0, 1), record(1, 2)];
        let g = build_snapshot(
            &recs,
            0,
            &GraphBuildSpec::new(true, WeightRule::CountOfInteractions),
        )
        .unwrap();
        assert_eq!(
            g.edges(),
            vec![(NodeId(0), NodeId(1), 2.0), (NodeId(1), NodeId(2), 1.0)]
        );
        let g = build_snapshot(&recs, 0, &GraphBuildSpec::new(false, WeightRule::Binary)).unwrap();
        assert_eq!(
            g.edges(),
            vec![(NodeId(0), NodeId(1), 1.0), (NodeId(1), NodeId(2), 1.0)]
        );
        let g = build_snapshot(&recs, 0, &GraphBuildSpec::new(true, WeightRule::SumOfWeights)).unwrap();
        assert_eq!(g.edges()[0].2, 1.0);
        assert_eq!(
            build_snapshot(&[], 0, &GraphBuildSpec::default()),
            Err(SnapshotError::EmptySlice)
        );
        let bad = GraphBuildSpec {
            directed: false,
            weighted: true,
            weight_rule: WeightRule::Binary,
        };
        assert!(build_snapshot(&recs, 0, &bad).is_err());
    }

    #[test]
    fn path_measures() {
        let g = undirected(3, &[(0, 1), (1, 2)]);
        let m = node_measures::<f64>(&g);
        assert!(close(&m.betweenness, &[0.0, 1.0, 0.0]));
        assert!(close(&m.closeness, &[2.0 / 3.0, 1.0, 2.0 / 3.0]));
        assert_eq!(m.eccentricity, vec![2, 1, 2]);
    }

    #[test]
    fn triangle_eigenvector_is_uniform() {
        let m = node_measures::<f64>(&complete(3));
        let u = 1.0 / 3f64.sqrt();
        assert!(m.eigenvector.iter().all(|&x| (x - u).abs() < 1e-9));
        assert!(m.eigenvector_converged);
    }

    #[test]
    fn star_betweenness() {
        let g = undirected(4, &[(0, 1), (0, 2), (0, 3)]);
        let m = node_measures::<f64>(&g);
        assert!(close(&m.betweenness, &[3.0, 0.0, 0.0, 0.0]));
        let net = network_measures(&g, &m);
        assert!((net.leadership - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isolated_nodes() {
        let g = undirected(3, &[(0, 1)]);
        let m = node_measures::<f64>(&g);
        assert_eq!(m.closeness[2], 0.0);
        assert_eq!(m.eccentricity[2], 0);
        let net = network_measures(&g, &m);
        assert_eq!(net.component_count, 2);
    }

    #[test]
    fn complete_graph_network_measures() {
        let g = complete(3);
        let net = network_measures(&g, &node_measures::<f64>(&g));
        assert_eq!(net.density, 1.0);
        assert_eq!(net.clustering, 1.0);
        assert_eq!(net.reciprocity, 1.0);
        assert_eq!(net.avg_path_length, 1.0);
    }

    #[test]
    fn directed_reciprocity() {
        let e = [
            (NodeId(0), NodeId(1), 1.0),
            (NodeId(1), NodeId(0), 1.0),
            (NodeId(0), NodeId(2), 1.0),
        ];
        let g = SnapshotGraph::from_weighted_edges(0, true, &e, &[]);
        let m = node_measures::<f64>(&g);
        let net = network_measures(&g, &m);
        assert!((net.reciprocity - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.degree_in, vec![1, 1, 1]);
        assert_eq!(m.degree_out, vec![2, 1, 0]);
        assert_eq!(m.degree_total, vec![3, 2, 1]);
        assert!((net.density - 0.5).abs() < 1e-12);
        assert!(net.leadership >= 0.0 && net.leadership <= 1.0);
    }

    #[test]
    fn small_graphs_have_zero_leadership_and_clustering() {
        let g = undirected(2, &[(0, 1)]);
        let net = network_measures(&g, &node_measures::<f64>(&g));
        assert_eq!((net.leadership, net.clustering), (0.0, 0.0));
    }

    #[test]
    fn induced_subgraphs() {
        let k4 = complete(4);
        let k3 = k4.induced_subgraph(&[NodeId(0), NodeId(1), NodeId(2)]).unwrap();
        assert_eq!((k3.node_count(), k3.edge_count()), (3, 3));
        let one = k4.induced_subgraph(&[NodeId(2)]).unwrap();
        assert_eq!((one.node_count(), one.edge_count()), (1, 0));
        let path = undirected(4, &[(0, 1), (1, 2), (2, 3)]);
        let pair = MeasuredSnapshot::<f64>::new(path)
            .induced(&[NodeId(0), NodeId(3)])
            .unwrap();
        assert_eq!(pair.graph().edge_count(), 0);
        assert_eq!(pair.network().component_count, 2);
        assert_eq!(
            k4.induced_subgraph(&[NodeId(9)]),
            Err(SnapshotError::UnknownNode(NodeId(9)))
        );
    }

    #[test]
    fn works_in_f32() {
        let g = undirected(3, &[(0, 1), (1, 2)]);
        let m = node_measures::<f32>(&g);
        assert_eq!(m.betweenness, vec![0.0f32, 1.0, 0.0]);
    }

    #[test]
    fn dumps_are_csv() {
        let mut symbols = SymbolTable::default();
        for name in ["a", "b", "c"] {
            symbols.intern(name);
        }
        let s = MeasuredSnapshot::<f64>::new(undirected(3, &[(0, 1), (1, 2)]));
        let mut buf = Vec::new();
        write_edge_list(s.graph(), &symbols, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "source,target,weight\na,b,1\nb,c,1\n"
        );
        let mut buf = Vec::new();
        write_node_measures(&s, &symbols, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_graph() -> impl Strategy<Value = SnapshotGraph> {
            (2u32..12).prop_flat_map(|n| {
                prop::collection::vec((0..n, 0..n), 0..30).prop_map(move |e| undirected(n, &e))
            })
        }

        proptest! {
            #[test]
            fn density_bounded_and_monotone(g in arb_graph(), u in 0u32..12, v in 0u32..12) {
                let net = network_measures(&g, &node_measures::<f64>(&g));
                prop_assert!((0.0..=1.0).contains(&net.density));
                prop_assert!((0.0..=1.0).contains(&net.leadership));
                prop_assert!((0.0..=1.0).contains(&net.clustering));
                let n = g.node_count() as u32;
                let (u, v) = (u % n, v % n);
                let mut edges: Vec<_> = g.edges();
                edges.push((NodeId(u), NodeId(v), 1.0));
                let bigger = SnapshotGraph::from_weighted_edges(0, false, &edges, g.nodes());
                let net2 = network_measures(&bigger, &node_measures::<f64>(&bigger));
                prop_assert!(net2.density >= net.density);
            }
        }
    }
}
