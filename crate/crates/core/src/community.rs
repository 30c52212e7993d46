//! Community detection inside a single snapshot.
//!
//! Two detectors are provided: k-clique percolation (overlapping) and
//! Louvain-style modularity maximization (disjoint). Groups with fewer than
//! two members are never reported.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{NodeId, SymbolTable};
use crate::rng;
use crate::snapshot::SnapshotGraph;

/// Gain below which the modularity optimizer stops.
pub const MODULARITY_EPSILON: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum CommunityError {
    #[error("clique size k must be at least 3, got {0}")]
    InvalidK(usize),
    #[error("line {line}: {reason}")]
    BadCoverLine { line: usize, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CommunityId {
    pub window: usize,
    pub ordinal: usize,
}

impl CommunityId {
    pub fn new(window: usize, ordinal: usize) -> Self {
        Self { window, ordinal }
    }
}

impl std::fmt::Display for CommunityId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.window, self.ordinal)
    }
}

impl std::str::FromStr for CommunityId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (w, o) = s
            .split_once(':')
            .ok_or_else(|| format!("community id {s:?} is not window:ordinal"))?;
        Ok(Self {
            window: w.trim().parse().map_err(|_| format!("bad window in {s:?}"))?,
            ordinal: o.trim().parse().map_err(|_| format!("bad ordinal in {s:?}"))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Detector {
    Cpm { k: usize },
    Modularity { seed: u64 },
}

impl Default for Detector {
    fn default() -> Self {
        Detector::Cpm { k: 3 }
    }
}

impl Detector {
    pub fn is_disjoint(&self) -> bool {
        matches!(self, Detector::Modularity { .. })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Detector::Cpm { .. } => "cpm",
            Detector::Modularity { .. } => "modularity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Community {
    pub id: CommunityId,
    /// Sorted, at least two members.
    pub members: Vec<NodeId>,
    pub detector: String,
}

impl Community {
    pub fn new(id: CommunityId, mut members: Vec<NodeId>, detector: &str) -> Self {
        members.sort_unstable();
        members.dedup();
        Self {
            id,
            members,
            detector: detector.to_owned(),
        }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn window(&self) -> usize {
        self.id.window
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.members.binary_search(&node).is_ok()
    }

    pub fn overlap(&self, other: &Community) -> usize {
        let (mut i, mut j, mut shared) = (0, 0, 0);
        while i < self.members.len() && j < other.members.len() {
            match self.members[i].cmp(&other.members[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    shared += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        shared
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityCover {
    pub window: usize,
    /// Nodes in the window's snapshot.
    pub node_count: usize,
    pub communities: Vec<Community>,
    pub disjoint: bool,
}

impl CommunityCover {
    /// Builds a cover from raw member lists: drops groups smaller than two,
    /// sorts members and orders groups lexicographically so ordinals are stable.
    pub fn from_groups(
        window: usize,
        node_count: usize,
        groups: Vec<Vec<NodeId>>,
        detector: &str,
        disjoint: bool,
    ) -> Self {
        let mut groups: Vec<Vec<NodeId>> = groups
            .into_iter()
            .map(|mut g| {
                g.sort_unstable();
                g.dedup();
                g
            })
            .filter(|g| g.len() >= 2)
            .collect();
        groups.sort();
        groups.dedup();
        let communities = groups
            .into_iter()
            .enumerate()
            .map(|(i, g)| Community::new(CommunityId::new(window, i), g, detector))
            .collect();
        Self {
            window,
            node_count,
            communities,
            disjoint,
        }
    }

    /// Fraction of window nodes in at least one community.
    pub fn coverage(&self) -> f64 {
        if self.node_count == 0 {
            return 0.0;
        }
        let mut covered: Vec<NodeId> = self
            .communities
            .iter()
            .flat_map(|c| c.members.iter().copied())
            .collect();
        covered.sort_unstable();
        covered.dedup();
        covered.len() as f64 / self.node_count as f64
    }
}

pub fn detect(g: &SnapshotGraph, detector: &Detector) -> Result<CommunityCover, CommunityError> {
    match *detector {
        Detector::Cpm { k } => detect_cpm(g, k),
        Detector::Modularity { seed } => Ok(detect_modularity(g, seed)),
    }
}

// ---------------------------------------------------------------------------
// Clique percolation

/// Maximal cliques of the symmetrized graph (Bron-Kerbosch with pivoting),
/// as sorted local-index lists.
pub fn maximal_cliques(g: &SnapshotGraph) -> Vec<Vec<usize>> {
    fn expand(
        g: &SnapshotGraph,
        r: &mut Vec<usize>,
        mut p: Vec<usize>,
        mut x: Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if p.is_empty() {
            if x.is_empty() {
                let mut clique = r.clone();
                clique.sort_unstable();
                out.push(clique);
            }
            return;
        }
        let is_adj = |a: usize, b: usize| g.neighbors(a).binary_search(&b).is_ok();
        let pivot = p
            .iter()
            .chain(x.iter())
            .copied()
            .max_by_key(|&u| p.iter().filter(|&&v| is_adj(u, v)).count())
            .expect("p is non-empty");
        let candidates: Vec<usize> = p.iter().copied().filter(|&v| !is_adj(pivot, v)).collect();
        for v in candidates {
            r.push(v);
            let np = p.iter().copied().filter(|&u| is_adj(v, u)).collect();
            let nx = x.iter().copied().filter(|&u| is_adj(v, u)).collect();
            expand(g, r, np, nx, out);
            r.pop();
            p.retain(|&u| u != v);
            x.push(v);
        }
    }
    let mut out = Vec::new();
    let all: Vec<usize> = (0..g.node_count()).collect();
    expand(g, &mut Vec::new(), all, Vec::new(), &mut out);
    out.sort();
    out
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// k-clique communities: unions of k-cliques chained through shared
/// (k-1)-subsets. Computed through maximal cliques of size >= k, two of
/// which percolate when they share at least k-1 nodes.
pub fn detect_cpm(g: &SnapshotGraph, k: usize) -> Result<CommunityCover, CommunityError> {
    if k < 3 {
        return Err(CommunityError::InvalidK(k));
    }
    let cliques: Vec<Vec<usize>> = maximal_cliques(g).into_iter().filter(|c| c.len() >= k).collect();
    let mut parent: Vec<usize> = (0..cliques.len()).collect();
    for i in 0..cliques.len() {
        for j in i + 1..cliques.len() {
            let shared = cliques[i]
                .iter()
                .filter(|v| cliques[j].binary_search(v).is_ok())
                .count();
            if shared >= k - 1 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
    for (i, clique) in cliques.iter().enumerate() {
        let root = find(&mut parent, i);
        groups
            .entry(root)
            .or_default()
            .extend(clique.iter().map(|&v| g.nodes()[v]));
    }
    Ok(CommunityCover::from_groups(
        g.window(),
        g.node_count(),
        groups.into_values().collect(),
        "cpm",
        false,
    ))
}

// ---------------------------------------------------------------------------
// Modularity

/// Symmetrized weighted adjacency without self-loops; directed weights in
/// both directions are added.
fn symmetric_weights(g: &SnapshotGraph) -> Vec<Vec<(usize, f64)>> {
    let n = g.node_count();
    let mut adj: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for u in 0..n {
        for &(v, w) in g.out_edges(u) {
            if g.is_directed() {
                *adj[u].entry(v).or_insert(0.0) += w;
                *adj[v].entry(u).or_insert(0.0) += w;
            } else {
                *adj[u].entry(v).or_insert(0.0) += w;
            }
        }
    }
    adj.into_iter().map(|m| m.into_iter().collect()).collect()
}

/// Newman modularity of a node partition (`membership[local] = community`)
/// on the symmetrized weighted graph. Zero for edgeless graphs.
pub fn modularity(g: &SnapshotGraph, membership: &[usize]) -> f64 {
    let adj = symmetric_weights(g);
    let level = Level::from_adjacency(adj);
    level.modularity(membership)
}

struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    self_loops: Vec<f64>,
    degree: Vec<f64>,
    two_m: f64,
}

impl Level {
    fn from_adjacency(adj: Vec<Vec<(usize, f64)>>) -> Self {
        let n = adj.len();
        Self::new(adj, vec![0.0; n])
    }

    fn new(adj: Vec<Vec<(usize, f64)>>, self_loops: Vec<f64>) -> Self {
        let degree: Vec<f64> = adj
            .iter()
            .zip(&self_loops)
            .map(|(list, s)| list.iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * s)
            .collect();
        let two_m = degree.iter().sum();
        Self {
            adj,
            self_loops,
            degree,
            two_m,
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    fn modularity(&self, membership: &[usize]) -> f64 {
        if self.two_m == 0.0 {
            return 0.0;
        }
        let groups = membership.iter().copied().max().map_or(0, |m| m + 1);
        let mut inside = vec![0.0; groups];
        let mut total = vec![0.0; groups];
        for u in 0..self.len() {
            let c = membership[u];
            total[c] += self.degree[u];
            inside[c] += 2.0 * self.self_loops[u];
            for &(v, w) in &self.adj[u] {
                if membership[v] == c {
                    inside[c] += w;
                }
            }
        }
        inside
            .iter()
            .zip(&total)
            .map(|(i, t)| i / self.two_m - (t / self.two_m).powi(2))
            .sum()
    }

    /// One round of local moves; returns the relabelled membership.
    fn local_moving(&self, order: &[usize]) -> Vec<usize> {
        let n = self.len();
        let mut membership: Vec<usize> = (0..n).collect();
        let mut total: Vec<f64> = self.degree.clone();
        let mut current = self.modularity(&membership);
        loop {
            let mut moved = false;
            for &u in order {
                let old = membership[u];
                let k = self.degree[u];
                total[old] -= k;
                let mut links: Vec<(usize, f64)> = Vec::new();
                for &(v, w) in &self.adj[u] {
                    let c = membership[v];
                    match links.iter_mut().find(|(cc, _)| *cc == c) {
                        Some(entry) => entry.1 += w,
                        None => links.push((c, w)),
                    }
                }
                let gain = |c: usize, w: f64| w - total[c] * k / self.two_m;
                let w_old = links.iter().find(|(c, _)| *c == old).map_or(0.0, |e| e.1);
                let mut best = (old, gain(old, w_old));
                for &(c, w) in &links {
                    let g = gain(c, w);
                    if g > best.1 + 1e-12 {
                        best = (c, g);
                    }
                }
                total[best.0] += k;
                if best.0 != old {
                    membership[u] = best.0;
                    moved = true;
                }
            }
            let q = self.modularity(&membership);
            let improved = q - current > MODULARITY_EPSILON;
            current = q;
            if !moved || !improved {
                break;
            }
        }
        relabel(&membership)
    }

    fn aggregate(&self, membership: &[usize]) -> Level {
        let groups = membership.iter().copied().max().map_or(0, |m| m + 1);
        let mut adj: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); groups];
        let mut self_loops = vec![0.0; groups];
        for u in 0..self.len() {
            let cu = membership[u];
            self_loops[cu] += self.self_loops[u];
            for &(v, w) in &self.adj[u] {
                let cv = membership[v];
                if cu == cv {
                    // each internal edge is seen from both ends
                    self_loops[cu] += w / 2.0;
                } else {
                    *adj[cu].entry(cv).or_insert(0.0) += w;
                }
            }
        }
        Level::new(
            adj.into_iter().map(|m| m.into_iter().collect()).collect(),
            self_loops,
        )
    }
}

fn relabel(membership: &[usize]) -> Vec<usize> {
    let mut map = HashMap::new();
    membership
        .iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect()
}

/// Modularity after each optimization level, starting with the singleton
/// partition.
#[derive(Debug, Clone, PartialEq)]
pub struct LouvainTrace {
    pub membership: Vec<usize>,
    pub level_modularity: Vec<f64>,
}

pub fn louvain(g: &SnapshotGraph, seed: u64) -> LouvainTrace {
    let mut level = Level::from_adjacency(symmetric_weights(g));
    let n = level.len();
    let mut membership: Vec<usize> = (0..n).collect();
    let mut trace = vec![level.modularity(&membership)];
    let mut rng = rng::stream(seed, g.window() as u64);
    loop {
        let mut order: Vec<usize> = (0..level.len()).collect();
        order.shuffle(&mut rng);
        let local = level.local_moving(&order);
        let groups = local.iter().copied().max().map_or(0, |m| m + 1);
        let q_before = *trace.last().expect("trace starts non-empty");
        let q_after = level.modularity(&local);
        if groups == level.len() || q_after - q_before <= MODULARITY_EPSILON {
            break;
        }
        for c in membership.iter_mut() {
            *c = local[*c];
        }
        trace.push(q_after);
        level = level.aggregate(&local);
    }
    LouvainTrace {
        membership: relabel(&membership),
        level_modularity: trace,
    }
}

pub fn detect_modularity(g: &SnapshotGraph, seed: u64) -> CommunityCover {
    let trace = louvain(g, seed);
    let mut groups: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
    for (v, &c) in trace.membership.iter().enumerate() {
        groups.entry(c).or_default().push(g.nodes()[v]);
    }
    CommunityCover::from_groups(
        g.window(),
        g.node_count(),
        groups.into_values().collect(),
        "modularity",
        true,
    )
}

// ---------------------------------------------------------------------------
// Statistics and IO

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverStats {
    pub count: usize,
    /// Community size -> number of communities of that size.
    pub size_histogram: BTreeMap<usize, usize>,
    pub coverage: f64,
}

pub fn cover_stats(cover: &CommunityCover) -> CoverStats {
    let mut size_histogram = BTreeMap::new();
    for c in &cover.communities {
        *size_histogram.entry(c.size()).or_insert(0) += 1;
    }
    CoverStats {
        count: cover.communities.len(),
        size_histogram,
        coverage: cover.coverage(),
    }
}

#[derive(Serialize, Deserialize)]
struct CoverLine {
    window: usize,
    id: usize,
    members: Vec<String>,
}

/// One JSON object per community: `{"window":k,"id":j,"members":[...]}`.
pub fn write_covers_jsonl<W: Write>(
    covers: &[CommunityCover],
    symbols: &SymbolTable,
    mut writer: W,
) -> Result<(), CommunityError> {
    for cover in covers {
        for c in &cover.communities {
            let line = CoverLine {
                window: c.id.window,
                id: c.id.ordinal,
                members: c.members.iter().map(|&m| symbols.name(m).to_owned()).collect(),
            };
            let json = serde_json::to_string(&line).expect("cover lines serialize");
            writeln!(writer, "{json}")?;
        }
    }
    Ok(())
}

/// Reads communities back; members must exist in `symbols`.
pub fn read_communities_jsonl<R: BufRead>(
    reader: R,
    symbols: &SymbolTable,
    detector: &str,
) -> Result<Vec<Community>, CommunityError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| CommunityError::BadCoverLine { line: i + 1, reason };
        let parsed: CoverLine = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let members = parsed
            .members
            .iter()
            .map(|m| symbols.get(m).ok_or_else(|| bad(format!("unknown node {m:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(Community::new(
            CommunityId::new(parsed.window, parsed.id),
            members,
            detector,
        ));
    }
    Ok(out)
}
