//! Per-state feature catalog and the chain feature matrix.
//!
//! Every community state is described by 91 values: node measures
//! aggregated over the group (computed on the group's own subgraph and on
//! the whole snapshot), group-level descriptors, whole-network descriptors
//! and a small set of compact group profile features. Degenerate ratios are
//! 0, never NaN.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chains::{EvolutionChain, StateContext};
use crate::community::{Community, CommunityCover, CommunityId};
use crate::learn::{Dataset, LearnError};
use crate::snapshot::{MeasuredSnapshot, NodeMeasureTable, SnapshotError};
use crate::tracking::EventType;
use crate::Scalar;

pub const CATALOG_SIZE: usize = 91;
pub const CATALOG_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no chains to build a dataset from")]
    EmptyChains,
    #[error("chain of length {found} where {expected} was requested")]
    LengthMismatch { expected: usize, found: usize },
    #[error("window {0} has no snapshot")]
    MissingSnapshot(usize),
    #[error("community {0} not found in its cover")]
    MissingCommunity(CommunityId),
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("feature mask has {0} entries, expected 91")]
    BadMask(usize),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Dataset(#[from] LearnError),
    #[error("features csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("features csv: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureType {
    MicroscopicLocal,
    MicroscopicGlobal,
    Mesoscopic,
    Macroscopic,
}

impl FeatureType {
    pub fn name(self) -> &'static str {
        match self {
            FeatureType::MicroscopicLocal => "microscopic-local",
            FeatureType::MicroscopicGlobal => "microscopic-global",
            FeatureType::Mesoscopic => "mesoscopic",
            FeatureType::Macroscopic => "macroscopic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub feature_type: FeatureType,
    /// Short description of how the value is computed.
    pub computation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureCatalog {
    pub version: String,
    pub features: Vec<FeatureDescriptor>,
}

impl FeatureCatalog {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }
}

pub const AGGREGATES: [&str; 4] = ["sum", "avg", "min", "max"];
pub const SCOPES: [&str; 2] = ["group", "network"];
pub const NODE_MEASURES: [&str; 7] = [
    "degree_in",
    "degree_out",
    "degree_total",
    "closeness",
    "betweenness",
    "eigenvector",
    "eccentricity",
];

const MESOSCOPIC: [(&str, &str); 19] = [
    ("group_size", "member count"),
    ("group_edges", "edges inside the group"),
    ("group_density", "density of the group subgraph"),
    (
        "group_coefficient_global",
        "global clustering of the group subgraph",
    ),
    ("group_cohesion", "group density over boundary linkage density"),
    ("network_ratio_size", "group size over network size"),
    ("network_ratio_edges", "group edges over network edges"),
    ("network_ratio_density", "group density over network density"),
    (
        "network_ratio_coefficient_global",
        "group clustering over network clustering",
    ),
    (
        "network_ratio_eccentricity",
        "mean group eccentricity over mean network eccentricity",
    ),
    ("neighborhood_in", "edges entering the group"),
    ("neighborhood_out", "edges leaving the group"),
    ("neighborhood_all", "edges crossing the group boundary"),
    ("alpha", "forward inclusion of the incoming event"),
    ("beta", "backward inclusion of the incoming event"),
    ("previous_event", "code of the incoming event, 0 if none"),
    ("group_component_count", "components of the group subgraph"),
    ("group_diameter", "diameter of the group subgraph"),
    (
        "group_avg_path_length",
        "mean hop distance inside the group subgraph",
    ),
];

const MACROSCOPIC: [(&str, &str); 7] = [
    ("network_size", "nodes in the snapshot"),
    ("network_edges", "edges in the snapshot"),
    ("network_density", "snapshot density"),
    ("network_reciprocity", "share of reciprocated directed edges"),
    ("network_leadership", "degree centralization"),
    ("network_coefficient_global", "snapshot global clustering"),
    ("network_component_count", "snapshot components"),
];

const PROFILE: [(&str, &str); 9] = [
    ("ilhan_nodes", "member count"),
    ("ilhan_edges", "edges inside the group"),
    ("ilhan_intra", "internal edges over member pairs"),
    ("ilhan_inter", "boundary edges over member-outsider pairs"),
    (
        "ilhan_betweenness",
        "mean normalized network betweenness of members",
    ),
    ("ilhan_degree", "mean normalized network degree of members"),
    (
        "ilhan_conductance",
        "boundary edges over the smaller side's volume",
    ),
    ("ilhan_aging", "prior states over windows elapsed"),
    (
        "ilhan_activeness",
        "share of members with an interaction in the window",
    ),
];

pub fn catalog() -> &'static FeatureCatalog {
    static CATALOG: OnceLock<FeatureCatalog> = OnceLock::new();
    CATALOG.get_or_init(|| {
        let mut features = Vec::with_capacity(CATALOG_SIZE);
        for scope in SCOPES {
            for measure in NODE_MEASURES {
                for agg in AGGREGATES {
                    let feature_type = if scope == "group" {
                        FeatureType::MicroscopicLocal
                    } else {
                        FeatureType::MicroscopicGlobal
                    };
                    features.push(FeatureDescriptor {
                        name: format!("{agg}_{scope}_{measure}"),
                        feature_type,
                        computation: format!("{agg} of member {measure} on the {scope} graph"),
                    });
                }
            }
        }
        for (list, feature_type) in [
            (&MESOSCOPIC[..], FeatureType::Mesoscopic),
            (&MACROSCOPIC[..], FeatureType::Macroscopic),
            (&PROFILE[..], FeatureType::Mesoscopic),
        ] {
            for (name, computation) in list {
                features.push(FeatureDescriptor {
                    name: (*name).to_owned(),
                    feature_type,
                    computation: (*computation).to_owned(),
                });
            }
        }
        FeatureCatalog {
            version: CATALOG_VERSION.to_owned(),
            features,
        }
    })
}

fn slot(name: &str) -> usize {
    catalog()
        .index_of(name)
        .unwrap_or_else(|| panic!("{name} is in the catalog"))
}

fn ratio<T: Scalar>(num: T, den: T) -> T {
    if den == T::zero() || !den.is_finite() {
        T::zero()
    } else {
        num / den
    }
}

/// Index of the first mesoscopic feature; the 56 microscopic ones come first.
const MICRO_LEN: usize = 56;

fn measure_column<T: Scalar>(table: &NodeMeasureTable<T>, measure: usize, v: usize) -> T {
    match measure {
        0 => T::of_usize(table.degree_in[v]),
        1 => T::of_usize(table.degree_out[v]),
        2 => T::of_usize(table.degree_total[v]),
        3 => table.closeness[v],
        4 => table.betweenness[v],
        5 => table.eigenvector[v],
        _ => T::of_usize(table.eccentricity[v]),
    }
}

/// sum, avg, min, max of `values` (all 0 when empty).
fn aggregate<T: Scalar>(values: &[T]) -> [T; 4] {
    if values.is_empty() {
        return [T::zero(); 4];
    }
    let sum: T = values.iter().copied().sum();
    let min = values.iter().copied().fold(T::infinity(), T::min);
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    [sum, sum / T::of_usize(values.len()), min, max]
}

/// Boundary counts of a member set: (entering, leaving, all).
fn boundary(snapshot: &crate::snapshot::SnapshotGraph, inside: &[bool]) -> (usize, usize, usize) {
    let (mut enter, mut leave) = (0, 0);
    for u in 0..snapshot.node_count() {
        if !inside[u] {
            continue;
        }
        for &(v, _) in snapshot.out_edges(u) {
            if !inside[v] {
                leave += 1;
            }
        }
        if snapshot.is_directed() {
            for &(v, _) in snapshot.in_edges(u) {
                if !inside[v] {
                    enter += 1;
                }
            }
        }
    }
    if snapshot.is_directed() {
        (enter, leave, enter + leave)
    } else {
        (leave, leave, leave)
    }
}

/// The context-free part of a state's features; the tracking-dependent
/// slots (alpha, beta, previous_event, ilhan_aging) are left at 0.
pub fn structural_features<T: Scalar>(
    state: &Community,
    snapshot: &MeasuredSnapshot<T>,
) -> Result<Vec<T>, FeatureError> {
    let graph = snapshot.graph();
    let locals = state
        .members
        .iter()
        .map(|&m| graph.local_index(m).ok_or(SnapshotError::UnknownNode(m)))
        .collect::<Result<Vec<_>, _>>()?;
    let group = snapshot.induced(&state.members)?;
    let sub = group.graph();
    let sub_locals: Vec<usize> = state
        .members
        .iter()
        .map(|&m| sub.local_index(m).expect("members are in their subgraph"))
        .collect();

    let mut out = vec![T::zero(); CATALOG_SIZE];
    let mut k = 0;
    for (table, idx) in [(group.nodes(), &sub_locals), (snapshot.nodes(), &locals)] {
        for measure in 0..NODE_MEASURES.len() {
            let values: Vec<T> = idx.iter().map(|&v| measure_column(table, measure, v)).collect();
            for value in aggregate(&values) {
                out[k] = value;
                k += 1;
            }
        }
    }
    debug_assert_eq!(k, MICRO_LEN);

    let size = state.size();
    let n = graph.node_count();
    let gsize = T::of_usize(size);
    let nn = T::of_usize(n);
    let gnet = group.network();
    let net = snapshot.network();
    let mut inside = vec![false; n];
    for &v in &locals {
        inside[v] = true;
    }
    let (enter, leave, all) = boundary(graph, &inside);
    let pair_factor = if graph.is_directed() { T::of(2.0) } else { T::one() };
    let outside_pairs = gsize * T::of_usize(n - size) * pair_factor;
    let external_density = ratio(T::of_usize(all), outside_pairs);
    let mean_ecc = |table: &NodeMeasureTable<T>, idx: &[usize]| {
        ratio(
            idx.iter().map(|&v| T::of_usize(table.eccentricity[v])).sum(),
            T::of_usize(idx.len()),
        )
    };
    let all_nodes: Vec<usize> = (0..n).collect();

    let mut set = |name: &str, value: T| out[slot(name)] = value;
    set("group_size", gsize);
    set("group_edges", T::of_usize(sub.edge_count()));
    set("group_density", gnet.density);
    set("group_coefficient_global", gnet.clustering);
    set("group_cohesion", ratio(gnet.density, external_density));
    set("network_ratio_size", ratio(gsize, nn));
    set(
        "network_ratio_edges",
        ratio(T::of_usize(sub.edge_count()), T::of_usize(graph.edge_count())),
    );
    set("network_ratio_density", ratio(gnet.density, net.density));
    set(
        "network_ratio_coefficient_global",
        ratio(gnet.clustering, net.clustering),
    );
    set(
        "network_ratio_eccentricity",
        ratio(
            mean_ecc(group.nodes(), &sub_locals),
            mean_ecc(snapshot.nodes(), &all_nodes),
        ),
    );
    set("neighborhood_in", T::of_usize(enter));
    set("neighborhood_out", T::of_usize(leave));
    set("neighborhood_all", T::of_usize(all));
    set("group_component_count", T::of_usize(gnet.component_count));
    set("group_diameter", T::of_usize(gnet.diameter));
    set("group_avg_path_length", gnet.avg_path_length);

    set("network_size", nn);
    set("network_edges", T::of_usize(graph.edge_count()));
    set("network_density", net.density);
    set("network_reciprocity", net.reciprocity);
    set("network_leadership", net.leadership);
    set("network_coefficient_global", net.clustering);
    set("network_component_count", T::of_usize(net.component_count));

    let member_pairs = gsize * (gsize - T::one()) / T::of(2.0);
    let sym_degree = |v: usize| graph.neighbors(v).len();
    let volume_in: usize = locals.iter().map(|&v| sym_degree(v)).sum();
    let volume_out: usize = (0..n).filter(|&v| !inside[v]).map(sym_degree).sum();
    let cut: usize = locals
        .iter()
        .map(|&v| graph.neighbors(v).iter().filter(|&&u| !inside[u]).count())
        .sum();
    let betweenness_norm = T::of_usize(n.saturating_sub(1) * n.saturating_sub(2)) / T::of(2.0);
    let mean_betweenness = ratio(
        locals.iter().map(|&v| snapshot.nodes().betweenness[v]).sum(),
        gsize,
    );
    let mean_degree = ratio(T::of_usize(locals.iter().map(|&v| sym_degree(v)).sum()), gsize);
    set("ilhan_nodes", gsize);
    set("ilhan_edges", T::of_usize(sub.edge_count()));
    set("ilhan_intra", ratio(T::of_usize(sub.edge_count()), member_pairs));
    set(
        "ilhan_inter",
        ratio(T::of_usize(all), gsize * T::of_usize(n - size)),
    );
    set("ilhan_betweenness", ratio(mean_betweenness, betweenness_norm));
    set(
        "ilhan_degree",
        ratio(mean_degree, T::of_usize(n.saturating_sub(1))),
    );
    set(
        "ilhan_conductance",
        ratio(T::of_usize(cut), T::of_usize(volume_in.min(volume_out))),
    );
    set(
        "ilhan_activeness",
        ratio(
            T::of_usize(locals.iter().filter(|&&v| sym_degree(v) > 0).count()),
            gsize,
        ),
    );
    Ok(out)
}

/// Fills the tracking-dependent slots of a state's feature vector.
pub fn apply_context<T: Scalar>(features: &mut [T], window: usize, ctx: &StateContext) {
    features[slot("alpha")] = T::of(ctx.alpha);
    features[slot("beta")] = T::of(ctx.beta);
    features[slot("previous_event")] = T::of(ctx.previous_event.map_or(0.0, |e: EventType| e.code() as f64));
    features[slot("ilhan_aging")] = T::of(ctx.age as f64 / (window + 1) as f64);
}

/// All 91 values of one chain state.
pub fn extract_state_features<T: Scalar>(
    state: &Community,
    snapshot: &MeasuredSnapshot<T>,
    ctx: &StateContext,
) -> Result<Vec<T>, FeatureError> {
    let mut values = structural_features(state, snapshot)?;
    apply_context(&mut values, state.window(), ctx);
    Ok(values)
}

/// Which catalog features, and which of the most recent states, become
/// dataset columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSubset {
    pub selected: Vec<bool>,
    /// Keep only the last `k` states of each chain.
    pub last_states: Option<usize>,
}

impl Default for FeatureSubset {
    fn default() -> Self {
        Self::all()
    }
}

impl FeatureSubset {
    pub fn all() -> Self {
        Self {
            selected: vec![true; CATALOG_SIZE],
            last_states: None,
        }
    }

    pub fn from_mask(selected: Vec<bool>) -> Result<Self, FeatureError> {
        if selected.len() != CATALOG_SIZE {
            return Err(FeatureError::BadMask(selected.len()));
        }
        Ok(Self {
            selected,
            last_states: None,
        })
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self, FeatureError> {
        let mut selected = vec![false; CATALOG_SIZE];
        for name in names {
            let idx = catalog()
                .index_of(name.as_ref())
                .ok_or_else(|| FeatureError::UnknownFeature(name.as_ref().to_owned()))?;
            selected[idx] = true;
        }
        Ok(Self {
            selected,
            last_states: None,
        })
    }

    pub fn with_last_states(mut self, k: usize) -> Self {
        self.last_states = Some(k);
        self
    }

    pub fn selected_count(&self) -> usize {
        self.selected.iter().filter(|&&s| s).count()
    }

    /// Column names for chains of `length` states, oldest state first.
    pub fn columns(&self, length: usize) -> Vec<String> {
        let kept = self.last_states.map_or(length, |k| k.min(length));
        let mut cols = Vec::with_capacity(kept * self.selected_count());
        for age in (1..=kept).rev() {
            for (f, on) in catalog().features.iter().zip(&self.selected) {
                if *on {
                    cols.push(format!("{}_T-{age}", f.name));
                }
            }
        }
        cols
    }
}

/// Stable identifier of a chain, used as the dataset row id.
pub fn chain_key(chain: &EvolutionChain) -> String {
    let states: Vec<String> = chain.states.iter().map(|s| s.to_string()).collect();
    format!("{}>{}", states.join(">"), chain.label)
}

/// Feature matrix over `chains`, which must all have `length` states.
/// `covers` and `snapshots` are indexed by window.
pub fn build_dataset<T: Scalar>(
    chains: &[EvolutionChain],
    length: usize,
    subset: &FeatureSubset,
    covers: &[CommunityCover],
    snapshots: &[MeasuredSnapshot<T>],
) -> Result<Dataset<T>, FeatureError> {
    if chains.is_empty() {
        return Err(FeatureError::EmptyChains);
    }
    if subset.selected.len() != CATALOG_SIZE {
        return Err(FeatureError::BadMask(subset.selected.len()));
    }
    if let Some(c) = chains.iter().find(|c| c.len() != length) {
        return Err(FeatureError::LengthMismatch {
            expected: length,
            found: c.len(),
        });
    }
    let kept = subset.last_states.map_or(length, |k| k.min(length));
    let states: BTreeSet<CommunityId> = chains
        .iter()
        .flat_map(|c| c.states[length - kept..].iter().copied())
        .collect();
    let lookup = |id: CommunityId| -> Result<(&Community, &MeasuredSnapshot<T>), FeatureError> {
        let cover = covers
            .get(id.window)
            .ok_or(FeatureError::MissingSnapshot(id.window))?;
        let community = cover
            .communities
            .get(id.ordinal)
            .filter(|c| c.id == id)
            .ok_or(FeatureError::MissingCommunity(id))?;
        let snapshot = snapshots
            .get(id.window)
            .ok_or(FeatureError::MissingSnapshot(id.window))?;
        Ok((community, snapshot))
    };
    let structural: HashMap<CommunityId, Vec<T>> = states
        .into_par_iter()
        .map(|id| {
            let (community, snapshot) = lookup(id)?;
            Ok((id, structural_features(community, snapshot)?))
        })
        .collect::<Result<_, FeatureError>>()?;

    let mut rows = Vec::with_capacity(chains.len());
    let mut labels = Vec::with_capacity(chains.len());
    let mut row_ids = Vec::with_capacity(chains.len());
    for chain in chains {
        let mut row = Vec::with_capacity(kept * subset.selected_count());
        for s in length - kept..length {
            let id = chain.states[s];
            let mut values = structural[&id].clone();
            apply_context(&mut values, id.window, &chain.contexts[s]);
            row.extend(
                values
                    .into_iter()
                    .zip(&subset.selected)
                    .filter(|(_, on)| **on)
                    .map(|(v, _)| v),
            );
        }
        rows.push(row);
        labels.push(chain.label.class_index().expect("chain labels are never forming"));
        row_ids.push(chain_key(chain));
    }
    let mut dataset = Dataset::new(subset.columns(length), rows, labels)?;
    dataset.row_ids = row_ids;
    Ok(dataset)
}

/// Writes the matrix with a header of column names plus `label`, preceded
/// by a `row_id` column when the dataset carries row ids.
pub fn write_features_csv<T: Scalar, W: Write>(data: &Dataset<T>, writer: W) -> Result<(), FeatureError> {
    let mut w = csv::Writer::from_writer(writer);
    let with_ids = !data.row_ids.is_empty() && data.row_ids.len() == data.rows.len();
    let mut header = Vec::with_capacity(data.columns.len() + 2);
    if with_ids {
        header.push(ROW_ID.to_owned());
    }
    header.extend(data.columns.iter().cloned());
    header.push("label".to_owned());
    w.write_record(&header)?;
    for (i, (row, &label)) in data.rows.iter().zip(&data.labels).enumerate() {
        let mut record: Vec<String> = Vec::with_capacity(header.len());
        if with_ids {
            record.push(data.row_ids[i].clone());
        }
        record.extend(row.iter().map(|v| v.to_string()));
        record.push(data.class_names[label].clone());
        w.write_record(&record)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

const ROW_ID: &str = "row_id";

pub fn read_features_csv<T: Scalar, R: Read>(reader: R) -> Result<Dataset<T>, FeatureError> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header.last().map(String::as_str) != Some("label") {
        return Err(FeatureError::Format("last column must be `label`".into()));
    }
    let with_ids = header.first().map(String::as_str) == Some(ROW_ID);
    let first = usize::from(with_ids);
    let columns = header[first..header.len() - 1].to_vec();
    let classes: Vec<String> = EventType::CLASSES.iter().map(|e| e.name().to_owned()).collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut row_ids = Vec::new();
    for (k, record) in r.records().enumerate() {
        let record = record?;
        if with_ids {
            row_ids.push(record.get(0).unwrap_or("").to_owned());
        }
        let mut row = Vec::with_capacity(columns.len());
        for field in record.iter().skip(first).take(columns.len()) {
            let v: f64 = field
                .parse()
                .map_err(|_| FeatureError::Format(format!("row {}: bad number {field:?}", k + 1)))?;
            row.push(T::of(v));
        }
        let label = record.get(first + columns.len()).unwrap_or("");
        let idx = classes
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| FeatureError::Format(format!("row {}: unknown label {label:?}", k + 1)))?;
        rows.push(row);
        labels.push(idx);
    }
    let mut data = Dataset::new(columns, rows, labels)?;
    data.row_ids = row_ids;
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::NodeId;
    use crate::snapshot::test_graphs::undirected;
    use crate::snapshot::SnapshotGraph;

    fn group(members: &[u32]) -> Community {
        Community::new(
            CommunityId::new(0, 0),
            members.iter().map(|&m| NodeId(m)).collect(),
            "test",
        )
    }

    fn value(values: &[f64], name: &str) -> f64 {
        values[catalog().index_of(name).unwrap()]
    }

    #[test]
    fn catalog_shape() {
        let c = catalog();
        assert_eq!(c.len(), 91);
        let names: BTreeSet<&str> = c.names().collect();
        assert_eq!(names.len(), 91);
        let f = &c.features[c.index_of("avg_group_eccentricity").unwrap()];
        assert_eq!(f.feature_type, FeatureType::MicroscopicLocal);
        let f = &c.features[c.index_of("network_ratio_coefficient_global").unwrap()];
        assert_eq!(f.feature_type, FeatureType::Mesoscopic);
        assert_eq!(c.features[0].name, "sum_group_degree_in");
        assert_eq!(c.features[55].name, "max_network_eccentricity");
        assert_eq!(c.features[90].name, "ilhan_activeness");
        let back: FeatureCatalog = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(&back, c);
    }

    #[test]
    fn triangle_in_six_nodes() {
        let g = undirected(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5)]);
        let snap = MeasuredSnapshot::<f64>::new(g);
        let v = extract_state_features(&group(&[0, 1, 2]), &snap, &StateContext::default()).unwrap();
        assert_eq!(value(&v, "group_density"), 1.0);
        assert_eq!(value(&v, "network_ratio_size"), 0.5);
        assert_eq!(value(&v, "avg_group_eccentricity"), 1.0);
        assert_eq!(value(&v, "neighborhood_all"), 0.0);
        assert_eq!(value(&v, "group_cohesion"), 0.0);
        assert_eq!(value(&v, "ilhan_intra"), 1.0);
        assert!(v.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn boundary_edge() {
        let g = undirected(3, &[(0, 1), (0, 2)]);
        let snap = MeasuredSnapshot::<f64>::new(g);
        let v = extract_state_features(&group(&[0, 1]), &snap, &StateContext::default()).unwrap();
        assert_eq!(value(&v, "neighborhood_all"), 1.0);
        assert_eq!(value(&v, "ilhan_inter"), 0.5);
        // cut 1, volumes 3 inside and 1 outside
        assert_eq!(value(&v, "ilhan_conductance"), 1.0);
    }

    #[test]
    fn context_slots() {
        let g = undirected(2, &[(0, 1)]);
        let snap = MeasuredSnapshot::<f64>::new(g);
        let ctx = StateContext {
            alpha: 100.0,
            beta: 100.0,
            previous_event: Some(EventType::Continuing),
            age: 0,
        };
        let v = extract_state_features(&group(&[0, 1]), &snap, &ctx).unwrap();
        assert_eq!((value(&v, "alpha"), value(&v, "beta")), (100.0, 100.0));
        assert_eq!(value(&v, "previous_event"), EventType::Continuing.code() as f64);
    }

    #[test]
    fn isolated_member_and_f32() {
        let g = SnapshotGraph::from_weighted_edges(0, false, &[(NodeId(0), NodeId(1), 1.0)], &[NodeId(2)]);
        let snap = MeasuredSnapshot::<f32>::new(g);
        let v = extract_state_features(&group(&[1, 2]), &snap, &StateContext::default()).unwrap();
        assert!(v.iter().all(|x| x.is_finite()));
        assert_eq!(v[catalog().index_of("group_diameter").unwrap()], 0.0);
        assert_eq!(v[catalog().index_of("ilhan_activeness").unwrap()], 0.5);
    }

    #[test]
    fn column_names() {
        let cols = FeatureSubset::all().columns(3);
        assert_eq!(cols.len(), 273);
        assert_eq!(cols[0], "sum_group_degree_in_T-3");
        assert_eq!(cols[272], "ilhan_activeness_T-1");
        let s = FeatureSubset::all().with_last_states(3);
        assert_eq!(s.columns(9).len(), 273);
        let ten: Vec<&str> = catalog().names().take(10).collect();
        assert_eq!(FeatureSubset::from_names(&ten).unwrap().columns(1).len(), 10);
        assert!(FeatureSubset::from_names(&["nope"]).is_err());
    }
}
