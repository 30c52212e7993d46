//! Matching communities across consecutive windows and typing the events
//! between them.
//!
//! Two groups are compared through the inclusion measure, which weighs the
//! share of overlapping members by their importance inside the source group.
//! Event types come from a decision table over forward/backward inclusion
//! and group sizes.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::community::{Community, CommunityCover, CommunityId};
use crate::ingest::NodeId;
use crate::snapshot::{node_measures, SnapshotError, SnapshotGraph};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum TrackingError {
    #[error("community {0} is empty")]
    EmptyCommunity(CommunityId),
    #[error("windows {0} and {1} are not consecutive")]
    NotConsecutive(usize, usize),
    #[error("alpha and beta must lie in (0, 100], got alpha={alpha}, beta={beta}")]
    InvalidThreshold { alpha: f64, beta: f64 },
    #[error("no snapshot for window {0}")]
    MissingSnapshot(usize),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("events csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("events csv row {row}: {reason}")]
    BadRow { row: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventType {
    Forming,
    Dissolving,
    Continuing,
    Shrinking,
    Growing,
    Splitting,
    Merging,
}

impl EventType {
    pub const ALL: [EventType; 7] = [
        EventType::Forming,
        EventType::Dissolving,
        EventType::Continuing,
        EventType::Shrinking,
        EventType::Growing,
        EventType::Splitting,
        EventType::Merging,
    ];

    /// Column order of the event histogram.
    pub const HISTOGRAM_ORDER: [EventType; 7] = [
        EventType::Forming,
        EventType::Dissolving,
        EventType::Shrinking,
        EventType::Growing,
        EventType::Continuing,
        EventType::Splitting,
        EventType::Merging,
    ];

    /// The six events that can follow an existing state, in class order.
    pub const CLASSES: [EventType; 6] = [
        EventType::Continuing,
        EventType::Dissolving,
        EventType::Growing,
        EventType::Merging,
        EventType::Shrinking,
        EventType::Splitting,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventType::Forming => "forming",
            EventType::Dissolving => "dissolving",
            EventType::Continuing => "continuing",
            EventType::Shrinking => "shrinking",
            EventType::Growing => "growing",
            EventType::Splitting => "splitting",
            EventType::Merging => "merging",
        }
    }

    /// Numeric code used as a feature; 0 is reserved for "unknown".
    pub fn code(self) -> u8 {
        self as u8 + 1
    }

    /// Index into [`EventType::CLASSES`]; `None` for forming.
    pub fn class_index(self) -> Option<usize> {
        Self::CLASSES.iter().position(|&e| e == self)
    }
}

impl std::fmt::Display for EventType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EventType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|e| e.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown event type {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ImportanceMeasure {
    Uniform,
    #[default]
    DegreeInGroup,
    BetweennessInGroup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingConfig {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub importance: ImportanceMeasure,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self {
            alpha: 50.0,
            beta: 50.0,
            importance: ImportanceMeasure::DegreeInGroup,
        }
    }
}

impl TrackingConfig {
    pub fn new(alpha: f64, beta: f64, importance: ImportanceMeasure) -> Self {
        Self {
            alpha,
            beta,
            importance,
        }
    }

    pub fn validate(&self) -> Result<(), TrackingError> {
        let ok = |x: f64| x > 0.0 && x <= 100.0;
        if ok(self.alpha) && ok(self.beta) {
            Ok(())
        } else {
            Err(TrackingError::InvalidThreshold {
                alpha: self.alpha,
                beta: self.beta,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionEvent {
    pub window_from: usize,
    /// Absent for forming.
    pub group_from: Option<usize>,
    pub window_to: usize,
    /// Absent for dissolving.
    pub group_to: Option<usize>,
    pub event: EventType,
    pub inclusion_fwd: f64,
    pub inclusion_bwd: f64,
}

impl EvolutionEvent {
    pub fn from(&self) -> Option<CommunityId> {
        self.group_from.map(|g| CommunityId::new(self.window_from, g))
    }

    pub fn to(&self) -> Option<CommunityId> {
        self.group_to.map(|g| CommunityId::new(self.window_to, g))
    }
}

/// Importance of each member (in member order) within the group's induced
/// subgraph.
pub fn member_importance<T: Scalar>(
    group: &Community,
    snapshot: &SnapshotGraph,
    measure: ImportanceMeasure,
) -> Result<Vec<T>, TrackingError> {
    if group.members.is_empty() {
        return Err(TrackingError::EmptyCommunity(group.id));
    }
    match measure {
        ImportanceMeasure::Uniform => Ok(vec![T::one(); group.size()]),
        ImportanceMeasure::DegreeInGroup | ImportanceMeasure::BetweennessInGroup => {
            let sub = snapshot.induced_subgraph(&group.members)?;
            if measure == ImportanceMeasure::DegreeInGroup {
                Ok(group
                    .members
                    .iter()
                    .map(|&m| {
                        let v = sub.local_index(m).expect("member is in its induced subgraph");
                        let deg = if sub.is_directed() {
                            sub.out_edges(v).len() + sub.in_edges(v).len()
                        } else {
                            sub.out_edges(v).len()
                        };
                        T::of_usize(deg)
                    })
                    .collect())
            } else {
                let table = node_measures::<T>(&sub);
                Ok(group
                    .members
                    .iter()
                    .map(|&m| {
                        table.betweenness[sub.local_index(m).expect("member is in its induced subgraph")]
                    })
                    .collect())
            }
        }
    }
}

/// Inclusion given precomputed member importance of `g1`, in percent.
pub fn inclusion_weighted<T: Scalar>(g1: &Community, importance: &[T], g2: &Community) -> T {
    let mut shared = 0usize;
    let mut shared_weight = T::zero();
    let mut total_weight = T::zero();
    for (m, &w) in g1.members.iter().zip(importance) {
        total_weight += w;
        if g2.contains(*m) {
            shared += 1;
            shared_weight += w;
        }
    }
    let quantity = T::of_usize(shared) / T::of_usize(g1.size());
    let quality = if total_weight > T::zero() {
        shared_weight / total_weight
    } else {
        quantity
    };
    T::of(100.0) * quantity * quality
}

/// I(G1, G2) in percent, with importance measured on G1's induced subgraph
/// of `snapshot_of_g1`.
pub fn inclusion<T: Scalar>(
    g1: &Community,
    g2: &Community,
    snapshot_of_g1: &SnapshotGraph,
    measure: ImportanceMeasure,
) -> Result<T, TrackingError> {
    if g2.members.is_empty() {
        return Err(TrackingError::EmptyCommunity(g2.id));
    }
    let importance = member_importance::<T>(g1, snapshot_of_g1, measure)?;
    Ok(inclusion_weighted(g1, &importance, g2))
}

struct Pair {
    i: usize,
    j: usize,
    fwd: f64,
    bwd: f64,
}

/// Events between two consecutive windows.
///
/// Groups without any shared member across the pair are dissolving (earlier
/// window) or forming (later window). Every overlapping pair is then typed;
/// splitting and merging are checked before the single-match branches of
/// shrinking and growing.
pub fn match_windows(
    earlier: &CommunityCover,
    later: &CommunityCover,
    snapshot_earlier: &SnapshotGraph,
    snapshot_later: &SnapshotGraph,
    cfg: &TrackingConfig,
) -> Result<Vec<EvolutionEvent>, TrackingError> {
    cfg.validate()?;
    if later.window != earlier.window + 1 {
        return Err(TrackingError::NotConsecutive(earlier.window, later.window));
    }
    let (wi, wj) = (earlier.window, later.window);
    let mut events = Vec::new();

    let owners = |cover: &CommunityCover| {
        let mut map: HashMap<NodeId, Vec<usize>> = HashMap::new();
        for (idx, c) in cover.communities.iter().enumerate() {
            for &m in &c.members {
                map.entry(m).or_default().push(idx);
            }
        }
        map
    };
    let later_owners = owners(later);
    let mut overlapping: BTreeMap<(usize, usize), ()> = BTreeMap::new();
    for (i, c) in earlier.communities.iter().enumerate() {
        for m in &c.members {
            if let Some(js) = later_owners.get(m) {
                for &j in js {
                    overlapping.insert((i, j), ());
                }
            }
        }
    }

    let importance_earlier = earlier
        .communities
        .iter()
        .map(|c| member_importance::<f64>(c, snapshot_earlier, cfg.importance))
        .collect::<Result<Vec<_>, _>>()?;
    let importance_later = later
        .communities
        .iter()
        .map(|c| member_importance::<f64>(c, snapshot_later, cfg.importance))
        .collect::<Result<Vec<_>, _>>()?;

    let mut has_successor = vec![false; earlier.communities.len()];
    let mut has_predecessor = vec![false; later.communities.len()];
    let mut pairs = Vec::new();
    for &(i, j) in overlapping.keys() {
        has_successor[i] = true;
        has_predecessor[j] = true;
        let (g1, g2) = (&earlier.communities[i], &later.communities[j]);
        pairs.push(Pair {
            i,
            j,
            fwd: inclusion_weighted(g1, &importance_earlier[i], g2),
            bwd: inclusion_weighted(g2, &importance_later[j], g1),
        });
    }

    for (i, c) in earlier.communities.iter().enumerate() {
        if !has_successor[i] {
            events.push(EvolutionEvent {
                window_from: wi,
                group_from: Some(c.id.ordinal),
                window_to: wj,
                group_to: None,
                event: EventType::Dissolving,
                inclusion_fwd: 0.0,
                inclusion_bwd: 0.0,
            });
        }
    }
    for (j, c) in later.communities.iter().enumerate() {
        if !has_predecessor[j] {
            events.push(EvolutionEvent {
                window_from: wi,
                group_from: None,
                window_to: wj,
                group_to: Some(c.id.ordinal),
                event: EventType::Forming,
                inclusion_fwd: 0.0,
                inclusion_bwd: 0.0,
            });
        }
    }

    let qualifies = |p: &Pair| p.fwd >= cfg.alpha || p.bwd >= cfg.beta;
    let mut successors = vec![0usize; earlier.communities.len()];
    let mut predecessors = vec![0usize; later.communities.len()];
    for p in pairs.iter().filter(|p| qualifies(p)) {
        successors[p.i] += 1;
        predecessors[p.j] += 1;
    }

    for p in &pairs {
        let (s1, s2) = (earlier.communities[p.i].size(), later.communities[p.j].size());
        let f_ok = p.fwd >= cfg.alpha;
        let b_ok = p.bwd >= cfg.beta;
        let event = if f_ok && b_ok {
            Some(match s1.cmp(&s2) {
                std::cmp::Ordering::Equal => EventType::Continuing,
                std::cmp::Ordering::Greater => EventType::Shrinking,
                std::cmp::Ordering::Less => EventType::Growing,
            })
        } else if !f_ok && b_ok && s1 >= s2 {
            if successors[p.i] > 1 {
                Some(EventType::Splitting)
            } else if predecessors[p.j] == 1 {
                Some(EventType::Shrinking)
            } else {
                None
            }
        } else if f_ok && !b_ok && s1 <= s2 {
            if predecessors[p.j] > 1 {
                Some(EventType::Merging)
            } else if successors[p.i] == 1 {
                Some(EventType::Growing)
            } else {
                None
            }
        } else {
            None
        };
        if let Some(event) = event {
            events.push(EvolutionEvent {
                window_from: wi,
                group_from: Some(earlier.communities[p.i].id.ordinal),
                window_to: wj,
                group_to: Some(later.communities[p.j].id.ordinal),
                event,
                inclusion_fwd: p.fwd,
                inclusion_bwd: p.bwd,
            });
        }
    }
    events.sort_by_key(|e| (e.group_from, e.group_to, e.event));
    Ok(events)
}

/// Tracks every consecutive pair of covers; `snapshots[k]` must belong to
/// `covers[k]`. Pairs run in parallel; output is ordered by window.
pub fn track(
    covers: &[CommunityCover],
    snapshots: &[SnapshotGraph],
    cfg: &TrackingConfig,
) -> Result<Vec<EvolutionEvent>, TrackingError> {
    cfg.validate()?;
    if snapshots.len() < covers.len() {
        return Err(TrackingError::MissingSnapshot(snapshots.len()));
    }
    let per_pair = (1..covers.len())
        .into_par_iter()
        .map(|k| match_windows(&covers[k - 1], &covers[k], &snapshots[k - 1], &snapshots[k], cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(per_pair.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EventHistogram {
    pub forming: usize,
    pub dissolving: usize,
    pub shrinking: usize,
    pub growing: usize,
    pub continuing: usize,
    pub splitting: usize,
    pub merging: usize,
    pub total: usize,
}

impl EventHistogram {
    pub fn count(&self, event: EventType) -> usize {
        match event {
            EventType::Forming => self.forming,
            EventType::Dissolving => self.dissolving,
            EventType::Shrinking => self.shrinking,
            EventType::Growing => self.growing,
            EventType::Continuing => self.continuing,
            EventType::Splitting => self.splitting,
            EventType::Merging => self.merging,
        }
    }

    /// Counts in histogram column order followed by the total.
    pub fn row(&self) -> [usize; 8] {
        let mut row = [0; 8];
        for (k, e) in EventType::HISTOGRAM_ORDER.iter().enumerate() {
            row[k] = self.count(*e);
        }
        row[7] = self.total;
        row
    }

    pub const HEADER: &'static str =
        "forming,dissolving,shrinking,growing,continuing,splitting,merging,total";

    pub fn csv_line(&self) -> String {
        self.row().map(|c| c.to_string()).join(",")
    }
}

pub fn event_histogram(events: &[EvolutionEvent]) -> EventHistogram {
    let mut h = EventHistogram::default();
    for e in events {
        let slot = match e.event {
            EventType::Forming => &mut h.forming,
            EventType::Dissolving => &mut h.dissolving,
            EventType::Shrinking => &mut h.shrinking,
            EventType::Growing => &mut h.growing,
            EventType::Continuing => &mut h.continuing,
            EventType::Splitting => &mut h.splitting,
            EventType::Merging => &mut h.merging,
        };
        *slot += 1;
        h.total += 1;
    }
    h
}

#[derive(Debug, Serialize, Deserialize)]
struct EventRow {
    window_from: usize,
    group_from: Option<usize>,
    window_to: usize,
    group_to: Option<usize>,
    event: String,
    inclusion_fwd: f64,
    inclusion_bwd: f64,
}

pub fn write_events_csv<W: Write>(events: &[EvolutionEvent], writer: W) -> Result<(), TrackingError> {
    let mut w = csv::Writer::from_writer(writer);
    for e in events {
        w.serialize(EventRow {
            window_from: e.window_from,
            group_from: e.group_from,
            window_to: e.window_to,
            group_to: e.group_to,
            event: e.event.name().to_owned(),
            inclusion_fwd: e.inclusion_fwd,
            inclusion_bwd: e.inclusion_bwd,
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_events_csv<R: Read>(reader: R) -> Result<Vec<EvolutionEvent>, TrackingError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (k, row) in r.deserialize::<EventRow>().enumerate() {
        let row = row?;
        let event: EventType = row
            .event
            .parse()
            .map_err(|reason| TrackingError::BadRow { row: k + 1, reason })?;
        out.push(EvolutionEvent {
            window_from: row.window_from,
            group_from: row.group_from,
            window_to: row.window_to,
            group_to: row.group_to,
            event,
            inclusion_fwd: row.inclusion_fwd,
            inclusion_bwd: row.inclusion_bwd,
        });
    }
    Ok(out)
}
