//! Evolution chains: runs of consecutive community states joined by tracked
//! events, labelled with the event that follows the last state.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::community::CommunityId;
use crate::tracking::{EventType, EvolutionEvent};

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("chain length must be at least 1")]
    InvalidLength,
    #[error("chains csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("chains csv row {row}: {reason}")]
    BadRow { row: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DedupMode {
    /// At most one chain per (last state, label).
    #[default]
    LastState,
    /// Only exact repeats are dropped.
    FullChain,
}

/// Tracking information attached to one state of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct StateContext {
    /// Forward inclusion of the event that led into this state.
    pub alpha: f64,
    /// Backward inclusion of the event that led into this state.
    pub beta: f64,
    pub previous_event: Option<EventType>,
    /// Number of predecessor states along the longest tracked history.
    pub age: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionChain {
    pub states: Vec<CommunityId>,
    /// `transitions[i]` links `states[i]` to `states[i + 1]`.
    pub transitions: Vec<EventType>,
    pub label: EventType,
    pub contexts: Vec<StateContext>,
}

impl EvolutionChain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last_state(&self) -> CommunityId {
        *self.states.last().expect("chains have at least one state")
    }

    pub fn first_window(&self) -> usize {
        self.states[0].window
    }
}

struct EventGraph<'a> {
    incoming: BTreeMap<CommunityId, Vec<&'a EvolutionEvent>>,
    outgoing_types: BTreeMap<CommunityId, BTreeSet<EventType>>,
    ages: HashMap<CommunityId, usize>,
}

impl<'a> EventGraph<'a> {
    fn new(events: &'a [EvolutionEvent]) -> Self {
        let mut incoming: BTreeMap<CommunityId, Vec<&EvolutionEvent>> = BTreeMap::new();
        let mut outgoing_types: BTreeMap<CommunityId, BTreeSet<EventType>> = BTreeMap::new();
        for e in events {
            if let Some(from) = e.from() {
                outgoing_types.entry(from).or_default().insert(e.event);
                if let Some(to) = e.to() {
                    incoming.entry(to).or_default().push(e);
                }
            }
        }
        for list in incoming.values_mut() {
            list.sort_by_key(|e| e.from());
            list.dedup_by_key(|e| e.from());
        }
        // every event moves one window forward, so ordering by window is topological
        let mut nodes: BTreeSet<CommunityId> = incoming.keys().copied().collect();
        nodes.extend(outgoing_types.keys().copied());
        let mut ordered: Vec<CommunityId> = nodes.into_iter().collect();
        ordered.sort();
        let mut ages: HashMap<CommunityId, usize> = HashMap::new();
        for c in ordered {
            let age = incoming.get(&c).map_or(0, |list| {
                list.iter()
                    .filter_map(|e| e.from())
                    .map(|p| ages.get(&p).copied().unwrap_or(0) + 1)
                    .max()
                    .unwrap_or(0)
            });
            ages.insert(c, age);
        }
        Self {
            incoming,
            outgoing_types,
            ages,
        }
    }

    fn age(&self, c: CommunityId) -> usize {
        self.ages.get(&c).copied().unwrap_or(0)
    }

    /// Context of a chain's first state: the strongest incoming event
    /// (highest forward inclusion, lowest source on ties).
    fn entry_context(&self, c: CommunityId) -> StateContext {
        let best = self.incoming.get(&c).and_then(|list| {
            list.iter().copied().reduce(|best, e| {
                if e.inclusion_fwd > best.inclusion_fwd {
                    e
                } else {
                    best
                }
            })
        });
        match best {
            Some(e) => StateContext {
                alpha: e.inclusion_fwd,
                beta: e.inclusion_bwd,
                previous_event: Some(e.event),
                age: self.age(c),
            },
            None => StateContext {
                age: self.age(c),
                ..StateContext::default()
            },
        }
    }

    /// All backward paths of `steps` events ending at `c`, as lists of
    /// events in forward order.
    fn paths_into(&self, c: CommunityId, steps: usize) -> Vec<Vec<&'a EvolutionEvent>> {
        if steps == 0 {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for &e in self.incoming.get(&c).map(Vec::as_slice).unwrap_or(&[]) {
            let from = e.from().expect("incoming events have a source");
            for mut path in self.paths_into(from, steps - 1) {
                path.push(e);
                out.push(path);
            }
        }
        out
    }
}

/// Every path of `length` consecutive states whose last state has at least
/// one outgoing event, once per distinct outgoing event type. Dissolving
/// counts as an outgoing event; forming never does.
pub fn build_chains(events: &[EvolutionEvent], length: usize) -> Result<Vec<EvolutionChain>, ChainError> {
    if length == 0 {
        return Err(ChainError::InvalidLength);
    }
    let graph = EventGraph::new(events);
    let mut chains = Vec::new();
    for (&last, types) in &graph.outgoing_types {
        for path in graph.paths_into(last, length - 1) {
            let mut states: Vec<CommunityId> = path
                .iter()
                .map(|e| e.from().expect("path events have a source"))
                .collect();
            states.push(last);
            let first = states[0];
            let mut contexts = vec![graph.entry_context(first)];
            for e in &path {
                let to = e.to().expect("path events have a target");
                contexts.push(StateContext {
                    alpha: e.inclusion_fwd,
                    beta: e.inclusion_bwd,
                    previous_event: Some(e.event),
                    age: graph.age(to),
                });
            }
            let transitions: Vec<EventType> = path.iter().map(|e| e.event).collect();
            for &label in types {
                chains.push(EvolutionChain {
                    states: states.clone(),
                    transitions: transitions.clone(),
                    label,
                    contexts: contexts.clone(),
                });
            }
        }
    }
    sort_chains(&mut chains);
    Ok(chains)
}

fn sort_chains(chains: &mut [EvolutionChain]) {
    chains.sort_by(|a, b| {
        (a.first_window(), &a.states, &a.transitions, a.label).cmp(&(
            b.first_window(),
            &b.states,
            &b.transitions,
            b.label,
        ))
    });
}

/// Drops duplicated chains. With [`DedupMode::LastState`], the earliest
/// chain (by first window, then state ids) is kept for each
/// (last state, label).
pub fn remove_duplicates(mut chains: Vec<EvolutionChain>, mode: DedupMode) -> Vec<EvolutionChain> {
    sort_chains(&mut chains);
    let mut seen_last = BTreeSet::new();
    let mut seen_full = BTreeSet::new();
    chains
        .into_iter()
        .filter(|c| match mode {
            DedupMode::LastState => seen_last.insert((c.last_state(), c.label)),
            DedupMode::FullChain => seen_full.insert((c.states.clone(), c.transitions.clone(), c.label)),
        })
        .collect()
}

/// Chains whose every state lies in `windows`.
pub fn restrict_span(chains: &[EvolutionChain], windows: RangeInclusive<usize>) -> Vec<EvolutionChain> {
    chains
        .iter()
        .filter(|c| c.states.iter().all(|s| windows.contains(&s.window)))
        .cloned()
        .collect()
}

/// Label counts in class order.
pub fn label_counts(chains: &[EvolutionChain]) -> BTreeMap<EventType, usize> {
    let mut counts = BTreeMap::new();
    for c in chains {
        *counts.entry(c.label).or_insert(0) += 1;
    }
    counts
}

#[derive(Debug, Serialize, Deserialize)]
struct ChainRow {
    states: String,
    transitions: String,
    label: String,
    alpha: String,
    beta: String,
    previous_event: String,
    age: String,
}

fn join<I: IntoIterator<Item = String>>(items: I) -> String {
    items.into_iter().collect::<Vec<_>>().join(";")
}

fn split(s: &str) -> Vec<&str> {
    if s.is_empty() {
        Vec::new()
    } else {
        s.split(';').collect()
    }
}

/// One row per chain; list-valued columns are `;`-separated and states are
/// written as `window:ordinal`.
pub fn write_chains_csv<W: Write>(chains: &[EvolutionChain], writer: W) -> Result<(), ChainError> {
    let mut w = csv::Writer::from_writer(writer);
    for c in chains {
        w.serialize(ChainRow {
            states: join(c.states.iter().map(|s| s.to_string())),
            transitions: join(c.transitions.iter().map(|e| e.name().to_owned())),
            label: c.label.name().to_owned(),
            alpha: join(c.contexts.iter().map(|x| x.alpha.to_string())),
            beta: join(c.contexts.iter().map(|x| x.beta.to_string())),
            previous_event: join(
                c.contexts
                    .iter()
                    .map(|x| x.previous_event.map_or("-", |e| e.name()).to_owned()),
            ),
            age: join(c.contexts.iter().map(|x| x.age.to_string())),
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_chains_csv<R: Read>(reader: R) -> Result<Vec<EvolutionChain>, ChainError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (k, row) in r.deserialize::<ChainRow>().enumerate() {
        let row = row?;
        let bad = |reason: String| ChainError::BadRow { row: k + 1, reason };
        let states = split(&row.states)
            .into_iter()
            .map(|s| s.parse::<CommunityId>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(bad)?;
        let transitions = split(&row.transitions)
            .into_iter()
            .map(|s| s.parse::<EventType>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(bad)?;
        let label: EventType = row.label.parse().map_err(bad)?;
        let floats = |s: &str| {
            split(s)
                .into_iter()
                .map(|x| x.parse::<f64>().map_err(|e| e.to_string()))
                .collect::<Result<Vec<_>, _>>()
        };
        let alpha = floats(&row.alpha).map_err(bad)?;
        let beta = floats(&row.beta).map_err(bad)?;
        let previous = split(&row.previous_event)
            .into_iter()
            .map(|s| if s == "-" { Ok(None) } else { s.parse().map(Some) })
            .collect::<Result<Vec<_>, _>>()
            .map_err(bad)?;
        let age = split(&row.age)
            .into_iter()
            .map(|x| x.parse::<usize>().map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(bad)?;
        let n = states.len();
        if n == 0
            || transitions.len() + 1 != n
            || [alpha.len(), beta.len(), previous.len(), age.len()] != [n; 4]
        {
            return Err(bad("column lengths disagree".into()));
        }
        let contexts = (0..n)
            .map(|i| StateContext {
                alpha: alpha[i],
                beta: beta[i],
                previous_event: previous[i],
                age: age[i],
            })
            .collect();
        out.push(EvolutionChain {
            states,
            transitions,
            label,
            contexts,
        });
    }
    Ok(out)
}


#[cfg(test)]
mod tests {
    use super::fixtures::split_merge_scenario;
    use super::*;

    fn id(w: usize, o: usize) -> CommunityId {
        CommunityId::new(w, o)
    }

    fn summary(chains: &[EvolutionChain]) -> Vec<(Vec<CommunityId>, Vec<EventType>, EventType)> {
        chains
            .iter()
            .map(|c| (c.states.clone(), c.transitions.clone(), c.label))
            .collect()
    }

    #[test]
    fn two_state_chains_of_the_split_merge_scenario() {
        use EventType::*;
        let chains = build_chains(&split_merge_scenario(), 2).unwrap();
        assert_eq!(
            summary(&chains),
            vec![
                (vec![id(0, 0), id(1, 0)], vec![Growing], Splitting),
                (vec![id(1, 0), id(2, 0)], vec![Splitting], Merging),
                (vec![id(1, 0), id(2, 1)], vec![Splitting], Merging),
                (vec![id(2, 0), id(3, 0)], vec![Merging], Shrinking),
                (vec![id(2, 1), id(3, 0)], vec![Merging], Shrinking),
            ]
        );
        let dedup = remove_duplicates(chains, DedupMode::LastState);
        assert_eq!(dedup.len(), 4);
        assert!(!dedup.iter().any(|c| c.states == vec![id(2, 1), id(3, 0)]));
    }

    #[test]
    fn single_state_chains() {
        use EventType::*;
        let chains = build_chains(&split_merge_scenario(), 1).unwrap();
        let got: Vec<_> = chains.iter().map(|c| (c.states[0], c.label)).collect();
        assert_eq!(
            got,
            vec![
                (id(0, 0), Growing),
                (id(1, 0), Splitting),
                (id(2, 0), Merging),
                (id(2, 1), Merging),
                (id(3, 0), Shrinking),
            ]
        );
        assert_eq!(remove_duplicates(chains.clone(), DedupMode::LastState), chains);
    }

    #[test]
    fn contexts_follow_incoming_events() {
        let chains = build_chains(&split_merge_scenario(), 2).unwrap();
        let last = chains.last().unwrap();
        // entry context of G_{2,3}: the split event that created it
        assert_eq!(last.contexts[0].alpha, 25.0);
        assert_eq!(last.contexts[0].previous_event, Some(EventType::Splitting));
        assert_eq!(last.contexts[0].age, 2);
        assert_eq!(last.contexts[1].beta, 35.0);
        assert_eq!(last.contexts[1].age, 3);
        let first = &chains[0];
        assert_eq!(first.contexts[0], StateContext::default());
    }

    #[test]
    fn no_label_no_chain() {
        let events = vec![EvolutionEvent {
            window_from: 0,
            group_from: Some(0),
            window_to: 1,
            group_to: Some(0),
            event: EventType::Continuing,
            inclusion_fwd: 100.0,
            inclusion_bwd: 100.0,
        }];
        let chains = build_chains(&events, 1).unwrap();
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].states, vec![id(0, 0)]);
        assert!(build_chains(&events, 2).unwrap().is_empty());
        assert!(matches!(build_chains(&events, 0), Err(ChainError::InvalidLength)));
    }

    #[test]
    fn dissolving_is_a_label_forming_is_not() {
        let events = vec![
            EvolutionEvent {
                window_from: 0,
                group_from: None,
                window_to: 1,
                group_to: Some(0),
                event: EventType::Forming,
                inclusion_fwd: 0.0,
                inclusion_bwd: 0.0,
            },
            EvolutionEvent {
                window_from: 1,
                group_from: Some(0),
                window_to: 2,
                group_to: None,
                event: EventType::Dissolving,
                inclusion_fwd: 0.0,
                inclusion_bwd: 0.0,
            },
        ];
        let chains = build_chains(&events, 1).unwrap();
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].label, EventType::Dissolving);
        assert_eq!(chains[0].contexts[0].age, 0);
    }

    #[test]
    fn duplicates_and_spans() {
        let chains = build_chains(&split_merge_scenario(), 1).unwrap();
        let doubled: Vec<_> = chains.iter().chain(chains.iter()).cloned().collect();
        assert_eq!(remove_duplicates(doubled.clone(), DedupMode::FullChain), chains);
        assert_eq!(remove_duplicates(doubled, DedupMode::LastState), chains);
        assert_eq!(restrict_span(&chains, 0..=10), chains);
        assert_eq!(restrict_span(&chains, 0..=1).len(), 2);
        assert!(restrict_span(&chains, 20..=30).is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let chains = build_chains(&split_merge_scenario(), 3).unwrap();
        assert!(!chains.is_empty());
        let mut buf = Vec::new();
        write_chains_csv(&chains, &mut buf).unwrap();
        assert_eq!(read_chains_csv(&buf[..]).unwrap(), chains);
    }
}
