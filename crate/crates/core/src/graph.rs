//! Temporal graph model: timestamped directed interaction events.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;
use core::num::NonZeroU32;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = u64;

/// Kind of interaction a source performs on the target's content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Like,
    Comment,
    Share,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Like, Action::Comment, Action::Share];

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Like => "like",
            Action::Comment => "comment",
            Action::Share => "share",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Action {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "like" => Ok(Action::Like),
            "comment" => Ok(Action::Comment),
            "share" => Ok(Action::Share),
            _ => Err(()),
        }
    }
}

/// One timestamped action: `source` acted on content owned by `target`.
///
/// Field order defines the canonical event order: timestamp first, ties broken
/// by `(source, target, action)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub timestamp: i64,
    pub source: NodeId,
    pub target: NodeId,
    pub action: Action,
}

impl InteractionEvent {
    pub fn new(source: NodeId, target: NodeId, timestamp: i64, action: Action) -> Self {
        Self {
            timestamp,
            source,
            target,
            action,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("event {0} is a self-interaction")]
    SelfLoop(usize),
    #[error("event {0} has a negative timestamp")]
    NegativeTimestamp(usize),
    #[error("no events and no node universe given")]
    Empty,
}

/// Immutable temporal graph: node set plus the canonically sorted event list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalGraph {
    nodes: Vec<NodeId>,
    events: Vec<InteractionEvent>,
    node_state_count: Option<NonZeroU32>,
}

impl TemporalGraph {
    /// Sorted, deduplicated node ids.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn events(&self) -> &[InteractionEvent] {
        &self.events
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.nodes.binary_search(&node).is_ok()
    }

    /// Number of per-node states. Carried through, never interpreted.
    pub fn node_state_count(&self) -> Option<NonZeroU32> {
        self.node_state_count
    }

    pub fn with_node_state_count(mut self, k: Option<NonZeroU32>) -> Self {
        self.node_state_count = k;
        self
    }

    /// `(first, last)` timestamps, or `None` for an event-free graph.
    pub fn time_range(&self) -> Option<(i64, i64)> {
        Some((self.events.first()?.timestamp, self.events.last()?.timestamp))
    }

    /// Restricts the graph to `keep` (sorted) and every event with both
    /// endpoints inside it.
    pub fn induced(&self, keep: &[NodeId]) -> TemporalGraph {
        debug_assert!(keep.windows(2).all(|w| w[0] < w[1]));
        let inside = |n: NodeId| keep.binary_search(&n).is_ok();
        TemporalGraph {
            nodes: keep.to_vec(),
            events: self
                .events
                .iter()
                .filter(|e| inside(e.source) && inside(e.target))
                .copied()
                .collect(),
            node_state_count: self.node_state_count,
        }
    }

    /// Checks the structural invariants: endpoints are members and events are
    /// in canonical order.
    pub fn is_well_formed(&self) -> bool {
        self.events.windows(2).all(|w| w[0] <= w[1])
            && self.nodes.windows(2).all(|w| w[0] < w[1])
            && self
                .events
                .iter()
                .all(|e| self.contains(e.source) && self.contains(e.target) && e.source != e.target)
    }
}

/// Validates and sorts `events` into a graph whose node set is the union of all
/// endpoints and `node_universe`.
pub fn build_graph(
    events: Vec<InteractionEvent>,
    node_universe: Option<&[NodeId]>,
) -> Result<TemporalGraph, GraphError> {
    if events.is_empty() && node_universe.is_none() {
        return Err(GraphError::Empty);
    }
    let mut nodes: BTreeSet<NodeId> = node_universe.unwrap_or(&[]).iter().copied().collect();
    for (i, e) in events.iter().enumerate() {
        if e.source == e.target {
            return Err(GraphError::SelfLoop(i));
        }
        if e.timestamp < 0 {
            return Err(GraphError::NegativeTimestamp(i));
        }
        nodes.insert(e.source);
        nodes.insert(e.target);
    }
    let mut events = events;
    events.sort_unstable();
    Ok(TemporalGraph {
        nodes: nodes.into_iter().collect(),
        events,
        node_state_count: None,
    })
}
