//! Binned representation of a temporal graph: a sequence of sparse directed
//! multigraphs, one per fixed-width time bin.
//!
//! Nodes are addressed by their dense index into [`SnapshotSequence::node_ids`]
//! (the sorted node ids of the source graph).

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NodeId, TemporalGraph};

/// Fifteen minutes.
pub const DEFAULT_BIN_WIDTH: u64 = 900;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SnapshotError {
    #[error("bin width must be positive")]
    InvalidBinWidth,
    #[error("graph has no events and no explicit time span was given")]
    EmptyGraph,
    #[error("bin {bin} out of range (sequence has {num_bins} bins)")]
    BinOutOfRange { bin: usize, num_bins: usize },
    #[error("unknown node index {0}")]
    UnknownNode(usize),
    #[error("event {0} lies outside the requested time span")]
    EventOutsideSpan(usize),
    #[error("invalid time span {start}..={end}")]
    InvalidSpan { start: i64, end: i64 },
}

/// Inclusive range of timestamps (seconds) to cover with bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSpan {
    pub start: i64,
    pub end: i64,
}

impl TimeSpan {
    pub fn new(start: i64, end: i64) -> Self {
        Self { start, end }
    }
}

/// Interaction count of one directed node pair inside one bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeCount {
    pub source: u32,
    pub target: u32,
    pub count: u32,
}

/// One bin. Edges are kept twice: sorted by `(source, target)` for outgoing
/// lookups and by `(target, source)` for incoming lookups.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Bin {
    out_sorted: Vec<EdgeCount>,
    in_sorted: Vec<EdgeCount>,
}

impl Bin {
    fn from_edges(mut edges: Vec<EdgeCount>) -> Self {
        edges.sort_unstable_by_key(|e| (e.source, e.target));
        let mut merged: Vec<EdgeCount> = Vec::with_capacity(edges.len());
        for e in edges {
            if e.count == 0 {
                continue;
            }
            match merged.last_mut() {
                Some(last) if last.source == e.source && last.target == e.target => {
                    last.count += e.count
                }
                _ => merged.push(e),
            }
        }
        let mut in_sorted = merged.clone();
        in_sorted.sort_unstable_by_key(|e| (e.target, e.source));
        Bin {
            out_sorted: merged,
            in_sorted,
        }
    }

    /// All edges, sorted by `(source, target)`.
    pub fn edges(&self) -> &[EdgeCount] {
        &self.out_sorted
    }

    pub fn outgoing(&self, v: u32) -> &[EdgeCount] {
        let lo = self.out_sorted.partition_point(|e| e.source < v);
        let hi = self.out_sorted.partition_point(|e| e.source <= v);
        &self.out_sorted[lo..hi]
    }

    pub fn incoming(&self, v: u32) -> &[EdgeCount] {
        let lo = self.in_sorted.partition_point(|e| e.target < v);
        let hi = self.in_sorted.partition_point(|e| e.target <= v);
        &self.in_sorted[lo..hi]
    }

    pub fn total_count(&self) -> u64 {
        self.out_sorted.iter().map(|e| u64::from(e.count)).sum()
    }

    pub fn count(&self, source: u32, target: u32) -> u32 {
        self.out_sorted
            .binary_search_by_key(&(source, target), |e| (e.source, e.target))
            .map(|i| self.out_sorted[i].count)
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotSequence {
    bin_width: u64,
    origin_bin: i64,
    node_ids: Vec<NodeId>,
    bins: Vec<Bin>,
}

/// Per-node incoming distinct-neighbor counts over time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeSeries {
    pub node: usize,
    pub values: Vec<u32>,
}

/// Dense `N_t(v)` table, node-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeTable {
    node_count: usize,
    num_bins: usize,
    values: Vec<u32>,
}

impl DegreeTable {
    pub fn get(&self, v: usize, t: usize) -> u32 {
        self.values[v * self.num_bins + t]
    }

    pub fn series(&self, v: usize) -> &[u32] {
        &self.values[v * self.num_bins..(v + 1) * self.num_bins]
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }
}

fn floor_div(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

/// Bins all events of `graph`; the first bin holds the earliest event.
pub fn bin_events(graph: &TemporalGraph, bin_width: u64) -> Result<SnapshotSequence, SnapshotError> {
    bin_events_in_span(graph, bin_width, None)
}

/// Bins `graph` over an explicit span (or the graph's own span when `None`).
///
/// Bin indices are `floor(ts / width) - floor(start / width)`, so all
/// instances cut from one graph over the same span share bin numbering.
pub fn bin_events_in_span(
    graph: &TemporalGraph,
    bin_width: u64,
    span: Option<TimeSpan>,
) -> Result<SnapshotSequence, SnapshotError> {
    if bin_width == 0 || bin_width > i64::MAX as u64 {
        return Err(SnapshotError::InvalidBinWidth);
    }
    let width = bin_width as i64;
    let span = match span {
        Some(s) if s.end < s.start => {
            return Err(SnapshotError::InvalidSpan {
                start: s.start,
                end: s.end,
            })
        }
        Some(s) => s,
        None => {
            let (start, end) = graph.time_range().ok_or(SnapshotError::EmptyGraph)?;
            TimeSpan { start, end }
        }
    };
    let origin_bin = floor_div(span.start, width);
    let num_bins = (floor_div(span.end, width) - origin_bin + 1) as usize;

    let node_ids = graph.nodes().to_vec();
    let index = |id: NodeId| node_ids.binary_search(&id).expect("endpoint is a member") as u32;
    let mut per_bin: Vec<Vec<EdgeCount>> = (0..num_bins).map(|_| Vec::new()).collect();
    for (i, e) in graph.events().iter().enumerate() {
        if e.timestamp < span.start || e.timestamp > span.end {
            return Err(SnapshotError::EventOutsideSpan(i));
        }
        let b = (floor_div(e.timestamp, width) - origin_bin) as usize;
        per_bin[b].push(EdgeCount {
            source: index(e.source),
            target: index(e.target),
            count: 1,
        });
    }
    Ok(SnapshotSequence::from_bins(bin_width, origin_bin, node_ids, per_bin))
}

impl SnapshotSequence {
    /// Assembles a sequence from raw per-bin edge lists; duplicate pairs
    /// accumulate and zero counts are dropped.
    pub fn from_bins(
        bin_width: u64,
        origin_bin: i64,
        node_ids: Vec<NodeId>,
        bins: Vec<Vec<EdgeCount>>,
    ) -> Self {
        debug_assert!(bins
            .iter()
            .flatten()
            .all(|e| (e.source as usize) < node_ids.len() && (e.target as usize) < node_ids.len()));
        SnapshotSequence {
            bin_width,
            origin_bin,
            node_ids,
            bins: bins.into_iter().map(Bin::from_edges).collect(),
        }
    }

    pub fn bin_width(&self) -> u64 {
        self.bin_width
    }

    /// Absolute index (`floor(ts / width)`) of bin 0.
    pub fn origin_bin(&self) -> i64 {
        self.origin_bin
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn node_ids(&self) -> &[NodeId] {
        &self.node_ids
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.node_ids.binary_search(&id).ok()
    }

    pub fn bin(&self, t: usize) -> &Bin {
        &self.bins[t]
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    fn check_bin(&self, t: usize) -> Result<(), SnapshotError> {
        if t < self.bins.len() {
            Ok(())
        } else {
            Err(SnapshotError::BinOutOfRange {
                bin: t,
                num_bins: self.bins.len(),
            })
        }
    }

    fn check_node(&self, v: usize) -> Result<(), SnapshotError> {
        if v < self.node_ids.len() {
            Ok(())
        } else {
            Err(SnapshotError::UnknownNode(v))
        }
    }

    /// Sum of all interaction counts over all bins.
    pub fn total_count(&self) -> u64 {
        self.bins.iter().map(Bin::total_count).sum()
    }

    /// `C_t(v)`: distinct nodes with at least one interaction into `v` in bin `t`.
    pub fn neighbor_set(&self, v: usize, t: usize) -> Result<Vec<usize>, SnapshotError> {
        self.check_bin(t)?;
        self.check_node(v)?;
        Ok(self.bins[t]
            .incoming(v as u32)
            .iter()
            .map(|e| e.source as usize)
            .collect())
    }

    /// `N_t(v)` for every bin.
    pub fn degree_series(&self, v: usize) -> Result<DegreeSeries, SnapshotError> {
        self.check_node(v)?;
        let values = self
            .bins
            .iter()
            .map(|b| b.incoming(v as u32).len() as u32)
            .collect();
        Ok(DegreeSeries { node: v, values })
    }

    /// `N_t(v)` for all nodes and bins at once.
    pub fn degree_table(&self) -> DegreeTable {
        let n = self.node_count();
        let t_len = self.num_bins();
        let mut values = alloc::vec![0u32; n * t_len];
        for (t, bin) in self.bins.iter().enumerate() {
            for e in bin.edges() {
                values[e.target as usize * t_len + t] += 1;
            }
        }
        DegreeTable {
            node_count: n,
            num_bins: t_len,
            values,
        }
    }

    /// Per-bin edge lists, cloned, for building perturbed copies.
    pub fn edge_lists(&self) -> Vec<Vec<EdgeCount>> {
        self.bins.iter().map(|b| b.edges().to_vec()).collect()
    }

    /// A copy with bins `>= keep` emptied (the node set and length stay).
    pub fn with_bins_cleared_from(&self, keep: usize) -> Self {
        let mut out = self.clone();
        for b in out.bins.iter_mut().skip(keep) {
            *b = Bin::default();
        }
        out
    }

    /// FNV-1a digest over the full content; equal sequences hash equal.
    pub fn content_hash(&self) -> u64 {
        let mut h = Fnv64::new();
        h.write_u64(self.bin_width);
        h.write_u64(self.origin_bin as u64);
        h.write_u64(self.node_ids.len() as u64);
        for &id in &self.node_ids {
            h.write_u64(id);
        }
        h.write_u64(self.bins.len() as u64);
        for b in &self.bins {
            h.write_u64(b.edges().len() as u64);
            for e in b.edges() {
                h.write_u64(u64::from(e.source) << 32 | u64::from(e.target));
                h.write_u64(u64::from(e.count));
            }
        }
        h.finish()
    }
}

pub(crate) struct Fnv64(u64);

impl Fnv64 {
    pub(crate) fn new() -> Self {
        Fnv64(0xcbf2_9ce4_8422_2325)
    }

    pub(crate) fn write_u64(&mut self, x: u64) {
        for byte in x.to_le_bytes() {
            self.0 ^= u64::from(byte);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, Action, InteractionEvent};
    use alloc::vec;

    fn ev(s: u64, t: u64, ts: i64) -> InteractionEvent {
        InteractionEvent::new(s, t, ts, Action::Like)
    }

    #[test]
    fn bin_boundaries() {
        let g = build_graph(vec![ev(0, 1, 0), ev(0, 1, 899)], None).unwrap();
        let s = bin_events(&g, 900).unwrap();
        assert_eq!(s.num_bins(), 1);
        assert_eq!(s.bin(0).count(0, 1), 2);

        let g = build_graph(vec![ev(0, 1, 0), ev(0, 1, 900)], None).unwrap();
        let s = bin_events(&g, 900).unwrap();
        assert_eq!(s.num_bins(), 2);
        assert_eq!(s.bin(0).count(0, 1), 1);
        assert_eq!(s.bin(1).count(0, 1), 1);
    }

    #[test]
    fn origin_anchored_at_first_event() {
        let g = build_graph(vec![ev(0, 1, 1800 + 5), ev(1, 0, 2700)], None).unwrap();
        let s = bin_events(&g, 900).unwrap();
        assert_eq!(s.origin_bin(), 2);
        assert_eq!(s.num_bins(), 2);
    }

    #[test]
    fn counts_accumulate() {
        let g = build_graph(vec![ev(0, 1, 1), ev(0, 1, 2), ev(0, 1, 3)], None).unwrap();
        let s = bin_events(&g, 900).unwrap();
        assert_eq!(s.bin(0).count(0, 1), 3);
        assert_eq!(s.total_count(), 3);
    }

    #[test]
    fn star_neighbors_are_distinct_and_directed() {
        let g = build_graph(vec![ev(1, 0, 1), ev(2, 0, 2), ev(2, 0, 3)], None).unwrap();
        let s = bin_events(&g, 900).unwrap();
        assert_eq!(s.neighbor_set(0, 0).unwrap(), vec![1, 2]);
        assert!(s.neighbor_set(1, 0).unwrap().is_empty());
        assert_eq!(s.degree_series(0).unwrap().values, vec![2]);
        assert_eq!(
            s.neighbor_set(0, 1),
            Err(SnapshotError::BinOutOfRange { bin: 1, num_bins: 1 })
        );
        assert_eq!(s.degree_series(9), Err(SnapshotError::UnknownNode(9)));
    }

    #[test]
    fn isolated_node_has_zero_degree() {
        let g = build_graph(vec![ev(1, 0, 1), ev(1, 0, 2000)], Some(&[5])).unwrap();
        let s = bin_events(&g, 900).unwrap();
        let v = s.index_of(5).unwrap();
        assert_eq!(s.degree_series(v).unwrap().values, vec![0, 0, 0]);
    }

    #[test]
    fn empty_graph_needs_span() {
        let g = build_graph(Vec::new(), Some(&[0, 1])).unwrap();
        assert_eq!(bin_events(&g, 900), Err(SnapshotError::EmptyGraph));
        let s = bin_events_in_span(&g, 900, Some(TimeSpan::new(0, 8999))).unwrap();
        assert_eq!(s.num_bins(), 10);
        assert_eq!(bin_events(&g, 0), Err(SnapshotError::InvalidBinWidth));
    }

    #[test]
    fn event_outside_span_rejected() {
        let g = build_graph(vec![ev(0, 1, 5000)], None).unwrap();
        assert_eq!(
            bin_events_in_span(&g, 900, Some(TimeSpan::new(0, 899))),
            Err(SnapshotError::EventOutsideSpan(0))
        );
    }

    #[test]
    fn hash_tracks_content() {
        let g = build_graph(vec![ev(0, 1, 0), ev(1, 2, 1000)], None).unwrap();
        let a = bin_events(&g, 900).unwrap();
        let b = bin_events(&g, 900).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        let c = a.with_bins_cleared_from(1);
        assert_ne!(a.content_hash(), c.content_hash());
    }
}
