//! BFS instance sampling on the static projection of a temporal graph.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NodeId, TemporalGraph};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SamplingError {
    #[error("seed node {0} is not in the graph")]
    UnknownSeed(NodeId),
    #[error("target size must be positive")]
    ZeroTarget,
    #[error("instance count must be positive")]
    NoInstances,
    #[error("connected component holds only {0} nodes")]
    InsufficientComponent(usize),
    #[error("no seed reached the target size after {attempts} attempts")]
    SamplingExhausted { attempts: usize },
}

/// Which edges BFS may traverse. Time is always ignored and parallel edges
/// collapse into one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BfsDirection {
    #[default]
    Undirected,
    /// Follow edges from source to target only.
    Outgoing,
}

/// Deduplicated static adjacency (CSR) over the graph's dense node indices.
#[derive(Debug, Clone)]
pub struct Projection {
    nodes: Vec<NodeId>,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl Projection {
    pub fn new(graph: &TemporalGraph, direction: BfsDirection) -> Self {
        let nodes = graph.nodes().to_vec();
        let idx = |id: NodeId| nodes.binary_search(&id).expect("member") as u32;
        let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(graph.events().len() * 2);
        for e in graph.events() {
            let (s, t) = (idx(e.source), idx(e.target));
            pairs.push((s, t));
            if direction == BfsDirection::Undirected {
                pairs.push((t, s));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let mut offsets = vec![0usize; nodes.len() + 1];
        for &(s, _) in &pairs {
            offsets[s as usize + 1] += 1;
        }
        for i in 0..nodes.len() {
            offsets[i + 1] += offsets[i];
        }
        let neighbors = pairs.into_iter().map(|(_, t)| t).collect();
        Projection {
            nodes,
            offsets,
            neighbors,
        }
    }

    /// Neighbor indices of `v`, ascending.
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    /// FIFO BFS from `seed` (dense index); stops as soon as `target` nodes have
    /// been discovered. Returns sorted node ids.
    pub fn bfs(&self, seed: usize, target: usize) -> Result<Vec<NodeId>, SamplingError> {
        if target == 0 {
            return Err(SamplingError::ZeroTarget);
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut order = Vec::with_capacity(target);
        let mut queue = VecDeque::new();
        seen[seed] = true;
        order.push(seed);
        queue.push_back(seed);
        'outer: while let Some(v) = queue.pop_front() {
            if order.len() >= target {
                break;
            }
            for &u in self.neighbors(v) {
                let u = u as usize;
                if !seen[u] {
                    seen[u] = true;
                    order.push(u);
                    queue.push_back(u);
                    if order.len() == target {
                        break 'outer;
                    }
                }
            }
        }
        if order.len() < target {
            return Err(SamplingError::InsufficientComponent(order.len()));
        }
        let mut ids: Vec<NodeId> = order.into_iter().map(|i| self.nodes[i]).collect();
        ids.sort_unstable();
        Ok(ids)
    }
}

/// Collects `target_size` nodes by BFS from `seed_node` and returns the induced
/// temporal subgraph.
pub fn bfs_sample(
    graph: &TemporalGraph,
    seed_node: NodeId,
    target_size: usize,
    direction: BfsDirection,
) -> Result<TemporalGraph, SamplingError> {
    let seed = graph
        .nodes()
        .binary_search(&seed_node)
        .map_err(|_| SamplingError::UnknownSeed(seed_node))?;
    let projection = Projection::new(graph, direction);
    let keep = projection.bfs(seed, target_size)?;
    Ok(graph.induced(&keep))
}

/// Draws `n` BFS instances from uniformly random seed nodes, resampling seeds
/// whose component is too small (at most `100 * n` attempts).
pub fn sample_instances(
    graph: &TemporalGraph,
    n: usize,
    target_size: usize,
    rng_seed: u64,
    direction: BfsDirection,
) -> Result<Vec<TemporalGraph>, SamplingError> {
    if n == 0 {
        return Err(SamplingError::NoInstances);
    }
    if target_size == 0 {
        return Err(SamplingError::ZeroTarget);
    }
    let max_attempts = 100 * n;
    if graph.node_count() < target_size {
        return Err(SamplingError::SamplingExhausted {
            attempts: max_attempts,
        });
    }
    let projection = Projection::new(graph, direction);
    let mut rng = rng::seeded(rng_seed);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        if attempts == max_attempts {
            return Err(SamplingError::SamplingExhausted { attempts });
        }
        attempts += 1;
        let seed = rng.random_range(0..graph.node_count());
        match projection.bfs(seed, target_size) {
            Ok(keep) => out.push(graph.induced(&keep)),
            Err(SamplingError::InsufficientComponent(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
