//! Isolation forest over per-cell feature rows.
//!
//! Each tree isolates a random subsample by axis-parallel splits at uniform
//! random thresholds, up to depth `ceil(log2(subsample))`. A point's score is
//! `2^(-E[h(x)] / c(psi))`, with `h` the path length (plus `c(size)` at
//! unresolved leaves) and `c(n) = 2 H(n - 1) - 2 (n - 1) / n` the average
//! unsuccessful-search length in a binary search tree.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng as _;

use super::features::{FeatureTable, FEATURE_DIM};
use super::{bad, flag, DetectContext, Detector, DetectorError, DetectorSpec, Params, PredictionSeries, TrainLabels};
use crate::rng::{self, Rng};
use crate::snapshot::{Fnv64, SnapshotSequence};
use crate::stats::quantile;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Average path length of an unsuccessful BST search among `n` points.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * (libm::log(n - 1.0) + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode {
    Leaf { size: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// One isolation tree; node 0 is the root. Points with
/// `x[feature] < threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolationTree {
    nodes: Vec<TreeNode>,
}

impl IsolationTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn path_length(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        let mut depth = 0.0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { size } => return depth + average_path_length(size),
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[feature] < threshold { left } else { right };
                    depth += 1.0;
                }
            }
        }
    }
}

struct TreeBuilder<'a> {
    data: &'a [f64],
    dim: usize,
    max_depth: usize,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    fn value(&self, row: usize, f: usize) -> f64 {
        self.data[row * self.dim + f]
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize, rng: &mut Rng) -> usize {
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { size: rows.len() });
        if rows.len() <= 1 || depth >= self.max_depth {
            return id;
        }
        // candidate features: those not constant on this node's rows
        let mut spans: Vec<(usize, f64, f64)> = Vec::with_capacity(self.dim);
        for f in 0..self.dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &r in rows.iter() {
                let x = self.value(r, f);
                lo = lo.min(x);
                hi = hi.max(x);
            }
            if hi > lo {
                spans.push((f, lo, hi));
            }
        }
        if spans.is_empty() {
            return id;
        }
        let (feature, lo, hi) = spans[rng.random_range(0..spans.len())];
        let mut threshold = lo + rng.random::<f64>() * (hi - lo);
        if threshold <= lo {
            // keep both sides non-empty
            threshold = lo + (hi - lo) * 0.5;
        }
        let mut split = 0;
        for i in 0..rows.len() {
            if self.value(rows[i], feature) < threshold {
                rows.swap(i, split);
                split += 1;
            }
        }
        let (l_rows, r_rows) = rows.split_at_mut(split);
        let left = self.grow(l_rows, depth + 1, rng);
        let right = self.grow(r_rows, depth + 1, rng);
        self.nodes[id] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationForest {
    trees: Vec<IsolationTree>,
    subsample: usize,
    dim: usize,
}

impl IsolationForest {
    /// Fits on row-major `data` of width `dim`; each tree sees `subsample`
    /// rows drawn without replacement (all rows when fewer are available).
    pub fn fit(data: &[f64], dim: usize, n_trees: usize, subsample: usize, seed: u64) -> Self {
        assert!(dim > 0 && data.len().is_multiple_of(dim), "ragged feature data");
        let n_rows = data.len() / dim;
        let psi = subsample.min(n_rows);
        let max_depth = if psi > 1 {
            libm::ceil(libm::log2(psi as f64)) as usize
        } else {
            0
        };
        let mut rng = rng::seeded(seed);
        let trees = (0..n_trees)
            .map(|_| {
                let mut rows = index::sample(&mut rng, n_rows, psi).into_vec();
                rows.sort_unstable();
                let mut b = TreeBuilder {
                    data,
                    dim,
                    max_depth,
                    nodes: Vec::new(),
                };
                b.grow(&mut rows, 0, &mut rng);
                IsolationTree { nodes: b.nodes }
            })
            .collect();
        IsolationForest {
            trees,
            subsample: psi,
            dim,
        }
    }

    pub fn trees(&self) -> &[IsolationTree] {
        &self.trees
    }

    /// Effective subsample size `psi`.
    pub fn subsample(&self) -> usize {
        self.subsample
    }

    pub fn mean_path_length(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64
    }

    /// Anomaly score in `(0, 1]`.
    pub fn score(&self, x: &[f64]) -> f64 {
        let c = average_path_length(self.subsample);
        if c == 0.0 {
            return 1.0;
        }
        libm::exp2(-self.mean_path_length(x) / c)
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv64::new();
        for t in &self.trees {
            h.write_u64(t.nodes.len() as u64);
            for n in &t.nodes {
                match *n {
                    TreeNode::Leaf { size } => h.write_u64(size as u64),
                    TreeNode::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        h.write_u64(feature as u64);
                        h.write_u64(threshold.to_bits());
                        h.write_u64((left as u64) << 32 | right as u64);
                    }
                }
            }
        }
        h.finish()
    }
}

#[derive(Debug, Clone)]
pub struct IsolationForestDetector {
    name: String,
    n_trees: usize,
    subsample: usize,
    quantile: f64,
    /// Calibration rows scored to set the threshold (sampled when exceeded).
    calibration_rows: usize,
    seed: u64,
}

impl IsolationForestDetector {
    pub const MIN_ROWS: usize = 16;

    pub fn new(name: String, n_trees: usize, subsample: usize, quantile: f64, seed: u64) -> Self {
        IsolationForestDetector {
            name,
            n_trees,
            subsample,
            quantile,
            calibration_rows: 4096,
            seed,
        }
    }

    pub fn from_spec(name: String, spec: &DetectorSpec) -> Result<Self, DetectorError> {
        let p = Params::new(spec, &["n_trees", "subsample", "quantile", "calibration_rows"])?;
        let n_trees = p.count("n_trees")?.unwrap_or(100);
        let subsample = p.count("subsample")?.unwrap_or(256);
        let quantile = p.number("quantile")?.unwrap_or(0.98);
        if n_trees < 10 {
            return Err(bad("n_trees", "needs at least 10 trees"));
        }
        if subsample < 16 {
            return Err(bad("subsample", "needs at least 16 rows"));
        }
        if !(0.0..=1.0).contains(&quantile) {
            return Err(bad("quantile", "must lie in [0, 1]"));
        }
        let mut d = Self::new(name, n_trees, subsample, quantile, spec.rng_seed);
        if let Some(rows) = p.count("calibration_rows")? {
            if rows == 0 {
                return Err(bad("calibration_rows", "must be positive"));
            }
            d.calibration_rows = rows;
        }
        Ok(d)
    }
}

impl Detector for IsolationForestDetector {
    fn name(&self) -> &str {
        &self.name
    }

    /// Trains on all feature rows of bins `< fit_end`, sets the threshold at
    /// the training-score quantile and flags `(v, t + lag)` when row `(v, t)`
    /// scores strictly above it.
    fn predict(
        &self,
        snap: &SnapshotSequence,
        _train: &TrainLabels<'_>,
        ctx: &DetectContext,
    ) -> Result<PredictionSeries, DetectorError> {
        ctx.validate(snap)?;
        let n = snap.node_count();
        let horizon = ctx.horizon().map_or(0, |h| h + 1).max(ctx.fit_end);
        let table = FeatureTable::build(snap, horizon, ctx.window);
        let train_rows = n * ctx.fit_end;
        if train_rows < Self::MIN_ROWS {
            return Err(DetectorError::InsufficientTrainRows { rows: train_rows });
        }
        let mut data = Vec::with_capacity(train_rows * FEATURE_DIM);
        for v in 0..n {
            for t in 0..ctx.fit_end {
                data.extend_from_slice(table.row(v, t));
            }
        }
        let forest = IsolationForest::fit(&data, FEATURE_DIM, self.n_trees, self.subsample, self.seed);

        let mut pick = rng::seeded(rng::derive_named(self.seed, "calibration"));
        let chosen = if train_rows > self.calibration_rows {
            let mut idx = index::sample(&mut pick, train_rows, self.calibration_rows).into_vec();
            idx.sort_unstable();
            idx
        } else {
            (0..train_rows).collect()
        };
        let scores: Vec<f64> = chosen
            .iter()
            .map(|&r| forest.score(&data[r * FEATURE_DIM..(r + 1) * FEATURE_DIM]))
            .collect();
        let threshold = quantile(&scores, self.quantile).unwrap_or(f64::INFINITY);

        let mut out = PredictionSeries::new(n, ctx.targets.clone(), ctx.lag);
        out.fill(|v, s| flag(ctx.source_bin(s).map(|t| forest.score(table.row(v, t))), threshold));
        out.calibration.threshold = Some(threshold);
        out.calibration.model_fingerprint = Some(forest.fingerprint());
        Ok(out)
    }
}
