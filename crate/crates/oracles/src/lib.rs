//! Slow, direct reference implementations for the test suites. Each one is
//! written straight from the defining formula and shares no code with the
//! optimized paths it checks.

use std::collections::{BTreeMap, BTreeSet};

use aedbench_core::detectors::isolation_forest::{IsolationForest, TreeNode};
use aedbench_core::graph::TemporalGraph;
use aedbench_core::snapshot::SnapshotSequence;
use nalgebra::DMatrix;

/// Exact fraction over `i128`, enough for sums of `k / N` with small `N`.
#[derive(Debug, Clone, Copy)]
struct Frac {
    num: i128,
    den: i128,
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Frac {
    fn int(n: i128) -> Self {
        Frac { num: n, den: 1 }
    }

    fn add(self, o: Frac) -> Frac {
        let num = self.num * o.den + o.num * self.den;
        let den = self.den * o.den;
        let g = gcd(num, den).max(1);
        Frac { num: num / g, den: den / g }
    }

    fn gt(self, o: Frac) -> bool {
        self.num * o.den > o.num * self.den
    }
}

/// Per-bin in-neighbor sets `C_t(v)` and undirected pair counts, computed
/// from raw events with bin `floor(ts / width) - floor(start / width)`.
pub struct RawBins {
    pub node_count: usize,
    pub num_bins: usize,
    /// `in_sets[t][v]`
    pub in_sets: Vec<Vec<BTreeSet<usize>>>,
    /// `pair_counts[t][(min, max)]`
    pub pair_counts: Vec<BTreeMap<(usize, usize), u64>>,
}

impl RawBins {
    pub fn from_events(graph: &TemporalGraph, bin_width: i64, start: i64, num_bins: usize) -> Self {
        let nodes = graph.nodes();
        let idx = |id| nodes.iter().position(|&n| n == id).unwrap();
        let n = nodes.len();
        let mut in_sets = vec![vec![BTreeSet::new(); n]; num_bins];
        let mut pair_counts = vec![BTreeMap::new(); num_bins];
        for e in graph.events() {
            let b = (e.timestamp.div_euclid(bin_width) - start.div_euclid(bin_width)) as usize;
            let (s, d) = (idx(e.source), idx(e.target));
            in_sets[b][d].insert(s);
            *pair_counts[b].entry((s.min(d), s.max(d))).or_insert(0) += 1;
        }
        RawBins {
            node_count: n,
            num_bins,
            in_sets,
            pair_counts,
        }
    }

    fn deg(&self, v: usize, t: usize) -> i128 {
        self.in_sets[t][v].len() as i128
    }
}

/// The three rules at `(v, t)` as a bit mask (1 spike, 2 curvature, 4 spectral).
pub fn rules_direct(raw: &RawBins, v: usize, t: usize, z: usize, threshold: f64, normalize: bool) -> u8 {
    let series: Vec<f64> = (0..raw.num_bins).map(|i| raw.deg(v, i) as f64).collect();
    // rule 1 in exact integers when the float comparison is too close to call
    let spike = {
        let w = &series[t - z..=t + z];
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let sd = (w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        let gap = series[t] - (mean + 2.0 * sd);
        if gap.abs() > 1e-9 {
            gap > 0.0
        } else {
            let n = w.len() as i128;
            let s: i128 = w.iter().map(|&x| x as i128).sum();
            let q: i128 = w.iter().map(|&x| (x as i128) * (x as i128)).sum();
            let d = n * series[t] as i128 - s;
            d > 0 && d * d > 4 * (n * q - s * s)
        }
    };

    let mut lhs = Frac::int(0);
    let mut rhs = Frac::int(0);
    for i in t - z..=t + z {
        lhs = lhs.add(Frac::int(raw.deg(v, i + 1) - 2 * raw.deg(v, i) + raw.deg(v, i - 1)));
        let n_i = raw.deg(v, i);
        if n_i > 0 {
            for &u in &raw.in_sets[i][v] {
                let diff = raw.deg(u, i + 1) - raw.deg(u, i - 1);
                rhs = rhs.add(Frac { num: diff, den: 2 * n_i });
            }
        }
    }
    let curvature = lhs.gt(rhs);

    let spectral = {
        let mut partner: BTreeMap<usize, u64> = BTreeMap::new();
        for i in t - z..=t + z {
            for (&(a, b), &c) in &raw.pair_counts[i] {
                if a == v {
                    *partner.entry(b).or_insert(0) += c;
                } else if b == v {
                    *partner.entry(a).or_insert(0) += c;
                }
            }
        }
        let dim = partner.len() + 1;
        let scale = if normalize { (2 * z + 1) as f64 } else { 1.0 };
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for (k, (_, &c)) in partner.iter().enumerate() {
            m[(0, k + 1)] = c as f64 / scale;
            m[(k + 1, 0)] = c as f64 / scale;
        }
        let radius = m
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0f64, |acc, x| acc.max(x.abs()));
        if (radius - threshold).abs() > 1e-9 {
            radius > threshold
        } else {
            // too close for floating point: compare sum of squares exactly
            let ss: u128 = partner.values().map(|&c| u128::from(c) * u128::from(c)).sum();
            let bound = threshold * scale;
            bound.fract() == 0.0 && ss > (bound as u128) * (bound as u128)
        }
    };
    u8::from(spike) | u8::from(curvature) << 1 | u8::from(spectral) << 2
}

/// Brute-force label masks over the defined range `[z + 1, T - z - 2]`;
/// `None` elsewhere.
pub fn label_masks(raw: &RawBins, z: usize, threshold: f64, normalize: bool) -> Vec<Vec<Option<u8>>> {
    (0..raw.node_count)
        .map(|v| {
            (0..raw.num_bins)
                .map(|t| {
                    (t > z && t + z + 2 <= raw.num_bins)
                        .then(|| rules_direct(raw, v, t, z, threshold, normalize))
                })
                .collect()
        })
        .collect()
}

fn znorm(w: &[f64]) -> Vec<f64> {
    let m = w.len() as f64;
    let mu = w.iter().sum::<f64>() / m;
    let sd = (w.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / m).sqrt();
    w.iter().map(|x| if sd == 0.0 { 0.0 } else { (x - mu) / sd }).collect()
}

/// All-pairs z-normalized distances, exclusion zone `ceil(m / 2)`.
/// Returns `(full, left)` profiles; `inf` where no neighbor exists.
pub fn matrix_profile(series: &[u32], m: usize) -> (Vec<f64>, Vec<f64>) {
    let x: Vec<f64> = series.iter().map(|&v| v as f64).collect();
    let k = x.len() + 1 - m;
    let subs: Vec<Vec<f64>> = (0..k).map(|i| znorm(&x[i..i + m])).collect();
    let excl = m.div_ceil(2);
    let mut full = vec![f64::INFINITY; k];
    let mut left = vec![f64::INFINITY; k];
    for i in 0..k {
        for j in 0..k {
            if i.abs_diff(j) <= excl {
                continue;
            }
            let d = subs[i].iter().zip(&subs[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            full[i] = full[i].min(d);
            if j < i {
                left[i] = left[i].min(d);
            }
        }
    }
    (full, left)
}

/// Weighted F1 through per-class precision and recall.
pub fn weighted_f1(truth: &[bool], pred: &[bool]) -> f64 {
    assert_eq!(truth.len(), pred.len());
    if truth.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for class in [true, false] {
        let tp = truth.iter().zip(pred).filter(|(&t, &p)| t == class && p == class).count() as f64;
        let predicted = pred.iter().filter(|&&p| p == class).count() as f64;
        let support = truth.iter().filter(|&&t| t == class).count() as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if support > 0.0 { tp / support } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        total += f1 * support;
    }
    total / truth.len() as f64
}

/// Rolling z-score verdicts over the whole series: `Some(flag)` at source
/// bin `t` once `w` past bins exist.
pub fn zscore_flags(series: &[u32], w: usize, k: f64) -> Vec<Option<bool>> {
    (0..series.len())
        .map(|t| {
            (t >= w).then(|| {
                let past: Vec<f64> = series[t - w..t].iter().map(|&x| x as f64).collect();
                let mean = past.iter().sum::<f64>() / w as f64;
                let sd = (past.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / w as f64).sqrt();
                let x = series[t] as f64;
                if sd == 0.0 {
                    x > mean
                } else {
                    x > mean + k * sd
                }
            })
        })
        .collect()
}

/// Copy of `snap` whose bins after `keep_through` are replaced by `bins`.
pub fn with_future(snap: &SnapshotSequence, keep_through: usize, future: Vec<Vec<aedbench_core::snapshot::EdgeCount>>) -> SnapshotSequence {
    let mut lists = snap.edge_lists();
    for (t, bin) in future.into_iter().enumerate() {
        lists[keep_through + 1 + t] = bin;
    }
    SnapshotSequence::from_bins(snap.bin_width(), snap.origin_bin(), snap.node_ids().to_vec(), lists)
}

/// `c(n) = 2 H(n - 1) - 2 (n - 1) / n` with `H(i) ~ ln i + 0.5772156649`,
/// and `c(2) = 1`.
pub fn average_path(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => 2.0 * (((n - 1) as f64).ln() + 0.577_215_664_901_532_9) - 2.0 * (n - 1) as f64 / n as f64,
    }
}

/// Harmonic number summed term by term.
pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

/// Isolation score of `x` by walking every tree of `forest` recursively.
pub fn isolation_score(forest: &IsolationForest, x: &[f64]) -> f64 {
    fn walk(nodes: &[TreeNode], at: usize, x: &[f64], depth: f64) -> f64 {
        match nodes[at] {
            TreeNode::Leaf { size } => depth + average_path(size),
            TreeNode::Split { feature, threshold, left, right } => {
                walk(nodes, if x[feature] < threshold { left } else { right }, x, depth + 1.0)
            }
        }
    }
    let mean = forest.trees().iter().map(|t| walk(t.nodes(), 0, x, 0.0)).sum::<f64>() / forest.trees().len() as f64;
    2f64.powf(-mean / average_path(forest.subsample()))
}
