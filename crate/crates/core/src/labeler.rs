//! Ground-truth anomaly labels.
//!
//! A node `v` is anomalous at bin `t` when any of three rules fires over the
//! centered window `[t - z, t + z]`:
//!
//! 1. *degree spike*: `N_t(v) > mean + 2 * std` of `N(v)` over the window
//!    (population standard deviation);
//! 2. *curvature*: the summed central second difference of `N(v)` exceeds the
//!    summed, neighbor-averaged central first difference of the in-neighbors'
//!    degrees;
//! 3. *spectral*: the spectral radius of `v`'s symmetric ego interaction
//!    matrix over the window exceeds 1.
//!
//! Rule 2 needs `N` at `t - z - 1` and `t + z + 1`, so labels exist only on the
//! defined range `[z + 1, T - z - 2]`. All comparisons are strict and are
//! decided in exact integer/rational arithmetic where the inputs allow it.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Range, RangeInclusive};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::snapshot::{DegreeTable, SnapshotError, SnapshotSequence};
use crate::spectral::{ego_counts, EgoScratch};
use crate::stats::{exceeds_mean_k_std, Ratio};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("invalid rule parameter: {0}")]
    InvalidParams(&'static str),
    #[error("bin {t} is outside the defined range")]
    OutOfDefinedRange { t: usize },
    #[error("sequence of {num_bins} bins is too short for z = {z} (needs at least 2z + 4)")]
    SequenceTooShort { num_bins: usize, z: usize },
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleParams {
    /// Window half-width in bins.
    pub z: usize,
    pub std_multiplier: f64,
    pub eig_threshold: f64,
    /// Divide ego-matrix weights by the window length `2z + 1`.
    pub normalize_window: bool,
}

impl Default for RuleParams {
    fn default() -> Self {
        RuleParams {
            z: 4,
            std_multiplier: 2.0,
            eig_threshold: 1.0,
            normalize_window: true,
        }
    }
}

impl RuleParams {
    pub fn with_z(z: usize) -> Self {
        RuleParams {
            z,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), LabelError> {
        if self.z == 0 {
            return Err(LabelError::InvalidParams("z must be at least 1"));
        }
        if !(self.std_multiplier.is_finite() && self.std_multiplier > 0.0) {
            return Err(LabelError::InvalidParams("std_multiplier must be positive"));
        }
        if !self.eig_threshold.is_finite() {
            return Err(LabelError::InvalidParams("eig_threshold must be finite"));
        }
        Ok(())
    }

    /// Smallest sequence length `label_graph` accepts.
    pub fn min_bins(&self) -> usize {
        2 * self.z + 4
    }
}

/// First and last bin (inclusive) on which every rule is defined.
pub fn defined_range(num_bins: usize, z: usize) -> Option<RangeInclusive<usize>> {
    let first = z + 1;
    let last = num_bins.checked_sub(z + 2)?;
    (first <= last).then_some(first..=last)
}

/// Per-cell provenance: which rules fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RuleMask(u8);

impl RuleMask {
    pub const DEGREE_SPIKE: RuleMask = RuleMask(1);
    pub const CURVATURE: RuleMask = RuleMask(2);
    pub const SPECTRAL: RuleMask = RuleMask(4);
    pub const ALL: RuleMask = RuleMask(7);

    pub fn from_bits(bits: u8) -> Option<RuleMask> {
        (bits & !Self::ALL.0 == 0).then_some(RuleMask(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, other: RuleMask) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn with(self, other: RuleMask, on: bool) -> RuleMask {
        if on {
            RuleMask(self.0 | other.0)
        } else {
            self
        }
    }
}

/// Ground-truth labels over all nodes and bins. Cells outside the defined
/// range are undefined (`None`), never normal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMatrix {
    node_count: usize,
    num_bins: usize,
    z: usize,
    first_defined: usize,
    last_defined: usize,
    masks: Vec<RuleMask>,
}

impl LabelMatrix {
    /// All-normal matrix over the defined range.
    pub fn empty(node_count: usize, num_bins: usize, z: usize) -> Result<Self, LabelError> {
        let range = defined_range(num_bins, z).ok_or(LabelError::SequenceTooShort { num_bins, z })?;
        Ok(LabelMatrix {
            node_count,
            num_bins,
            z,
            first_defined: *range.start(),
            last_defined: *range.end(),
            masks: vec![RuleMask::default(); node_count * num_bins],
        })
    }

    /// Rebuilds a matrix from its positive cells (e.g. a labels file).
    pub fn from_positives(
        node_count: usize,
        num_bins: usize,
        z: usize,
        positives: impl IntoIterator<Item = (usize, usize, RuleMask)>,
    ) -> Result<Self, LabelError> {
        let mut m = Self::empty(node_count, num_bins, z)?;
        for (v, t, mask) in positives {
            if v >= node_count {
                return Err(LabelError::Snapshot(SnapshotError::UnknownNode(v)));
            }
            if !m.defined_range().contains(&t) {
                return Err(LabelError::OutOfDefinedRange { t });
            }
            m.masks[v * num_bins + t] = mask;
        }
        Ok(m)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn z(&self) -> usize {
        self.z
    }

    pub fn defined_range(&self) -> RangeInclusive<usize> {
        self.first_defined..=self.last_defined
    }

    pub fn is_defined(&self, t: usize) -> bool {
        (self.first_defined..=self.last_defined).contains(&t)
    }

    pub fn mask(&self, v: usize, t: usize) -> Option<RuleMask> {
        (v < self.node_count && self.is_defined(t)).then(|| self.masks[v * self.num_bins + t])
    }

    /// Combined label: any rule fired.
    pub fn label(&self, v: usize, t: usize) -> Option<bool> {
        self.mask(v, t).map(|m| !m.is_empty())
    }

    /// Positive cells in node-major order.
    pub fn positives(&self) -> impl Iterator<Item = (usize, usize, RuleMask)> + '_ {
        let t_len = self.num_bins;
        self.masks
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_empty())
            .map(move |(i, &m)| (i / t_len, i % t_len, m))
    }

    /// Defined bins intersected with `bins`.
    pub fn defined_within(&self, bins: Range<usize>) -> Range<usize> {
        let lo = bins.start.max(self.first_defined);
        let hi = bins.end.min(self.last_defined + 1);
        lo..hi.max(lo)
    }

    /// Fraction of positive cells among the defined cells of `bins`.
    pub fn positive_rate(&self, bins: Range<usize>) -> Option<f64> {
        let bins = self.defined_within(bins);
        let cells = self.node_count * bins.len();
        if cells == 0 {
            return None;
        }
        let pos = (0..self.node_count)
            .map(|v| bins.clone().filter(|&t| self.label(v, t) == Some(true)).count())
            .sum::<usize>();
        Some(pos as f64 / cells as f64)
    }

    /// Number of positive cells per rule, `[spike, curvature, spectral, any]`.
    pub fn rule_counts(&self) -> [usize; 4] {
        let mut out = [0; 4];
        for (_, _, m) in self.positives() {
            out[0] += m.contains(RuleMask::DEGREE_SPIKE) as usize;
            out[1] += m.contains(RuleMask::CURVATURE) as usize;
            out[2] += m.contains(RuleMask::SPECTRAL) as usize;
            out[3] += 1;
        }
        out
    }
}

/// Rule 1 on a raw degree series. Only needs the window `[t - z, t + z]`
/// inside the series.
pub fn rule_degree_spike(values: &[u32], t: usize, params: &RuleParams) -> Result<bool, LabelError> {
    params.validate()?;
    let z = params.z;
    if t < z || t + z >= values.len() {
        return Err(LabelError::OutOfDefinedRange { t });
    }
    Ok(exceeds_mean_k_std(&values[t - z..=t + z], values[t], params.std_multiplier))
}

/// Evaluates the three rules on one snapshot sequence, reusing the degree
/// table and scratch buffers across cells.
pub struct Labeler<'a> {
    snap: &'a SnapshotSequence,
    degrees: DegreeTable,
    params: RuleParams,
    scratch: EgoScratch,
}

impl<'a> Labeler<'a> {
    pub fn new(snap: &'a SnapshotSequence, params: RuleParams) -> Result<Self, LabelError> {
        params.validate()?;
        Ok(Labeler {
            snap,
            degrees: snap.degree_table(),
            params,
            scratch: EgoScratch::default(),
        })
    }

    pub fn degrees(&self) -> &DegreeTable {
        &self.degrees
    }

    fn check(&self, v: usize, t: usize) -> Result<(), LabelError> {
        if v >= self.snap.node_count() {
            return Err(LabelError::Snapshot(SnapshotError::UnknownNode(v)));
        }
        match defined_range(self.snap.num_bins(), self.params.z) {
            Some(r) if r.contains(&t) => Ok(()),
            _ => Err(LabelError::OutOfDefinedRange { t }),
        }
    }

    pub fn degree_spike(&self, v: usize, t: usize) -> Result<bool, LabelError> {
        self.check(v, t)?;
        Ok(self.degree_spike_at(v, t))
    }

    fn degree_spike_at(&self, v: usize, t: usize) -> bool {
        let z = self.params.z;
        let series = self.degrees.series(v);
        exceeds_mean_k_std(&series[t - z..=t + z], series[t], self.params.std_multiplier)
    }

    pub fn curvature(&self, v: usize, t: usize) -> Result<bool, LabelError> {
        self.check(v, t)?;
        Ok(self.curvature_at(v, t))
    }

    fn curvature_at(&self, v: usize, t: usize) -> bool {
        let z = self.params.z;
        let deg = &self.degrees;
        let n = |u: usize, i: usize| i64::from(deg.get(u, i));
        // The second differences telescope, but the sum is kept literal.
        let mut lhs: i64 = 0;
        let mut rhs = Ratio::ZERO;
        let mut rhs_f = 0.0f64;
        let mut exact = true;
        for i in t - z..=t + z {
            lhs += n(v, i + 1) - 2 * n(v, i) + n(v, i - 1);
            let n_i = n(v, i);
            if n_i == 0 {
                continue;
            }
            let slope_sum: i64 = self
                .snap
                .bin(i)
                .incoming(v as u32)
                .iter()
                .map(|e| n(e.source as usize, i + 1) - n(e.source as usize, i - 1))
                .sum();
            // (1 / N_i) * sum (dN/di), with dN/di = slope / 2
            rhs_f += slope_sum as f64 / (2 * n_i) as f64;
            if exact {
                match Ratio::new(i128::from(slope_sum), i128::from(2 * n_i))
                    .and_then(|term| rhs.checked_add(term))
                {
                    Some(r) => rhs = r,
                    None => exact = false,
                }
            }
        }
        if exact {
            if let Some(below) = rhs.is_below_int(i128::from(lhs)) {
                return below;
            }
        }
        lhs as f64 > rhs_f
    }

    pub fn spectral(&mut self, v: usize, t: usize) -> Result<bool, LabelError> {
        self.check(v, t)?;
        Ok(self.spectral_at(v, t))
    }

    fn spectral_at(&mut self, v: usize, t: usize) -> bool {
        let z = self.params.z;
        let counts = ego_counts(self.snap, v, t - z..=t + z, &mut self.scratch);
        counts.exceeds(self.params.eig_threshold, self.params.normalize_window)
    }

    pub fn mask(&mut self, v: usize, t: usize) -> Result<RuleMask, LabelError> {
        self.check(v, t)?;
        Ok(self.mask_at(v, t))
    }

    fn mask_at(&mut self, v: usize, t: usize) -> RuleMask {
        RuleMask::default()
            .with(RuleMask::DEGREE_SPIKE, self.degree_spike_at(v, t))
            .with(RuleMask::CURVATURE, self.curvature_at(v, t))
            .with(RuleMask::SPECTRAL, self.spectral_at(v, t))
    }

    pub fn label_all(mut self) -> Result<LabelMatrix, LabelError> {
        let t_len = self.snap.num_bins();
        let z = self.params.z;
        if t_len < self.params.min_bins() {
            return Err(LabelError::SequenceTooShort { num_bins: t_len, z });
        }
        let mut out = LabelMatrix::empty(self.snap.node_count(), t_len, z)?;
        let range = out.defined_range();
        for v in 0..self.snap.node_count() {
            for t in range.clone() {
                out.masks[v * t_len + t] = self.mask_at(v, t);
            }
        }
        Ok(out)
    }
}

/// Rule 2 for a single cell.
pub fn rule_curvature(
    snap: &SnapshotSequence,
    v: usize,
    t: usize,
    params: &RuleParams,
) -> Result<bool, LabelError> {
    Labeler::new(snap, *params)?.curvature(v, t)
}

/// Rule 3 for a single cell.
pub fn rule_spectral(
    snap: &SnapshotSequence,
    v: usize,
    t: usize,
    params: &RuleParams,
) -> Result<bool, LabelError> {
    Labeler::new(snap, *params)?.spectral(v, t)
}

/// Labels every node at every defined bin with the OR of the three rules.
pub fn label_graph(snap: &SnapshotSequence, params: &RuleParams) -> Result<LabelMatrix, LabelError> {
    Labeler::new(snap, *params)?.label_all()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, Action, InteractionEvent};
    use crate::snapshot::{bin_events_in_span, EdgeCount, TimeSpan};

    #[test]
    fn spike_worked_examples() {
        let p = RuleParams::with_z(3);
        assert!(rule_degree_spike(&[1, 1, 1, 9, 1, 1, 1], 3, &p).unwrap());
        assert!(rule_degree_spike(&[1, 1, 1, 3, 1, 1, 1], 3, &p).unwrap());
        assert!(!rule_degree_spike(&[1, 2, 1, 3, 2, 1, 2], 3, &p).unwrap());
        for c in [0, 1, 7, 1000] {
            assert!(!rule_degree_spike(&[c; 7], 3, &p).unwrap());
        }
        assert_eq!(
            rule_degree_spike(&[1; 7], 2, &p),
            Err(LabelError::OutOfDefinedRange { t: 2 })
        );
    }

    #[test]
    fn spike_tie_is_not_anomalous() {
        // window [0,0,0,0,1]: mean 0.2, std 0.4, threshold exactly 1
        let p = RuleParams::with_z(2);
        assert!(!rule_degree_spike(&[0, 0, 1, 0, 0], 2, &p).unwrap());
    }

    #[test]
    fn spike_shift_invariance() {
        let p = RuleParams::with_z(2);
        let base = [3u32, 0, 7, 1, 2];
        for c in [1u32, 5, 100] {
            let shifted: Vec<u32> = base.iter().map(|x| x + c).collect();
            assert_eq!(
                rule_degree_spike(&base, 2, &p).unwrap(),
                rule_degree_spike(&shifted, 2, &p).unwrap()
            );
        }
    }

    fn snap_from(node_count: usize, bins: Vec<Vec<(u32, u32, u32)>>) -> SnapshotSequence {
        SnapshotSequence::from_bins(
            900,
            0,
            (0..node_count as u64).collect(),
            bins.into_iter()
                .map(|b| {
                    b.into_iter()
                        .map(|(source, target, count)| EdgeCount {
                            source,
                            target,
                            count,
                        })
                        .collect()
                })
                .collect(),
        )
    }

    #[test]
    fn curvature_constant_and_isolated() {
        let p = RuleParams::with_z(1);
        let bins = (0..6).map(|_| vec![(1, 0, 1), (2, 0, 1), (0, 1, 1)]).collect();
        let snap = snap_from(4, bins);
        for t in 2..=3 {
            assert!(!rule_curvature(&snap, 0, t, &p).unwrap());
            assert!(!rule_curvature(&snap, 3, t, &p).unwrap());
        }
        assert_eq!(
            rule_curvature(&snap, 0, 1, &p),
            Err(LabelError::OutOfDefinedRange { t: 1 })
        );
    }

    #[test]
    fn curvature_fires_on_accelerating_growth() {
        // z = 1, t = 2: N(0) = [0, 0, 0, 1, 3, ...], LHS = (3 - 1) - (0 - 0) = 2;
        // the only neighbor of 0 is 1 (at i = 3) whose degree is flat, RHS = 0.
        let p = RuleParams::with_z(1);
        let bins = vec![
            vec![],
            vec![],
            vec![],
            vec![(1, 0, 1)],
            vec![(1, 0, 1), (2, 0, 1), (3, 0, 1)],
            vec![],
        ];
        let snap = snap_from(4, bins);
        assert!(rule_curvature(&snap, 0, 2, &p).unwrap());
    }

    #[test]
    fn spectral_boundary_and_doubling() {
        let z = 2;
        let p = RuleParams::with_z(z);
        let one = (0..8).map(|_| vec![(1, 0, 1)]).collect();
        let snap = snap_from(2, one);
        assert!(!rule_spectral(&snap, 0, 3, &p).unwrap());
        let two = (0..8).map(|_| vec![(1, 0, 2)]).collect();
        let snap = snap_from(2, two);
        assert!(rule_spectral(&snap, 0, 3, &p).unwrap());
        let pair = (0..8).map(|_| vec![(1, 0, 1), (0, 2, 1)]).collect();
        let snap = snap_from(3, pair);
        assert!(rule_spectral(&snap, 0, 3, &p).unwrap());
        let empty = (0..8).map(|_| vec![]).collect();
        let snap = snap_from(3, empty);
        assert!(!rule_spectral(&snap, 0, 3, &p).unwrap());
        let raw = RuleParams {
            normalize_window: false,
            ..p
        };
        let one = (0..8).map(|_| vec![(1, 0, 1)]).collect();
        assert!(rule_spectral(&snap_from(2, one), 0, 3, &raw).unwrap());
    }

    #[test]
    fn label_graph_requires_length() {
        let g = build_graph(vec![InteractionEvent::new(0, 1, 0, Action::Like)], None).unwrap();
        let snap = bin_events_in_span(&g, 900, Some(TimeSpan::new(0, 900 * 11 - 1))).unwrap();
        assert_eq!(
            label_graph(&snap, &RuleParams::with_z(4)),
            Err(LabelError::SequenceTooShort { num_bins: 11, z: 4 })
        );
        let m = label_graph(&snap, &RuleParams::with_z(3)).unwrap();
        assert_eq!(m.defined_range(), 4..=6);
        assert_eq!(m.label(0, 3), None);
        assert_eq!(m.label(0, 4), Some(false));
    }

    #[test]
    fn empty_graph_labels_are_all_false() {
        let g = build_graph(Vec::new(), Some(&[0, 1, 2])).unwrap();
        let snap = bin_events_in_span(&g, 900, Some(TimeSpan::new(0, 900 * 20 - 1))).unwrap();
        let m = label_graph(&snap, &RuleParams::with_z(2)).unwrap();
        assert_eq!(m.positives().count(), 0);
        for v in 0..3 {
            for t in m.defined_range() {
                assert_eq!(m.label(v, t), Some(false));
            }
        }
        assert_eq!(m.positive_rate(0..20), Some(0.0));
    }

    #[test]
    fn defined_range_edges() {
        assert_eq!(defined_range(12, 4), Some(5..=6));
        assert_eq!(defined_range(11, 4), Some(5..=5));
        assert_eq!(defined_range(10, 4), None);
        assert_eq!(defined_range(2, 4), None);
    }
}
