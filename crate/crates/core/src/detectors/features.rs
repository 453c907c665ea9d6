//! Per-(node, bin) feature rows for the isolation forest. Row `(v, t)` reads
//! bins `<= t` only.

use alloc::vec;
use alloc::vec::Vec;

use crate::snapshot::SnapshotSequence;

pub const FEATURE_DIM: usize = 5;

/// Row-major feature table over bins `0..num_bins` (the caller's horizon).
#[derive(Debug, Clone)]
pub struct FeatureTable {
    num_bins: usize,
    rows: Vec<[f64; FEATURE_DIM]>,
}

impl FeatureTable {
    /// Columns: in-degree `N_t(v)`, interaction count into `v`, distinct
    /// out-neighbors, `N_t(v) - N_{t-1}(v)`, and events incident to `v` over
    /// `[t - w + 1, t]` (clipped at bin 0).
    pub fn build(snap: &SnapshotSequence, num_bins: usize, window: usize) -> Self {
        let n = snap.node_count();
        let mut rows = vec![[0.0; FEATURE_DIM]; n * num_bins];
        let mut incident = vec![0u64; n * num_bins];
        for t in 0..num_bins {
            let bin = snap.bin(t);
            for e in bin.edges() {
                let (s, d) = (e.source as usize, e.target as usize);
                let c = u64::from(e.count);
                rows[d * num_bins + t][0] += 1.0;
                rows[d * num_bins + t][1] += c as f64;
                rows[s * num_bins + t][2] += 1.0;
                incident[d * num_bins + t] += c;
                incident[s * num_bins + t] += c;
            }
        }
        for v in 0..n {
            let base = v * num_bins;
            let mut running = 0u64;
            for t in 0..num_bins {
                let prev = if t > 0 { rows[base + t - 1][0] } else { 0.0 };
                rows[base + t][3] = rows[base + t][0] - prev;
                running += incident[base + t];
                if t >= window {
                    running -= incident[base + t - window];
                }
                rows[base + t][4] = running as f64;
            }
        }
        FeatureTable { num_bins, rows }
    }

    pub fn row(&self, v: usize, t: usize) -> &[f64; FEATURE_DIM] {
        &self.rows[v * self.num_bins + t]
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snapshot::EdgeCount;

    #[test]
    fn columns_match_hand_counts() {
        let e = |source, target, count| EdgeCount { source, target, count };
        let bins = vec![
            vec![e(1, 0, 2), e(2, 0, 1)],
            vec![e(0, 1, 1), e(0, 2, 3)],
            vec![e(1, 0, 1)],
        ];
        let snap = SnapshotSequence::from_bins(900, 0, vec![0, 1, 2], bins);
        let f = FeatureTable::build(&snap, 3, 2);
        assert_eq!(f.row(0, 0), &[2.0, 3.0, 0.0, 2.0, 3.0]);
        assert_eq!(f.row(0, 1), &[0.0, 0.0, 2.0, -2.0, 7.0]);
        // window of two bins drops bin 0
        assert_eq!(f.row(0, 2), &[1.0, 1.0, 0.0, 1.0, 5.0]);
        assert_eq!(f.row(1, 2), &[0.0, 0.0, 1.0, -1.0, 2.0]);
    }
}
