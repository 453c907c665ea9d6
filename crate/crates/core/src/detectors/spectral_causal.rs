//! Causal ego-matrix spectral detector over the trailing window.

use alloc::string::String;

use super::{DetectContext, Detector, DetectorError, DetectorSpec, Params, PredictionSeries, TrainLabels, Verdict};
use crate::snapshot::SnapshotSequence;
use crate::spectral::{ego_counts, EgoScratch};

#[derive(Debug, Clone)]
pub struct SpectralCausalDetector {
    name: String,
    threshold: f64,
}

impl SpectralCausalDetector {
    pub const DEFAULT_THRESHOLD: f64 = 1.0;

    pub fn new(name: String, threshold: f64) -> Self {
        SpectralCausalDetector { name, threshold }
    }

    pub fn from_spec(name: String, spec: &DetectorSpec) -> Result<Self, DetectorError> {
        let p = Params::new(spec, &["threshold"])?;
        Ok(Self::new(name, p.number("threshold")?.unwrap_or(Self::DEFAULT_THRESHOLD)))
    }
}

impl Detector for SpectralCausalDetector {
    fn name(&self) -> &str {
        &self.name
    }

    /// Flags `(v, t + lag)` when the window-normalized ego matrix of `v` over
    /// `[t - w + 1, t]` has spectral radius above the threshold.
    fn predict(
        &self,
        snap: &SnapshotSequence,
        _train: &TrainLabels<'_>,
        ctx: &DetectContext,
    ) -> Result<PredictionSeries, DetectorError> {
        ctx.validate(snap)?;
        let w = ctx.window;
        let mut scratch = EgoScratch::default();
        let mut out = PredictionSeries::new(snap.node_count(), ctx.targets.clone(), ctx.lag);
        out.fill(|v, s| match ctx.source_bin(s) {
            Some(t) if t + 1 >= w => {
                let counts = ego_counts(snap, v, t + 1 - w..=t, &mut scratch);
                if counts.exceeds(self.threshold, true) {
                    Verdict::Anomalous
                } else {
                    Verdict::Normal
                }
            }
            _ => Verdict::Abstain,
        });
        out.calibration.threshold = Some(self.threshold);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeler::LabelMatrix;
    use crate::snapshot::EdgeCount;
    use alloc::vec;
    use alloc::vec::Vec;

    fn run(bins: Vec<Vec<EdgeCount>>, w: usize, targets: core::ops::Range<usize>) -> PredictionSeries {
        let t_len = bins.len();
        let snap = SnapshotSequence::from_bins(900, 0, vec![0, 1, 2], bins);
        let labels = LabelMatrix::empty(3, t_len, 1).unwrap();
        SpectralCausalDetector::new("s".into(), 1.0)
            .predict(
                &snap,
                &TrainLabels::new(&labels, targets.start),
                &DetectContext { window: w, lag: 1, fit_end: targets.start, targets },
            )
            .unwrap()
    }

    #[test]
    fn silent_graph_never_flags() {
        let p = run((0..10).map(|_| Vec::new()).collect(), 3, 5..10);
        assert_eq!(p.count(Verdict::Anomalous), 0);
    }

    #[test]
    fn two_events_per_bin_flags() {
        let bins = (0..10).map(|_| vec![EdgeCount { source: 1, target: 0, count: 2 }]).collect();
        let p = run(bins, 4, 5..10);
        for s in 5..10 {
            assert_eq!(p.get(0, s), Some(Verdict::Anomalous));
            assert_eq!(p.get(1, s), Some(Verdict::Anomalous));
            assert_eq!(p.get(2, s), Some(Verdict::Normal));
        }
    }

    #[test]
    fn one_event_per_bin_is_the_boundary() {
        let bins = (0..10).map(|_| vec![EdgeCount { source: 1, target: 0, count: 1 }]).collect();
        let p = run(bins, 4, 5..10);
        assert_eq!(p.count(Verdict::Anomalous), 0);
    }
}
