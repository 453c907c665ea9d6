//! Rolling z-score on the in-degree series over a past-only window.

use alloc::string::String;

use super::{bad, DetectContext, Detector, DetectorError, DetectorSpec, Params, PredictionSeries, TrainLabels, Verdict};
use crate::snapshot::SnapshotSequence;
use crate::stats::exceeds_mean_k_std;

#[derive(Debug, Clone)]
pub struct RollingZScoreDetector {
    name: String,
    k: f64,
}

impl RollingZScoreDetector {
    pub const DEFAULT_K: f64 = 2.0;

    pub fn new(name: String, k: f64) -> Self {
        RollingZScoreDetector { name, k }
    }

    pub fn from_spec(name: String, spec: &DetectorSpec) -> Result<Self, DetectorError> {
        let p = Params::new(spec, &["k"])?;
        let k = p.number("k")?.unwrap_or(Self::DEFAULT_K);
        if k < 0.0 {
            return Err(bad("k", "must be non-negative"));
        }
        Ok(Self::new(name, k))
    }
}

impl Detector for RollingZScoreDetector {
    fn name(&self) -> &str {
        &self.name
    }

    /// Flags `(v, t + lag)` when `N_t(v) > mean + k * popstd` of `N(v)` over
    /// `[t - w, t - 1]`. A zero-variance window flags iff `N_t(v)` exceeds the
    /// mean.
    fn predict(
        &self,
        snap: &SnapshotSequence,
        _train: &TrainLabels<'_>,
        ctx: &DetectContext,
    ) -> Result<PredictionSeries, DetectorError> {
        ctx.validate(snap)?;
        let degrees = snap.degree_table();
        let w = ctx.window;
        let mut out = PredictionSeries::new(snap.node_count(), ctx.targets.clone(), ctx.lag);
        out.fill(|v, s| match ctx.source_bin(s) {
            Some(t) if t >= w => {
                let series = degrees.series(v);
                if exceeds_mean_k_std(&series[t - w..t], series[t], self.k) {
                    Verdict::Anomalous
                } else {
                    Verdict::Normal
                }
            }
            _ => Verdict::Abstain,
        });
        Ok(out)
    }
}
