//! Random baseline: flags each cell with the training positive rate.

use alloc::string::String;

use super::{bad, DetectContext, Detector, DetectorError, DetectorSpec, Params, PredictionSeries, TrainLabels, Verdict};
use crate::rng;
use crate::snapshot::SnapshotSequence;

pub const MIN_PROBABILITY: f64 = 0.001;
pub const MAX_PROBABILITY: f64 = 0.999;

#[derive(Debug, Clone)]
pub struct RandomDetector {
    name: String,
    /// Fixed flag probability; overrides the training rate and the clamp.
    probability: Option<f64>,
    seed: u64,
}

impl RandomDetector {
    pub fn new(name: String, probability: Option<f64>, seed: u64) -> Self {
        RandomDetector {
            name,
            probability,
            seed,
        }
    }

    pub fn from_spec(name: String, spec: &DetectorSpec) -> Result<Self, DetectorError> {
        let p = Params::new(spec, &["probability"])?;
        let probability = p.number("probability")?;
        if probability.is_some_and(|x| !(0.0..=1.0).contains(&x)) {
            return Err(bad("probability", "must lie in [0, 1]"));
        }
        Ok(Self::new(name, probability, spec.rng_seed))
    }

    /// Flag probability for the given training labels.
    pub fn probability(&self, train: &TrainLabels<'_>) -> f64 {
        self.probability.unwrap_or_else(|| {
            train
                .positive_rate()
                .unwrap_or(0.0)
                .clamp(MIN_PROBABILITY, MAX_PROBABILITY)
        })
    }
}

impl Detector for RandomDetector {
    fn name(&self) -> &str {
        &self.name
    }

    fn windowed(&self) -> bool {
        false
    }

    fn predict(
        &self,
        snap: &SnapshotSequence,
        train: &TrainLabels<'_>,
        ctx: &DetectContext,
    ) -> Result<PredictionSeries, DetectorError> {
        ctx.validate(snap)?;
        let p = self.probability(train);
        let mut out = PredictionSeries::new(snap.node_count(), ctx.targets.clone(), ctx.lag);
        // one independent draw per (node, bin), independent of the target range
        out.fill(|v, t| {
            if rng::unit(self.seed, v as u64, t as u64) < p {
                Verdict::Anomalous
            } else {
                Verdict::Normal
            }
        });
        out.calibration.threshold = Some(p);
        Ok(out)
    }
}
