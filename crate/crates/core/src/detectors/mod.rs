//! Causal anomaly detectors behind one contract.
//!
//! A detector receives the whole snapshot sequence, the training labels and a
//! [`DetectContext`]. It predicts every target bin `s` from data in bins
//! `<= s - lag` only, and calibrates (thresholds, trees, rates) from bins
//! `< fit_end` only. Target cells without enough causal history abstain.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labeler::LabelMatrix;
use crate::snapshot::SnapshotSequence;

pub mod features;
pub mod isolation_forest;
pub mod matrix_profile;
pub mod random;
pub mod spectral_causal;
pub mod zscore;

pub use isolation_forest::{IsolationForest, IsolationForestDetector};
pub use matrix_profile::{MatrixProfile, MatrixProfileDetector};
pub use random::RandomDetector;
pub use spectral_causal::SpectralCausalDetector;
pub use zscore::RollingZScoreDetector;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectorError {
    #[error("hyperparameter `{key}`: {reason}")]
    InvalidHyperparameter { key: String, reason: &'static str },
    #[error("invalid detection context: {0}")]
    InvalidContext(&'static str),
    #[error("series of node {node} is too short for the subsequence length")]
    SeriesTooShort { node: usize },
    #[error("only {rows} training rows available")]
    InsufficientTrainRows { rows: usize },
    #[error("detector kind `{0}` is not native")]
    NotNative(DetectorKind),
    #[error("plugin exited abnormally (exit code {code:?})")]
    PluginCrash { code: Option<i32> },
    #[error("plugin protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("plugin exceeded the {seconds} s timeout")]
    Timeout { seconds: u64 },
    #[error("plugin I/O failure: {0}")]
    PluginIo(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Random,
    RollingZscore,
    MatrixProfile,
    IsolationForest,
    SpectralCausal,
    Plugin,
}

impl DetectorKind {
    pub const NATIVE: [DetectorKind; 5] = [
        DetectorKind::Random,
        DetectorKind::RollingZscore,
        DetectorKind::MatrixProfile,
        DetectorKind::IsolationForest,
        DetectorKind::SpectralCausal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::Random => "random",
            DetectorKind::RollingZscore => "rolling_zscore",
            DetectorKind::MatrixProfile => "matrix_profile",
            DetectorKind::IsolationForest => "isolation_forest",
            DetectorKind::SpectralCausal => "spectral_causal",
            DetectorKind::Plugin => "plugin",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Number(f64),
    Text(String),
    List(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    /// Report label; defaults to the kind name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub kind: DetectorKind,
    #[serde(default)]
    pub hyperparameters: BTreeMap<String, ParamValue>,
    /// History length in bins, used when the window is not grid-searched.
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_window() -> usize {
    1
}

impl DetectorSpec {
    pub fn new(kind: DetectorKind) -> Self {
        DetectorSpec {
            name: None,
            kind,
            hyperparameters: BTreeMap::new(),
            window: 1,
            rng_seed: 0,
        }
    }

    pub fn with_param(mut self, key: &str, value: ParamValue) -> Self {
        self.hyperparameters.insert(key.to_string(), value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.kind.as_str().to_string())
    }
}

/// Typed access to a spec's hyperparameters; rejects unknown keys.
pub(crate) struct Params<'a> {
    map: &'a BTreeMap<String, ParamValue>,
}

impl<'a> Params<'a> {
    pub(crate) fn new(spec: &'a DetectorSpec, allowed: &[&str]) -> Result<Self, DetectorError> {
        if let Some(key) = spec.hyperparameters.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(DetectorError::InvalidHyperparameter {
                key: key.clone(),
                reason: "unknown for this detector kind",
            });
        }
        Ok(Params {
            map: &spec.hyperparameters,
        })
    }

    pub(crate) fn number(&self, key: &str) -> Result<Option<f64>, DetectorError> {
        match self.map.get(key) {
            None => Ok(None),
            Some(ParamValue::Number(x)) if x.is_finite() => Ok(Some(*x)),
            Some(_) => Err(DetectorError::InvalidHyperparameter {
                key: key.to_string(),
                reason: "expected a finite number",
            }),
        }
    }

    pub(crate) fn count(&self, key: &str) -> Result<Option<usize>, DetectorError> {
        match self.number(key)? {
            None => Ok(None),
            Some(x) if x >= 0.0 && libm::trunc(x) == x => Ok(Some(x as usize)),
            Some(_) => Err(DetectorError::InvalidHyperparameter {
                key: key.to_string(),
                reason: "expected a non-negative integer",
            }),
        }
    }
}

pub(crate) fn bad(key: &str, reason: &'static str) -> DetectorError {
    DetectorError::InvalidHyperparameter {
        key: key.to_string(),
        reason,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Normal,
    Anomalous,
    Abstain,
}

/// Calibration artifacts fitted on the training region; echoed in reports.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Calibration {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_fingerprint: Option<u64>,
}

/// Verdicts for every node over a contiguous range of target bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSeries {
    node_count: usize,
    first_bin: usize,
    bin_count: usize,
    lag: usize,
    verdicts: Vec<Verdict>,
    pub calibration: Calibration,
}

impl PredictionSeries {
    /// All cells abstaining.
    pub fn new(node_count: usize, targets: Range<usize>, lag: usize) -> Self {
        PredictionSeries {
            node_count,
            first_bin: targets.start,
            bin_count: targets.len(),
            lag,
            verdicts: vec![Verdict::Abstain; node_count * targets.len()],
            calibration: Calibration::default(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn bins(&self) -> Range<usize> {
        self.first_bin..self.first_bin + self.bin_count
    }

    /// `None` when the cell lies outside the series.
    pub fn get(&self, v: usize, t: usize) -> Option<Verdict> {
        if v >= self.node_count || !self.bins().contains(&t) {
            return None;
        }
        Some(self.verdicts[v * self.bin_count + t - self.first_bin])
    }

    pub fn set(&mut self, v: usize, t: usize, verdict: Verdict) {
        assert!(v < self.node_count && self.bins().contains(&t), "cell ({v}, {t}) outside series");
        self.verdicts[v * self.bin_count + t - self.first_bin] = verdict;
    }

    pub fn count(&self, verdict: Verdict) -> usize {
        self.verdicts.iter().filter(|&&x| x == verdict).count()
    }

    /// Fills every cell from `f(v, t)`.
    pub fn fill(&mut self, mut f: impl FnMut(usize, usize) -> Verdict) {
        for v in 0..self.node_count {
            for t in self.bins() {
                self.verdicts[v * self.bin_count + t - self.first_bin] = f(v, t);
            }
        }
    }
}

/// Training labels restricted to bins `< fit_end`.
#[derive(Debug, Clone, Copy)]
pub struct TrainLabels<'a> {
    labels: &'a LabelMatrix,
    fit_end: usize,
}

impl<'a> TrainLabels<'a> {
    pub fn new(labels: &'a LabelMatrix, fit_end: usize) -> Self {
        TrainLabels { labels, fit_end }
    }

    pub fn fit_end(&self) -> usize {
        self.fit_end
    }

    pub fn node_count(&self) -> usize {
        self.labels.node_count()
    }

    pub fn label(&self, v: usize, t: usize) -> Option<bool> {
        (t < self.fit_end).then(|| self.labels.label(v, t)).flatten()
    }

    pub fn positive_rate(&self) -> Option<f64> {
        self.labels.positive_rate(0..self.fit_end)
    }

    /// Positive training cells, node-major.
    pub fn positives(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let fit_end = self.fit_end;
        self.labels
            .positives()
            .filter(move |&(_, t, _)| t < fit_end)
            .map(|(v, t, _)| (v, t))
    }

    pub fn z(&self) -> usize {
        self.labels.z()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectContext {
    /// History length in bins.
    pub window: usize,
    /// Bins between the last observed bin and the predicted bin.
    pub lag: usize,
    /// Calibration uses bins `< fit_end` only.
    pub fit_end: usize,
    pub targets: Range<usize>,
}

impl DetectContext {
    pub fn validate(&self, snap: &SnapshotSequence) -> Result<(), DetectorError> {
        if self.window == 0 {
            return Err(DetectorError::InvalidContext("window must be at least 1"));
        }
        if self.lag == 0 {
            return Err(DetectorError::InvalidContext("lag must be at least 1"));
        }
        if self.targets.end > snap.num_bins() || self.targets.is_empty() {
            return Err(DetectorError::InvalidContext("target bins outside the sequence"));
        }
        if self.fit_end > self.targets.start {
            return Err(DetectorError::InvalidContext("calibration region overlaps targets"));
        }
        Ok(())
    }

    /// Last observed bin for target `s`, if any.
    pub fn source_bin(&self, s: usize) -> Option<usize> {
        s.checked_sub(self.lag)
    }

    /// Last bin any prediction may read.
    pub fn horizon(&self) -> Option<usize> {
        (self.targets.end - 1).checked_sub(self.lag)
    }
}

pub trait Detector: Send + Sync {
    fn name(&self) -> &str;

    /// Whether predictions depend on `DetectContext::window`; grid search
    /// evaluates non-windowed detectors once.
    fn windowed(&self) -> bool {
        true
    }

    fn predict(
        &self,
        snap: &SnapshotSequence,
        train: &TrainLabels<'_>,
        ctx: &DetectContext,
    ) -> Result<PredictionSeries, DetectorError>;
}

/// Builds one of the native detectors from its spec.
pub fn build_native(spec: &DetectorSpec) -> Result<Box<dyn Detector>, DetectorError> {
    let name = spec.label();
    Ok(match spec.kind {
        DetectorKind::Random => Box::new(RandomDetector::from_spec(name, spec)?),
        DetectorKind::RollingZscore => Box::new(RollingZScoreDetector::from_spec(name, spec)?),
        DetectorKind::MatrixProfile => Box::new(MatrixProfileDetector::from_spec(name, spec)?),
        DetectorKind::IsolationForest => Box::new(IsolationForestDetector::from_spec(name, spec)?),
        DetectorKind::SpectralCausal => Box::new(SpectralCausalDetector::from_spec(name, spec)?),
        DetectorKind::Plugin => return Err(DetectorError::NotNative(DetectorKind::Plugin)),
    })
}

/// Applies a score-vs-threshold rule to every target cell.
pub(crate) fn flag(score: Option<f64>, threshold: f64) -> Verdict {
    match score {
        None => Verdict::Abstain,
        Some(s) if s > threshold => Verdict::Anomalous,
        Some(_) => Verdict::Normal,
    }
}
