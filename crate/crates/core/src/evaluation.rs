//! Temporal split, weighted F1, window grid search and population
//! aggregation.
//!
//! Each (instance, detector) cell runs independently: the window is chosen on
//! a validation slice carved from the end of the train region (calibration
//! stops where validation starts), then the detector is refit on the full
//! train region and scored on the test region at the requested lag. Cells
//! that fail are kept in the report with their reason.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::{Range, RangeInclusive};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detectors::{DetectContext, Detector, DetectorError, PredictionSeries, TrainLabels, Verdict};
use crate::labeler::{defined_range, LabelMatrix, LabelError, RuleParams};
use crate::snapshot::SnapshotSequence;
use crate::stats::{mean, pop_std};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("train fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("the test region is empty")]
    EmptyTestRegion,
    #[error("the validation slice holds no labeled bins")]
    EmptyValidationRegion,
    #[error("sequence of {num_bins} bins is too short for z = {z} (needs at least 2z + 4)")]
    SequenceTooShort { num_bins: usize, z: usize },
    #[error("predictions miss {count} scored cells, first {first:?}")]
    CoverageGap { count: usize, first: Vec<(usize, usize)> },
    #[error("labels use z = {labels} but the benchmark runs with z = {params}")]
    ZMismatch { labels: usize, params: usize },
    #[error("labels cover {labels:?} cells (nodes, bins) but the sequence has {snapshot:?}")]
    ShapeMismatch { labels: (usize, usize), snapshot: (usize, usize) },
    #[error("detector failed{}: {source}", window.map(|w| format!(" at window {w}")).unwrap_or_default())]
    Detector { window: Option<usize>, source: DetectorError },
    #[error(transparent)]
    Label(#[from] LabelError),
}

/// Raw train/test split at `floor(fraction * T)`, before any masking.
pub fn split_bins(num_bins: usize, train_fraction: f64) -> Result<(Range<usize>, Range<usize>), EvalError> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(EvalError::InvalidFraction(train_fraction));
    }
    // tolerance keeps e.g. 0.8 * 10 from rounding down to 7
    let boundary = (libm::floor(train_fraction * num_bins as f64 + 1e-9) as usize).min(num_bins);
    if boundary >= num_bins {
        return Err(EvalError::EmptyTestRegion);
    }
    Ok((0..boundary, boundary..num_bins))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub num_bins: usize,
    /// First test bin.
    pub boundary: usize,
    /// First validation bin; detector calibration during grid search stops here.
    pub validation_start: usize,
    /// Labeled bins.
    pub defined: RangeInclusive<usize>,
}

/// Splits `T` bins for labels with half-width `z`. The validation slice is
/// the last 20% of the train region.
pub fn temporal_split(num_bins: usize, z: usize, train_fraction: f64) -> Result<SplitSpec, EvalError> {
    let defined = defined_range(num_bins, z)
        .filter(|_| num_bins >= RuleParams::with_z(z).min_bins())
        .ok_or(EvalError::SequenceTooShort { num_bins, z })?;
    let (train, _) = split_bins(num_bins, train_fraction)?;
    let boundary = train.end;
    let validation_start = (boundary * 4) / 5;
    let split = SplitSpec {
        num_bins,
        boundary,
        validation_start,
        defined,
    };
    if split.scored_test_bins().is_empty() {
        return Err(EvalError::EmptyTestRegion);
    }
    Ok(split)
}

fn clip(bins: Range<usize>, defined: &RangeInclusive<usize>) -> Range<usize> {
    let lo = bins.start.max(*defined.start());
    let hi = bins.end.min(defined.end() + 1);
    lo..hi.max(lo)
}

impl SplitSpec {
    pub fn train_bins(&self) -> Range<usize> {
        0..self.boundary
    }

    pub fn test_bins(&self) -> Range<usize> {
        self.boundary..self.num_bins
    }

    pub fn validation_bins(&self) -> Range<usize> {
        self.validation_start..self.boundary
    }

    pub fn scored_test_bins(&self) -> Range<usize> {
        clip(self.test_bins(), &self.defined)
    }

    pub fn scored_validation_bins(&self) -> Range<usize> {
        clip(self.validation_bins(), &self.defined)
    }
}

/// Binary confusion counts; `true` is the anomalous class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut c = Confusion::default();
        for (truth, pred) in pairs {
            c.add(truth, pred);
        }
        c
    }

    pub fn add(&mut self, truth: bool, pred: bool) {
        match (truth, pred) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Supports `[anomalous, normal]`.
    pub fn support(&self) -> [usize; 2] {
        [self.tp + self.fn_, self.tn + self.fp]
    }

    /// Per-class F1 `[anomalous, normal]`; 0 where a class is never
    /// predicted and never true.
    pub fn class_f1(&self) -> [f64; 2] {
        let f1 = |hit: usize, predicted: usize, actual: usize| {
            if predicted + actual == 0 {
                0.0
            } else {
                2.0 * hit as f64 / (predicted + actual) as f64
            }
        };
        [
            f1(self.tp, self.tp + self.fp, self.tp + self.fn_),
            f1(self.tn, self.tn + self.fn_, self.tn + self.fp),
        ]
    }

    /// Support-weighted mean of the per-class F1 scores; 0 without cells.
    pub fn weighted_f1(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let [fa, fn_] = self.class_f1();
        let [sa, sn] = self.support();
        (sa as f64 * fa + sn as f64 * fn_) / total as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Outcome {
    pub f1: f64,
    pub confusion: Confusion,
    /// Labeled cells skipped because the detector abstained.
    pub abstained: usize,
}

/// Weighted F1 over every labeled `(v, t)` with `t` in `bins`. Abstentions
/// are excluded from both classes and counted; cells the predictions do not
/// cover are a `CoverageGap`.
pub fn weighted_f1(pred: &PredictionSeries, truth: &LabelMatrix, bins: Range<usize>) -> Result<F1Outcome, EvalError> {
    let bins = truth.defined_within(bins);
    let mut confusion = Confusion::default();
    let mut abstained = 0;
    let mut missing = 0;
    let mut first = Vec::new();
    for v in 0..truth.node_count() {
        for t in bins.clone() {
            let label = truth.label(v, t).expect("bin is defined");
            match pred.get(v, t) {
                None => {
                    missing += 1;
                    if first.len() < 8 {
                        first.push((v, t));
                    }
                }
                Some(Verdict::Abstain) => abstained += 1,
                Some(verdict) => confusion.add(label, verdict == Verdict::Anomalous),
            }
        }
    }
    if missing > 0 {
        return Err(EvalError::CoverageGap { count: missing, first });
    }
    Ok(F1Outcome {
        f1: confusion.weighted_f1(),
        confusion,
        abstained,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowChoice {
    /// `None` for detectors that ignore the window.
    pub window: Option<usize>,
    pub f1: f64,
    /// Validation F1 for each evaluated window, in grid order.
    pub scores: Vec<(usize, f64)>,
}

fn check_instance(snap: &SnapshotSequence, labels: &LabelMatrix, z: usize) -> Result<(), EvalError> {
    if labels.z() != z {
        return Err(EvalError::ZMismatch {
            labels: labels.z(),
            params: z,
        });
    }
    if (labels.node_count(), labels.num_bins()) != (snap.node_count(), snap.num_bins()) {
        return Err(EvalError::ShapeMismatch {
            labels: (labels.node_count(), labels.num_bins()),
            snapshot: (snap.node_count(), snap.num_bins()),
        });
    }
    Ok(())
}

/// Evaluates one fit: calibration on bins `< fit_end`, predictions over
/// `targets`, scored on the labeled part of `scored`.
pub fn evaluate_fit(
    detector: &dyn Detector,
    snap: &SnapshotSequence,
    labels: &LabelMatrix,
    ctx: &DetectContext,
    scored: Range<usize>,
) -> Result<(F1Outcome, PredictionSeries), EvalError> {
    let window = detector.windowed().then_some(ctx.window);
    let pred = detector
        .predict(snap, &TrainLabels::new(labels, ctx.fit_end), ctx)
        .map_err(|source| EvalError::Detector { window, source })?;
    Ok((weighted_f1(&pred, labels, scored)?, pred))
}

/// Picks the window in `1..=2z` with the best validation F1 (smallest window
/// on ties). Non-windowed detectors are evaluated once.
pub fn grid_search_window(
    detector: &dyn Detector,
    snap: &SnapshotSequence,
    labels: &LabelMatrix,
    split: &SplitSpec,
    z: usize,
    lag: usize,
) -> Result<WindowChoice, EvalError> {
    check_instance(snap, labels, z)?;
    if split.scored_validation_bins().is_empty() {
        return Err(EvalError::EmptyValidationRegion);
    }
    let grid: Vec<usize> = if detector.windowed() { (1..=2 * z.max(1)).collect() } else { Vec::from([1]) };
    let mut scores = Vec::with_capacity(grid.len());
    for &w in &grid {
        let ctx = DetectContext {
            window: w,
            lag,
            fit_end: split.validation_start,
            targets: split.validation_bins(),
        };
        let (outcome, _) = evaluate_fit(detector, snap, labels, &ctx, split.scored_validation_bins())?;
        scores.push((w, outcome.f1));
    }
    let (best_w, best_f1) = scores
        .iter()
        .copied()
        .fold((grid[0], f64::NEG_INFINITY), |best, (w, f)| if f > best.1 { (w, f) } else { best });
    Ok(WindowChoice {
        window: detector.windowed().then_some(best_w),
        f1: best_f1,
        scores,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchParams {
    pub z: usize,
    /// Bins between the last observed bin and the predicted bin.
    pub lag: usize,
    pub train_fraction: f64,
    /// When off, detectors run with the window from their spec.
    pub grid_search: bool,
}

impl Default for BenchParams {
    fn default() -> Self {
        BenchParams {
            z: RuleParams::default().z,
            lag: 1,
            train_fraction: 0.8,
            grid_search: true,
        }
    }
}

/// One labeled instance of the population.
#[derive(Debug, Clone)]
pub struct Instance {
    pub id: usize,
    pub snap: SnapshotSequence,
    pub labels: LabelMatrix,
}

impl Instance {
    /// Labels `snap` with `params`.
    pub fn label(id: usize, snap: SnapshotSequence, params: &RuleParams) -> Result<Self, EvalError> {
        let labels = crate::labeler::label_graph(&snap, params)?;
        Ok(Instance { id, snap, labels })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub f1: f64,
    pub window: Option<usize>,
    pub validation_f1: Option<f64>,
    pub confusion: Confusion,
    pub abstained: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_fingerprint: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub instance: usize,
    #[serde(flatten)]
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellOutcome {
    Scored(CellScore),
    Failed { reason: String },
}

impl CellResult {
    pub fn score(&self) -> Option<&CellScore> {
        match &self.outcome {
            CellOutcome::Scored(s) => Some(s),
            CellOutcome::Failed { .. } => None,
        }
    }
}

/// Runs one fit with a known window on the test region.
pub fn score_with_window(
    detector: &dyn Detector,
    instance: &Instance,
    split: &SplitSpec,
    window: usize,
    lag: usize,
) -> Result<CellScore, EvalError> {
    let ctx = DetectContext {
        window,
        lag,
        fit_end: split.boundary,
        targets: split.test_bins(),
    };
    let (outcome, pred) = evaluate_fit(detector, &instance.snap, &instance.labels, &ctx, split.scored_test_bins())?;
    Ok(CellScore {
        f1: outcome.f1,
        window: detector.windowed().then_some(window),
        validation_f1: None,
        confusion: outcome.confusion,
        abstained: outcome.abstained,
        threshold: pred.calibration.threshold,
        model_fingerprint: pred.calibration.model_fingerprint,
    })
}

fn try_cell(
    detector: &dyn Detector,
    default_window: usize,
    instance: &Instance,
    params: &BenchParams,
) -> Result<CellScore, EvalError> {
    check_instance(&instance.snap, &instance.labels, params.z)?;
    let split = temporal_split(instance.snap.num_bins(), params.z, params.train_fraction)?;
    let (window, validation_f1) = if params.grid_search {
        let choice = grid_search_window(detector, &instance.snap, &instance.labels, &split, params.z, params.lag)?;
        (choice.window.unwrap_or(default_window), Some(choice.f1))
    } else {
        (default_window, None)
    };
    let mut score = score_with_window(detector, instance, &split, window, params.lag)?;
    score.validation_f1 = validation_f1;
    Ok(score)
}

/// Grid search, refit and test scoring for one (instance, detector) pair.
pub fn run_cell(detector: &dyn Detector, default_window: usize, instance: &Instance, params: &BenchParams) -> CellResult {
    CellResult {
        instance: instance.id,
        outcome: match try_cell(detector, default_window, instance, params) {
            Ok(s) => CellOutcome::Scored(s),
            Err(e) => CellOutcome::Failed { reason: e.to_string() },
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSummary {
    pub detector: String,
    /// Mean F1 over scored instances (0 when none scored).
    pub mean: f64,
    /// Population standard deviation over scored instances.
    pub std: f64,
    pub scored: usize,
    pub failed: usize,
    pub cells: Vec<CellResult>,
}

impl DetectorSummary {
    pub fn from_cells(detector: String, cells: Vec<CellResult>) -> Self {
        let f1s: Vec<f64> = cells.iter().filter_map(|c| c.score().map(|s| s.f1)).collect();
        DetectorSummary {
            detector,
            mean: mean(&f1s),
            std: pop_std(&f1s),
            scored: f1s.len(),
            failed: cells.len() - f1s.len(),
            cells,
        }
    }

    pub fn f1_values(&self) -> Vec<f64> {
        self.cells.iter().filter_map(|c| c.score().map(|s| s.f1)).collect()
    }

    /// Whether the stored mean and std match the per-instance values to 1e-12.
    pub fn aggregates_consistent(&self) -> bool {
        let f1s = self.f1_values();
        (mean(&f1s) - self.mean).abs() <= 1e-12 && (pop_std(&f1s) - self.std).abs() <= 1e-12
    }

    /// Window chosen per instance, for cells that scored.
    pub fn window_of(&self, instance: usize) -> Option<usize> {
        self.cells
            .iter()
            .find(|c| c.instance == instance)
            .and_then(|c| c.score())
            .and_then(|s| s.window)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub params: BenchParams,
    pub instances: usize,
    pub detectors: Vec<DetectorSummary>,
}

impl BenchReport {
    pub fn detector(&self, name: &str) -> Option<&DetectorSummary> {
        self.detectors.iter().find(|d| d.detector == name)
    }

    pub fn aggregates_consistent(&self) -> bool {
        self.detectors.iter().all(DetectorSummary::aggregates_consistent)
    }
}

/// Groups cell results by detector (in the given detector order, cells
/// sorted by instance id) and computes the aggregates.
pub fn assemble_report(
    params: BenchParams,
    instances: usize,
    names: &[String],
    mut cells: Vec<(usize, CellResult)>,
) -> BenchReport {
    cells.sort_by_key(|(d, c)| (*d, c.instance));
    let mut grouped: Vec<Vec<CellResult>> = names.iter().map(|_| Vec::new()).collect();
    for (d, c) in cells {
        grouped[d].push(c);
    }
    BenchReport {
        params,
        instances,
        detectors: names
            .iter()
            .cloned()
            .zip(grouped)
            .map(|(n, c)| DetectorSummary::from_cells(n, c))
            .collect(),
    }
}

/// A detector with the window it uses when grid search is off.
pub struct BenchDetector {
    pub detector: Box<dyn Detector>,
    pub window: usize,
}

/// Runs every (instance, detector) cell sequentially.
pub fn benchmark(instances: &[Instance], detectors: &[BenchDetector], params: &BenchParams) -> BenchReport {
    let names: Vec<String> = detectors.iter().map(|d| d.detector.name().to_string()).collect();
    let mut cells = Vec::with_capacity(instances.len() * detectors.len());
    for (d, det) in detectors.iter().enumerate() {
        for inst in instances {
            cells.push((d, run_cell(det.detector.as_ref(), det.window, inst, params)));
        }
    }
    assemble_report(*params, instances.len(), &names, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::{DetectorKind, DetectorSpec, ParamValue, RandomDetector};
    use crate::snapshot::EdgeCount;
    use alloc::vec;

    #[test]
    fn split_examples() {
        assert_eq!(split_bins(10, 0.8).unwrap(), (0..8, 8..10));
        assert_eq!(split_bins(5, 0.8).unwrap(), (0..4, 4..5));
        assert_eq!(split_bins(10, 1.0), Err(EvalError::EmptyTestRegion));
        assert!(matches!(split_bins(10, 0.0), Err(EvalError::InvalidFraction(_))));
        assert!(matches!(temporal_split(5, 1, 0.8), Err(EvalError::SequenceTooShort { .. })));
        let s = temporal_split(200, 4, 0.8).unwrap();
        assert_eq!(s.test_bins(), 160..200);
        assert_eq!(s.scored_test_bins(), 160..195);
        assert_eq!(s.validation_bins(), 128..160);
    }

    #[test]
    fn confusion_example() {
        let c = Confusion::from_pairs([(true, true), (true, false), (false, false), (false, false)]);
        assert!((c.weighted_f1() - 11.0 / 15.0).abs() < 1e-12);
        let inverted = Confusion::from_pairs([(true, false), (false, true)]);
        assert_eq!(inverted.weighted_f1(), 0.0);
        assert_eq!(Confusion::from_pairs([(true, true), (false, false)]).weighted_f1(), 1.0);
        assert_eq!(Confusion::default().weighted_f1(), 0.0);
    }

    fn quiet_instance(id: usize, num_bins: usize) -> Instance {
        let bins = (0..num_bins)
            .map(|_| vec![EdgeCount { source: 0, target: 1, count: 1 }])
            .collect();
        let snap = SnapshotSequence::from_bins(900, 0, vec![10, 11, 12], bins);
        Instance::label(id, snap, &RuleParams::with_z(2)).unwrap()
    }

    #[test]
    fn forced_random_on_all_normal_truth_scores_zero() {
        let inst = quiet_instance(0, 40);
        assert_eq!(inst.labels.positives().count(), 0);
        let spec = DetectorSpec::new(DetectorKind::Random).with_param("probability", ParamValue::Number(1.0));
        let det = BenchDetector {
            detector: Box::new(RandomDetector::from_spec("random".into(), &spec).unwrap()),
            window: 1,
        };
        let params = BenchParams { z: 2, ..BenchParams::default() };
        let report = benchmark(&[inst.clone(), quiet_instance(1, 40)], &[det], &params);
        let d = report.detector("random").unwrap();
        assert_eq!(d.scored, 2);
        assert_eq!(d.mean, 0.0);
        assert_eq!(d.std, 0.0);
        assert!(report.aggregates_consistent());
    }

    #[test]
    fn z_mismatch_is_a_recorded_failure() {
        let inst = quiet_instance(3, 40);
        let det = RandomDetector::from_spec("r".into(), &DetectorSpec::new(DetectorKind::Random)).unwrap();
        let cell = run_cell(&det, 1, &inst, &BenchParams { z: 3, ..BenchParams::default() });
        assert!(matches!(cell.outcome, CellOutcome::Failed { .. }));
        assert_eq!(cell.instance, 3);
    }

    #[test]
    fn coverage_gap_reported() {
        let inst = quiet_instance(0, 40);
        let pred = PredictionSeries::new(3, 30..35, 1);
        let err = weighted_f1(&pred, &inst.labels, 30..36).unwrap_err();
        assert!(matches!(err, EvalError::CoverageGap { count: 3, .. }));
    }
}
