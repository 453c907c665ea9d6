//! Sensitivity tests: prediction lag, concept drift, spatial size and
//! spatial density.
//!
//! Lag, drift and density reuse each detector's window from the baseline
//! benchmark so only the tested axis moves; the size test resamples the
//! population and reruns the full benchmark, window search included. ΔF1 is
//! the mean over grid points of `F1(point) - F1(baseline)`, where the
//! baseline is the first grid point for lag, drift and size and the
//! unperturbed benchmark F1 for density.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{
    benchmark, score_with_window, temporal_split, BenchDetector, BenchParams, BenchReport, EvalError, Instance,
};
use crate::graph::TemporalGraph;
use crate::labeler::{label_graph, LabelError, RuleParams};
use crate::rng;
use crate::sampling::{sample_instances, BfsDirection, SamplingError};
use crate::snapshot::{bin_events_in_span, EdgeCount, SnapshotError, SnapshotSequence, TimeSpan};
use crate::stats::{mean, pop_std};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensitivityError {
    #[error("invalid {test} grid: {reason}")]
    InvalidGrid { test: SensitivityTest, reason: &'static str },
    #[error("degenerate graph: {0}")]
    DegenerateGraph(&'static str),
    #[error("the size test needs a base graph")]
    NoBaseGraph,
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensitivityTest {
    Lag,
    Drift,
    Size,
    Density,
}

impl SensitivityTest {
    pub const ALL: [SensitivityTest; 4] = [
        SensitivityTest::Lag,
        SensitivityTest::Drift,
        SensitivityTest::Size,
        SensitivityTest::Density,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SensitivityTest::Lag => "lag",
            SensitivityTest::Drift => "drift",
            SensitivityTest::Size => "size",
            SensitivityTest::Density => "density",
        }
    }
}

impl core::fmt::Display for SensitivityTest {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ground truth used for perturbed graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    /// Keep the labels of the unperturbed graph.
    Frozen,
    /// Relabel the perturbed graph.
    #[default]
    Recomputed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivitySpec {
    pub test: SensitivityTest,
    /// Explicit grid; defaults depend on the test.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<f64>>,
    #[serde(default)]
    pub rng_seed: u64,
    /// Default size grid is `size_base + size_step * i` for `i` in `0..=10`.
    #[serde(default = "default_size_base")]
    pub size_base: usize,
    #[serde(default = "default_size_step")]
    pub size_step: usize,
}

fn default_size_base() -> usize {
    450
}

fn default_size_step() -> usize {
    10
}

impl SensitivitySpec {
    pub fn new(test: SensitivityTest) -> Self {
        SensitivitySpec {
            test,
            points: None,
            rng_seed: 0,
            size_base: default_size_base(),
            size_step: default_size_step(),
        }
    }

    /// The default four-test suite.
    pub fn suite(seed: u64) -> Vec<SensitivitySpec> {
        SensitivityTest::ALL
            .iter()
            .map(|&t| SensitivitySpec {
                rng_seed: rng::derive_named(seed, t.as_str()),
                ..SensitivitySpec::new(t)
            })
            .collect()
    }

    /// Resolved, validated grid for half-width `z`.
    pub fn grid(&self, z: usize) -> Result<Vec<f64>, SensitivityError> {
        let points = match &self.points {
            Some(p) => p.clone(),
            None => match self.test {
                SensitivityTest::Lag => (1..=z).map(|l| l as f64).collect(),
                SensitivityTest::Drift => (0..=10).map(|i| i as f64 / 1000.0).collect(),
                SensitivityTest::Size => (0..=10).map(|i| (self.size_base + self.size_step * i) as f64).collect(),
                SensitivityTest::Density => (1..=10).map(|i| i as f64).collect(),
            },
        };
        let invalid = |reason| SensitivityError::InvalidGrid { test: self.test, reason };
        if points.is_empty() {
            return Err(invalid("no grid points"));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("points must be strictly increasing"));
        }
        let whole = |x: f64| x.is_finite() && libm::trunc(x) == x && x >= 1.0;
        match self.test {
            SensitivityTest::Drift if points.iter().any(|&p| !(0.0..=1.0).contains(&p)) => {
                Err(invalid("probabilities must lie in [0, 1]"))
            }
            SensitivityTest::Lag | SensitivityTest::Size | SensitivityTest::Density
                if points.iter().any(|&p| !whole(p)) =>
            {
                Err(invalid("points must be positive integers"))
            }
            _ => Ok(points),
        }
    }
}

/// Whether drift removes the edges of node `v` in bin `t`.
pub fn drift_selects(seed: u64, p: f64, v: usize, t: usize) -> bool {
    p > 0.0 && rng::unit(seed, v as u64, t as u64) < p
}

/// Removes, independently for every (node, bin) pair with probability `p`,
/// all edges incident to that node in that bin.
pub fn perturb_concept_drift(snap: &SnapshotSequence, p: f64, rng_seed: u64) -> SnapshotSequence {
    if p <= 0.0 {
        return snap.clone();
    }
    let bins = snap
        .bins()
        .iter()
        .enumerate()
        .map(|(t, bin)| {
            bin.edges()
                .iter()
                .filter(|e| {
                    !drift_selects(rng_seed, p, e.source as usize, t) && !drift_selects(rng_seed, p, e.target as usize, t)
                })
                .copied()
                .collect()
        })
        .collect();
    SnapshotSequence::from_bins(snap.bin_width(), snap.origin_bin(), snap.node_ids().to_vec(), bins)
}

/// Events added at bin `t`: `floor(e0 * t * i / 10^5)`.
pub fn density_additions(e0: usize, t: usize, i: u32) -> u64 {
    (e0 as u128 * t as u128 * u128::from(i) / 100_000) as u64
}

/// Adds `density_additions(|E_0|, t, i)` events at each bin `t`, with
/// endpoints uniform over ordered pairs of distinct nodes. `|E_0|` is the
/// number of distinct edges in bin 0.
pub fn perturb_spatial_density(snap: &SnapshotSequence, i: u32, rng_seed: u64) -> Result<SnapshotSequence, SensitivityError> {
    let n = snap.node_count();
    if n < 2 {
        return Err(SensitivityError::DegenerateGraph("needs at least two nodes"));
    }
    if snap.num_bins() == 0 || snap.bin(0).edges().is_empty() {
        return Err(SensitivityError::DegenerateGraph("bin 0 has no edges"));
    }
    let e0 = snap.bin(0).edges().len();
    let mut rng = rng::seeded(rng_seed);
    let mut bins = snap.edge_lists();
    for (t, edges) in bins.iter_mut().enumerate() {
        for _ in 0..density_additions(e0, t, i) {
            let source = rng.random_range(0..n);
            let mut target = rng.random_range(0..n - 1);
            if target >= source {
                target += 1;
            }
            edges.push(EdgeCount {
                source: source as u32,
                target: target as u32,
                count: 1,
            });
        }
    }
    Ok(SnapshotSequence::from_bins(snap.bin_width(), snap.origin_bin(), snap.node_ids().to_vec(), bins))
}

/// Where the size test draws its populations from.
#[derive(Debug, Clone, Copy)]
pub struct PopulationSource<'a> {
    pub graph: &'a TemporalGraph,
    pub instances: usize,
    pub direction: BfsDirection,
    pub bin_width: u64,
    /// Common span for binning; the graph's own span when `None`.
    pub span: Option<TimeSpan>,
}

/// Resamples `n` instances of `size` nodes and labels them.
pub fn resample_population(
    source: &PopulationSource<'_>,
    size: usize,
    rules: &RuleParams,
    seed: u64,
) -> Result<Vec<Instance>, SensitivityError> {
    let span = match source.span {
        Some(s) => s,
        None => {
            let (start, end) = source.graph.time_range().ok_or(SnapshotError::EmptyGraph)?;
            TimeSpan { start, end }
        }
    };
    sample_instances(source.graph, source.instances, size, seed, source.direction)?
        .iter()
        .enumerate()
        .map(|(id, g)| {
            let snap = bin_events_in_span(g, source.bin_width, Some(span))?;
            Ok(Instance::label(id, snap, rules)?)
        })
        .collect()
}

pub struct SensitivityInputs<'a> {
    pub instances: &'a [Instance],
    pub detectors: &'a [BenchDetector],
    /// Benchmark of `instances` with `detectors` at the baseline settings.
    pub baseline: &'a BenchReport,
    pub params: BenchParams,
    pub rules: RuleParams,
    pub labels: LabelMode,
    pub population: Option<PopulationSource<'a>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub point: f64,
    /// Mean F1 over scored instances; `None` when none scored.
    pub f1: Option<f64>,
    pub std: Option<f64>,
    pub scored: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

impl PointResult {
    fn from_scores(point: f64, f1s: &[f64], failures: Vec<String>) -> Self {
        let any = !f1s.is_empty();
        PointResult {
            point,
            f1: any.then(|| mean(f1s)),
            std: any.then(|| pop_std(f1s)),
            scored: f1s.len(),
            failures,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub detector: String,
    pub test: SensitivityTest,
    pub baseline: Option<f64>,
    pub points: Vec<PointResult>,
    /// Mean of `F1(point) - baseline` over points that scored.
    pub delta_f1: Option<f64>,
}

impl TestResult {
    fn new(detector: String, test: SensitivityTest, unperturbed: Option<f64>, points: Vec<PointResult>) -> Self {
        let baseline = match test {
            SensitivityTest::Density => unperturbed,
            _ => points.first().and_then(|p| p.f1),
        };
        let delta_f1 = delta_f1(baseline, &points);
        TestResult {
            detector,
            test,
            baseline,
            points,
            delta_f1,
        }
    }

    /// Whether `delta_f1` matches the stored per-point values to 1e-12.
    pub fn delta_consistent(&self) -> bool {
        match (delta_f1(self.baseline, &self.points), self.delta_f1) {
            (Some(a), Some(b)) => (a - b).abs() <= 1e-12,
            (None, None) => true,
            _ => false,
        }
    }
}

fn delta_f1(baseline: Option<f64>, points: &[PointResult]) -> Option<f64> {
    let base = baseline?;
    let diffs: Vec<f64> = points.iter().filter_map(|p| p.f1.map(|f| f - base)).collect();
    (!diffs.is_empty()).then(|| mean(&diffs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub labels: LabelMode,
    pub results: Vec<TestResult>,
}

impl SensitivityReport {
    pub fn result(&self, detector: &str, test: SensitivityTest) -> Option<&TestResult> {
        self.results.iter().find(|r| r.detector == detector && r.test == test)
    }

    pub fn deltas_consistent(&self) -> bool {
        self.results.iter().all(TestResult::delta_consistent)
    }
}

/// Seed for grid point `index` of a test.
pub fn point_seed(spec: &SensitivitySpec, index: usize) -> u64 {
    rng::derive(spec.rng_seed, index as u64)
}

fn perturbed_instance(
    inputs: &SensitivityInputs<'_>,
    inst: &Instance,
    test: SensitivityTest,
    point: f64,
    seed: u64,
) -> Result<Instance, SensitivityError> {
    let seed = rng::derive(seed, inst.id as u64);
    let snap = match test {
        SensitivityTest::Drift => perturb_concept_drift(&inst.snap, point, seed),
        SensitivityTest::Density => perturb_spatial_density(&inst.snap, point as u32, seed)?,
        SensitivityTest::Lag | SensitivityTest::Size => inst.snap.clone(),
    };
    let labels = match inputs.labels {
        LabelMode::Frozen => inst.labels.clone(),
        LabelMode::Recomputed => label_graph(&snap, &inputs.rules)?,
    };
    Ok(Instance {
        id: inst.id,
        snap,
        labels,
    })
}

/// Evaluates one grid point for every detector, in detector order.
pub fn run_point(inputs: &SensitivityInputs<'_>, spec: &SensitivitySpec, index: usize, point: f64) -> Vec<PointResult> {
    let seed = point_seed(spec, index);
    if spec.test == SensitivityTest::Size {
        return run_size_point(inputs, point, seed);
    }
    let lag = if spec.test == SensitivityTest::Lag { point as usize } else { inputs.params.lag };
    // perturbed instances are shared across detectors
    let perturbed: Vec<Result<Instance, String>> = inputs
        .instances
        .iter()
        .map(|inst| match spec.test {
            SensitivityTest::Lag => Ok(inst.clone()),
            _ => perturbed_instance(inputs, inst, spec.test, point, seed).map_err(|e| e.to_string()),
        })
        .collect();
    inputs
        .detectors
        .iter()
        .map(|det| {
            let name = det.detector.name();
            let summary = inputs.baseline.detector(name);
            let mut f1s = Vec::new();
            let mut failures = Vec::new();
            for (inst, pert) in inputs.instances.iter().zip(&perturbed) {
                let result = pert.clone().and_then(|pert| {
                    let window = if det.detector.windowed() {
                        summary
                            .and_then(|s| s.window_of(inst.id))
                            .ok_or_else(|| String::from("no baseline window"))?
                    } else {
                        det.window
                    };
                    let split = temporal_split(pert.snap.num_bins(), inputs.params.z, inputs.params.train_fraction)
                        .map_err(|e| e.to_string())?;
                    score_with_window(det.detector.as_ref(), &pert, &split, window, lag).map_err(|e| e.to_string())
                });
                match result {
                    Ok(s) => f1s.push(s.f1),
                    Err(e) => failures.push(format!("instance {}: {e}", inst.id)),
                }
            }
            PointResult::from_scores(point, &f1s, failures)
        })
        .collect()
}

fn run_size_point(inputs: &SensitivityInputs<'_>, point: f64, seed: u64) -> Vec<PointResult> {
    let population = inputs
        .population
        .as_ref()
        .ok_or(SensitivityError::NoBaseGraph)
        .and_then(|src| resample_population(src, point as usize, &inputs.rules, seed));
    match population {
        Err(e) => inputs
            .detectors
            .iter()
            .map(|_| PointResult::from_scores(point, &[], Vec::from([e.to_string()])))
            .collect(),
        Ok(instances) => benchmark(&instances, inputs.detectors, &inputs.params)
            .detectors
            .iter()
            .map(|d| {
                let failures = d
                    .cells
                    .iter()
                    .filter_map(|c| match &c.outcome {
                        crate::evaluation::CellOutcome::Failed { reason } => {
                            Some(format!("instance {}: {reason}", c.instance))
                        }
                        _ => None,
                    })
                    .collect();
                PointResult::from_scores(point, &d.f1_values(), failures)
            })
            .collect(),
    }
}

/// Assembles per-point results into one entry per (detector, test). `points`
/// holds, for each spec, the `run_point` output for each grid point in order.
pub fn assemble_report(
    inputs: &SensitivityInputs<'_>,
    specs: &[SensitivitySpec],
    points: Vec<Vec<Vec<PointResult>>>,
) -> SensitivityReport {
    let mut results = Vec::new();
    for (spec, per_point) in specs.iter().zip(points) {
        for (d, det) in inputs.detectors.iter().enumerate() {
            let name = det.detector.name().to_string();
            let unperturbed = inputs.baseline.detector(&name).filter(|s| s.scored > 0).map(|s| s.mean);
            let series = per_point.iter().map(|p| p[d].clone()).collect();
            results.push(TestResult::new(name, spec.test, unperturbed, series));
        }
    }
    SensitivityReport {
        labels: inputs.labels,
        results,
    }
}

/// Runs every test of `specs` sequentially.
pub fn run_sensitivity(inputs: &SensitivityInputs<'_>, specs: &[SensitivitySpec]) -> Result<SensitivityReport, SensitivityError> {
    let mut all = Vec::with_capacity(specs.len());
    for spec in specs {
        let grid = spec.grid(inputs.params.z)?;
        all.push(grid.iter().enumerate().map(|(i, &p)| run_point(inputs, spec, i, p)).collect());
    }
    Ok(assemble_report(inputs, specs, all))
}
