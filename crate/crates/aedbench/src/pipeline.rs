use std::path::Path;

use aedbench_core::detectors::Detector;
use aedbench_core::evaluation::{self, run_cell, BenchDetector, BenchReport, Instance};
use aedbench_core::graph::TemporalGraph;
use aedbench_core::generator::generate;
use aedbench_core::labeler::{label_graph, LabelError};
use aedbench_core::sampling::sample_instances;
use aedbench_core::sensitivity::{self, run_point, PopulationSource, SensitivityInputs, SensitivityReport};
use aedbench_core::snapshot::{bin_events_in_span, SnapshotSequence, TimeSpan};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::events::read_events;
use crate::plugin::build_detector;

pub fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        b = b.num_threads(j);
    }
    b.build().map_err(|e| CliError::Usage(e.to_string()))
}

/// Reads an events file into a graph. An empty file has no bins, so it
/// reports the labeler's length error for `z`.
pub fn graph_from_events(path: &Path, z: usize) -> Result<TemporalGraph> {
    let file = read_events(path)?;
    if file.events.is_empty() && file.nodes.is_none() {
        return Err(LabelError::SequenceTooShort { num_bins: 0, z }.into());
    }
    file.into_graph()
}

/// The population's parent graph: an explicit events file, the ingest file,
/// or a fresh generator run.
pub fn base_graph(config: &ExperimentConfig, events: Option<&Path>) -> Result<TemporalGraph> {
    let z = config.labeler.z;
    match (events, &config.generator, &config.ingest) {
        (Some(p), _, _) => graph_from_events(p, z),
        (None, Some(g), _) => Ok(generate(g)?),
        (None, None, Some(i)) => graph_from_events(&i.path, z),
        (None, None, None) => Err(CliError::Config("no event source".into())),
    }
}

/// Span every instance is binned over.
pub fn common_span(config: &ExperimentConfig, graph: &TemporalGraph) -> Result<TimeSpan> {
    match config.span() {
        Some(s) => Ok(s),
        None => {
            let (start, end) = graph
                .time_range()
                .ok_or(LabelError::SequenceTooShort { num_bins: 0, z: config.labeler.z })?;
            Ok(TimeSpan::new(start, end))
        }
    }
}

pub fn sample_snapshots(config: &ExperimentConfig, graph: &TemporalGraph) -> Result<Vec<SnapshotSequence>> {
    let s = &config.sampling;
    let span = common_span(config, graph)?;
    sample_instances(graph, s.instances, s.target_size, s.seed, s.direction)?
        .iter()
        .map(|g| Ok(bin_events_in_span(g, config.bin_width(), Some(span))?))
        .collect()
}

pub fn label_instances(config: &ExperimentConfig, snaps: Vec<SnapshotSequence>) -> Result<Vec<Instance>> {
    let rules = config.labeler;
    snaps
        .into_par_iter()
        .enumerate()
        .map(|(id, snap)| Ok(Instance { id, labels: label_graph(&snap, &rules)?, snap }))
        .collect()
}

pub fn build_detectors(config: &ExperimentConfig) -> Result<Vec<BenchDetector>> {
    config
        .detectors
        .iter()
        .map(|spec| Ok(BenchDetector { detector: build_detector(spec)?, window: spec.window }))
        .collect()
}

/// Every (instance, detector) cell in parallel; the report is independent
/// of scheduling.
pub fn run_bench(config: &ExperimentConfig, instances: &[Instance], detectors: &[BenchDetector]) -> BenchReport {
    let params = config.bench_params();
    let names: Vec<String> = detectors.iter().map(|d| d.detector.name().to_string()).collect();
    let cells: Vec<(usize, usize)> =
        (0..detectors.len()).flat_map(|d| (0..instances.len()).map(move |i| (d, i))).collect();
    let results = cells
        .into_par_iter()
        .map(|(d, i)| {
            let det: &dyn Detector = detectors[d].detector.as_ref();
            (d, run_cell(det, detectors[d].window, &instances[i], &params))
        })
        .collect();
    evaluation::assemble_report(params, instances.len(), &names, results)
}

/// Every grid point of every test in parallel.
pub fn run_sense(
    config: &ExperimentConfig,
    graph: &TemporalGraph,
    instances: &[Instance],
    detectors: &[BenchDetector],
    baseline: &BenchReport,
) -> Result<SensitivityReport> {
    let specs = &config.sensitivity.tests;
    let inputs = SensitivityInputs {
        instances,
        detectors,
        baseline,
        params: config.bench_params(),
        rules: config.labeler,
        labels: config.sensitivity.labels,
        population: Some(PopulationSource {
            graph,
            instances: config.sampling.instances,
            direction: config.sampling.direction,
            bin_width: config.bin_width(),
            span: Some(common_span(config, graph)?),
        }),
    };
    let mut jobs = Vec::new();
    for (s, spec) in specs.iter().enumerate() {
        for (i, p) in spec.grid(config.labeler.z)?.into_iter().enumerate() {
            jobs.push((s, i, p));
        }
    }
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(s, i, p)| run_point(&inputs, &specs[s], i, p))
        .collect();
    let mut grouped: Vec<Vec<_>> = specs.iter().map(|_| Vec::new()).collect();
    for (&(s, _, _), r) in jobs.iter().zip(results) {
        grouped[s].push(r);
    }
    Ok(sensitivity::assemble_report(&inputs, specs, grouped))
}
