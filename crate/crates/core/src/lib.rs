//! Core of the anomaly-emergence benchmark for temporal interaction graphs.
//!
//! Everything here is pure computation over in-memory data and builds without
//! `std`: the temporal graph model and its binning into snapshot sequences,
//! BFS instance sampling, the synthetic interaction-stream generator, the
//! three ground-truth labeling rules, the native causal detectors, the
//! evaluation protocol (temporal split, weighted F1, window grid search,
//! population aggregation) and the four sensitivity tests.
//!
//! File formats, configuration, the plugin subprocess driver and the CLI live
//! in the `aedbench` companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod detectors;
pub mod evaluation;
pub mod generator;
pub mod graph;
pub mod labeler;
pub mod rng;
pub mod sampling;
pub mod sensitivity;
pub mod snapshot;
pub mod spectral;
pub mod stats;

pub use detectors::{
    build_native, DetectContext, Detector, DetectorError, DetectorKind, DetectorSpec,
    ParamValue, PredictionSeries, TrainLabels, Verdict,
};
pub use evaluation::{benchmark, BenchParams, BenchReport, Instance, SplitSpec};
pub use generator::{generate, BurstCenter, BurstSpec, GeneratorConfig};
pub use graph::{build_graph, Action, GraphError, InteractionEvent, NodeId, TemporalGraph};
pub use labeler::{label_graph, LabelMatrix, RuleMask, RuleParams};
pub use sampling::{bfs_sample, sample_instances, BfsDirection};
pub use sensitivity::{SensitivityReport, SensitivitySpec};
pub use snapshot::{bin_events, SnapshotSequence, TimeSpan, DEFAULT_BIN_WIDTH};
