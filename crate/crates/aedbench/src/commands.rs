//! One function per CLI verb. Each returns the files it wrote.

use std::path::{Path, PathBuf};

use aedbench_core::evaluation::{BenchReport, Instance};
use aedbench_core::sensitivity::{LabelMode, SensitivityReport};

use crate::config::{file_digest, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::events::{read_events, write_events};
use crate::labels::{read_labels, write_labels, LabelsFile};
use crate::output::Provenance;
use crate::pipeline;
use crate::report;

/// Options shared by the config-driven verbs.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    /// Events file replacing the configured source.
    pub events: Option<PathBuf>,
    /// Directory of labels files written by `label`.
    pub labels_dir: Option<PathBuf>,
    pub label_mode: Option<LabelMode>,
}

impl RunOptions {
    pub fn load(&self) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::load(&self.config, self.seed)?;
        if let Some(events) = &self.events {
            config = config.with_events(events)?;
        }
        if let Some(mode) = self.label_mode {
            config.sensitivity.labels = mode;
        }
        Ok(config)
    }

    fn out_dir(&self, config: &ExperimentConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

pub fn labels_path(dir: &Path, instance: usize) -> PathBuf {
    dir.join(format!("instance_{instance:03}.labels"))
}

pub fn generate(opts: &RunOptions) -> Result<Vec<PathBuf>> {
    let config = opts.load()?;
    let Some(gen) = &config.generator else {
        return Err(CliError::Config("generate needs a [generator] section".into()));
    };
    let graph = aedbench_core::generator::generate(gen)?;
    let path = opts.out_dir(&config).join("events.csv");
    write_events(&path, &graph, &Provenance::new(config.hash()))?;
    Ok(vec![path])
}

/// Validates an events file and writes it back in canonical order. The
/// stamp carries the input's digest since there is no config.
pub fn ingest(input: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let digest = file_digest(input)?;
    let graph = read_events(input)?.into_graph()?;
    let path = out.join("events.csv");
    write_events(&path, &graph, &Provenance::new(digest))?;
    Ok(vec![path])
}

fn instances(config: &ExperimentConfig) -> Result<(aedbench_core::graph::TemporalGraph, Vec<Instance>)> {
    let graph = pipeline::base_graph(config, None)?;
    let snaps = pipeline::sample_snapshots(config, &graph)?;
    let instances = pipeline::label_instances(config, snaps)?;
    Ok((graph, instances))
}

pub fn label(opts: &RunOptions) -> Result<Vec<PathBuf>> {
    let config = opts.load()?;
    let pool = pipeline::thread_pool(opts.jobs)?;
    let (_, instances) = pool.install(|| instances(&config))?;
    let dir = opts.out_dir(&config).join("labels");
    let prov = Provenance::new(config.hash());
    let mut written = Vec::new();
    for inst in &instances {
        let path = labels_path(&dir, inst.id);
        write_labels(&path, &LabelsFile::from_matrix(&inst.labels, inst.snap.node_ids()), &prov)?;
        written.push(path);
    }
    Ok(written)
}

/// Swaps in labels written by an earlier `label` run of the same config.
fn load_labels(dir: &Path, instances: &mut [Instance], hash: &str) -> Result<()> {
    for inst in instances {
        let path = labels_path(dir, inst.id);
        let file = read_labels(&path)?;
        let found = file.provenance.as_ref().map_or("", |p| p.config_hash.as_str());
        if found != hash {
            return Err(CliError::ReportMismatch { first: hash.to_string(), second: found.to_string(), path });
        }
        if file.header.num_bins != inst.snap.num_bins() || file.header.z != inst.labels.z() {
            return Err(CliError::parse(&path, 1, "label geometry does not match the instance"));
        }
        inst.labels = file.to_matrix(inst.snap.node_ids(), &path)?;
    }
    Ok(())
}

struct Prepared {
    config: ExperimentConfig,
    graph: aedbench_core::graph::TemporalGraph,
    instances: Vec<Instance>,
    detectors: Vec<aedbench_core::evaluation::BenchDetector>,
    baseline: BenchReport,
}

fn prepare(opts: &RunOptions) -> Result<Prepared> {
    let config = opts.load()?;
    let detectors = pipeline::build_detectors(&config)?;
    let (graph, mut instances) = instances(&config)?;
    if let Some(dir) = &opts.labels_dir {
        load_labels(dir, &mut instances, &config.hash())?;
    }
    let baseline = pipeline::run_bench(&config, &instances, &detectors);
    Ok(Prepared { config, graph, instances, detectors, baseline })
}

pub fn bench(opts: &RunOptions) -> Result<(BenchReport, Vec<PathBuf>)> {
    let pool = pipeline::thread_pool(opts.jobs)?;
    let p = pool.install(|| prepare(opts))?;
    let dir = opts.out_dir(&p.config);
    report::write_bench(&dir, &p.baseline, &Provenance::new(p.config.hash()))?;
    let files = [report::BENCH_JSONL, report::BENCH_TXT, report::BENCH_F1_CSV].map(|f| dir.join(f)).to_vec();
    Ok((p.baseline, files))
}

pub fn sense(opts: &RunOptions) -> Result<(SensitivityReport, Vec<PathBuf>)> {
    let pool = pipeline::thread_pool(opts.jobs)?;
    let (config, rep) = pool.install(|| -> Result<_> {
        let p = prepare(opts)?;
        let rep = pipeline::run_sense(&p.config, &p.graph, &p.instances, &p.detectors, &p.baseline)?;
        Ok((p.config, rep))
    })?;
    let dir = opts.out_dir(&config);
    report::write_sense(&dir, &rep, &Provenance::new(config.hash()))?;
    Ok((rep, vec![dir.join(report::SENSE_JSON), dir.join(report::SENSE_TXT)]))
}

pub fn report(inputs: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>> {
    let merged = report::merge(inputs)?;
    report::write_merged(out, &merged)
}
