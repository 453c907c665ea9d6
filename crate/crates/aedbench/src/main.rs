use std::path::PathBuf;
use std::process::ExitCode;

use aedbench::commands::{self, RunOptions};
use aedbench::error::{CliError, Result};
use aedbench_core::sensitivity::LabelMode;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Anomaly-emergence benchmark for temporal interaction graphs.
#[derive(Parser)]
#[command(name = "aedbench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the top-level seed; component seeds not set in the config
    /// are derived from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the config's output_dir, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Parallel {
    /// Worker threads (default: one per core).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct Source {
    /// Events file used instead of the configured generator or ingest path.
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Args)]
struct LabelsDir {
    /// Labels written by `label` for the same config; recomputed when absent.
    #[arg(long)]
    labels_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Labels {
    Frozen,
    Recomputed,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic event stream.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Validate an events file and write it in canonical form.
    Ingest {
        events: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Sample the instance population and write its labels.
    Label {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        parallel: Parallel,
    },
    /// Score every detector on every instance.
    Bench {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        labels: LabelsDir,
        #[command(flatten)]
        parallel: Parallel,
    },
    /// Run the perturbation tests.
    Sense {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        labels_dir: LabelsDir,
        #[command(flatten)]
        parallel: Parallel,
        /// Ground truth on perturbed graphs.
        #[arg(long, value_enum)]
        labels: Option<Labels>,
    },
    /// Merge bench and sense outputs that share a config hash.
    Report {
        /// Output directories or report files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
}

fn options(common: Common) -> RunOptions {
    RunOptions { config: common.config, seed: common.seed, out: common.out, ..RunOptions::default() }
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Generate { common } => commands::generate(&options(common)),
        Command::Ingest { events, out } => commands::ingest(&events, &out),
        Command::Label { common, source, parallel } => commands::label(&RunOptions {
            events: source.events,
            jobs: parallel.jobs,
            ..options(common)
        }),
        Command::Bench { common, source, labels, parallel } => {
            let opts = RunOptions { events: source.events, labels_dir: labels.labels_dir, jobs: parallel.jobs, ..options(common) };
            commands::bench(&opts).map(|(_, files)| files)
        }
        Command::Sense { common, source, labels_dir, parallel, labels } => {
            let opts = RunOptions {
                events: source.events,
                labels_dir: labels_dir.labels_dir,
                jobs: parallel.jobs,
                label_mode: labels.map(|l| match l {
                    Labels::Frozen => LabelMode::Frozen,
                    Labels::Recomputed => LabelMode::Recomputed,
                }),
                ..options(common)
            };
            commands::sense(&opts).map(|(_, files)| files)
        }
        Command::Report { inputs, out } => commands::report(&inputs, &out),
    }
}

fn fail(err: &CliError) -> ExitCode {
    let record = serde_json::to_string(&err.record()).expect("error record serializes");
    eprintln!("{record}");
    ExitCode::from(err.kind().exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Usage(e.render().to_string().trim().to_string())),
    };
    match run(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
