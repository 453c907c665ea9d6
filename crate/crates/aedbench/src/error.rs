use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use aedbench_core::detectors::DetectorError;
use aedbench_core::evaluation::EvalError;
use aedbench_core::generator::InvalidConfig;
use aedbench_core::graph::GraphError;
use aedbench_core::labeler::LabelError;
use aedbench_core::sampling::SamplingError;
use aedbench_core::sensitivity::SensitivityError;
use aedbench_core::snapshot::SnapshotError;
use serde::Serialize;
use thiserror::Error;

/// Error category; each maps to one process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Usage,
    Config,
    Parse,
    Domain,
    Plugin,
    Io,
    ReportMismatch,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage | ErrorKind::Config => 2,
            ErrorKind::Parse => 3,
            ErrorKind::Domain => 4,
            ErrorKind::Plugin => 5,
            ErrorKind::Io => 6,
            ErrorKind::ReportMismatch => 7,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Generator(#[from] InvalidConfig),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Sensitivity(#[from] SensitivityError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("config hash mismatch: {first} vs {second} ({path})")]
    ReportMismatch { first: String, second: String, path: PathBuf },
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn parse(path: &Path, line: u64, message: impl fmt::Display) -> Self {
        CliError::Parse { path: path.to_path_buf(), line, message: message.to_string() }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            CliError::Usage(_) => ErrorKind::Usage,
            CliError::Config(_) => ErrorKind::Config,
            CliError::Parse { .. } => ErrorKind::Parse,
            CliError::Detector(
                DetectorError::PluginCrash { .. }
                | DetectorError::ProtocolViolation(_)
                | DetectorError::Timeout { .. }
                | DetectorError::PluginIo(_),
            ) => ErrorKind::Plugin,
            CliError::Detector(DetectorError::InvalidHyperparameter { .. } | DetectorError::NotNative(_)) => {
                ErrorKind::Config
            }
            CliError::Sensitivity(SensitivityError::InvalidGrid { .. }) => ErrorKind::Config,
            CliError::Label(LabelError::InvalidParams(_)) | CliError::Generator(_) => ErrorKind::Config,
            CliError::Io { .. } => ErrorKind::Io,
            CliError::ReportMismatch { .. } => ErrorKind::ReportMismatch,
            _ => ErrorKind::Domain,
        }
    }

    /// Machine-readable record written to stderr.
    pub fn record(&self) -> ErrorRecord {
        let (path, line) = match self {
            CliError::Parse { path, line, .. } => (Some(path.display().to_string()), Some(*line)),
            CliError::Io { path, .. } | CliError::ReportMismatch { path, .. } => (Some(path.display().to_string()), None),
            _ => (None, None),
        };
        ErrorRecord {
            error: self.kind(),
            code: self.kind().exit_code(),
            message: self.to_string(),
            path,
            line,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub error: ErrorKind,
    pub code: i32,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<u64>,
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
