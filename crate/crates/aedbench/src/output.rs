//! Atomic file output and the provenance stamp every output carries.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const TOOL: &str = "aedbench";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Tool version and config hash embedded in every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Provenance {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            config_hash: config_hash.into(),
        }
    }

    /// `# aedbench 0.1.0 config=<hash>`
    pub fn comment(&self) -> String {
        format!("# {} {} config={}", self.tool, self.version, self.config_hash)
    }

    /// Inverse of [`Provenance::comment`].
    pub fn parse_comment(line: &str) -> Option<Self> {
        let rest = line.strip_prefix("# ")?;
        let mut parts = rest.split(' ');
        let tool = parts.next()?;
        let version = parts.next()?;
        let hash = parts.next()?.strip_prefix("config=")?;
        parts.next().is_none().then(|| Provenance {
            tool: tool.to_string(),
            version: version.to_string(),
            config_hash: hash.to_string(),
        })
    }
}

/// Writes `bytes` to a temporary file beside `path`, then renames it over
/// `path`. Parent directories are created.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}
