//! Experiment configuration. One TOML file drives every command; a single
//! top-level `seed` derives each component seed that the file leaves out, so
//! the resolved config is fully explicit and hashes to a stable identity.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use aedbench_core::detectors::{DetectorKind, DetectorSpec, ParamValue};
use aedbench_core::evaluation::BenchParams;
use aedbench_core::generator::GeneratorConfig;
use aedbench_core::labeler::RuleParams;
use aedbench_core::rng;
use aedbench_core::sampling::BfsDirection;
use aedbench_core::sensitivity::{LabelMode, SensitivitySpec};
use aedbench_core::snapshot::{TimeSpan, DEFAULT_BIN_WIDTH};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    /// Events file; relative paths resolve against the config file.
    pub path: PathBuf,
    #[serde(default = "default_bin_width")]
    pub bin_width: u64,
    /// SHA-256 of the events file. Once known it stands in for the path in
    /// the config hash, so the same data hashes the same from any directory.
    #[serde(skip)]
    pub digest: Option<String>,
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn default_bin_width() -> u64 {
    DEFAULT_BIN_WIDTH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub instances: usize,
    pub target_size: usize,
    #[serde(default)]
    pub direction: BfsDirection,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub train_fraction: f64,
    pub lag: usize,
    pub grid_search: bool,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        let p = BenchParams::default();
        EvaluationConfig { train_fraction: p.train_fraction, lag: p.lag, grid_search: p.grid_search }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityConfig {
    #[serde(default)]
    pub labels: LabelMode,
    pub tests: Vec<SensitivitySpec>,
}

/// Fully resolved experiment: every seed explicit, defaults expanded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingest: Option<IngestConfig>,
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub labeler: RuleParams,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    pub detectors: Vec<DetectorSpec>,
    pub sensitivity: SensitivityConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// Child seed for a config component, kept below 2^63 so it fits a TOML
/// integer.
pub fn component_seed(seed: u64, tag: &str) -> u64 {
    rng::derive_named(seed, tag) & i64::MAX as u64
}

fn seed_value(seed: u64) -> toml::Value {
    toml::Value::Integer(seed as i64)
}

fn fill_seed(table: &mut toml::Table, key: &str, seed: u64) {
    table.entry(key).or_insert_with(|| seed_value(seed));
}

fn default_detectors() -> Vec<toml::Value> {
    DetectorKind::NATIVE
        .iter()
        .map(|k| {
            let mut t = toml::Table::new();
            t.insert("kind".into(), toml::Value::String(k.as_str().into()));
            toml::Value::Table(t)
        })
        .collect()
}

fn default_tests() -> Vec<toml::Value> {
    aedbench_core::sensitivity::SensitivityTest::ALL
        .iter()
        .map(|t| {
            let mut table = toml::Table::new();
            table.insert("test".into(), toml::Value::String(t.as_str().into()));
            toml::Value::Table(table)
        })
        .collect()
}

fn config_err(msg: impl std::fmt::Display) -> CliError {
    CliError::Config(msg.to_string())
}

impl ExperimentConfig {
    /// Parses `text`, applies `seed_override` to the top-level seed and
    /// derives every component seed the file omits.
    pub fn from_toml(text: &str, seed_override: Option<u64>) -> Result<Self> {
        let mut root: toml::Table = text.parse().map_err(config_err)?;
        if let Some(s) = seed_override {
            root.insert("seed".into(), seed_value(s & i64::MAX as u64));
        }
        let seed = match root.get("seed") {
            Some(toml::Value::Integer(s)) if *s >= 0 => *s as u64,
            Some(_) => return Err(config_err("`seed` must be a non-negative integer")),
            None => return Err(config_err("missing top-level `seed`")),
        };
        if let Some(toml::Value::Table(g)) = root.get_mut("generator") {
            fill_seed(g, "rng_seed", component_seed(seed, "generator"));
        }
        if let Some(toml::Value::Table(s)) = root.get_mut("sampling") {
            fill_seed(s, "seed", component_seed(seed, "sampling"));
        }
        let detectors = root.entry("detectors").or_insert_with(|| toml::Value::Array(default_detectors()));
        if let toml::Value::Array(list) = detectors {
            for (i, d) in list.iter_mut().enumerate() {
                if let toml::Value::Table(t) = d {
                    fill_seed(t, "rng_seed", component_seed(seed, &format!("detector/{i}")));
                }
            }
        }
        let sense = root.entry("sensitivity").or_insert_with(|| toml::Value::Table(toml::Table::new()));
        if let toml::Value::Table(s) = sense {
            let tests = s.entry("tests").or_insert_with(|| toml::Value::Array(default_tests()));
            if let toml::Value::Array(list) = tests {
                for d in list.iter_mut() {
                    if let toml::Value::Table(t) = d {
                        let name = t.get("test").and_then(|v| v.as_str()).unwrap_or("").to_string();
                        fill_seed(t, "rng_seed", component_seed(seed, &format!("sensitivity/{name}")));
                    }
                }
            }
        }
        let config: ExperimentConfig = root.try_into().map_err(config_err)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config = Self::from_toml(&text, seed_override)?;
        // ingest paths are relative to the config file
        if let (Some(ingest), Some(dir)) = (config.ingest.as_mut(), path.parent()) {
            if ingest.path.is_relative() && !dir.as_os_str().is_empty() {
                ingest.path = dir.join(&ingest.path);
            }
        }
        if let Some(ingest) = config.ingest.as_mut() {
            ingest.digest = Some(file_digest(&ingest.path)?);
        }
        Ok(config)
    }

    /// Replaces the event source with an events file, keeping the bin width.
    pub fn with_events(mut self, path: &Path) -> Result<Self> {
        let bin_width = self.bin_width();
        self.generator = None;
        self.ingest = Some(IngestConfig {
            path: path.to_path_buf(),
            bin_width,
            digest: Some(file_digest(path)?),
        });
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.generator, &self.ingest) {
            (Some(g), None) => g.validate()?,
            (None, Some(i)) if i.bin_width == 0 => return Err(config_err("ingest.bin_width must be positive")),
            (None, Some(_)) => {}
            _ => return Err(config_err("exactly one of [generator] and [ingest] is required")),
        }
        if self.sampling.instances == 0 || self.sampling.target_size == 0 {
            return Err(config_err("sampling.instances and sampling.target_size must be positive"));
        }
        self.labeler.validate()?;
        let e = &self.evaluation;
        if !(e.train_fraction > 0.0 && e.train_fraction < 1.0) {
            return Err(config_err("evaluation.train_fraction must lie in (0, 1)"));
        }
        if e.lag == 0 {
            return Err(config_err("evaluation.lag must be at least 1"));
        }
        if self.detectors.is_empty() {
            return Err(config_err("no detectors configured"));
        }
        let mut names = BTreeSet::new();
        for d in &self.detectors {
            if !names.insert(d.label()) {
                return Err(config_err(format!("duplicate detector name `{}`", d.label())));
            }
            if d.window == 0 {
                return Err(config_err(format!("detector `{}`: window must be at least 1", d.label())));
            }
            if d.kind == DetectorKind::Plugin && !matches!(d.hyperparameters.get("command"), Some(ParamValue::Text(_))) {
                return Err(config_err(format!("plugin detector `{}` needs a `command`", d.label())));
            }
        }
        for t in &self.sensitivity.tests {
            t.grid(self.labeler.z)?;
        }
        Ok(())
    }

    pub fn bin_width(&self) -> u64 {
        match (&self.generator, &self.ingest) {
            (Some(g), _) => g.bin_width,
            (_, Some(i)) => i.bin_width,
            _ => DEFAULT_BIN_WIDTH,
        }
    }

    /// Common span all instances are binned over; generator streams cover
    /// `[0, duration)`, ingested graphs their own time range.
    pub fn span(&self) -> Option<TimeSpan> {
        self.generator.as_ref().map(|g| TimeSpan::new(0, g.duration as i64 - 1))
    }

    pub fn bench_params(&self) -> BenchParams {
        BenchParams {
            z: self.labeler.z,
            lag: self.evaluation.lag,
            train_fraction: self.evaluation.train_fraction,
            grid_search: self.evaluation.grid_search,
        }
    }

    /// Canonical JSON of everything that determines results (the output
    /// directory is excluded).
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("output_dir");
            if let (Some(digest), Some(ingest)) = (
                self.ingest.as_ref().and_then(|i| i.digest.as_ref()),
                map.get_mut("ingest").and_then(|i| i.as_object_mut()),
            ) {
                ingest.remove("path");
                ingest.insert("sha256".into(), digest.clone().into());
            }
        }
        serde_json::to_string(&v).expect("value serializes")
    }

    /// Hex SHA-256 of [`ExperimentConfig::canonical_json`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7

[generator]
num_nodes = 50
duration = 36000

[sampling]
instances = 2
target_size = 20
"#;

    #[test]
    fn seeds_are_derived_and_explicit() {
        let c = ExperimentConfig::from_toml(MINIMAL, None).unwrap();
        assert_eq!(c.generator.as_ref().unwrap().rng_seed, component_seed(7, "generator"));
        assert_eq!(c.sampling.seed, component_seed(7, "sampling"));
        assert_eq!(c.detectors.len(), 5);
        assert_eq!(c.sensitivity.tests.len(), 4);
        assert_eq!(c.sensitivity.labels, LabelMode::Recomputed);
        let seeds: BTreeSet<u64> = c.detectors.iter().map(|d| d.rng_seed).collect();
        assert_eq!(seeds.len(), 5);
        let other = ExperimentConfig::from_toml(MINIMAL, Some(8)).unwrap();
        assert_ne!(other.hash(), c.hash());
        assert_eq!(ExperimentConfig::from_toml(MINIMAL, Some(7)).unwrap().hash(), c.hash());
    }

    #[test]
    fn explicit_seeds_survive_override() {
        let text = MINIMAL.replace("target_size = 20", "target_size = 20\nseed = 3");
        let c = ExperimentConfig::from_toml(&text, Some(99)).unwrap();
        assert_eq!(c.sampling.seed, 3);
        assert_eq!(c.seed, 99);
    }

    #[test]
    fn resolved_config_reparses_to_itself() {
        let c = ExperimentConfig::from_toml(MINIMAL, None).unwrap();
        let text = toml::to_string(&c).unwrap();
        let back = ExperimentConfig::from_toml(&text, None).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn output_dir_is_not_hashed() {
        let a = ExperimentConfig::from_toml(MINIMAL, None).unwrap();
        let b = ExperimentConfig::from_toml(&format!("output_dir = \"x\"\n{MINIMAL}"), None).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn invalid_configs() {
        let cases = [
            "seed = 1\n[sampling]\ninstances = 1\ntarget_size = 5\n".to_string(),
            MINIMAL.replace("seed = 7", ""),
            MINIMAL.replace("seed = 7", "seed = -1"),
            format!("{MINIMAL}\n[ingest]\npath = \"e.csv\"\n"),
            format!("{MINIMAL}\n[labeler]\nz = 0\n"),
            format!("{MINIMAL}\n[[detectors]]\nkind = \"plugin\"\n"),
            format!("{MINIMAL}\n[[detectors]]\nkind = \"random\"\n[[detectors]]\nkind = \"random\"\n"),
            format!("{MINIMAL}\n[evaluation]\ntrain_fraction = 1.0\n"),
            format!("{MINIMAL}\nunknown = 1\n"),
            format!("{MINIMAL}\n[sensitivity]\ntests = [{{ test = \"drift\", points = [0.5, 0.1] }}]\n"),
        ];
        for text in cases {
            let err = ExperimentConfig::from_toml(&text, None).unwrap_err();
            assert_eq!(err.kind().exit_code(), 2, "{text}: {err}");
        }
    }
}
