//! Run configuration: one TOML or JSON file, with command-line flags
//! applied on top by the caller.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::stattests::{Metric, DEFAULT_ALPHA, DEFAULT_Z};
use crate::system::SystemConfig;

pub const DEFAULT_TEST_FRACTION: f64 = 0.3;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub resamples: usize,
    pub z: f64,
    pub alpha: f64,
    pub metrics: Vec<Metric>,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self { resamples: 1000, z: DEFAULT_Z, alpha: DEFAULT_ALPHA, metrics: vec![Metric::F1, Metric::Accuracy] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReviewConfig {
    pub sample_size: usize,
    pub port: u16,
    /// Static review UI bundle served next to the API.
    pub ui_dir: Option<PathBuf>,
    /// Report on sessions that have not rated every item.
    pub include_incomplete: bool,
}

impl Default for ReviewConfig {
    fn default() -> Self {
        Self { sample_size: crate::review::DEFAULT_SAMPLE_SIZE, port: 8080, ui_dir: None, include_incomplete: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_records: usize,
    pub class_balance: f64,
    pub ambiguous: f64,
    pub label_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { n_records: 2000, class_balance: 0.5, ambiguous: 0.2, label_noise: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Holds `dataset.jsonl` and, optionally, `nodes.csv`.
    pub data_dir: PathBuf,
    /// Models, predictions, review store and reports.
    pub out: PathBuf,
    pub seed: u64,
    pub test_fraction: f64,
    pub system: SystemConfig,
    pub stats: StatsConfig,
    pub review: ReviewConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            out: PathBuf::from("out"),
            seed: DEFAULT_SEED,
            test_fraction: DEFAULT_TEST_FRACTION,
            system: SystemConfig::default(),
            stats: StatsConfig::default(),
            review: ReviewConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads `.toml` or `.json` by extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        let cfg: Self = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)?,
            Some("toml") => toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
            _ => return Err(Error::Config(format!("{}: config must be .toml or .json", path.display()))),
        };
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Config for training one model kind.
    pub fn system_for(&self, model: ModelKind) -> SystemConfig {
        SystemConfig { model, ..self.system.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!("test_fraction {} outside (0, 1)", self.test_fraction)));
        }
        if !(self.stats.alpha > 0.0 && self.stats.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1)", self.stats.alpha)));
        }
        if !(self.stats.z.is_finite() && self.stats.z > 0.0) {
            return Err(Error::Config(format!("z must be positive, got {}", self.stats.z)));
        }
        if self.stats.resamples < crate::stattests::MIN_RESAMPLES {
            return Err(Error::Config(format!("at least {} resamples required", crate::stattests::MIN_RESAMPLES)));
        }
        if self.review.sample_size == 0 {
            return Err(Error::Config("sample_size must be positive".into()));
        }
        self.system.pipeline.validate()
    }
}
