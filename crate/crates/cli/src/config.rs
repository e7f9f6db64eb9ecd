//! Experiment config: one TOML file with an explicit schema version.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xy_ep::ep::EpConfig;
use xy_ep::graph::ArchitectureSpec;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Overrides `[output] dir`.
pub const OUTPUT_DIR_ENV: &str = "XYEP_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Xor,
    Iris,
    Mnist,
    Teacher,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub task: Task,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub threads: usize,
    pub architecture: ArchitectureSpec,
    pub seeds: Seeds,
    #[serde(default)]
    pub init: Init,
    #[serde(default)]
    pub training: EpConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub probe: Option<ProbeConfig>,
}

/// Every random stream is seeded explicitly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub init: u64,
    pub training: u64,
    /// Train/test split (Iris) and teacher sample draws.
    #[serde(default)]
    pub split: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Init {
    /// Couplings are drawn uniformly from `[-scale, scale]`.
    pub scale: f64,
}

impl Default for Init {
    fn default() -> Self {
        Init { scale: 0.5 }
    }
}

/// Dataset locations. Relative paths are resolved against the config file's
/// directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub iris: Option<PathBuf>,
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    /// Use only the first `n` records of each MNIST split.
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    /// Teacher task: number of training and test samples.
    pub teacher_samples: Option<usize>,
    pub teacher_test_samples: Option<usize>,
    /// Teacher network initialization.
    pub teacher_seed: Option<u64>,
    pub teacher_scale: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Save a checkpoint every this many epochs (0: only first and last).
    pub checkpoint_interval: usize,
    /// Epochs at which the response probe and a coupling snapshot are written.
    pub probe_epochs: Vec<usize>,
    /// Fill the `wall_ms` column of the records (breaks byte-for-byte reruns).
    pub record_wall_time: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("runs"),
            checkpoint_interval: 0,
            probe_epochs: Vec::new(),
            record_wall_time: false,
        }
    }
}

/// Flip-response probe. The base configuration defaults to every input at
/// the "down" phase.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    /// Index into the network's input list.
    pub flip_input: usize,
    #[serde(default = "up")]
    pub flipped_phase: f64,
    #[serde(default)]
    pub base_phases: Option<Vec<f64>>,
    #[serde(default = "five")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
}

fn up() -> f64 {
    xy_ep::tasks::UP
}

fn five() -> usize {
    5
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(CliError::config)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        cfg.training.validate().map_err(CliError::config)?;
        if !(cfg.init.scale > 0.0) {
            return Err(CliError::Config(format!("init.scale must be positive, got {}", cfg.init.scale)));
        }
        Ok(cfg)
    }
}

/// A parsed config together with its raw text and location.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub text: String,
    pub path: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let config = ExperimentConfig::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        Ok(LoadedConfig {
            config,
            text,
            path: path.to_path_buf(),
        })
    }

    /// Resolves a data path relative to the config file.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.path.parent().unwrap_or(Path::new(".")).join(p)
        }
    }

    /// Output directory: the environment override if set, else `[output] dir`
    /// relative to the config file.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.resolve(&self.config.output.dir),
        }
    }
}
