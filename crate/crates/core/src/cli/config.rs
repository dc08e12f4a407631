//! JSON run configuration.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "experiment": {
//!     "dgp": { "n": 10, "process": { "kind": "iid_gaussian", "beta": 1.0 } },
//!     "scheme": { "kind": "fixed_design_gaussian", "analytic": true, "known_omega": 1.0 },
//!     "statistic": { "kind": "slope" }
//!   },
//!   "mode": { "kind": "unconditional", "replications": 100 },
//!   "master_seed": 1
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{DEFAULT_BAND, DEFAULT_ORACLE_STEPS};
use crate::mc::{Experiment, DEFAULT_GRID_SIZE};

pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "RANDBOOT_THREADS";

/// Failure classes of the command-line tool.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("I/O: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(format!("CSV: {e}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mode {
    Unconditional { replications: usize },
    Double { outer: usize, inner: usize },
}

fn default_level() -> f64 {
    0.05
}

fn default_oracle_paths() -> usize {
    100_000
}

fn default_oracle_steps() -> usize {
    DEFAULT_ORACLE_STEPS
}

/// Local-power sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConfig {
    pub b_grid: Vec<f64>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_oracle_paths")]
    pub oracle_paths: usize,
    #[serde(default = "default_oracle_steps")]
    pub oracle_steps: usize,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("randboot-out")
}

fn default_grid_size() -> usize {
    DEFAULT_GRID_SIZE
}

fn default_band() -> (f64, f64) {
    DEFAULT_BAND
}

fn default_levels() -> Vec<f64> {
    vec![0.01, 0.05, 0.1]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub experiment: Experiment,
    pub mode: Mode,
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    /// Quantile levels of the fan-chart bands.
    #[serde(default = "default_band")]
    pub band: (f64, f64),
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub threads: usize,
    /// Nominal levels reported in uniformity reports.
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    #[serde(default)]
    pub power: Option<PowerConfig>,
}

/// Command-line overrides of top-level fields.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub master_seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub grid_size: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        self.experiment
            .validate()
            .map_err(|e| CliError::Config(format!("experiment: {e}")))?;
        match self.mode {
            Mode::Unconditional { replications: 0 } => {
                return bad("mode.replications must be at least 1".into())
            }
            Mode::Double { outer, inner } if outer == 0 || inner == 0 => {
                return bad("mode.outer and mode.inner must be at least 1".into())
            }
            _ => {}
        }
        if self.grid_size < 2 {
            return bad(format!(
                "grid_size must be at least 2, got {}",
                self.grid_size
            ));
        }
        let (lo, hi) = self.band;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return bad(format!(
                "band must satisfy 0 <= lo <= hi <= 1, got ({lo}, {hi})"
            ));
        }
        if let Some(q) = self.levels.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
            return bad(format!("levels must lie in (0, 1), got {q}"));
        }
        if let Some(p) = &self.power {
            if p.b_grid.is_empty() || p.b_grid.iter().any(|b| !b.is_finite()) {
                return bad("power.b_grid must be a nonempty list of finite values".into());
            }
            if !(p.level > 0.0 && p.level < 1.0) {
                return bad(format!("power.level must lie in (0, 1), got {}", p.level));
            }
            if p.oracle_paths == 0 || p.oracle_steps == 0 {
                return bad("power.oracle_paths and power.oracle_steps must be at least 1".into());
            }
        }
        Ok(())
    }

    /// Reads `path`, then applies the environment and flag overrides
    /// (flag over environment over file).
    pub fn load(
        path: &Path,
        overrides: &Overrides,
        env_threads: Option<&str>,
    ) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = RunConfig::from_json(&text)?;
        if let Some(v) = env_threads {
            cfg.threads = v.trim().parse().map_err(|_| {
                CliError::Config(format!(
                    "{THREADS_ENV} must be a nonnegative integer, got `{v}`"
                ))
            })?;
        }
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.master_seed {
            self.master_seed = v;
        }
        if let Some(v) = &o.output_dir {
            self.output_dir = v.clone();
        }
        if let Some(v) = o.threads {
            self.threads = v;
        }
        if let Some(v) = o.grid_size {
            self.grid_size = v;
        }
    }

    /// Canonical JSON with every default filled in.
    pub fn normalized(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the normalized configuration, excluding the fields that
    /// cannot change results (thread count and output directory).
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.threads = 0;
        c.output_dir = PathBuf::new();
        let digest = Sha256::digest(c.normalized().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
