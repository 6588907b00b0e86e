//! Run configuration (TOML).
//!
//! ```toml
//! seed = 7
//! output_dir = "runs/soap-loco"
//! passes = 50              # MC-dropout passes T
//! workers = 2              # optional; falls back to OODBENCH_WORKERS, then 1
//! save_checkpoints = false
//!
//! [data]                   # either a file ...
//! path = "data.jsonl"
//! format = "structured-records"   # or "extended-xyz"; inferred from the extension if absent
//! # ... or a generated dataset:
//! # [data.synthetic]
//! # n = 500
//!
//! [descriptors]
//! source = "soap"          # or "external" with `path = "ofm.csv"`
//! r_cut = 5.0
//! n_max = 4
//! l_max = 4
//! sigma = 0.5
//!
//! [split]
//! strategy = "SOAP-LOCO"   # LOCO, SXS, SXC, SYS, SYC, SOAP-LOCO, RANDOM
//! k = 4                    # or candidates = [4, 8, 16] to search
//! # n_tasks, m_neighbors, k_density for sparse strategies; test_size for RANDOM
//! # manifest = "split.json" reuses a stored split instead
//!
//! [model]                  # ModelConfig fields
//! [train]                  # TrainConfig fields
//! ```
//!
//! The `seed` fields of `[model]` and `[train]` are ignored by the pipeline:
//! every task derives its own seeds from the global seed and the task name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetFormat;
use crate::descriptors::SoapConfig;
use crate::error::{Error, Result};
use crate::refmodel::ModelConfig;
use crate::runtime::{TrainConfig, DEFAULT_PASSES};
use crate::splitting::{Strategy, DEFAULT_K_DENSITY, DEFAULT_LOCO_K, DEFAULT_M_NEIGHBORS, DEFAULT_N_TASKS};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "OODBENCH_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<DatasetFormat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoapSettings {
    pub r_cut: f64,
    pub n_max: usize,
    pub l_max: usize,
    pub sigma: f64,
    pub include_center: bool,
    pub radial_points: usize,
}

impl Default for SoapSettings {
    fn default() -> Self {
        let d = SoapConfig::default();
        Self {
            r_cut: d.r_cut,
            n_max: d.n_max,
            l_max: d.l_max,
            sigma: d.sigma,
            include_center: d.include_center,
            radial_points: d.radial_points,
        }
    }
}

impl SoapSettings {
    pub fn to_config(&self, species: Vec<u32>) -> SoapConfig {
        SoapConfig {
            r_cut: self.r_cut,
            n_max: self.n_max,
            l_max: self.l_max,
            sigma: self.sigma,
            species,
            include_center: self.include_center,
            radial_points: self.radial_points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DescriptorConfig {
    Soap(SoapSettings),
    External { path: PathBuf },
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        DescriptorConfig::Soap(SoapSettings::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_tasks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_neighbors: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_density: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
}

impl SplitConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            k: None,
            candidates: None,
            n_tasks: None,
            m_neighbors: None,
            k_density: None,
            test_size: None,
            manifest: None,
        }
    }

    pub fn k_or_default(&self) -> usize {
        self.k.unwrap_or(DEFAULT_LOCO_K)
    }

    pub fn n_tasks_or_default(&self) -> usize {
        self.n_tasks.unwrap_or(DEFAULT_N_TASKS)
    }

    pub fn m_neighbors_or_default(&self) -> usize {
        self.m_neighbors.unwrap_or(DEFAULT_M_NEIGHBORS)
    }

    pub fn k_density_or_default(&self) -> usize {
        self.k_density.unwrap_or(DEFAULT_K_DENSITY)
    }
}

fn default_passes() -> usize {
    DEFAULT_PASSES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_passes")]
    pub passes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub save_checkpoints: bool,
    pub data: DataConfig,
    #[serde(default)]
    pub descriptors: DescriptorConfig,
    pub split: SplitConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str, source: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let location = e
                .span()
                .map(|s| {
                    let line = text[..s.start].matches('\n').count() + 1;
                    format!("line {line}")
                })
                .unwrap_or_else(|| "document".into());
            Error::parse(source, location, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.data.path, &self.data.synthetic) {
            (Some(_), None) => {}
            (None, Some(s)) if s.n >= 10 => {}
            (None, Some(s)) => {
                return Err(Error::Config(format!("synthetic n must be >= 10, got {}", s.n)))
            }
            _ => {
                return Err(Error::Config(
                    "[data] needs exactly one of `path` or `synthetic`".into(),
                ))
            }
        }
        if self.passes == 0 {
            return Err(Error::Config("passes must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.model.validate()?;
        self.train.validate()?;
        let sp = &self.split;
        if sp.strategy == Strategy::SoapLoco
            && matches!(self.descriptors, DescriptorConfig::External { .. })
        {
            return Err(Error::Config(
                "SOAP-LOCO needs `source = \"soap\"` descriptors".into(),
            ));
        }
        if sp.manifest.is_none() {
            if sp.strategy.is_partitioning() {
                if let Some(c) = &sp.candidates {
                    if sp.k.is_some() {
                        return Err(Error::Config("give either `k` or `candidates`, not both".into()));
                    }
                    if c.is_empty() || c.iter().any(|&k| k < 2) {
                        return Err(Error::Config("candidates must be non-empty and >= 2".into()));
                    }
                } else if sp.k_or_default() < 2 {
                    return Err(Error::Config("k must be at least 2".into()));
                }
            } else if sp.candidates.is_some() || sp.k.is_some() {
                return Err(Error::Config(format!(
                    "`k`/`candidates` do not apply to {}",
                    sp.strategy
                )));
            }
            if sp.strategy == Strategy::Random && sp.test_size.is_none() {
                return Err(Error::Config("RANDOM needs `test_size`".into()));
            }
        }
        Ok(())
    }

    /// Explicit setting, then the environment variable, then 1.
    pub fn resolved_workers(&self) -> usize {
        self.workers
            .or_else(|| std::env::var(WORKERS_ENV).ok()?.parse().ok())
            .filter(|&w| w > 0)
            .unwrap_or(1)
    }
}
