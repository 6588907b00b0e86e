//! Out-of-distribution task generation.
//!
//! Every strategy turns a descriptor matrix (or the target vector) into a
//! [`Scenario`]: a list of named train/validation/test index triples. All
//! strategies are pure functions of their inputs and seed.

mod embed;
mod kmeans;
mod loco;
mod manifest;
mod optimize;
mod sparse;

pub use embed::embed_2d;
pub use kmeans::{adjusted_rand_index, kmeans, kmeans_fit, KMeansFit, MAX_ITERATIONS};
pub use loco::{loco_split, random_split};
pub use manifest::{parse_manifest, read_manifest, scenario_to_manifest, write_manifest};
pub use optimize::{knn_predict, optimize_cluster_count, ClusterCountSearch, PROXY_NEIGHBORS};
pub use sparse::{
    knn_density, sparse_x_cluster, sparse_x_single, sparse_y_cluster, sparse_y_single,
    SparseParams,
};

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default LOCO cluster count for external descriptors.
pub const DEFAULT_LOCO_K: usize = 50;
pub const DEFAULT_N_TASKS: usize = 50;
pub const DEFAULT_M_NEIGHBORS: usize = 10;
pub const DEFAULT_K_DENSITY: usize = 10;
/// Validation share of the non-test pool is `1 / VAL_DIVISOR` (train:val = 4:1).
pub const VAL_DIVISOR: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "LOCO")]
    Loco,
    #[serde(rename = "SXS")]
    SparseXSingle,
    #[serde(rename = "SXC")]
    SparseXCluster,
    #[serde(rename = "SYS")]
    SparseYSingle,
    #[serde(rename = "SYC")]
    SparseYCluster,
    #[serde(rename = "SOAP-LOCO")]
    SoapLoco,
    /// Uniform random hold-out, used as an in-distribution baseline.
    #[serde(rename = "RANDOM")]
    Random,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Loco => "LOCO",
            Strategy::SparseXSingle => "SXS",
            Strategy::SparseXCluster => "SXC",
            Strategy::SparseYSingle => "SYS",
            Strategy::SparseYCluster => "SYC",
            Strategy::SoapLoco => "SOAP-LOCO",
            Strategy::Random => "RANDOM",
        }
    }

    /// Test sets of leave-one-cluster-out strategies partition the dataset.
    pub fn is_partitioning(&self) -> bool {
        matches!(self, Strategy::Loco | Strategy::SoapLoco)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "LOCO" => Strategy::Loco,
            "SXS" => Strategy::SparseXSingle,
            "SXC" => Strategy::SparseXCluster,
            "SYS" => Strategy::SparseYSingle,
            "SYC" => Strategy::SparseYCluster,
            "SOAP-LOCO" | "SOAP_LOCO" | "SOAPLOCO" => Strategy::SoapLoco,
            "RANDOM" => Strategy::Random,
            other => return Err(Error::Config(format!("unknown strategy `{other}`"))),
        })
    }
}

/// One out-of-distribution evaluation task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitTask {
    pub name: String,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitTask {
    /// Disjoint, in range, non-empty train and test.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.train.is_empty() {
            return Err(Error::Validation(format!("task `{}` has no training samples", self.name)));
        }
        if self.test.is_empty() {
            return Err(Error::Validation(format!("task `{}` has no test samples", self.name)));
        }
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if i >= n {
                return Err(Error::Validation(format!(
                    "task `{}` index {i} out of range 0..{n}",
                    self.name
                )));
            }
            if seen[i] {
                return Err(Error::Validation(format!(
                    "task `{}` uses index {i} twice",
                    self.name
                )));
            }
            seen[i] = true;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_tasks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_neighbors: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_density: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub strategy: Strategy,
    pub seed: u64,
    pub n_samples: usize,
    pub params: ScenarioParams,
    pub tasks: Vec<SplitTask>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        for t in &self.tasks {
            t.validate(self.n_samples)?;
        }
        if self.strategy.is_partitioning() {
            let mut seen = vec![false; self.n_samples];
            for t in &self.tasks {
                for &i in &t.test {
                    if seen[i] {
                        return Err(Error::Validation(format!(
                            "index {i} appears in more than one test set"
                        )));
                    }
                    seen[i] = true;
                }
            }
            if let Some(i) = seen.iter().position(|s| !s) {
                return Err(Error::Validation(format!("index {i} is in no test set")));
            }
        }
        Ok(())
    }
}

/// Shuffles the non-test pool and splits it train:val = 4:1, with
/// `|val| = ⌊|pool| / 5⌋`. Both halves are returned sorted.
pub(crate) fn split_train_val<R: Rng>(
    mut pool: Vec<usize>,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if pool.is_empty() {
        return Err(Error::Argument("no samples left for training".into()));
    }
    pool.sort_unstable();
    pool.shuffle(rng);
    let n_val = pool.len() / VAL_DIVISOR;
    let mut val = pool[..n_val].to_vec();
    let mut train = pool[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((train, val))
}

/// Indices of `0..n` not in `test`, ascending.
pub(crate) fn complement(n: usize, test: &[usize]) -> Vec<usize> {
    let mut mark = vec![false; n];
    for &i in test {
        mark[i] = true;
    }
    (0..n).filter(|&i| !mark[i]).collect()
}

pub(crate) fn check_matrix(x: &[Vec<f64>]) -> Result<usize> {
    let d = x
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Argument("descriptor matrix is empty".into()))?;
    if d == 0 {
        return Err(Error::Argument("descriptor matrix has zero columns".into()));
    }
    if let Some(r) = x.iter().position(|row| row.len() != d) {
        return Err(Error::Argument(format!("descriptor row {r} has wrong width")));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Argument("descriptor matrix has non-finite entries".into()));
    }
    Ok(d)
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
