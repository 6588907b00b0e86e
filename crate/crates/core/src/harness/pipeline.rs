use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DescriptorConfig, RunConfig};
use super::io::{
    passes_to_string, read_passes, read_truth, report_csv, report_json, truth_to_string,
};
use super::synth::generate_synthetic;
use crate::dataset::{parse_dataset, records_to_string, DatasetFormat};
use crate::descriptors::{descriptors_to_csv, load_external_descriptors, soap_dataset};
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::refmodel::{checkpoint_to_string, ModelConfig, StructureGraph};
use crate::runtime::{
    deterministic_infer_graphs, history_to_csv, mcd_infer_graphs, prepare_graphs, train_graphs,
    PassTensor, TrainConfig,
};
use crate::seed::{derive_seed, sha256_hex};
use crate::splitting::{
    loco_split, optimize_cluster_count, random_split, read_manifest, scenario_to_manifest,
    sparse_x_cluster, sparse_x_single, sparse_y_cluster, sparse_y_single, Scenario, SparseParams,
    SplitTask, Strategy,
};
use crate::structure::LabeledDataset;

pub const FAILED_MARKER: &str = "FAILED";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_JSON: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    /// Artifact name → SHA-256 of its content.
    pub hashes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software_version: String,
    pub config: RunConfig,
    pub stages: Vec<StageRecord>,
    /// Hash over version, config and stage hashes. The output directory,
    /// worker count and timestamps are left out, so reruns agree.
    pub content_hash: String,
    pub started_unix: u64,
    pub finished_unix: u64,
}

impl RunManifest {
    pub fn compute_hash(version: &str, config: &RunConfig, stages: &[StageRecord]) -> String {
        let mut portable = config.clone();
        portable.output_dir = PathBuf::new();
        portable.workers = None;
        let body = serde_json::to_string(&(version, portable, stages)).expect("manifest serializes");
        sha256_hex(body.as_bytes())
    }

    pub fn verify(&self) -> bool {
        Self::compute_hash(&self.software_version, &self.config, &self.stages) == self.content_hash
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub scenario: Scenario,
    pub tasks: Vec<MetricReport>,
    pub summary: MetricReport,
    pub manifest: RunManifest,
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Stage { .. } => e,
        other => Error::Stage {
            stage: name.to_string(),
            inner: Box::new(other),
        },
    })
}

fn write(path: &Path, text: &str) -> Result<String> {
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(text.as_bytes()))
}

fn needs_descriptors(s: Strategy) -> bool {
    matches!(
        s,
        Strategy::Loco | Strategy::SoapLoco | Strategy::SparseXSingle | Strategy::SparseXCluster
    )
}

pub fn load_dataset(cfg: &RunConfig) -> Result<LabeledDataset> {
    match (&cfg.data.path, &cfg.data.synthetic) {
        (Some(path), _) => {
            let format = cfg.data.format.unwrap_or_else(|| DatasetFormat::from_path(path));
            parse_dataset(path, format)
        }
        (None, Some(spec)) => generate_synthetic(spec.n, derive_seed(cfg.seed, "dataset")),
        (None, None) => Err(Error::Config("no dataset configured".into())),
    }
}

pub fn compute_descriptors(cfg: &RunConfig, data: &LabeledDataset) -> Result<Vec<Vec<f64>>> {
    match &cfg.descriptors {
        DescriptorConfig::Soap(s) => soap_dataset(data, &s.to_config(data.species())),
        DescriptorConfig::External { path } => {
            let x = load_external_descriptors(path)?;
            if x.len() != data.len() {
                return Err(Error::Argument(format!(
                    "{} descriptor rows for {} structures",
                    x.len(),
                    data.len()
                )));
            }
            Ok(x)
        }
    }
}

/// Builds the scenario; returns the cluster count chosen when candidates were searched.
pub fn build_scenario(
    cfg: &RunConfig,
    x: Option<&[Vec<f64>]>,
    y: &[f64],
) -> Result<(Scenario, Option<usize>)> {
    let sp = &cfg.split;
    let seed = derive_seed(cfg.seed, "split");
    if let Some(path) = &sp.manifest {
        let s = read_manifest(path)?;
        if s.n_samples != y.len() {
            return Err(Error::Argument(format!(
                "split manifest covers {} samples, dataset has {}",
                s.n_samples,
                y.len()
            )));
        }
        return Ok((s, None));
    }
    let need_x = || x.ok_or_else(|| Error::Internal("descriptors were not computed".into()));
    let sparse = SparseParams {
        n_tasks: sp.n_tasks_or_default(),
        m_neighbors: sp.m_neighbors_or_default(),
        k_density: sp.k_density_or_default(),
    };
    Ok(match sp.strategy {
        Strategy::Loco | Strategy::SoapLoco => {
            let x = need_x()?;
            let (k, chosen) = match &sp.candidates {
                Some(c) => {
                    let k = optimize_cluster_count(x, y, c, seed, sp.strategy)?.best_k;
                    (k, Some(k))
                }
                None => (sp.k_or_default(), None),
            };
            (loco_split(x, k, seed, sp.strategy)?, chosen)
        }
        Strategy::SparseXSingle => (sparse_x_single(need_x()?, sparse, seed)?, None),
        Strategy::SparseXCluster => (sparse_x_cluster(need_x()?, sparse, seed)?, None),
        Strategy::SparseYSingle => (sparse_y_single(y, sparse, seed)?, None),
        Strategy::SparseYCluster => (sparse_y_cluster(y, sparse, seed)?, None),
        Strategy::Random => {
            let size = sp
                .test_size
                .ok_or_else(|| Error::Config("RANDOM needs `test_size`".into()))?;
            (random_split(y.len(), &vec![size; sp.n_tasks_or_default()], seed)?, None)
        }
    })
}

/// Per-task seeds: the task seed is `hash(global seed, task name)`.
pub fn task_seeds(global: u64, task: &str) -> (u64, u64, u64) {
    let t = derive_seed(global, task);
    (
        derive_seed(t, "model"),
        derive_seed(t, "train"),
        derive_seed(t, "mcd"),
    )
}

struct TaskResult {
    report: MetricReport,
    hashes: BTreeMap<String, String>,
}

struct TaskContext<'a> {
    graphs: &'a [StructureGraph],
    targets: &'a [f64],
    model: ModelConfig,
    train: TrainConfig,
    passes: usize,
    seed: u64,
    out: &'a Path,
    save_checkpoints: bool,
}

fn run_task(ctx: &TaskContext, task: &SplitTask) -> Result<TaskResult> {
    let (model_seed, train_seed, mcd_seed) = task_seeds(ctx.seed, &task.name);
    let mcfg = ModelConfig {
        seed: model_seed,
        ..ctx.model
    };
    let tcfg = TrainConfig {
        seed: train_seed,
        ..ctx.train
    };
    let dir = ctx.out.join("tasks").join(&task.name);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut hashes = BTreeMap::new();

    let outcome = train_graphs(ctx.graphs, ctx.targets, task, &mcfg, &tcfg)?;
    hashes.insert("history.csv".into(), write(&dir.join("history.csv"), &history_to_csv(&outcome.history))?);
    let ckpt = checkpoint_to_string(&mcfg, &outcome.weights);
    let ckpt_hash = if ctx.save_checkpoints {
        write(&dir.join("model.ckpt"), &ckpt)?
    } else {
        sha256_hex(ckpt.as_bytes())
    };
    hashes.insert("model.ckpt".into(), ckpt_hash);

    let det = deterministic_infer_graphs(ctx.graphs, &task.test, &outcome.weights, &mcfg)?;
    let det_tensor = PassTensor::from_rows(vec![det.clone()])?;
    let passes = mcd_infer_graphs(ctx.graphs, &task.test, &outcome.weights, &mcfg, ctx.passes, mcd_seed)?;
    let truth: Vec<f64> = task.test.iter().map(|&i| ctx.targets[i]).collect();
    hashes.insert("deterministic.csv".into(), write(&dir.join("deterministic.csv"), &passes_to_string(&det_tensor))?);
    hashes.insert("passes.csv".into(), write(&dir.join("passes.csv"), &passes_to_string(&passes))?);
    hashes.insert("truth.csv".into(), write(&dir.join("truth.csv"), &truth_to_string(&task.test, &truth))?);

    let report = MetricReport::from_predictions(task.name.clone(), &det, &passes, &truth)?;
    Ok(TaskResult { report, hashes })
}

/// Runs descriptors → split → train → infer → metrics and writes all
/// artifacts under `cfg.output_dir`. On failure a `FAILED` marker naming the
/// stage is written next to whatever was produced.
pub fn run_benchmark(cfg: &RunConfig) -> Result<BenchmarkOutcome> {
    cfg.validate()?;
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let marker = out.join(FAILED_MARKER);
    if marker.exists() {
        fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
    }
    let result = run_stages(cfg, &out);
    if let Err(e) = &result {
        let stage_name = match e {
            Error::Stage { stage, .. } => stage.as_str(),
            _ => "setup",
        };
        let _ = fs::write(&marker, format!("stage: {stage_name}\nerror: {e}\n"));
    }
    result
}

fn run_stages(cfg: &RunConfig, out: &Path) -> Result<BenchmarkOutcome> {
    let started = now_unix();
    let mut stages = Vec::new();
    let mut record = |name: &str, pairs: Vec<(String, String)>| {
        stages.push(StageRecord {
            stage: name.to_string(),
            hashes: pairs.into_iter().collect(),
        })
    };

    let data = stage("dataset", load_dataset(cfg))?;
    let records = records_to_string(&data);
    record("dataset", vec![("records".into(), sha256_hex(records.as_bytes()))]);

    let x = if needs_descriptors(cfg.split.strategy) {
        let x = stage("descriptors", compute_descriptors(cfg, &data))?;
        let h = stage("descriptors", write(&out.join("descriptors.csv"), &descriptors_to_csv(&x)))?;
        record("descriptors", vec![("descriptors.csv".into(), h)]);
        Some(x)
    } else {
        None
    };

    let (scenario, chosen_k) = stage("split", build_scenario(cfg, x.as_deref(), data.targets()))?;
    let h = stage("split", write(&out.join("split.json"), &scenario_to_manifest(&scenario)))?;
    let mut split_hashes = vec![("split.json".to_string(), h)];
    if let Some(k) = chosen_k {
        split_hashes.push(("chosen_k".into(), k.to_string()));
    }
    record("split", split_hashes);

    let graphs = stage("graphs", prepare_graphs(&data, &cfg.model))?;
    let ctx = TaskContext {
        graphs: &graphs,
        targets: data.targets(),
        model: cfg.model,
        train: cfg.train,
        passes: cfg.passes,
        seed: cfg.seed,
        out,
        save_checkpoints: cfg.save_checkpoints,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.resolved_workers())
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let results: Vec<Result<TaskResult>> = pool.install(|| {
        scenario
            .tasks
            .par_iter()
            .map(|t| stage(&format!("task {}", t.name), run_task(&ctx, t)))
            .collect()
    });

    let mut named: Vec<(String, TaskResult)> = Vec::with_capacity(results.len());
    for (task, r) in scenario.tasks.iter().zip(results) {
        named.push((task.name.clone(), r?));
    }
    named.sort_by(|a, b| a.0.cmp(&b.0));
    for (name, r) in &named {
        record(&format!("task {name}"), r.hashes.clone().into_iter().collect());
    }
    let tasks: Vec<MetricReport> = named.into_iter().map(|(_, r)| r.report).collect();
    let summary = stage("report", MetricReport::summarize(super::io::SUMMARY_ROW, &tasks))?;
    let label = scenario.strategy.as_str();
    let csv_hash = stage("report", write(&out.join(REPORT_CSV), &report_csv(&tasks, &summary)))?;
    let json_hash = stage(
        "report",
        write(&out.join(REPORT_JSON), &report_json(label, &tasks, &summary)),
    )?;
    record(
        "report",
        vec![(REPORT_CSV.into(), csv_hash), (REPORT_JSON.into(), json_hash)],
    );

    let mut resolved = cfg.clone();
    if let Some(k) = chosen_k {
        resolved.split.k = Some(k);
    }
    let version = env!("CARGO_PKG_VERSION").to_string();
    let content_hash = RunManifest::compute_hash(&version, &resolved, &stages);
    let manifest = RunManifest {
        software_version: version,
        config: resolved,
        stages,
        content_hash,
        started_unix: started,
        finished_unix: now_unix(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    stage("manifest", write(&out.join(MANIFEST_FILE), &text))?;
    Ok(BenchmarkOutcome {
        scenario,
        tasks,
        summary,
        manifest,
    })
}

pub fn read_run_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::parse(path.display().to_string(), format!("line {}", e.line()), e.to_string()))
}

/// Scores externally produced NIG passes against a truth file. MAE and EviU
/// come from `deterministic` (a one-pass NIG file) when given, otherwise
/// from pass 0.
pub fn score_external(
    pass_file: &Path,
    truth_file: &Path,
    passes: usize,
    deterministic: Option<&Path>,
) -> Result<MetricReport> {
    let tensor = read_passes(pass_file)?;
    if tensor.passes() != passes {
        return Err(Error::Argument(format!(
            "pass file holds T = {}, expected {passes}",
            tensor.passes()
        )));
    }
    let (_, truth) = read_truth(truth_file)?;
    if truth.len() != tensor.samples() {
        return Err(Error::Argument(format!(
            "pass file has {} samples but truth file has {}",
            tensor.samples(),
            truth.len()
        )));
    }
    let det = match deterministic {
        Some(p) => {
            let d = read_passes(p)?;
            if d.passes() != 1 || d.samples() != truth.len() {
                return Err(Error::Argument(format!(
                    "deterministic file must hold 1 × {} cells, got {} × {}",
                    truth.len(),
                    d.passes(),
                    d.samples()
                )));
            }
            d.row(0).to_vec()
        }
        None => tensor.row(0).to_vec(),
    };
    let name = pass_file
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "external".into());
    MetricReport::from_predictions(name, &det, &tensor, &truth)
}
