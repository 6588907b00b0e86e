use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use oodbench_core::dataset::{extxyz_to_string, records_to_string, DatasetFormat};
use oodbench_core::descriptors::{descriptors_to_csv, load_external_descriptors};
use oodbench_core::harness::{
    self, build_scenario, compute_descriptors, generate_synthetic, load_dataset, passes_to_string,
    read_truth, report_csv, report_json, run_benchmark, score_external, task_seeds,
    truth_to_string, DescriptorConfig, RunConfig, SoapSettings, SUMMARY_ROW,
};
use oodbench_core::metrics::MetricReport;
use oodbench_core::refmodel::{read_checkpoint, write_checkpoint, ModelConfig};
use oodbench_core::runtime::{
    deterministic_infer, history_to_csv, mcd_infer, train, PassTensor, TrainConfig,
};
use oodbench_core::seed::derive_seed;
use oodbench_core::splitting::{
    optimize_cluster_count, read_manifest, write_manifest, Scenario, SplitTask, Strategy,
};
use oodbench_core::{Error, Result};

#[derive(Parser)]
#[command(name = "oodbench", version, about = "Out-of-distribution benchmark pipeline for materials property regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct Common {
    /// RunConfig file (TOML)
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Overrides the global seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output file or directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Dataset utilities
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Descriptor computation and import
    #[command(subcommand)]
    Descriptors(DescriptorsCmd),
    /// Split generation and cluster-count search
    #[command(subcommand)]
    Split(SplitCmd),
    /// Train the reference model on one task of a split
    Train(TaskArgs),
    /// Deterministic and MC-dropout inference on a task's test set
    Infer(InferArgs),
    /// Score a task directory written by `infer` or `run`
    Evaluate(EvaluateArgs),
    /// Score externally produced NIG passes
    ScoreExternal(ScoreArgs),
    /// Run the full pipeline described by a RunConfig
    Run(RunArgs),
    /// Rebuild the report of a run directory from its task artifacts
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Generate a synthetic labeled dataset
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "structured-records")]
        dataset_format: DatasetFormat,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum DescriptorsCmd {
    /// SOAP material vectors for the configured dataset
    Compute {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        r_cut: Option<f64>,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        l_max: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Validate an external descriptor CSV against the dataset and rewrite it
    Import {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    k: Option<usize>,
    /// Precomputed descriptor CSV (skips descriptor computation)
    #[arg(long)]
    descriptors: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum SplitCmd {
    /// Write a split manifest
    Generate(SplitArgs),
    /// Search LOCO cluster counts with a k-NN proxy
    OptimizeK {
        #[arg(long, value_delimiter = ',', required = true)]
        candidates: Vec<usize>,
        #[command(flatten)]
        split: SplitArgs,
    },
}

#[derive(Args)]
struct TaskArgs {
    /// Split manifest
    #[arg(long)]
    split: PathBuf,
    /// Task name inside the manifest
    #[arg(long)]
    task: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// MC-dropout passes (defaults to the config's `passes`)
    #[arg(long)]
    passes: Option<usize>,
    #[command(flatten)]
    task: TaskArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory holding passes.csv, deterministic.csv and truth.csv
    #[arg(long)]
    dir: PathBuf,
    #[arg(long)]
    passes: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    pass_file: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    passes: usize,
    /// One-pass NIG file for MAE and EviU (pass 0 is used otherwise)
    #[arg(long)]
    deterministic: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, env = harness::WORKERS_ENV)]
    workers: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ReportArgs {
    /// Run output directory
    #[arg(long)]
    dir: PathBuf,
    #[arg(long)]
    passes: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::Argument("--config is required for this command".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn require_out(common: &Common) -> Result<&Path> {
    common
        .out
        .as_deref()
        .ok_or_else(|| Error::Argument("--out is required for this command".into()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Argument(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Error::Argument(format!("{}: {e}", path.display())))
}

fn dataset_for(common: &Common, data: Option<&PathBuf>) -> Result<oodbench_core::LabeledDataset> {
    match (data, &common.config) {
        (Some(p), _) => oodbench_core::dataset::parse_dataset(p, DatasetFormat::from_path(p)),
        (None, Some(_)) => load_dataset(&load_config(common)?),
        (None, None) => Err(Error::Argument("give --data or --config".into())),
    }
}

fn print_reports(tasks: &[MetricReport], summary: Option<&MetricReport>, format: OutputFormat, label: &str) {
    match (format, summary) {
        (OutputFormat::Csv, Some(s)) => print!("{}", report_csv(tasks, s)),
        (OutputFormat::Json, Some(s)) => print!("{}", report_json(label, tasks, s)),
        (OutputFormat::Csv, None) => {
            let csv = report_csv(&tasks[..tasks.len() - 1], &tasks[tasks.len() - 1]);
            print!("{csv}");
        }
        (OutputFormat::Json, None) => {
            let r: Vec<MetricReport> = tasks
                .iter()
                .map(|t| MetricReport {
                    per_sample: None,
                    ..t.clone()
                })
                .collect();
            println!("{}", serde_json::to_string_pretty(&r).expect("serializable"));
        }
    }
}

fn scenario_for(args: &SplitArgs) -> Result<(RunConfig, Scenario, Option<usize>)> {
    let mut cfg = load_config(&args.common)?;
    if let Some(s) = args.strategy {
        cfg.split.strategy = s;
    }
    if let Some(k) = args.k {
        cfg.split.k = Some(k);
        cfg.split.candidates = None;
    }
    cfg.validate()?;
    let data = load_dataset(&cfg)?;
    let x = match &args.descriptors {
        Some(p) => Some(load_external_descriptors(p)?),
        None if uses_descriptors(cfg.split.strategy) => Some(compute_descriptors(&cfg, &data)?),
        None => None,
    };
    let (scenario, chosen) = build_scenario(&cfg, x.as_deref(), data.targets())?;
    Ok((cfg, scenario, chosen))
}

fn uses_descriptors(s: Strategy) -> bool {
    matches!(
        s,
        Strategy::Loco | Strategy::SoapLoco | Strategy::SparseXSingle | Strategy::SparseXCluster
    )
}

fn find_task<'a>(scenario: &'a Scenario, name: &str) -> Result<&'a SplitTask> {
    scenario
        .tasks
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| Error::Argument(format!("no task named `{name}` in the split")))
}

fn score_dir(dir: &Path, passes: usize) -> Result<MetricReport> {
    let mut r = score_external(
        &dir.join("passes.csv"),
        &dir.join("truth.csv"),
        passes,
        Some(&dir.join("deterministic.csv")),
    )?;
    r.name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(r)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Dataset(DatasetCmd::Synth {
            n,
            dataset_format,
            common,
        }) => {
            let seed = common.seed.unwrap_or(0);
            let data = generate_synthetic(n, derive_seed(seed, "dataset"))?;
            let text = match dataset_format {
                DatasetFormat::StructuredRecords => records_to_string(&data),
                DatasetFormat::ExtendedXyz => extxyz_to_string(&data),
            };
            match &common.out {
                Some(p) => write_text(p, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Descriptors(DescriptorsCmd::Compute {
            data,
            r_cut,
            n_max,
            l_max,
            sigma,
            common,
        }) => {
            let dataset = dataset_for(&common, data.as_ref())?;
            let mut soap = match common.config.as_ref().map(|_| load_config(&common)).transpose()? {
                Some(RunConfig {
                    descriptors: DescriptorConfig::Soap(s),
                    ..
                }) => s,
                _ => SoapSettings::default(),
            };
            soap.r_cut = r_cut.unwrap_or(soap.r_cut);
            soap.n_max = n_max.unwrap_or(soap.n_max);
            soap.l_max = l_max.unwrap_or(soap.l_max);
            soap.sigma = sigma.unwrap_or(soap.sigma);
            let x = oodbench_core::descriptors::soap_dataset(&dataset, &soap.to_config(dataset.species()))?;
            write_text(require_out(&common)?, &descriptors_to_csv(&x))?;
        }
        Command::Descriptors(DescriptorsCmd::Import {
            input,
            data,
            common,
        }) => {
            let x = load_external_descriptors(&input)?;
            if data.is_some() || common.config.is_some() {
                let dataset = dataset_for(&common, data.as_ref())?;
                if dataset.len() != x.len() {
                    return Err(Error::Argument(format!(
                        "{} descriptor rows for {} structures",
                        x.len(),
                        dataset.len()
                    )));
                }
            }
            write_text(require_out(&common)?, &descriptors_to_csv(&x))?;
        }
        Command::Split(SplitCmd::Generate(args)) => {
            let (_, scenario, chosen) = scenario_for(&args)?;
            if let Some(k) = chosen {
                eprintln!("chosen k = {k}");
            }
            write_manifest(&scenario, require_out(&args.common)?)?;
        }
        Command::Split(SplitCmd::OptimizeK { candidates, split }) => {
            let cfg = load_config(&split.common)?;
            let strategy = split.strategy.unwrap_or(cfg.split.strategy);
            if !strategy.is_partitioning() {
                return Err(Error::Argument(format!("{strategy} has no cluster count")));
            }
            let data = load_dataset(&cfg)?;
            let x = match &split.descriptors {
                Some(p) => load_external_descriptors(p)?,
                None => compute_descriptors(&cfg, &data)?,
            };
            let search = optimize_cluster_count(
                &x,
                data.targets(),
                &candidates,
                derive_seed(cfg.seed, "split"),
                strategy,
            )?;
            match split.common.format {
                OutputFormat::Csv => {
                    println!("k,proxy_mae");
                    for (k, s) in &search.scores {
                        println!("{k},{s}");
                    }
                    println!("best,{}", search.best_k);
                }
                OutputFormat::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&search).expect("serializable")
                ),
            }
        }
        Command::Train(args) => {
            let cfg = load_config(&args.common)?;
            let data = load_dataset(&cfg)?;
            let scenario = read_manifest(&args.split)?;
            let task = find_task(&scenario, &args.task)?;
            let (model_seed, train_seed, _) = task_seeds(cfg.seed, &task.name);
            let mcfg = ModelConfig {
                seed: model_seed,
                ..cfg.model
            };
            let tcfg = TrainConfig {
                seed: train_seed,
                ..cfg.train
            };
            let outcome = train(&data, task, &mcfg, &tcfg)?;
            let out = require_out(&args.common)?;
            fs::create_dir_all(out).map_err(|e| Error::Argument(format!("{}: {e}", out.display())))?;
            write_checkpoint(&mcfg, &outcome.weights, &out.join("model.ckpt"))?;
            write_text(&out.join("history.csv"), &history_to_csv(&outcome.history))?;
            eprintln!(
                "best epoch {} (validation D-MAE {})",
                outcome.best_epoch,
                outcome.best().val_d_mae
            );
        }
        Command::Infer(args) => {
            let cfg = load_config(&args.task.common)?;
            let data = load_dataset(&cfg)?;
            let scenario = read_manifest(&args.task.split)?;
            let task = find_task(&scenario, &args.task.task)?;
            let (mcfg, w) = read_checkpoint(&args.checkpoint)?;
            let (_, _, mcd_seed) = task_seeds(cfg.seed, &task.name);
            let passes = args.passes.unwrap_or(cfg.passes);
            let det = deterministic_infer(&data, &task.test, &w, &mcfg)?;
            let tensor = mcd_infer(&data, &task.test, &w, &mcfg, passes, mcd_seed)?;
            let truth: Vec<f64> = task.test.iter().map(|&i| data.targets()[i]).collect();
            let out = require_out(&args.task.common)?;
            write_text(&out.join("deterministic.csv"), &passes_to_string(&PassTensor::from_rows(vec![det])?))?;
            write_text(&out.join("passes.csv"), &passes_to_string(&tensor))?;
            write_text(&out.join("truth.csv"), &truth_to_string(&task.test, &truth))?;
        }
        Command::Evaluate(args) => {
            let r = score_dir(&args.dir, args.passes)?;
            print_reports(&[r.clone()], Some(&r), args.format, "task");
        }
        Command::ScoreExternal(args) => {
            let r = score_external(&args.pass_file, &args.truth, args.passes, args.deterministic.as_deref())?;
            let (_, truth) = read_truth(&args.truth)?;
            log::info!("scored {} samples", truth.len());
            print_reports(&[r], None, args.format, "external");
        }
        Command::Run(args) => {
            let mut cfg = load_config(&args.common)?;
            if args.workers.is_some() {
                cfg.workers = args.workers;
            }
            let outcome = run_benchmark(&cfg)?;
            print_reports(
                &outcome.tasks,
                Some(&outcome.summary),
                args.common.format,
                outcome.scenario.strategy.as_str(),
            );
            eprintln!("manifest hash {}", outcome.manifest.content_hash);
        }
        Command::Report(args) => {
            let tasks_dir = args.dir.join("tasks");
            let mut names: Vec<PathBuf> = fs::read_dir(&tasks_dir)
                .map_err(|e| Error::Argument(format!("{}: {e}", tasks_dir.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_dir())
                .collect();
            names.sort();
            let tasks: Vec<MetricReport> = names
                .iter()
                .map(|d| score_dir(d, args.passes))
                .collect::<Result<_>>()?;
            let summary = MetricReport::summarize(SUMMARY_ROW, &tasks)?;
            print_reports(&tasks, Some(&summary), args.format, "report");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("error kind={} message={message:?}", e.kind());
            ExitCode::FAILURE
        }
    }
}
