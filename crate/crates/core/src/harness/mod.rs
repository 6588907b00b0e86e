//! Configuration, synthetic data, pipeline orchestration and persisted
//! artifacts (split manifests, NIG-pass files, reports, run manifests).

mod config;
mod io;
mod pipeline;
mod synth;

pub use config::{
    DataConfig, DescriptorConfig, RunConfig, SoapSettings, SplitConfig, SyntheticSpec,
    WORKERS_ENV,
};
pub use io::{
    parse_passes, parse_truth, passes_to_string, read_passes, read_truth, report_csv,
    report_json, truth_to_string, write_passes, write_truth, SUMMARY_ROW,
};
pub use pipeline::{
    build_scenario, compute_descriptors, load_dataset, read_run_manifest, run_benchmark,
    score_external, task_seeds, BenchmarkOutcome, RunManifest, StageRecord, FAILED_MARKER,
    MANIFEST_FILE, REPORT_CSV, REPORT_JSON,
};
pub use synth::{generate_synthetic, synthetic_target, MIN_SEPARATION, SYNTH_SPECIES, TARGET_CUTOFF};
