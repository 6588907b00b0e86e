use std::fs;
use std::path::Path;
use std::process::Command;

use oodbench_core::harness::{
    generate_synthetic, parse_passes, read_passes, read_run_manifest, read_truth, run_benchmark,
    score_external, synthetic_target, RunConfig, FAILED_MARKER, MANIFEST_FILE, REPORT_CSV,
    SUMMARY_ROW,
};
use oodbench_core::metrics::MetricReport;
use oodbench_core::CrystalStructure;

fn brute_target(s: &CrystalStructure) -> f64 {
    let pos = s.cartesian_positions();
    let m = s.lattice().matrix();
    let (mut pairs, mut inv) = (0usize, 0.0);
    for ri in &pos {
        for rj in &pos {
            for a in -3i32..=3 {
                for b in -3i32..=3 {
                    for c in -3i32..=3 {
                        let shift = m.row(0).transpose() * a as f64
                            + m.row(1).transpose() * b as f64
                            + m.row(2).transpose() * c as f64;
                        let d = (rj + shift - ri).norm();
                        if d > 1e-8 && d <= 3.5 {
                            pairs += 1;
                            inv += 1.0 / d;
                        }
                    }
                }
            }
        }
    }
    let mean_inv = if pairs == 0 { 0.0 } else { inv / pairs as f64 };
    pairs as f64 / s.len() as f64 + 0.1 * mean_inv
}

#[test]
fn synthetic_targets_match_brute_force() {
    let d = generate_synthetic(60, 5).unwrap();
    for (s, &t) in d.structures().iter().zip(d.targets()) {
        assert!((brute_target(s) - t).abs() < 1e-10);
        assert_eq!(synthetic_target(s).unwrap(), t);
    }
}

#[test]
fn hand_built_pass_file_scores_by_hand() {
    let dir = tempfile::tempdir().unwrap();
    let passes = dir.path().join("p.csv");
    let truth = dir.path().join("truth.csv");
    fs::write(
        &passes,
        "T,N\n2,2\nt,i,gamma,nu,alpha,beta\n0,0,1,1,2,1\n0,1,3,2,3,4\n1,0,3,3,4,3\n1,1,3,2,3,4\n",
    )
    .unwrap();
    fs::write(&truth, "index,target\n7,2\n9,1\n").unwrap();
    let r = score_external(&passes, &truth, 2, None).unwrap();
    assert_eq!(r.n_samples, 2);
    assert_eq!(r.mae, 1.5);
    assert_eq!(r.eviu, 2.5);
    assert_eq!(r.d_mae, 1.0);
    assert_eq!(r.d_unc, 0.5);
    assert_eq!(r.d_eviu, (1.5 + 3.0) / 2.0);
    assert_eq!(r.spearman_for("eviu"), Some(1.0));
    assert_eq!(r.spearman_for("d_unc"), Some(-1.0));
    assert_eq!(r.spearman_for("d_eviu"), Some(1.0));
    assert!(score_external(&passes, &truth, 3, None).is_err());
}

#[test]
fn pass_file_rejects_bad_cells() {
    let bad = "T,N\n1,1\nt,i,gamma,nu,alpha,beta\n0,0,1,1,0.5,1\n";
    assert!(parse_passes(bad, "mem").is_err());
    let missing = "T,N\n1,2\nt,i,gamma,nu,alpha,beta\n0,0,1,1,2,1\n";
    assert!(parse_passes(missing, "mem").is_err());
}

fn small_config(out: &Path, n: usize, strategy: &str, k: usize) -> RunConfig {
    RunConfig::from_toml(
        &format!(
            r#"
seed = 3
output_dir = "{}"
passes = 6
[data.synthetic]
n = {n}
[split]
strategy = "{strategy}"
k = {k}
[model]
embed_dim = 12
n_layers = 2
n_rbf = 8
[train]
epochs = 4
patience = 10
"#,
            out.display()
        ),
        "inline",
    )
    .unwrap()
}

#[test]
fn soap_loco_run_writes_four_tasks_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&dir.path().join("run"), 200, "SOAP-LOCO", 4);
    let outcome = run_benchmark(&cfg).unwrap();
    assert_eq!(outcome.tasks.len(), 4);
    let csv = fs::read_to_string(cfg.output_dir.join(REPORT_CSV)).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[5].starts_with(SUMMARY_ROW));
    let covered: usize = outcome.tasks.iter().map(|t| t.n_samples).sum();
    assert_eq!(covered, 200);
    let manifest = read_run_manifest(&cfg.output_dir.join(MANIFEST_FILE)).unwrap();
    assert!(manifest.verify());
    assert!(!cfg.output_dir.join(FAILED_MARKER).exists());

    // stored artifacts reproduce the in-process metrics
    for t in &outcome.tasks {
        let task_dir = cfg.output_dir.join("tasks").join(&t.name);
        let scored = score_external(
            &task_dir.join("passes.csv"),
            &task_dir.join("truth.csv"),
            6,
            Some(&task_dir.join("deterministic.csv")),
        )
        .unwrap();
        assert_eq!(
            MetricReport { name: t.name.clone(), per_sample: None, ..scored },
            MetricReport { per_sample: None, ..t.clone() }
        );
        let p = read_passes(&task_dir.join("passes.csv")).unwrap();
        assert_eq!(p.passes(), 6);
        assert_eq!(read_truth(&task_dir.join("truth.csv")).unwrap().1.len(), t.n_samples);
    }
}

#[test]
fn failing_stage_leaves_marker() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(&dir.path().join("run"), 30, "LOCO", 40);
    cfg.descriptors = Default::default();
    assert!(run_benchmark(&cfg).is_err());
    let marker = fs::read_to_string(cfg.output_dir.join(FAILED_MARKER)).unwrap();
    assert!(marker.starts_with("stage: "), "{marker}");
}

fn cli(args: &[&str], cwd: &Path) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_oodbench"))
        .args(args)
        .current_dir(cwd)
        .env_remove("OODBENCH_WORKERS")
        .output()
        .unwrap();
    (
        out.status.success(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn cli_walks_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    let (ok, _, err) = cli(&["dataset", "synth", "--n", "40", "--seed", "2", "--out", "data.jsonl"], cwd);
    assert!(ok, "{err}");
    fs::write(
        cwd.join("run.toml"),
        "seed = 2\noutput_dir = \"out\"\npasses = 4\n[data]\npath = \"data.jsonl\"\n\
         [split]\nstrategy = \"SOAP-LOCO\"\nk = 2\n[model]\nembed_dim = 8\nn_layers = 1\nn_rbf = 6\n\
         [train]\nepochs = 2\n",
    )
    .unwrap();
    let (ok, _, err) = cli(&["descriptors", "compute", "--config", "run.toml", "--out", "x.csv"], cwd);
    assert!(ok, "{err}");
    let (ok, _, err) = cli(
        &["split", "generate", "--config", "run.toml", "--descriptors", "x.csv", "--out", "split.json"],
        cwd,
    );
    assert!(ok, "{err}");
    let (ok, stdout, err) = cli(&["split", "optimize-k", "--config", "run.toml", "--descriptors", "x.csv", "--candidates", "2,3"], cwd);
    assert!(ok, "{err}");
    assert!(stdout.lines().last().unwrap().starts_with("best,"));
    let task = ["--split", "split.json", "--task", "cluster_000", "--config", "run.toml", "--out", "t"];
    let (ok, _, err) = cli(&[&["train"][..], &task].concat(), cwd);
    assert!(ok, "{err}");
    let (ok, _, err) = cli(&[&["infer", "--checkpoint", "t/model.ckpt"][..], &task].concat(), cwd);
    assert!(ok, "{err}");
    let (ok, eval, err) = cli(&["evaluate", "--dir", "t", "--passes", "4"], cwd);
    assert!(ok, "{err}");
    assert!(eval.starts_with("task,n_samples,mae"));
    let (ok, json, err) = cli(
        &["score-external", "--pass-file", "t/passes.csv", "--truth", "t/truth.csv", "--passes", "4", "--format", "json"],
        cwd,
    );
    assert!(ok, "{err}");
    assert!(serde_json::from_str::<serde_json::Value>(&json).is_ok());
    let (ok, _, err) = cli(&["run", "--config", "run.toml", "--workers", "1"], cwd);
    assert!(ok, "{err}");
    let (ok, report, err) = cli(&["report", "--dir", "out", "--passes", "4"], cwd);
    assert!(ok, "{err}");
    assert_eq!(report, fs::read_to_string(cwd.join("out").join(REPORT_CSV)).unwrap());
}

#[test]
fn cli_errors_are_one_parseable_line() {
    let dir = tempfile::tempdir().unwrap();
    let (ok, _, err) = cli(&["run", "--config", "missing.toml"], dir.path());
    assert!(!ok);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1);
    assert!(lines[0].starts_with("error kind=io message="), "{err}");
}
