//! End-to-end exercises of the `cdmer` binary and the harness surface:
//! subcommand flows, report determinism, sweep selection, and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cdmer_cli::config::{Method, RstrMode, RunConfig, SweepGrids, TaskSelection};
use cdmer_cli::report::{render_json, render_tsv};
use cdmer_cli::runner::{run_protocol, run_task};
use cdmer_cli::verify::synthetic_protocol_config;
use cdmer_core::data::TaskSpec;
use cdmer_core::rstr::RstrHyperparams;

fn cdmer() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cdmer"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn generate_pair(dir: &Path, seed: u64) {
    let out = run(cdmer()
        .arg("generate-synthetic")
        .arg("--out-dir")
        .arg(dir)
        .args(["--seed", &seed.to_string()])
        .args(["--n-source", "45", "--n-target", "45"]));
    assert!(out.status.success(), "generate failed: {}", stderr(&out));
}

#[test]
fn generate_train_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    generate_pair(dir.path(), 3);
    for name in ["source.features", "target.features", "config.json"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }

    let model_path = dir.path().join("model.json");
    let out = run(cdmer()
        .arg("train")
        .arg("--source")
        .arg(dir.path().join("source.features"))
        .arg("--target")
        .arg(dir.path().join("target.features"))
        .arg("--out")
        .arg(&model_path)
        .args(["--lambda", "10"]));
    assert!(out.status.success(), "train failed: {}", stderr(&out));
    assert!(model_path.exists());

    let out = run(cdmer()
        .arg("predict")
        .arg("--model")
        .arg(&model_path)
        .arg("--test")
        .arg(dir.path().join("target.features")));
    assert!(out.status.success(), "predict failed: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("sample\tpredicted\tlabel_vector"));
    // 45 samples + header
    assert_eq!(text.lines().count(), 46);
}

#[test]
fn run_task_reports_and_repeats_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    generate_pair(dir.path(), 4);
    let config = dir.path().join("config.json");

    let mut first = None;
    for _ in 0..2 {
        let out = run(cdmer()
            .arg("run-task")
            .arg("--config")
            .arg(&config)
            .args(["--task", "Synth.1", "--method", "both"]));
        assert!(out.status.success(), "run-task failed: {}", stderr(&out));
        let text = stdout(&out);
        assert!(text.contains("Synth.1\trstr"));
        assert!(text.contains("Synth.1\tregression-baseline"));
        match &first {
            None => first = Some(text),
            Some(prev) => assert_eq!(prev, &text, "reruns must be byte-identical"),
        }
    }
}

#[test]
fn jobs_flag_never_changes_output_bytes() {
    let dir = tempfile::tempdir().unwrap();
    generate_pair(dir.path(), 5);
    let config = dir.path().join("config.json");
    let sweep_cfg = {
        let mut cfg = RunConfig::load(&config).unwrap();
        cfg.rstr = RstrMode::Sweep(SweepGrids {
            lambda: vec![0.1, 10.0, 1000.0],
            mu: vec![0.5],
            gamma: vec![0.05],
            ..SweepGrids::default()
        });
        cfg
    };
    let serial = {
        let mut cfg = sweep_cfg.clone();
        cfg.jobs = 1;
        render_tsv(&run_protocol(&cfg).unwrap())
    };
    let threaded = {
        let mut cfg = sweep_cfg;
        cfg.jobs = 6;
        render_tsv(&run_protocol(&cfg).unwrap())
    };
    assert_eq!(serial, threaded);
}

#[test]
fn degenerate_sweep_equals_fixed_run() {
    let dir = tempfile::tempdir().unwrap();
    generate_pair(dir.path(), 6);
    let base = RunConfig::load(&dir.path().join("config.json")).unwrap();
    let hp = RstrHyperparams {
        lambda: 10.0,
        ..RstrHyperparams::default()
    };

    let mut fixed = base.clone();
    fixed.method = Method::Rstr;
    fixed.rstr = RstrMode::Fixed(hp.clone());
    let task = fixed.select_task("Synth.1").unwrap();
    let fixed_results = run_task(&fixed, &task).unwrap();

    let mut single = base;
    single.method = Method::Rstr;
    single.rstr = RstrMode::Sweep(SweepGrids {
        lambda: vec![hp.lambda],
        mu: vec![hp.mu],
        gamma: vec![hp.gamma],
        ..SweepGrids::default()
    });
    let sweep_results = run_task(&single, &task).unwrap();

    assert_eq!(fixed_results[0].mean_f1, sweep_results[0].mean_f1);
    assert_eq!(fixed_results[0].accuracy, sweep_results[0].accuracy);
}

#[test]
fn tsv_and_json_report_identical_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synthetic_protocol_config(dir.path(), 11).unwrap();
    let report = run_protocol(&cfg).unwrap();
    let tsv = render_tsv(&report);
    let json: serde_json::Value = serde_json::from_str(&render_json(&report)).unwrap();

    let mut tsv_cells = Vec::new();
    for line in tsv.lines().skip(3) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() >= 3 && !line.starts_with("Average") {
            tsv_cells.push((fields[0].to_string(), fields[1].to_string(), fields[2].to_string()));
        }
    }
    let mut json_cells = Vec::new();
    for entry in json["entries"].as_array().unwrap() {
        for r in entry["results"].as_array().unwrap() {
            json_cells.push((
                r["task_id"].as_str().unwrap().to_string(),
                r["method"].as_str().unwrap().to_string(),
                r["cell"].as_str().unwrap().to_string(),
            ));
        }
    }
    assert_eq!(tsv_cells, json_cells);
    assert_eq!(tsv_cells.len(), 24); // 12 tasks x 2 methods
}

#[test]
fn protocol_failure_is_partial_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = synthetic_protocol_config(dir.path(), 12).unwrap();
    // break one dataset file
    let path = &cfg.manifests["V"].feature_file;
    fs::write(path, "#cdmer-features v1 K=6 d=8 N=0 classes=\n").unwrap();
    cfg.method = Method::Baseline;
    let report = run_protocol(&cfg).unwrap();
    assert!(report.partial);
    let failed: Vec<&str> = report
        .entries
        .iter()
        .filter(|e| e.error.is_some())
        .map(|e| e.task_id.as_str())
        .collect();
    // V appears in Exp.1, Exp.2, Exp.5, Exp.6, Exp.9, Exp.10
    assert_eq!(failed, vec!["Exp.1", "Exp.2", "Exp.5", "Exp.6", "Exp.9", "Exp.10"]);
    let tsv = render_tsv(&report);
    assert!(tsv.contains("Exp.1\t-\terror: "));
    assert!(tsv.contains("empty dataset"));
}

#[test]
fn exit_codes_follow_the_contract() {
    // usage error: missing required flag
    let out = run(cdmer().arg("run-task"));
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));

    // config error: file absent
    let out = run(cdmer().args(["run-protocol", "--config", "/nonexistent/cfg.json"]));
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));

    // data error: config is fine but a feature file is corrupt
    let dir = tempfile::tempdir().unwrap();
    generate_pair(dir.path(), 7);
    fs::write(
        dir.path().join("target.features"),
        "#cdmer-features v1 K=6 d=8 N=1 classes=\nnot-a-number\n",
    )
    .unwrap();
    let out = run(cdmer()
        .arg("run-task")
        .arg("--config")
        .arg(dir.path().join("config.json"))
        .args(["--task", "Synth.1"]));
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    // help exits 0
    let out = run(cdmer().arg("--help"));
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn baseline_on_source_copy_is_nearly_perfect() {
    let dir = tempfile::tempdir().unwrap();
    generate_pair(dir.path(), 10);
    let mut cfg = RunConfig::load(&dir.path().join("config.json")).unwrap();
    // Point the target at the source file: separable data, no shift at all.
    let source_file = cfg.manifests["S"].feature_file.clone();
    let n = cfg.manifests["S"].n;
    let counts = cfg.manifests["S"].class_counts.clone();
    let target = cfg.manifests.get_mut("T").unwrap();
    target.feature_file = source_file;
    target.n = n;
    target.class_counts = counts;
    cfg.method = Method::Baseline;
    let task = cfg.select_task("Synth.1").unwrap();
    let results = run_task(&cfg, &task).unwrap();
    assert_eq!(results.len(), 1);
    assert!(
        results[0].accuracy >= 95.0,
        "separable source-copy accuracy {}",
        results[0].accuracy
    );
}

#[test]
fn sweep_never_selects_on_accuracy_over_f1() {
    use cdmer_cli::runner::select_best;
    // a grid point with the best accuracy but a worse mean F1 must lose
    let evals = vec![(0.62, 95.0), (0.80, 70.0), (0.79, 99.0)];
    assert_eq!(select_best(&evals), 1);
}

#[test]
fn config_flags_override_file_values() {
    let dir = tempfile::tempdir().unwrap();
    generate_pair(dir.path(), 8);
    let config = dir.path().join("config.json");
    let report_path = dir.path().join("report.json");
    let out = run(cdmer()
        .arg("run-task")
        .arg("--config")
        .arg(&config)
        .args(["--task", "Synth.1", "--method", "baseline", "--format", "json"])
        .arg("--out")
        .arg(&report_path));
    assert!(out.status.success(), "{}", stderr(&out));
    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    let results = parsed["entries"][0]["results"].as_array().unwrap();
    assert_eq!(results.len(), 1);
    assert_eq!(results[0]["method"], "regression-baseline");
}

#[test]
fn missing_target_labels_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    generate_pair(dir.path(), 9);
    // strip labels from the target file by rewriting it unlabeled
    let target = dir.path().join("target.features");
    let text = fs::read_to_string(&target).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().replace("classes=class0,class1,class2", "classes=");
    let mut rewritten = header;
    rewritten.push('\n');
    for line in lines {
        let rest = line.split_once(' ').map(|(_, v)| v).unwrap_or(line);
        rewritten.push_str(rest);
        rewritten.push('\n');
    }
    fs::write(&target, rewritten).unwrap();

    let cfg = RunConfig::load(&dir.path().join("config.json")).unwrap();
    let task = cfg.select_task("Synth.1").unwrap();
    let err = run_task(&cfg, &task).unwrap_err();
    assert!(err.to_string().contains("scoring needs them"), "{err}");
}

#[test]
fn config_validation_rejects_unknown_dataset_ids() {
    let cfg = RunConfig {
        tasks: TaskSelection::List(vec![TaskSpec {
            task_id: "X.1".into(),
            source_id: "A".into(),
            target_id: "B".into(),
            type_tag: cdmer_core::data::TaskType::TypeI,
        }]),
        ..RunConfig::default()
    };
    let err = cfg.validate().unwrap_err();
    assert!(err.to_string().contains("no manifest"), "{err}");
}
