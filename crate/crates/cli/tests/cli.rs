use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use toxiclass::corpus::parse_dataset;

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture() -> PathBuf {
    workspace().join("data/fixture.csv")
}

fn toxiclass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toxiclass"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: Value) -> PathBuf {
    let mut body = body;
    body["dataset"] = Value::String(fixture().display().to_string());
    let path = dir.join(name);
    std::fs::write(&path, body.to_string()).unwrap();
    path
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json_file(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn ensemble_config(dir: &Path) -> PathBuf {
    write_config(
        dir,
        "ensemble.json",
        serde_json::json!({
            "max_features": 2000,
            "resample": "smote",
            "preset": "desk",
            "models": [
                {"family": "lstm", "overrides": {"epochs": 6, "max_len": 60}},
                {"family": "cnn", "overrides": {"epochs": 6, "max_len": 60}}
            ],
            "seed": 42
        }),
    )
}

#[test]
fn unknown_model_is_a_config_error_with_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "bad.json", serde_json::json!({"models": ["lr", "xgboost"]}));
    let out_dir = dir.path().join("out");
    let out = toxiclass(&[
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("xgboost"));
    assert!(!out_dir.exists());
}

#[test]
fn missing_model_file_is_named() {
    let missing = "/nonexistent/model-lr.json";
    let out = toxiclass(&["predict", "--model", missing, "--text", "hello"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains(missing), "{}", stderr(&out));
}

#[test]
fn undersampling_balances_the_resampled_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "lr.json",
        serde_json::json!({"features": "tfidf", "resample": "under", "models": ["lr"], "seed": 42}),
    );
    let config = config.to_str().unwrap();
    for (mode, out_name) in [("paper", "paper"), ("no_leakage", "clean")] {
        let out_dir = dir.path().join(out_name);
        let out = toxiclass(&[
            "experiment",
            "--config",
            config,
            "--leakage-mode",
            mode,
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        let report = json_file(&out_dir.join("report-lr.json"));
        let (train, test) = (&report["train_counts"], &report["test_counts"]);
        let count = |v: &Value, k: &str| v[k].as_u64().unwrap();
        if mode == "paper" {
            // the fixture has 130 toxic comments; under-sampling precedes the split
            assert_eq!(count(train, "toxic") + count(test, "toxic"), 130);
            assert_eq!(count(train, "non_toxic") + count(test, "non_toxic"), 130);
        } else {
            assert_eq!(count(train, "toxic"), count(train, "non_toxic"));
            // the test quarter of the 390 comments is left untouched
            assert_eq!(count(test, "toxic") + count(test, "non_toxic"), 98);
        }
        assert_eq!(report["config"]["leakage_mode"], mode);
    }
}

#[test]
fn ensemble_prediction_and_manifest_checks() {
    let dir = tempfile::tempdir().unwrap();
    let config = ensemble_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = toxiclass(&[
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(out_dir.join("report-lstm-cnn.json").exists());
    let manifest = out_dir.join("ensemble-lstm-cnn.json");
    let manifest_str = manifest.to_str().unwrap();

    let predict = |text: &str| {
        let out = toxiclass(&["predict", "--model", manifest_str, "--text", text]);
        assert!(out.status.success(), "{}", stderr(&out));
        serde_json::from_slice::<Value>(&out.stdout).unwrap()
    };
    let empty = predict("");
    assert_eq!(empty["label"], "toxic");
    assert_eq!(empty["toxic_prob"], 0.5);
    assert_eq!(empty["nontoxic_prob"], 0.5);

    let records = parse_dataset(std::fs::File::open(fixture()).unwrap()).unwrap();
    let exemplar = records.iter().find(|r| r.flags.toxic).unwrap();
    assert_eq!(predict(&exemplar.comment_text)["label"], "toxic");

    std::fs::write(out_dir.join("vocab.tsv"), "n_docs\t1\nzzz\t0\t1\n").unwrap();
    let out = toxiclass(&["predict", "--model", manifest_str, "--text", "hello"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("vocabulary hash"), "{}", stderr(&out));
}

#[test]
fn same_config_gives_identical_outputs_and_train_evaluate_matches() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "mixed.json",
        serde_json::json!({"max_features": 2000, "resample": "smote", "preset": "desk",
                           "models": ["lr", "knn", "rf"], "seed": 5}),
    );
    let config = config.to_str().unwrap();
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = toxiclass(&["experiment", "--config", config, "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr(&out));
        out_dir
    };
    let (a, b) = (run("a"), run("b"));
    for file in ["report-lr.json", "report-knn.json", "report-rf.json", "summary.md"] {
        assert_eq!(
            std::fs::read(a.join(file)).unwrap(),
            std::fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }

    let staged = dir.path().join("staged");
    let staged_str = staged.to_str().unwrap();
    let out = toxiclass(&["prepare", "--config", config, "--out", staged_str]);
    assert!(out.status.success(), "{}", stderr(&out));
    let counts: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(
        (counts["toxic"].as_u64(), counts["non_toxic"].as_u64()),
        (Some(130), Some(260))
    );
    assert!(toxiclass(&["train", "--config", config, "--out", staged_str])
        .status
        .success());
    assert!(toxiclass(&["evaluate", "--config", config, "--out", staged_str])
        .status
        .success());
    assert_eq!(
        std::fs::read(a.join("report-rf.json")).unwrap(),
        std::fs::read(staged.join("report-rf.json")).unwrap()
    );
}

#[test]
fn ttest_of_identical_configs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "knn.json",
        serde_json::json!({"models": ["knn"], "seed": 1}),
    );
    let config = config.to_str().unwrap();
    let out_dir = dir.path().join("out");
    let out_dir = out_dir.to_str().unwrap();
    let out = toxiclass(&[
        "ttest",
        "--config-a",
        config,
        "--config-b",
        config,
        "--runs",
        "3",
        "--out",
        out_dir,
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let result: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(result["result"]["t_statistic"], 0.0);
    assert_eq!(result["result"]["p_value"], 1.0);
    let out = toxiclass(&[
        "ttest",
        "--config-a",
        config,
        "--config-b",
        config,
        "--runs",
        "1",
        "--out",
        out_dir,
    ]);
    assert_eq!(out.status.code(), Some(2));
}
