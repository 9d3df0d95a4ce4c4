use std::path::PathBuf;
use std::process::{Command, Output};

fn qrobust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrobust"))
        .args(args)
        .env_remove("QROBUST_DATA_DIR")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn subset_dir() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/mnist-subset")
        .display()
        .to_string()
}

#[test]
fn verify_rows_from_probabilities() {
    let args = ["verify", "--p0", "0.625719,0.5", "--epsilon", "0.01"];
    let out = qrobust(&args);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(
        text,
        "index,p0,p1,v2,cos_theta_min,delta,class\n\
         0,0.625719,0.374281,0.0157457,0.999886,0.00011386,0\n\
         1,0.5,0.5,0,,,unknown\n"
    );
    assert_eq!(stdout(&qrobust(&args)), text);
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 unclassifiable"));
}

#[test]
fn verify_json_output() {
    let out = qrobust(&["verify", "--p0", "0.133918", "--format", "json"]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let row = &value["rows"][0];
    assert_eq!(row["class"], "one");
    assert!((row["delta"].as_f64().unwrap() - 0.00104755).abs() < 1e-8);
}

#[test]
fn missing_data_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let out = qrobust(&[
        "train",
        "--data",
        "/nonexistent/mnist",
        "--out",
        model.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/mnist"));
}

#[test]
fn selftest_exit_codes() {
    assert_eq!(
        qrobust(&["selftest", "--group", "bloch"]).status.code(),
        Some(0)
    );
    let out = qrobust(&["selftest", "--group", "bloch", "--inject-violation"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn zero_epoch_training_writes_empty_history() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let history = dir.path().join("history.csv");
    let out = qrobust(&[
        "train",
        "--data",
        &subset_dir(),
        "--train-size",
        "20",
        "--test-size",
        "10",
        "--epochs",
        "0",
        "--out",
        model.to_str().unwrap(),
        "--history",
        history.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = std::fs::read_to_string(&history).unwrap();
    assert_eq!(rows.lines().count(), 1);

    let verify = qrobust(&[
        "verify",
        "--data",
        &subset_dir(),
        "--train-size",
        "20",
        "--test-size",
        "10",
        "--model",
        model.to_str().unwrap(),
    ]);
    assert!(verify.status.success());
    assert_eq!(stdout(&verify).lines().count(), 11);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "[verify]\nepsilom = 0.1\n").unwrap();
    let out = qrobust(&["--config", path.to_str().unwrap(), "verify", "--p0", "0.7"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_supplies_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "[verify]\nepsilon = 0.5\n").unwrap();
    let out = qrobust(&["--config", path.to_str().unwrap(), "verify", "--p0", "0.7"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("unknown"));
}
