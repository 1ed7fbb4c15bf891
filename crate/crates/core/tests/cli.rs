use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stfnn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stfnn"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn simulate_cv_train_predict_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&stfnn(&["simulate", "--scenario", "sim2", "--seed", "5", "--out-dir", "data"], d));
    for f in ["curves.csv", "locations.csv", "responses.csv", "manifest.toml"] {
        assert!(d.join("data").join(f).exists());
    }
    let table = ok(&stfnn(
        &[
            "cv", "--manifest", "data/manifest.toml", "--estimator", "FLM", "--estimator", "SARFLM_Nearest",
            "--bandwidth", "4", "--folds", "5", "--seed", "1", "--out-dir", "out",
        ],
        d,
    ));
    assert!(table.contains("SARFLM"));
    let csv = fs::read_to_string(d.join("out/results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(2).unwrap().starts_with("SARFLM,nearest,4,"));

    ok(&stfnn(
        &["train", "--manifest", "data/manifest.toml", "--estimator", "SARFLM_Nearest", "--bandwidth", "4", "--model-out", "m.json"],
        d,
    ));
    ok(&stfnn(
        &["predict", "--model", "m.json", "--curves", "data/curves.csv", "--locations", "data/locations.csv", "--out", "p.csv"],
        d,
    ));
    let preds = fs::read_to_string(d.join("p.csv")).unwrap();
    assert_eq!(preds.lines().next().unwrap(), "sample_id,prediction");
    assert_eq!(preds.lines().count(), 301);

    ok(&stfnn(&["report", "out/results.csv", "out/results.csv", "--out", "merged.csv"], d));
    assert_eq!(fs::read_to_string(d.join("merged.csv")).unwrap().lines().count(), 5);
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("exp.toml"),
        "seed = 1\nestimators = [\"FLM\", \"FLM_SP\"]\n[data]\nscenario = \"sim1\"\n[protocol]\nfolds = 10\n",
    )
    .unwrap();
    ok(&stfnn(&["cv", "--config", "exp.toml", "--folds", "4", "--out-dir", "o"], d));
    let log: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("o/run_log.json")).unwrap()).unwrap();
    assert_eq!(log["estimators"][0]["report"]["fold_rmse"].as_array().unwrap().len(), 4);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(stfnn(&["cv", "--estimator", "FLM"], d).status.code(), Some(2));
    assert_eq!(stfnn(&["cv", "--scenario", "sim1", "--estimator", "NOPE"], d).status.code(), Some(2));
    assert_eq!(stfnn(&["predict", "--model", "x", "--curves", "y", "--locations", "z"], d).status.code(), Some(2));
    assert_eq!(stfnn(&["bogus"], d).status.code(), Some(2));
    // A compact kernel much narrower than the cell spacing leaves every
    // location with only itself, so the local fits are singular.
    let out = stfnn(
        &["train", "--scenario", "sim1", "--estimator", "GWFLM_DoublePower", "--bandwidth", "0.5", "--model-out", "m.json"],
        d,
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
