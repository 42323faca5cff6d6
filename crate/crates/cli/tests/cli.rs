use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn c3d(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_c3d"))
        .args(args)
        .env_remove("C3D_DATA_DIR")
        .output()
        .expect("spawn c3d")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn config_value(dir: &Path, key: &str) -> String {
    let text = fs::read_to_string(dir.join("config.txt")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string))
        .unwrap_or_else(|| panic!("{key} missing from config.txt"))
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(c3d(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(c3d(&["gradcheck", "--bogus-flag"]).status.code(), Some(2));
    assert_eq!(c3d(&[]).status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = c3d(&["count-params", "--set", "train.learning_rate=0.1", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train.learning_rate"));

    let cfg = dir.path().join("bad.txt");
    fs::write(&cfg, "# comment\nseed = 3\nmodel.widht = 4\n").unwrap();
    let out = c3d(&["count-params", "--config", p(&cfg), "--out", p(&dir.path().join("run"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("model.widht") && err.contains("line 3"), "{err}");
}

#[test]
fn precedence_is_file_then_set_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.txt");
    fs::write(&cfg, "seed = 1\nmodel.fc_width = 32\nmodel.classes = 5\ndata.classes = 3\n").unwrap();

    let run = dir.path().join("a");
    let out = c3d(&["count-params", "--config", p(&cfg), "--out", p(&run)]);
    assert!(out.status.success());
    assert_eq!(config_value(&run, "seed"), "1");
    assert_eq!(config_value(&run, "model.fc_width"), "32");
    assert_eq!(config_value(&run, "model.classes"), "5");

    let run = dir.path().join("b");
    let out = c3d(&[
        "count-params", "--config", p(&cfg), "--set", "model.fc_width=48", "--set", "seed=2", "--seed", "9",
        "--classes", "6", "--out", p(&run),
    ]);
    assert!(out.status.success());
    assert_eq!(config_value(&run, "model.fc_width"), "48");
    assert_eq!(config_value(&run, "seed"), "9");
    assert_eq!(config_value(&run, "model.classes"), "6");
    assert_eq!(config_value(&run, "data.classes"), "3");
}

#[test]
fn count_params_reports_preset_totals() {
    let dir = tempfile::tempdir().unwrap();
    let out = c3d(&["count-params", "--preset", "net-128", "--classes", "101", "--out", p(dir.path())]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("total 17444965 ")), "{stdout}");
    let csv = fs::read_to_string(dir.path().join("params.csv")).unwrap();
    assert!(csv.starts_with("layer,params\n"));
    assert!(csv.trim_end().ends_with("total,17444965"));
    let layers: usize = csv
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with("total"))
        .map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(layers, 17444965);
}

#[test]
fn gradcheck_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = c3d(&["gradcheck", "--out", p(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("gradcheck.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let err: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(err < 1e-4, "{line}");
    }
}

#[test]
fn missing_dataset_names_the_environment_variable() {
    let dir = tempfile::tempdir().unwrap();
    let out = c3d(&["train", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("C3D_DATA_DIR"));
}

#[test]
fn data_dir_environment_is_the_default_location() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_c3d"))
        .args(["gen-data", "--classes", "2", "--videos-per-class", "2", "--out", p(&dir.path().join("run"))])
        .env("C3D_DATA_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let videos = c3d_core::videodata::load_dataset(&dir.path().join("motionblobs.vset")).unwrap();
    assert_eq!(videos.len(), 4);
}

#[test]
fn short_pipeline_runs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.vset");
    let ok = |out: Output| assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    ok(c3d(&["gen-data", "--classes", "4", "--videos-per-class", "5", "--output", p(&data), "--out", p(&dir.path().join("g"))]));
    let model = dir.path().join("m");
    ok(c3d(&["train", "--data", p(&data), "--set", "train.epochs=2", "--out", p(&model)]));
    assert!(model.join("weights.c3dw").exists() && model.join("train.csv").exists());
    let ex = dir.path().join("x");
    ok(c3d(&["extract", "--model", p(&model), "--data", p(&data), "--out", p(&ex)]));
    let csv = fs::read_to_string(ex.join("descriptors.csv")).unwrap();
    // One headerless row per video: id, then the descriptor.
    assert_eq!(csv.lines().count(), 20);
    let pr = dir.path().join("p");
    ok(c3d(&["predict", "--model", p(&model), "--data", p(&data), "--out", p(&pr)]));
    assert_eq!(fs::read_to_string(pr.join("predictions.csv")).unwrap().lines().count(), 1 + 20);
}
