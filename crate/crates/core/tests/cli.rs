use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = "\
hidden_layers = 16,16
max_epochs = 6
point_epochs = 6
mc_passes = 5
ensemble_size = 2
qd_search_trials = 2
cv = kfold:2
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dualaqd"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new(rows: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace { dir };
        std::fs::write(ws.path("small.cfg"), format!("{SMALL}n_points = {rows}\n")).unwrap();
        let o = run(&["synth", "--config", p(&ws.path("small.cfg")), "--out", p(&ws.path("data.csv"))]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn cmd(&self, sub: &str, out: &str, extra: &[&str]) -> Output {
        let cfg = self.path("small.cfg");
        let data = self.path("data.csv");
        let out = self.path(out);
        let mut args = vec![sub, "--config", p(&cfg), "--data", p(&data), "--out", p(&out)];
        args.extend_from_slice(extra);
        run(&args)
    }
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn code(o: &Output) -> Option<i32> {
    o.status.code()
}

#[test]
fn synth_writes_default_dataset_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(run(&["synth", "--out", p(&a), "--seed", "3"]).status.success());
    assert!(run(&["synth", "--out", p(&b), "--seed", "3"]).status.success());
    let text = std::fs::read_to_string(&a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 4);
    assert_eq!(lines.count(), 1000);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn synth_accepts_tiny_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, "n_points = 2\n").unwrap();
    let out = dir.path().join("d.csv");
    assert!(run(&["synth", "--config", p(&cfg), "--out", p(&out)]).status.success());
    assert_eq!(std::fs::read_to_string(out).unwrap().lines().count(), 3);
}

#[test]
fn unknown_method_is_a_config_error() {
    let ws = Workspace::new(60);
    let o = ws.cmd("run", "r", &["--method", "bogus"]);
    assert_eq!(code(&o), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for valid in ["dualaqd", "qdplus", "mcdropout_pi"] {
        assert!(err.contains(valid), "{err}");
    }
}

#[test]
fn bad_config_lines_are_config_errors() {
    let ws = Workspace::new(60);
    std::fs::write(ws.path("bad.cfg"), "tau = 2\nno_such_key = 1\nthis line is nonsense\n").unwrap();
    let o = run(&[
        "run",
        "--config",
        p(&ws.path("bad.cfg")),
        "--data",
        p(&ws.path("data.csv")),
        "--out",
        p(&ws.path("o")),
    ]);
    assert_eq!(code(&o), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("no_such_key") && err.contains("line 3"), "{err}");
}

#[test]
fn missing_or_malformed_data_is_a_data_error() {
    let ws = Workspace::new(60);
    let o = run(&["run", "--data", p(&ws.path("nope.csv")), "--out", p(&ws.path("o"))]);
    assert_eq!(code(&o), Some(3));
    std::fs::write(ws.path("bad.csv"), "x,y\n1,2\n3,abc\n").unwrap();
    let o = run(&["run", "--data", p(&ws.path("bad.csv")), "--out", p(&ws.path("o"))]);
    assert_eq!(code(&o), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn divergent_training_is_a_numeric_error() {
    let ws = Workspace::new(60);
    std::fs::write(ws.path("hot.cfg"), format!("{SMALL}learning_rate = 1e300\n")).unwrap();
    let o = run(&[
        "run",
        "--config",
        p(&ws.path("hot.cfg")),
        "--data",
        p(&ws.path("data.csv")),
        "--out",
        p(&ws.path("o")),
    ]);
    assert_eq!(code(&o), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn run_writes_every_artifact_and_is_idempotent() {
    let ws = Workspace::new(80);
    assert!(ws.cmd("run", "a", &["--seed", "5"]).status.success());
    assert!(ws.cmd("run", "b", &["--seed", "5"]).status.success());
    for name in ["metrics.csv", "predictions.csv", "plotdata.csv", "lambda_trace.csv"] {
        let a = std::fs::read(ws.path("a").join(name)).unwrap();
        let b = std::fs::read(ws.path("b").join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    let m = manifest(&ws.path("a"));
    assert_eq!(m["command"], "run");
    assert_eq!(m["seed"], 5);
    let trace = std::fs::read_to_string(ws.path("a").join("lambda_trace.csv")).unwrap();
    // header plus 6 epochs for each of 2 folds, all with a λ value
    assert_eq!(trace.lines().count(), 13);
    assert!(trace.lines().skip(1).all(|l| !l.split(',').nth(5).unwrap().is_empty()));
    let preds = std::fs::read_to_string(ws.path("a").join("predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), 81);
}

#[test]
fn mc_dropout_run_records_noise_variance() {
    let ws = Workspace::new(60);
    let o = ws.cmd("run", "mc", &["--method", "mcdropout_pi"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&ws.path("mc"));
    let folds = m["methods"][0]["folds"].as_array().unwrap();
    assert!(folds.iter().all(|f| f["sigma2_noise"].as_f64().unwrap() > 0.0));
}

#[test]
fn compare_reports_a_winner() {
    let ws = Workspace::new(60);
    let o = ws.cmd("compare", "c", &["--method", "dualaqd,mcdropout_pi"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&ws.path("c"));
    assert_eq!(m["methods"].as_array().unwrap().len(), 2);
    let winner = m["comparison"]["winner"].as_str().unwrap();
    assert!(["dualaqd", "mcdropout_pi"].contains(&winner));
}

#[test]
fn gridsearch_scores_every_candidate() {
    let ws = Workspace::new(60);
    let o = ws.cmd("gridsearch", "g", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = std::fs::read_to_string(ws.path("g").join("metrics.csv")).unwrap();
    // 5 candidates, each with 2 folds plus mean and std rows
    assert_eq!(metrics.lines().count(), 1 + 5 * 4);
    let m = manifest(&ws.path("g"));
    assert_eq!(m["grid"]["rows"].as_array().unwrap().len(), 5);

    let o = ws.cmd("gridsearch", "g2", &["--alpha", ""]);
    assert_eq!(code(&o), Some(2));
}
