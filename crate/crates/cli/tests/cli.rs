use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spottune"))
        .args(args)
        .env_remove("SPOTTUNE_CONFIG")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small demo directory shared by the tests; never modified after setup.
fn demo() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap().keep();
        ok(&["demo", "--out", s(&dir), "--days", "10", "--max-steps", "30", "--seed", "3"]);
        dir
    })
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn demo_writes_every_input() {
    let d = demo();
    for f in ["raw/spot_prices.csv", "workload.json", "spottune.toml", "curves/ResNet-14.csv", "traces/r4.large.csv"] {
        assert!(d.join(f).is_file(), "{f}");
    }
    let trace = fs::read_to_string(d.join("traces/r4.large.csv")).unwrap();
    assert!(trace.starts_with("# spottune "));
    assert!(trace.contains("seed=3"));
    assert_eq!(code(&run(&["demo", "--out", s(&d.join("x")), "--days", "3"])), 1);
}

#[test]
fn ingest_rebuilds_the_regular_traces() {
    let d = demo();
    let out = tempfile::tempdir().unwrap();
    ok(&["ingest", s(&d.join("raw/spot_prices.csv")), "--out", s(out.path())]);
    let strip = |p: PathBuf| -> Vec<String> {
        fs::read_to_string(p).unwrap().lines().filter(|l| !l.starts_with('#')).map(str::to_string).collect()
    };
    assert_eq!(strip(out.path().join("r4.large.csv")), strip(d.join("traces/r4.large.csv")));
}

#[test]
fn ingest_rejects_bad_rows_unless_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("prices.csv");
    fs::write(
        &input,
        "timestamp,instance_type,price\n2017-04-26T00:00:00Z,r4.large,0.03\nnot a time,r4.large,0.04\n2017-04-26T02:00:00Z,r4.large,0.05\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    assert_eq!(code(&run(&["ingest", s(&input), "--out", s(&out)])), 2);
    let skipped = run(&["ingest", s(&input), "--out", s(&out), "--skip-bad"]);
    assert_eq!(code(&skipped), 0);
    assert!(!skipped.stderr.is_empty());
    assert!(out.join("r4.large.csv").is_file());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&["no-such-command"])), 1);
    assert_eq!(code(&run(&["fit-curve", "--max-steps", "10"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn missing_data_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    let d = demo();
    let out = run(&["simulate", "--config", s(&d.join("spottune.toml")), "--traces", s(&empty), "--estimator", "historical"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn simulation_beyond_the_traces_exits_three() {
    let d = demo();
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(d.join("spottune.toml")).unwrap();
    let late = 1_493_164_800 + 10 * 86_400 - 1800;
    let text: String = text
        .lines()
        .map(|l| if l.starts_with("start_time") { format!("start_time = {late}") } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n");
    let text = text
        .replace("traces = \"traces\"", &format!("traces = {:?}", s(&d.join("traces"))))
        .replace("workload = \"workload.json\"", &format!("workload = {:?}", s(&d.join("workload.json"))));
    let cfg = dir.path().join("late.toml");
    fs::write(&cfg, text).unwrap();
    let out = run(&["simulate", "--config", s(&cfg), "--estimator", "historical", "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_writes_reports_for_every_policy() {
    let d = demo();
    let out = tempfile::tempdir().unwrap();
    let cfg = d.join("spottune.toml");
    ok(&["simulate", "--config", s(&cfg), "--estimator", "historical", "--theta-sweep", "--out", s(out.path())]);
    for policy in ["spottune", "cheapest", "fastest"] {
        let r = json(&out.path().join(format!("report-{policy}.json")));
        assert_eq!(r["policy"], policy);
        assert_eq!(r["provenance"]["seed"], 3);
        assert!(r["report"]["total_cost"].as_f64().unwrap() > 0.0);
        let ledger = fs::read_to_string(out.path().join(format!("ledger-{policy}.csv"))).unwrap();
        assert!(ledger.starts_with("# spottune "));
    }
    let pcr = fs::read_to_string(out.path().join("pcr.csv")).unwrap();
    let spot = pcr.lines().find(|l| l.starts_with("spottune")).unwrap();
    assert!(spot.split(',').any(|f| f == "1"), "{spot}");
    let sweep = fs::read_to_string(out.path().join("theta-sweep.csv")).unwrap();
    assert_eq!(sweep.lines().filter(|l| !l.starts_with('#')).count(), 11);

    let summary = ok(&["report", s(out.path()), "--detail"]);
    assert!(summary.contains("spottune") && summary.contains("cheapest"));
    let csv = out.path().join("summary.csv");
    ok(&["report", s(out.path()), "--out", s(&csv)]);
    assert!(fs::read_to_string(csv).unwrap().lines().count() >= 4);
}

#[test]
fn constant_estimator_and_theta_override() {
    let d = demo();
    let out = tempfile::tempdir().unwrap();
    ok(&[
        "simulate",
        "--config",
        s(&d.join("spottune.toml")),
        "--estimator",
        "constant:0.3",
        "--theta",
        "1",
        "--out",
        s(out.path()),
    ]);
    let r = json(&out.path().join("report-spottune.json"));
    assert_eq!(r["report"]["theta"], 1.0);
    assert_eq!(code(&run(&["simulate", "--config", s(&d.join("spottune.toml")), "--estimator", "magic"])), 1);
}

#[test]
fn fit_curve_prefers_stages_on_a_drop() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("curve.csv");
    let mut text = String::from("step,metric\n");
    for k in 0..120u32 {
        let k = k as f64;
        let v = if k < 60.0 { 1.0 / (0.05 * k + 1.0) + 0.4 } else { 0.4 * (1.0 / (0.05 * k + 1.0) + 0.4) };
        text.push_str(&format!("{k},{v}\n"));
    }
    fs::write(&input, text).unwrap();
    let out = dir.path().join("fit.json");
    ok(&["fit-curve", "--input", s(&input), "--max-steps", "120", "--theta", "1", "--out", s(&out)]);
    let fit = json(&out);
    let staged = fit["staged"]["rss"].as_f64().unwrap();
    let single = fit["single"]["rss"].as_f64().unwrap();
    assert!(staged < single, "{staged} vs {single}");
    assert!(fit["staged"]["curve"]["stages"].as_array().unwrap().len() >= 2);

    let short = dir.path().join("short.csv");
    fs::write(&short, "step,metric\n0,1.0\n1,0.9\n2,0.8\n").unwrap();
    assert_eq!(code(&run(&["fit-curve", "--input", s(&short), "--max-steps", "3"])), 2);
}

#[test]
fn revpred_train_and_evaluate() {
    let d = demo();
    let models = tempfile::tempdir().unwrap();
    let cfg = d.join("spottune.toml");
    ok(&[
        "train-revpred",
        "--config",
        s(&cfg),
        "--instance",
        "r4.large",
        "--arch",
        "logistic",
        "--epochs",
        "2",
        "--out",
        s(models.path()),
    ]);
    let model = models.path().join("r4.large.logistic.json");
    let m = json(&model);
    assert!(m["tags"]["provenance"].as_str().unwrap().contains("seed=3"));

    let eval = models.path().join("eval.csv");
    let printed = ok(&["eval-revpred", "--config", s(&cfg), "--models", s(models.path()), "--out", s(&eval)]);
    assert!(printed.contains("f1"));
    assert!(fs::read_to_string(&eval).unwrap().contains("r4.large"));

    // Evaluating from inside the training range overlaps it.
    let overlap = run(&[
        "eval-revpred",
        "--config",
        s(&cfg),
        "--models",
        s(models.path()),
        "--eval-from",
        "1493164800",
    ]);
    assert_eq!(code(&overlap), 2);
}

#[test]
fn constant_market_cannot_be_trained() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("traces");
    fs::create_dir_all(&traces).unwrap();
    let mut text = String::from("timestamp,instance_type,price\n");
    for m in 0..(3 * 1440) {
        text.push_str(&format!("{},r4.large,0.04\n", 1_493_164_800 + 60 * m));
    }
    fs::write(traces.join("r4.large.csv"), text).unwrap();
    let out = run(&[
        "train-revpred",
        "--traces",
        s(&traces),
        "--instance",
        "r4.large",
        "--arch",
        "logistic",
        "--train-until",
        "1493337600",
        "--out",
        s(&dir.path().join("models")),
    ]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_from_the_environment() {
    let d = demo();
    let out = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_spottune"))
        .args(["simulate", "--estimator", "historical", "--out", s(out.path())])
        .env("SPOTTUNE_CONFIG", d.join("spottune.toml"))
        .output()
        .unwrap();
    assert_eq!(code(&status), 0, "{}", String::from_utf8_lossy(&status.stderr));
    assert!(out.path().join("report-spottune.json").is_file());
}

#[test]
fn reruns_are_byte_identical() {
    let d = demo();
    let out = tempfile::tempdir().unwrap();
    let cfg = d.join("spottune.toml");
    let args = ["simulate", "--config", s(&cfg), "--estimator", "historical", "--out", s(out.path())];
    ok(&args);
    let first = fs::read(out.path().join("report-spottune.json")).unwrap();
    let ledger = fs::read(out.path().join("ledger-spottune.csv")).unwrap();
    ok(&args);
    assert_eq!(first, fs::read(out.path().join("report-spottune.json")).unwrap());
    assert_eq!(ledger, fs::read(out.path().join("ledger-spottune.csv")).unwrap());
}
