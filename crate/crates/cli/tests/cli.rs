use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn viewpool(args: &[&str], cache: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_viewpool"));
    cmd.args(args).env("RUST_LOG", "warn");
    match cache {
        Some(c) => cmd.env("VIEWPOOL_CACHE_DIR", c),
        None => cmd.env_remove("VIEWPOOL_CACHE_DIR"),
    };
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Deterministic AR(1)-like series with a level shift halfway, 1990Q1 onwards.
fn write_series(dir: &Path, n: usize) -> PathBuf {
    let mut text = String::from("date,value\n");
    let mut x = 2.0;
    for t in 0..n {
        let noise = ((t * 7919 + 13) % 997) as f64 / 997.0 - 0.5;
        let level = if (t / 12) % 2 == 0 { 1.0 } else { -0.5 };
        x = 0.5 * x + level + noise;
        text += &format!("{}Q{},{x}\n", 1990 + (t / 4) as i32, t % 4 + 1);
    }
    let path = dir.join("series.csv");
    fs::write(&path, text).unwrap();
    path
}

fn write_config(dir: &Path) -> PathBuf {
    let views = viewpool::views::build_vague_views(2, 1);
    fs::write(dir.join("views.json"), serde_json::to_string(&views).unwrap()).unwrap();
    let cfg = r#"
version = 1
data = "series.csv"
output = "out"
seed = 7
catalogue = "views.json"

[plan]
t0 = "1990Q1"
first_end = "2002Q4"
last_end = "2004Q4"
window = 4
horizon = 1
rolling_width = 20
fan_methods = ["pi2", "w1"]

[sampler]
burn_in = 40
keep = 100

[bridge]
max_components = 100
tolerance = 1e-8
max_iterations = 1000
"#;
    let path = dir.join("run.toml");
    fs::write(&path, cfg).unwrap();
    path
}

#[test]
fn ingest_converts_levels_and_names_bad_rows() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("levels.csv");
    fs::write(&input, "DATE,GDP\n2000-01-01,100\n2000-04-01,101\n2000-07-01,102\n2000-10-01,103\n2001-01-01,110\n").unwrap();
    let out = dir.path().join("growth.csv");
    let o = viewpool(
        &["ingest", "-i", input.to_str().unwrap(), "--yoy", "-o", out.to_str().unwrap()],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let written = fs::read_to_string(&out).unwrap();
    let row = written.lines().nth(1).unwrap();
    assert!(row.starts_with("2001Q1,"), "{written}");
    let v: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - 10.0).abs() < 1e-12);

    fs::write(&input, "date,value\n2000Q1,1\n2000Q2,2\n2000Q2,3\n").unwrap();
    let o = viewpool(&["ingest", "-i", input.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("row 4"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_validation_code() {
    let o = viewpool(&["backtest"], None);
    assert_eq!(o.status.code(), Some(1));
    let o = viewpool(&["--help"], None);
    assert!(o.status.success());
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "version = 9\n").unwrap();
    let o = viewpool(&["backtest", "-c", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn estimate_and_evidence_for_one_window() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_series(dir.path(), 60);
    let out = dir.path().join("est");
    let common = [
        "-i",
        data.to_str().unwrap(),
        "--catalogue",
        "vague",
        "--view",
        "2",
        "--to",
        "2002Q4",
        "--burn-in",
        "50",
        "--keep",
        "150",
        "--seed",
        "3",
    ];
    let mut args = vec!["estimate"];
    args.extend(common);
    args.extend(["--out", out.to_str().unwrap()]);
    let o = viewpool(&args, None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("draws.bin").exists());
    let fc = fs::read_to_string(out.join("forecast.csv")).unwrap();
    assert_eq!(fc.lines().count(), 1 + 150 * 2, "one row per draw and regime");

    let kernel = dir.path().join("kernel");
    let mut args = vec!["estimate"];
    args.extend(common);
    args.extend(["--out", kernel.to_str().unwrap(), "--density", "kernel"]);
    let o = viewpool(&args, None);
    assert!(o.status.success(), "{}", stderr(&o));
    let fc = fs::read_to_string(kernel.join("forecast.csv")).unwrap();
    assert_eq!(fc.lines().count(), 1 + 150, "one kernel per draw");

    let mut args = vec!["evidence"];
    args.extend(common);
    let o = viewpool(&args, None);
    assert!(o.status.success(), "{}", stderr(&o));
    let est: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(est["log_ml"].as_f64().unwrap().is_finite());
}

#[test]
fn backtest_is_reproducible_and_feeds_report_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    write_series(dir.path(), 64);
    let cfg = write_config(dir.path());
    let cache = dir.path().join("cache");
    let run = |out: &Path, cache: Option<&Path>, extra: &[&str]| {
        let mut args = vec!["--jobs", "2", "backtest", "-c", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
        args.extend(extra);
        let o = viewpool(&args, cache);
        assert!(o.status.success(), "{}", stderr(&o));
        o
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = run(&a, Some(&cache), &[]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("2004Q1..2005Q2 (6 periods)"), "{stdout}");
    assert!(fs::read_dir(&cache).unwrap().count() > 0, "cache populated");
    run(&b, None, &["--no-cache"]);
    for f in ["report.json", "summary.csv", "scores.csv", "weights.csv", "fan.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    // A rerun served from the cache reproduces the report.
    let c = dir.path().join("c");
    run(&c, Some(&cache), &[]);
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(c.join("report.json")).unwrap());
    // Kernel densities are cached separately from mixtures.
    let k = dir.path().join("k");
    run(&k, Some(&cache), &["--density", "kernel", "--no-plots"]);
    assert_ne!(fs::read(a.join("scores.csv")).unwrap(), fs::read(k.join("scores.csv")).unwrap());

    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 9);
    assert!(a.join("plots").read_dir().unwrap().count() > 0);

    let report = a.join("report.json");
    let o = viewpool(&["report", report.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("pi2,"));
    let plots = dir.path().join("plots");
    let o = viewpool(&["plot", report.to_str().unwrap(), "--out", plots.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(plots.join("fan_pi2.svg").exists());
}

#[test]
fn backtest_overrides_reject_an_empty_evaluation_sample() {
    let dir = tempfile::tempdir().unwrap();
    write_series(dir.path(), 64);
    let cfg = write_config(dir.path());
    let o = viewpool(&["backtest", "-c", cfg.to_str().unwrap(), "--window", "40", "--no-cache"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("evaluation sample is empty"), "{}", stderr(&o));
}
