use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dpmom_cli::commands::cluster::ClusterOutput;
use dpmom_cli::commands::stats::StatsReport;
use dpmom_cli::commands::tune::TuneSummary;
use tempfile::TempDir;

fn dpmom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpmom")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = dpmom(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn blobs(dir: &TempDir) -> PathBuf {
    let path = dir.path().join("blobs.csv");
    ok(&["gen", "blobs", "--centers", "0,0;20,0", "--sd", "1", "--per", "50", "--seed", "2", "--out", p(&path)]);
    path
}

const ETA: &str = "3.1622776601683795";

#[test]
fn gen_quadrant_row_counts() {
    let dir = TempDir::new().unwrap();
    let clean = dir.path().join("clean.csv");
    let dirty = dir.path().join("dirty.csv");
    ok(&["gen", "quadrant", "--seed", "4", "--out", p(&clean)]);
    ok(&["gen", "quadrant", "--per", "30", "--outliers", "50", "--seed", "4", "--out", p(&dirty)]);
    let rows = |f: &Path| fs::read_to_string(f).unwrap().lines().count() - 1;
    assert_eq!(rows(&clean), 120);
    assert_eq!(rows(&dirty), 170);
    let text = fs::read_to_string(&dirty).unwrap();
    assert_eq!(text.lines().filter(|l| l.ends_with(",outlier")).count(), 50);
}

#[test]
fn gen_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    ok(&["gen", "quadrant", "--outliers", "15", "--seed", "9", "--out", p(&a)]);
    ok(&["gen", "quadrant", "--outliers", "15", "--seed", "9", "--out", p(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn cluster_finds_two_blobs() {
    let dir = TempDir::new().unwrap();
    let data = blobs(&dir);
    let out = dir.path().join("fit.json");
    ok(&["cluster", "--in", p(&data), "--label-col", "3", "--lambda", "200", "--eta", ETA, "--L", "5", "--out", p(&out)]);
    let r: ClusterOutput = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r.k, 2);
    assert_eq!(r.ari, Some(1.0));
    assert!(dir.path().join("fit.timing.json").exists());
}

#[test]
fn huge_lambda_gives_one_cluster() {
    let dir = TempDir::new().unwrap();
    let data = blobs(&dir);
    let out = dir.path().join("fit.json");
    ok(&["cluster", "--in", p(&data), "--label-col", "3", "--lambda", "1e9", "--eta", ETA, "--L", "5", "--out", p(&out)]);
    let r: ClusterOutput = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r.k, 1);
}

#[test]
fn cluster_output_round_trips() {
    let dir = TempDir::new().unwrap();
    let data = blobs(&dir);
    let out = dir.path().join("fit.json");
    ok(&["cluster", "--in", p(&data), "--label-col", "3", "--algo", "kmeans", "--k", "2", "--out", p(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    let r: ClusterOutput = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&r).unwrap() + "\n", text);
}

#[test]
fn missing_input_is_a_data_error_naming_the_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = dpmom(&["cluster", "--in", p(&missing), "--lambda", "1", "--L", "3", "--out", p(&dir.path().join("x.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));
}

#[test]
fn invalid_flag_combination_exits_one() {
    let dir = TempDir::new().unwrap();
    let data = blobs(&dir);
    let x = dir.path().join("x.json");
    let out = dpmom(&["cluster", "--in", p(&data), "--algo", "kmeans", "--k", "2", "--lambda", "3", "--out", p(&x)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!x.exists());
    assert_eq!(dpmom(&["cluster", "--bogus"]).status.code(), Some(1));
}

#[test]
fn tune_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let data = blobs(&dir);
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&["tune", "--in", p(&data), "--label-col", "3", "--repeats", "1", "--seed", "5", "--out-dir", p(&out)]);
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["trace.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let s: TuneSummary = serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s.k_opt, 2);
    assert!(fs::read_to_string(a.join("timing.csv")).unwrap().starts_with("stage,repeat,seed,lambda,L,eta,ari,k,runtime_ms"));
}

#[test]
fn proxy_on_one_blob_picks_one_cluster() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("one.csv");
    ok(&["gen", "blobs", "--centers", "0,0", "--sd", "1", "--per", "60", "--seed", "1", "--out", p(&data)]);
    let out = dir.path().join("t");
    ok(&["tune", "--in", p(&data), "--repeats", "1", "--proxy", "--out-dir", p(&out)]);
    let s: TuneSummary = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s.k_opt, 1);
    assert!(s.proxy_note.is_some());
}

#[test]
fn tune_without_labels_points_at_proxy() {
    let dir = TempDir::new().unwrap();
    let data = blobs(&dir);
    let out = dpmom(&["tune", "--in", p(&data), "--repeats", "1", "--out-dir", p(&dir.path().join("t"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--proxy"));
}

#[test]
fn plots_are_svg() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("q.csv");
    ok(&["gen", "quadrant", "--outliers", "10", "--seed", "3", "--out", p(&data)]);
    let fit = dir.path().join("fit.json");
    ok(&["cluster", "--in", p(&data), "--label-col", "3", "--algo", "kmeans", "--k", "4", "--out", p(&fit)]);
    let svg = dir.path().join("s.svg");
    ok(&["plot", "scatter", "--in", p(&fit), "--data", p(&data), "--label-col", "3", "--out", p(&svg)]);
    let s = fs::read_to_string(&svg).unwrap();
    assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
    assert_eq!(s.matches("class=\"outlier\"").count(), 10);

    let series = dir.path().join("stages.csv");
    fs::write(&series, "n,DP-MoM,DPM\n120,0.9,0.8\n135,0.9,0.6\n").unwrap();
    let lines = dir.path().join("l.svg");
    ok(&["plot", "lines", "--in", p(&series), "--title", "stages", "--out", p(&lines)]);
    assert_eq!(fs::read_to_string(&lines).unwrap().matches("<polyline").count(), 2);
}

#[test]
fn empty_trace_writes_no_plot() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("e.csv");
    fs::write(&empty, "").unwrap();
    let svg = dir.path().join("e.svg");
    let out = dpmom(&["plot", "lines", "--in", p(&empty), "--title", "t", "--out", p(&svg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!svg.exists());
}

#[test]
fn stats_on_the_bundled_table() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("stats.json");
    let stdout = ok(&["stats", "--drop", "MoMPKM", "--out", p(&out)]).stdout;
    assert!(String::from_utf8_lossy(&stdout).contains("friedman"));
    let r: StatsReport = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r.datasets.len(), 16);
    assert_eq!(r.friedman.len(), 2);
    assert_eq!(r.friedman[1].algorithms, 9);
    assert_eq!(r.pairwise.len(), 9);
}

#[test]
fn stats_on_a_user_table() {
    let dir = TempDir::new().unwrap();
    let table = dir.path().join("t.csv");
    fs::write(&table, "algorithm,a,b,c,d\nDP-MoM,0.9,0.8,0.7,0.95\nX,0.5,0.6,0.4,0.3\n").unwrap();
    let stdout = ok(&["stats", "--table", p(&table)]).stdout;
    assert!(String::from_utf8_lossy(&stdout).contains("4/4"));
}

#[test]
fn jain_suite_without_data_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let manifest = dir.path().join("manifest.csv");
    fs::write(&manifest, "name,path,url,sha256,has_header,label_column,n,p,k\n").unwrap();
    let out = dpmom(&["bench", "--suite", "jain-outliers", "--runs", "1", "--manifest", p(&manifest), "--out-dir", p(&dir.path().join("b"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn datasets_list_reports_status() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("d.csv"), "x,y,label\n0,0,a\n1,1,b\n").unwrap();
    let manifest = dir.path().join("manifest.csv");
    fs::write(
        &manifest,
        "name,path,url,sha256,has_header,label_column,n,p,k\nd,d.csv,,,true,2,2,2,2\ngone,gone.csv,,,true,2,2,2,2\n",
    )
    .unwrap();
    let stdout = String::from_utf8(ok(&["datasets", "--manifest", p(&manifest), "list"]).stdout).unwrap();
    assert!(stdout.contains("present"));
    assert!(stdout.contains("missing"));
    let fetch = dpmom(&["datasets", "--manifest", p(&manifest), "fetch", "gone"]);
    assert_ne!(fetch.status.code(), Some(0));
}
