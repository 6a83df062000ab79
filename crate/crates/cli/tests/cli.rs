use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use async_sparse::analysis::analytic_dense_ledger;
use async_sparse::events::synthetic::{contour_stream, ramp, ContourParams};
use async_sparse::events::{generate_events, read_events, write_events};
use async_sparse::model::{random_model, ArchitectureTemplate};
use async_sparse::representation::DEFAULT_WINDOW;
use async_sparse::{Event, EventStream, Polarity, ReprKind};
use tempfile::TempDir;

fn cli(args: &[&str], seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_async-sparse"));
    cmd.args(args).env_remove("ASYNC_SPARSE_SEED");
    if let Some(s) = seed {
        cmd.env("ASYNC_SPARSE_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn ok(args: &[&str], seed: Option<&str>) -> Output {
    let out = cli(args, seed);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn contour_file(dir: &TempDir, w: usize, h: usize, n: usize) -> PathBuf {
    let p = path(dir, "contour.txt");
    write_events(&contour_stream(&ContourParams::new(w, h, n, 11)), &p).unwrap();
    p
}

fn read_csv(p: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(p).unwrap();
    let head = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (head, rows)
}

fn column(head: &[String], name: &str) -> usize {
    head.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn gen_events_matches_library() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "ramp.txt");
    ok(
        &["gen-events", "--frames", "synthetic:ramp", "--threshold", "0.1", "--width", "8", "--height", "4", "--num-frames", "20", "-o", s(&out)],
        None,
    );
    let expect = generate_events(&ramp(8, 4, 20), 0.1).unwrap();
    assert_eq!(read_events(&out).unwrap(), expect);
}

#[test]
fn compare_small_random_model() {
    let dir = TempDir::new().unwrap();
    let ev = contour_file(&dir, 32, 24, 300);
    let report = path(&dir, "cmp.csv");
    let out = ok(&["compare", "--model", "random:small", "--events", s(&ev), "--window", "150", "-o", s(&report)], Some("4"));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("max output deviation"));
    let (head, rows) = read_csv(&report);
    let (da, dd) = (column(&head, "dev_async_sparse"), column(&head, "dev_dense_sparse"));
    let layers = rows.iter().filter(|r| r[0] == "0").count();
    assert!(layers > 3);
    assert_eq!(rows.len(), 300 * layers);
    for r in &rows {
        assert!(r[da].parse::<f64>().unwrap() <= 1e-4, "{r:?}");
        assert!(r[dd].parse::<f64>().unwrap() <= 1e-4, "{r:?}");
    }
}

#[test]
fn flops_vgg13_dense_matches_ledger() {
    let dir = TempDir::new().unwrap();
    let report = path(&dir, "flops.csv");
    ok(&["flops", "--model", "random:vgg13", "--mode", "dense", "-o", s(&report)], None);
    let (head, rows) = read_csv(&report);
    let t = ArchitectureTemplate::by_name("vgg13", 240, 180, ReprKind::Histogram).unwrap().with_window(DEFAULT_WINDOW);
    let ledger = analytic_dense_ledger(&random_model(0, &t).unwrap()).unwrap();
    assert_eq!(rows.len(), ledger.rows.len() + 1);
    let total = rows.last().unwrap();
    assert_eq!(total[0], "total");
    assert_eq!(total[column(&head, "counted")], ledger.total_analytic().to_string());
    assert_eq!(total[column(&head, "analytic")], ledger.total_analytic().to_string());
    let first = &rows[0];
    assert_eq!(first[column(&head, "counted")], (256u64 * 192 * 64 * 35).to_string());
}

#[test]
fn flops_without_events_needs_dense_mode() {
    let out = cli(&["flops", "--model", "random:small", "--mode", "async"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--events"));
}

#[test]
fn flops_over_events_in_every_mode() {
    let dir = TempDir::new().unwrap();
    let ev = contour_file(&dir, 32, 24, 100);
    let mut totals = Vec::new();
    for mode in ["dense", "sparse", "async"] {
        let report = path(&dir, &format!("{mode}.csv"));
        ok(&["flops", "--model", "random:small", "--events", s(&ev), "--mode", mode, "-o", s(&report)], None);
        let (head, rows) = read_csv(&report);
        let total = rows.last().unwrap();
        assert_eq!(total[column(&head, "counted")], total[column(&head, "analytic")]);
        totals.push(total[column(&head, "counted")].parse::<u64>().unwrap());
    }
    assert!(totals[2] <= totals[1] && totals[1] <= totals[0], "{totals:?}");
}

#[test]
fn fractal_of_full_plane() {
    let dir = TempDir::new().unwrap();
    let ev = path(&dir, "plane.txt");
    let events: Vec<Event> =
        (0..32u32 * 32).map(|i| Event::new(i % 32, i / 32, i as u64, Polarity::Positive)).collect();
    write_events(&EventStream::new(32, 32, events).unwrap(), &ev).unwrap();
    let report = path(&dir, "fractal.csv");
    ok(&["fractal", "--events", s(&ev), "--radii", "1,2,3,4", "--center", "16,16", "-o", s(&report)], None);
    let (head, rows) = read_csv(&report);
    assert_eq!(head, ["radius", "side", "count", "ln_side", "ln_count", "gamma", "residual"]);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[3][..2], ["4", "9"]);
    assert_eq!(rows[3][2].parse::<f64>().unwrap(), 81.0);
    let gamma: f64 = rows[0][column(&head, "gamma")].parse().unwrap();
    assert!((gamma - 2.0).abs() < 1e-6, "{gamma}");
}

#[test]
fn runs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let ev = contour_file(&dir, 32, 24, 120);
    let args = ["run", "--model", "random:small", "--events", s(&ev), "--batch", "7"];
    let a = ok(&args, Some("9")).stdout;
    let b = ok(&args, Some("9")).stdout;
    assert_eq!(a, b);
    assert_ne!(a, ok(&args, Some("10")).stdout);
    let mut json = args.to_vec();
    json.push("--json");
    let v: serde_json::Value = serde_json::from_slice(&ok(&json, Some("9")).stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 120usize.div_ceil(7));
}

#[test]
fn modes_report_the_same_outputs() {
    let dir = TempDir::new().unwrap();
    let ev = contour_file(&dir, 32, 24, 80);
    let mut outs = Vec::new();
    for mode in ["dense", "sparse", "async"] {
        let report = path(&dir, &format!("{mode}.csv"));
        ok(&["run", "--model", "random:small", "--events", s(&ev), "--mode", mode, "-o", s(&report)], Some("2"));
        let (head, rows) = read_csv(&report);
        let first = column(&head, "out_0");
        outs.push(rows.iter().map(|r| r[first..].iter().map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>()).collect::<Vec<_>>());
    }
    for other in &outs[1..] {
        for (a, b) in outs[0].iter().flatten().zip(other.iter().flatten()) {
            assert!((a - b).abs() <= 1e-4 * a.abs().max(b.abs()).max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn model_file_reproduces_random_model() {
    let dir = TempDir::new().unwrap();
    let ev = contour_file(&dir, 32, 24, 60);
    let model = path(&dir, "small.asnm");
    ok(&["gen-model", "--template", "small", "--width", "32", "--height", "24", "--seed", "5", "-o", s(&model)], None);
    let from_file = ok(&["run", "--model", s(&model), "--events", s(&ev)], None).stdout;
    let random = ok(&["run", "--model", "random:small", "--events", s(&ev)], Some("5")).stdout;
    assert_eq!(from_file, random);

    let out = cli(&["run", "--model", s(&model), "--events", s(&ev), "--repr", "queue"], None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_subcommand_is_one_line_error() {
    let out = cli(&["frobnicate"], None);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn missing_input_is_one_line_error() {
    let out = cli(&["run", "--model", "random:small", "--events", "/nonexistent/events.txt"], None);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: reading events"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn bad_seed_is_rejected() {
    let dir = TempDir::new().unwrap();
    let ev = contour_file(&dir, 32, 24, 10);
    let out = cli(&["run", "--model", "random:small", "--events", s(&ev)], Some("abc"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ASYNC_SPARSE_SEED"));
}
