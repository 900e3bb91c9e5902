use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn buymany(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_buymany")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = buymany(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    buymany(args).status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const BAD_MENU: &str = r#"{"n": 2,
  "distribution": [{"prob": 1.0, "valuation": {"kind": "additive", "values": [1.0, 1.0]}}],
  "menu": {"semantics": "buymany", "entries": [
    {"allocation": [{"set": [0], "prob": 1.0}], "price": 1.0},
    {"allocation": [{"set": [1], "prob": 1.0}], "price": 1.0},
    {"allocation": [{"set": [0, 1], "prob": 1.0}], "price": 3.0}]}}"#;

fn counterexample(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let cx = dir.join("cx.json");
    let cxp = dir.join("cxp.json");
    ok(&["gen", "counterexample", "--n", "4", "--eps", "0.5", "--delta", "1", "--out", p(&cx), "--perturbed-out", p(&cxp)]);
    (cx, cxp)
}

#[test]
fn counterexample_revenue_prints_four() {
    let dir = tempfile::tempdir().unwrap();
    let (cx, _) = counterexample(dir.path());
    assert_eq!(ok(&["revenue", "--instance", p(&cx), "--semantics", "buymany"]), "4.0\n");
}

#[test]
fn lp_opt_on_the_perturbed_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let (_, cxp) = counterexample(dir.path());
    let opt = dir.path().join("opt.json");
    ok(&["lp-opt", "--instance", p(&cxp), "--out", p(&opt)]);
    let rev: f64 = ok(&["revenue", "--instance", p(&opt)]).trim().parse().unwrap();
    assert!((rev - 3.75).abs() <= 1e-6, "{rev}");
    let exact = dir.path().join("exact.json");
    ok(&["lp-opt", "--exact", "--instance", p(&cxp), "--out", p(&exact)]);
    let rev: f64 = ok(&["revenue", "--instance", p(&exact)]).trim().parse().unwrap();
    assert!((rev - 3.75).abs() <= 1e-9, "{rev}");
}

#[test]
fn verify_reports_the_bundle_witness() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, BAD_MENU).unwrap();
    let report: Value = serde_json::from_str(&ok(&["verify", "--instance", p(&bad)])).unwrap();
    assert_eq!(report["holds"], Value::Bool(false));
    assert_eq!(report["witness"]["outcome"]["payment"].as_f64(), Some(2.0));
    assert!(!report["witness"]["policy"].as_array().unwrap().is_empty());
}

#[test]
fn selftest_passes() {
    let report: Value = serde_json::from_str(&ok(&["selftest", "--cases", "40", "--seed", "5"])).unwrap();
    assert_eq!(report["passed"], Value::Bool(true));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["revenue", "--no-such-flag"]), 1);
    assert_eq!(code(&["revenue"]), 1);

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, r#"{"n": 2}"#).unwrap();
    assert_eq!(code(&["revenue", "--instance", p(&broken)]), 2);
    assert_eq!(code(&["revenue", "--instance", p(&dir.path().join("missing.json"))]), 2);

    let nonmono = dir.path().join("nonmono.json");
    std::fs::write(
        &nonmono,
        r#"{"n": 2, "distribution": [{"prob": 1.0, "valuation": {"kind": "table", "values": [0, 3, 1, 2]}}]}"#,
    )
    .unwrap();
    assert_eq!(code(&["revenue", "--instance", p(&nonmono)]), 2);

    let big = dir.path().join("big.json");
    ok(&["gen", "counterexample", "--n", "6", "--eps", "0.5", "--out", p(&big)]);
    assert_eq!(code(&["verify", "--instance", p(&big)]), 3);
}

#[test]
fn csv_revenue_table() {
    let dir = tempfile::tempdir().unwrap();
    let (cx, _) = counterexample(dir.path());
    let text = ok(&["revenue", "--instance", p(&cx), "--format", "csv"]);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("atom,prob,entry,payment,utility"));
    assert_eq!(lines.count(), 5);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let sets = ["gen", "basic-sets", "--n", "256", "--s", "16", "--b", "4", "--count", "16", "--seed", "8"];
    assert_eq!(ok(&sets), ok(&sets));

    let inst = dir.path().join("ud.json");
    std::fs::write(
        &inst,
        r#"{"n": 2, "distribution": [
            {"prob": 0.5, "valuation": {"kind": "unitdemand", "values": [3.0, 1.0]}},
            {"prob": 0.5, "valuation": {"kind": "table", "values": [0.0, 1.0, 2.0, 2.5]}}]}"#,
    )
    .unwrap();
    let opt = dir.path().join("opt.json");
    ok(&["lp-opt", "--instance", p(&inst), "--semantics", "buymany", "--out", p(&opt)]);
    let run = ["continuity", "--instance", p(&opt), "--eps", "1e-10", "--seed", "3"];
    let a = ok(&run);
    assert_eq!(a, ok(&run));
    let report: Value = serde_json::from_str(&a).unwrap();
    assert!(report["ratio"].as_f64().unwrap() > 0.9);
}

#[test]
fn hard_xos_quartiles() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("xos.json");
    ok(&["gen", "hard-xos", "--quartiles", "--m", "2", "--h", "8", "--values", "2,6", "--out", p(&out)]);
    assert_eq!(ok(&["revenue", "--instance", p(&out)]), "2.0\n");
}

#[test]
fn beta_report_on_a_coarse_grid() {
    let report: Value =
        serde_json::from_str(&ok(&["beta", "--step", "0.01", "--coarse", "1000", "--fine", "20000"])).unwrap();
    assert_eq!(report["partition"]["overlaps"].as_u64(), Some(0));
    assert!(report["verify"]["min_margin"].as_f64().unwrap() >= 0.37);
    assert_eq!(report["verify"]["worst_case_holds"], Value::Bool(true));
}

#[test]
fn compress_reports_stage_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (cx, _) = counterexample(dir.path());
    let report: Value = serde_json::from_str(&ok(&["compress", "--instance", p(&cx), "--eps", "0.25"])).unwrap();
    let r = &report["report"];
    assert_eq!(r["entries_in"].as_u64(), Some(16));
    assert!(r["entries_after_drop"].as_u64().unwrap() <= 16);
    assert_eq!(r["within_size_bound"], Value::Bool(true));
}
