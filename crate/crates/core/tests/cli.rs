mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

use common::MINIMAL;

fn cadforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cadforge"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = cadforge(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn xyz_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "xyz"))
        .collect();
    v.sort();
    v
}

fn field(stdout: &str, key: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {stdout}"))
        .parse()
        .unwrap()
}

#[test]
fn gen_targets_writes_clouds_and_answers_deterministically() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        ok(&["gen-targets", "--count", "50", "--seed", "3", "--out", s(dir), "--points", "256"]);
    }
    let files = xyz_files(&a);
    assert_eq!(files.len(), 50);
    let answers = fs::read_to_string(a.join("answers.jsonl")).unwrap();
    assert_eq!(answers.lines().count(), 50);
    for f in &files {
        let name = f.file_name().unwrap();
        assert_eq!(fs::read(f).unwrap(), fs::read(b.join(name)).unwrap());
        assert_eq!(fs::read_to_string(f).unwrap().lines().count(), 256);
    }
    assert_eq!(answers, fs::read_to_string(b.join("answers.jsonl")).unwrap());
}

#[test]
fn gen_targets_rejects_zero_count() {
    let tmp = TempDir::new().unwrap();
    let out = cadforge(&["gen-targets", "--count", "0", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn execute_writes_requested_points() {
    let tmp = TempDir::new().unwrap();
    let prog = write(tmp.path(), "m.cad", MINIMAL);
    let out = tmp.path().join("m.xyz");
    ok(&["execute", s(&prog), "--points", "100", "--out", s(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 100);
    for line in text.lines() {
        let v: Vec<f64> = line.split_whitespace().map(|t| t.parse().unwrap()).collect();
        assert_eq!(v.len(), 3);
        let r = v[0].hypot(v[1]);
        assert!(r <= 0.4 + 1e-9 && (-1e-9..=0.5 + 1e-9).contains(&v[2]));
    }
}

#[test]
fn execute_empty_intersection_exits_3() {
    let tmp = TempDir::new().unwrap();
    let prog = write(
        tmp.path(),
        "e.cad",
        "w0=workspace(XY,0,0,0)\ns0=sketch(w0,circle(0,0,0.4))\nb0=extrude(s0,0.5)\n\
         w1=workspace(XY,5,0,0)\ns1=sketch(w1,circle(0,0,0.4))\nb1=extrude(s1,0.5)\n\
         u=intersect(b0,b1)\nresult(u)",
    );
    let out = cadforge(&["execute", s(&prog), "--out", s(&tmp.path().join("e.xyz"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("EmptyResult"));
    assert!(!tmp.path().join("e.xyz").exists());
}

#[test]
fn execute_reports_parse_errors() {
    let tmp = TempDir::new().unwrap();
    let prog = write(tmp.path(), "bad.cad", "w0=workspace(XQ,0,0,0)\nresult(w0)");
    let out = cadforge(&["execute", s(&prog), "--out", s(&tmp.path().join("x.xyz"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1:14"));
}

#[test]
fn metrics_on_identical_and_translated_clouds() {
    let tmp = TempDir::new().unwrap();
    let a = write(tmp.path(), "a.xyz", "0 0 0\n1 0 0\n0 1 0\n");
    let stdout = ok(&["metrics", s(&a), s(&a)]);
    assert!(stdout.contains("cd=0.000000"), "{stdout}");

    let p = write(tmp.path(), "p.xyz", "0 0 0\n");
    let q = write(tmp.path(), "q.xyz", "0.3 0.4 0\n");
    let stdout = ok(&["metrics", s(&p), s(&q)]);
    // distance 0.5 in both directions, reported x1000
    for key in ["cd", "cd_ab", "cd_ba"] {
        assert!((field(&stdout, key) - 500.0).abs() < 1e-6, "{key}: {stdout}");
    }
}

#[test]
fn metrics_normalize_removes_scale() {
    let tmp = TempDir::new().unwrap();
    let a = write(tmp.path(), "a.xyz", "0 0 0\n1 0 0\n0 1 0\n0 0 1\n");
    let b = write(tmp.path(), "b.xyz", "5 5 5\n9 5 5\n5 9 5\n5 5 9\n");
    let raw = cadforge(&["metrics", s(&a), s(&b)]);
    assert_eq!(raw.status.code(), Some(1));
    let norm = field(&ok(&["metrics", s(&a), s(&b), "--normalize"]), "cd");
    assert!(norm < 1e-9, "{norm}");
}

#[test]
fn metrics_iou_for_identical_programs() {
    let tmp = TempDir::new().unwrap();
    let prog = write(tmp.path(), "m.cad", MINIMAL);
    let xyz = tmp.path().join("m.xyz");
    ok(&["execute", s(&prog), "--points", "200", "--out", s(&xyz)]);
    let stdout = ok(&["metrics", s(&xyz), s(&xyz), "--programs", s(&prog), s(&prog), "--grid", "32", "--normalize"]);
    assert!(stdout.contains("iou=1.000"), "{stdout}");
}

#[test]
fn metrics_missing_file_exits_2() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nope.xyz");
    let out = cadforge(&["metrics", s(&missing), s(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.xyz"));
}

#[test]
fn augment_modes() {
    let tmp = TempDir::new().unwrap();
    let cut = write(
        tmp.path(),
        "cut.cad",
        "w0=workspace(XY,0,0,0)\ns0=sketch(w0,rect(0,0,1,1))\nb0=extrude(s0,1)\n\
         s1=sketch(w0,circle(0,0,0.2))\nb1=extrude(s1,1)\nc=cut(b0,b1)\nresult(c)",
    );
    let stdout = ok(&["augment", s(&cut), "--mode", "shorten"]);
    assert_eq!(stdout.matches("--- variant").count(), 2);
    assert_eq!(stdout.matches("(shorten)").count(), 2);

    let mut five = String::new();
    for i in 0..5 {
        five += &format!("w{i}=workspace(XY,{i},0,0)\ns{i}=sketch(w{i},circle(0,0,0.3))\nb{i}=extrude(s{i},0.5)\n");
    }
    five += "u1=union(b0,b1)\nu2=union(u1,b2)\nu3=union(u2,b3)\nu4=union(u3,b4)\nresult(u4)";
    let five = write(tmp.path(), "five.cad", &five);
    let stdout = ok(&["augment", s(&five), "--mode", "expand", "--seed", "4"]);
    for block in stdout.split("--- variant").skip(1) {
        let text: String = block.lines().skip(1).collect::<Vec<_>>().join("\n");
        let p: cadforge::dsl::Program = text.trim().parse().unwrap();
        assert!(p.workspace_count() <= 5);
    }

    let out = tmp.path().join("variants");
    let prog = write(tmp.path(), "m.cad", MINIMAL);
    let stdout = ok(&["augment", s(&prog), "--mode", "diversify", "--out", s(&out), "--points", "128"]);
    assert!(stdout.contains("(original)"));
    assert!(out.join("variant_00.cad").is_file());
    let xyz = xyz_files(&out);
    assert!(!xyz.is_empty());
    assert_eq!(fs::read_to_string(&xyz[0]).unwrap().lines().count(), 128);
}

#[test]
fn report_deltas_and_empty_report() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("run");
    small_run(tmp.path(), &dir, 1, 3, "ours", None).unwrap();
    let csv = dir.join("report.csv");
    let stdout = ok(&["report", s(&csv)]);
    assert!(stdout.contains("cd_mean delta: 0.0000"), "{stdout}");
    assert!(stdout.contains("len_max delta: 0"));

    let text = fs::read_to_string(&csv).unwrap();
    let header = text.lines().next().unwrap();
    let empty = write(tmp.path(), "empty.csv", &format!("{header}\n"));
    let out = cadforge(&["report", s(&empty)]);
    assert_eq!(out.status.code(), Some(4));
}

fn write_config(root: &Path, targets: &Path, out: &Path, iterations: usize, policy: &str) -> PathBuf {
    let cfg = serde_json::json!({
        "targets": targets.to_str().unwrap(),
        "out": out.to_str().unwrap(),
        "k": 3,
        "iterations": iterations,
        "sample_points": 192,
        "policy": policy,
        "seed": 5,
    });
    let path = root.join(format!("{}.json", out.file_name().unwrap().to_str().unwrap()));
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

/// Generates targets if needed and runs the loop through the binary.
fn small_run(root: &Path, out: &Path, iterations: usize, count: usize, policy: &str, stop_after: Option<usize>) -> Result<String, Output> {
    let targets = root.join("targets");
    if !targets.is_dir() {
        ok(&["gen-targets", "--count", &count.to_string(), "--seed", "9", "--out", s(&targets), "--points", "192"]);
    }
    let cfg = write_config(root, &targets, out, iterations, policy);
    let mut args = vec!["run".to_string(), "--config".into(), s(&cfg).into()];
    if let Some(n) = stop_after {
        args.extend(["--stop-after".into(), n.to_string()]);
    }
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = cadforge(&argv);
    if o.status.success() {
        Ok(String::from_utf8(o.stdout).unwrap())
    } else {
        Err(o)
    }
}

#[test]
fn run_writes_outputs_and_resumes() {
    let tmp = TempDir::new().unwrap();
    let full = tmp.path().join("full");
    let stdout = small_run(tmp.path(), &full, 3, 6, "ours", None).unwrap();
    assert_eq!(stdout.matches("iteration ").count(), 3);
    for name in ["report.csv", "dataset.jsonl", "manifest.json"] {
        assert!(full.join(name).is_file(), "{name}");
    }
    let csv = fs::read_to_string(full.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let dataset = fs::read_to_string(full.join("dataset.jsonl")).unwrap();
    for line in dataset.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let shape = v["shape"].as_str().unwrap();
        assert!(full.join(shape).is_file());
        let _: cadforge::dsl::Program = v["program"].as_str().unwrap().parse().unwrap();
        assert_eq!(v["source"], "ours");
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(full.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["completed_iterations"], 3);
    assert_eq!(manifest["seed"], 5);

    let part = tmp.path().join("part");
    small_run(tmp.path(), &part, 3, 6, "ours", Some(1)).unwrap();
    assert_eq!(fs::read_to_string(part.join("report.csv")).unwrap().lines().count(), 2);
    let cfg = tmp.path().join("part.json");
    ok(&["run", "--config", s(&cfg), "--resume"]);
    for name in ["report.csv", "dataset.jsonl"] {
        assert_eq!(
            fs::read(full.join(name)).unwrap(),
            fs::read(part.join(name)).unwrap(),
            "{name} differs after resume"
        );
    }
}

#[test]
fn resume_with_changed_config_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("r");
    small_run(tmp.path(), &dir, 2, 3, "b1", Some(1)).unwrap();
    let cfg = write_config(tmp.path(), &tmp.path().join("targets"), &dir, 3, "b1");
    let out = cadforge(&["run", "--config", s(&cfg), "--resume"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_with_missing_targets_exits_2() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("no_targets");
    let cfg = write_config(tmp.path(), &missing, &tmp.path().join("out"), 1, "ours");
    let out = cadforge(&["run", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_targets"));
}

#[test]
fn config_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let t = s(tmp.path());
    for (name, body) in [
        ("unknown", format!(r#"{{"targets":"{t}","out":"{t}/o","bogus":1}}"#)),
        ("zero_k", format!(r#"{{"targets":"{t}","out":"{t}/o","k":0}}"#)),
        ("no_out", format!(r#"{{"targets":"{t}"}}"#)),
        ("not_json", "{".to_string()),
    ] {
        let cfg = write(tmp.path(), &format!("{name}.json"), &body);
        let out = cadforge(&["run", "--config", s(&cfg)]);
        assert_eq!(out.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
