use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn reparam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reparam"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = reparam(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str], code: i32) -> String {
    let out = reparam(args);
    assert_eq!(out.status.code(), Some(code), "{args:?}");
    String::from_utf8(out.stderr).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn enumerate_prints_a_pool_document() {
    let text = ok(&["enumerate", "--model", s(&fixture("table.model"))]);
    let doc: Value = serde_json::from_str(&text).unwrap();
    let labels: Vec<&str> = doc["constraints"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["label"].as_str().unwrap())
        .collect();
    assert!(
        labels.contains(&"coplanar(top.-y, leg_fl.+y)"),
        "{labels:?}"
    );
}

#[test]
fn synth_records_synthetic_provenance_and_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.vars");
    ok(&[
        "synth",
        "--model",
        s(&fixture("table.model")),
        "--count",
        "3",
        "--seed",
        "4",
        "--out",
        s(&out),
    ]);
    let doc = json(&out);
    assert_eq!(doc["provenance"], "synthetic");
    assert_eq!(doc["variations"].as_array().unwrap().len(), 3);
    assert!(!doc["ground_truth"]["constraints"]
        .as_array()
        .unwrap()
        .is_empty());
}

#[test]
fn discover_refuses_a_pool_from_another_model() {
    let dir = tempfile::tempdir().unwrap();
    let pool = dir.path().join("table.pool");
    ok(&[
        "enumerate",
        "--model",
        s(&fixture("table.model")),
        "--out",
        s(&pool),
    ]);
    let err = fails(
        &[
            "discover",
            "--model",
            s(&fixture("chair.model")),
            "--variations",
            s(&fixture("chair_parts.vars")),
            "--pool",
            s(&pool),
            "--out",
            s(&dir.path().join("space.json")),
        ],
        1,
    );
    assert!(
        err.contains("pool was enumerated for another model"),
        "{err}"
    );
    assert!(!dir.path().join("space.json").exists());
}

#[test]
fn discover_then_evaluate_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let space = dir.path().join("space.json");
    ok(&[
        "discover",
        "--model",
        s(&fixture("chair.model")),
        "--variations",
        s(&fixture("chair_parts.vars")),
        "--out",
        s(&space),
    ]);
    let trace = json(&dir.path().join("space.json.trace.json"));
    assert!(
        trace["trace"]["cutoff"].as_u64().is_some(),
        "{}",
        trace["trace"]
    );
    assert!(dir.path().join("space.json.trace.tsv").exists());

    let stool: Value =
        serde_json::from_str(&ok(&["reparam", "--space", s(&space), "--state", "stool"])).unwrap();
    assert!(stool["warnings"].as_array().unwrap().is_empty(), "{stool}");

    let obj = ok(&["export-mesh", "--space", s(&space), "--state", "default"]);
    assert!(obj.contains("o seat\n"));
    assert!(obj.lines().any(|l| l.starts_with("f ")));

    let err = fails(
        &["reparam", "--space", s(&space), "--state", "no-such-slider"],
        1,
    );
    assert!(err.starts_with("error: "), "{err}");
}

#[test]
fn export_mesh_from_a_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bottle.obj");
    ok(&[
        "export-mesh",
        "--model",
        s(&fixture("bottle.model")),
        "--segments",
        "8",
        "--out",
        s(&out),
    ]);
    let obj = std::fs::read_to_string(&out).unwrap();
    let verts = obj.lines().filter(|l| l.starts_with("v ")).count();
    let faces = obj.lines().filter(|l| l.starts_with("f ")).count();
    assert!(verts > 0 && faces > 0);
    fails(
        &[
            "export-mesh",
            "--model",
            s(&fixture("bottle.model")),
            "--state",
            "x",
        ],
        1,
    );
}

#[test]
fn render_then_fit_appends_a_variation() {
    let dir = tempfile::tempdir().unwrap();
    let pack = dir.path().join("pack");
    let model = fixture("table.model");
    // top width is parameter 3
    ok(&[
        "render",
        "--model",
        s(&model),
        "--perturb",
        "3=1.05",
        "--size",
        "64",
        "--seed",
        "2",
        "--out",
        s(&pack),
    ]);
    let vars = dir.path().join("fits.vars");
    let fitted = dir.path().join("fitted.model");
    ok(&[
        "fit",
        "--model",
        s(&model),
        "--images",
        s(&pack),
        "--iters",
        "3",
        "--out",
        s(&fitted),
        "--append",
        s(&vars),
        "--label",
        "wider",
    ]);
    let doc = json(&vars);
    assert_eq!(doc["provenance"], "external-generator");
    assert_eq!(doc["variations"][0]["label"], "wider");
    assert!(fitted.exists());
}

#[test]
fn usage_and_runtime_errors_have_distinct_codes() {
    fails(&["no-such-command"], 2);
    fails(&["enumerate"], 2);
    let err = fails(&["enumerate", "--model", "/no/such/file.model"], 1);
    assert!(err.starts_with("error: "), "{err}");
}

#[test]
fn thread_override_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_reparam"))
        .args(["acceptance", "--only", "A6"])
        .env("REPARAM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("REPARAM_THREADS"));
}

#[test]
fn acceptance_subset_reports_each_criterion() {
    let text = ok(&["acceptance", "--only", "A5,A6"]);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("A5   PASS"), "{text}");
    assert!(lines[1].starts_with("A6   PASS"), "{text}");
    assert_eq!(lines[2], "2 of 2 criteria passed");
    let err = fails(&["acceptance", "--only", "A99"], 1);
    assert!(err.contains("unknown criterion"), "{err}");
}
