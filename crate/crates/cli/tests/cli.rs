use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn nswcp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nswcp")).args(args).output().expect("binary runs")
}

fn demo(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "demo", name].iter().collect();
    p.to_str().unwrap().to_string()
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn report(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn certificates_pass(r: &Value) -> bool {
    r["certificates"].as_array().unwrap().iter().all(|c| c["pass"] == Value::Bool(true))
}

#[test]
fn two_agent_demo_passes_its_certificates() {
    let r = report(&nswcp(&["solve-nsw", "--input", &demo("two_agents.json")]));
    assert!(certificates_pass(&r));
    assert!((r["best_value"].as_f64().unwrap() - 3.0).abs() < 1e-9);
    assert!((r["cp_value"].as_f64().unwrap() - 3f64.ln()).abs() < 1e-9);
    assert_eq!(r["allocation"]["a1"], serde_json::json!(["j1"]));
    let ratio = r["certificates"].as_array().unwrap().iter().find(|c| c["name"] == "best_nsw_vs_relaxation").unwrap();
    let expected = (-1.0 / std::f64::consts::E).exp() * 3.0 / 1.001 - 1e-9;
    assert!((ratio["bound"].as_f64().unwrap() - expected).abs() < 1e-9);
    assert_eq!(r["eps"], 0.001);
    assert_eq!(r["seed"], 0);
    assert!(r["fsr_gap"].is_number());
}

#[test]
fn report_is_stable_json() {
    let out = nswcp(&["solve-nsw", "--input", &demo("weighted_sparse.json"), "--round", "sample", "--seed", "4"]);
    let r = report(&out);
    let again: Value = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(r, again);
    assert_eq!(r["round"], "sample");
    assert!(r.get("fsr_gap").is_none());
    assert_eq!(r["instance_digest"].as_str().unwrap().len(), 64);
    let other = report(&nswcp(&["solve-nsw", "--input", &demo("weighted_sparse.json"), "--round", "sample", "--seed", "4"]));
    assert_eq!(r["allocation"], other["allocation"]);
}

#[test]
fn digest_ignores_formatting() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(demo("two_agents.json")).unwrap();
    let compact: Value = serde_json::from_str(&text).unwrap();
    let path = write(&dir, "compact.json", &serde_json::to_string(&compact).unwrap());
    let a = report(&nswcp(&["solve-nsw", "--input", &demo("two_agents.json")]));
    let b = report(&nswcp(&["solve-nsw", "--input", &path]));
    assert_eq!(a["instance_digest"], b["instance_digest"]);
}

#[test]
fn malformed_input_exits_1_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(&dir, "bad.json", "{\"agents\": [\n  {\"id\": \"a1\" \"weight\": 1}\n]}");
    let out = nswcp(&["solve-nsw", "--input", &path]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:2:15"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn invalid_instances_and_usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(&dir, "w.json", r#"{"agents":[{"id":"a","weight":0.7}],"items":["j"],"values":[["a","j",1]]}"#);
    assert_eq!(nswcp(&["solve-nsw", "--input", &path]).status.code(), Some(1));
    let path = write(&dir, "u.json", r#"{"agents":[{"id":"a","weight":1}],"items":["j"],"values":[["a","k",1]]}"#);
    assert_eq!(nswcp(&["solve-nsw", "--input", &path]).status.code(), Some(1));
    assert_eq!(nswcp(&["solve-nsw", "--input", "/nonexistent.json"]).status.code(), Some(1));
    assert_eq!(nswcp(&["solve-nsw"]).status.code(), Some(1));
    assert_eq!(nswcp(&["solve-nsw", "--input", &demo("two_agents.json"), "--eps", "0"]).status.code(), Some(1));
    assert_eq!(nswcp(&["solve-sched", "--input", &demo("machines_l2.json"), "--objective", "l7"]).status.code(), Some(1));
    assert_eq!(nswcp(&["verify", "--suite", "nsw"]).status.code(), Some(1));
    assert_eq!(nswcp(&["verify", "--suite", "fsr", "--input", &demo("weighted_sparse.json")]).status.code(), Some(1));
    assert_eq!(nswcp(&["gen", "--kind", "nsw", "--n", "0", "--m", "2"]).status.code(), Some(1));
}

#[test]
fn more_agents_than_items_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        &dir,
        "inf.json",
        r#"{"agents":[{"id":"a1","weight":0.5},{"id":"a2","weight":0.5}],"items":["j1"],"values":[["a1","j1",1],["a2","j1",2]]}"#,
    );
    let out = nswcp(&["solve-nsw", "--input", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}

#[test]
fn sched_examples() {
    let dir = tempfile::tempdir().unwrap();
    let two = write(&dir, "two.json", r#"{"machines":["m1","m2"],"jobs":["j1","j2"],"p":[[1,1],[1,1]]}"#);
    let r = report(&nswcp(&["solve-sched", "--input", &two, "--objective", "l2"]));
    assert_eq!(r["rounded_value"], 2.0);
    assert_eq!(r["objective"], "l2");
    assert!(certificates_pass(&r));

    let one = write(&dir, "one.json", r#"{"machines":["m1"],"jobs":["j1"],"p":[[2]],"objective":{"kind":"completion"}}"#);
    let r = report(&nswcp(&["solve-sched", "--input", &one]));
    assert_eq!(r["rounded_value"], 4.0);
    assert_eq!(r["objective"], "completion");

    let r = report(&nswcp(&["solve-sched", "--input", &demo("machines_l2.json"), "--objective", "lk:1"]));
    let (cp, rounded) = (r["cp_value"].as_f64().unwrap(), r["rounded_value"].as_f64().unwrap());
    assert!((cp - rounded).abs() < 1e-9 * cp, "{cp} vs {rounded}");

    let out = nswcp(&["solve-sched", "--input", &two]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("objective"));
}

#[test]
fn file_objective_is_the_default() {
    let r = report(&nswcp(&["solve-sched", "--input", &demo("machines_l2.json")]));
    assert_eq!(r["objective"], "l2");
    let r = report(&nswcp(&["solve-sched", "--input", &demo("machines_l2.json"), "--objective", "lk:3"]));
    assert_eq!(r["objective"], "lk:3");
    assert!(certificates_pass(&r));
}

#[test]
fn dump_lp_writes_mps() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cp.mps");
    let out = nswcp(&["solve-nsw", "--input", &demo("two_agents.json"), "--eps", "0.1", "--dump-lp", path.to_str().unwrap()]);
    assert!(out.status.success());
    let mps = std::fs::read_to_string(&path).unwrap();
    for section in ["NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"] {
        assert!(mps.lines().any(|l| l.starts_with(section)), "missing {section}");
    }
    assert!(mps.contains("OBJSENSE"));
}

#[test]
fn gen_is_deterministic_and_valid() {
    let a = nswcp(&["gen", "--kind", "nsw", "--n", "2", "--m", "4", "--seed", "7"]);
    let b = nswcp(&["gen", "--kind", "nsw", "--n", "2", "--m", "4", "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = nswcp(&["gen", "--kind", "nsw", "--n", "2", "--m", "4", "--seed", "8"]);
    assert_ne!(a.stdout, c.stdout);

    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert!(v["agents"].as_array().unwrap().iter().all(|x| x["weight"] == 0.5));
    assert_eq!(v["values"].as_array().unwrap().len(), 8);
    assert!(v["values"].as_array().unwrap().iter().all(|e| {
        let x = e[2].as_f64().unwrap();
        x.fract() == 0.0 && (1.0..=10.0).contains(&x)
    }));

    let dir = tempfile::tempdir().unwrap();
    let nsw = dir.path().join("g.json");
    let out = nswcp(&["gen", "--kind", "nsw", "--n", "3", "--m", "5", "--seed", "1", "--weights", "dirichlet", "--output", nsw.to_str().unwrap()]);
    assert!(out.status.success() && out.stdout.is_empty());
    assert!(report(&nswcp(&["solve-nsw", "--input", nsw.to_str().unwrap()])).is_object());

    let sched = nswcp(&["gen", "--kind", "sched", "--n", "4", "--m", "2", "--seed", "3"]);
    let v: Value = serde_json::from_slice(&sched.stdout).unwrap();
    assert_eq!(v["machines"].as_array().unwrap().len(), 2);
    assert_eq!(v["jobs"].as_array().unwrap().len(), 4);
    let path = write(&dir, "s.json", std::str::from_utf8(&sched.stdout).unwrap());
    assert!(certificates_pass(&report(&nswcp(&["solve-sched", "--input", &path]))));
}

#[test]
fn verify_suites_pass() {
    let cases: Vec<Vec<String>> = vec![
        vec!["--suite".into(), "alpha".into()],
        vec!["--suite".into(), "ef1".into()],
        vec!["--suite".into(), "ef1".into(), "--input".into(), demo("identical.json")],
        vec!["--suite".into(), "fsr".into(), "--input".into(), demo("two_agents.json")],
        vec!["--suite".into(), "nsw".into(), "--input".into(), demo("weighted_sparse.json")],
        vec!["--suite".into(), "sched".into(), "--input".into(), demo("machines_l2.json")],
        vec!["--suite".into(), "sched".into(), "--input".into(), demo("machines_l2.json"), "--objective".into(), "completion".into()],
    ];
    for case in cases {
        let mut args = vec!["verify"];
        args.extend(case.iter().map(String::as_str));
        let out = nswcp(&args);
        assert_eq!(out.status.code(), Some(0), "{case:?}: {}", String::from_utf8_lossy(&out.stderr));
        let r: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(r["pass"], true);
        assert!(!r["certificates"].as_array().unwrap().is_empty());
    }
}

#[test]
fn alpha_suite_reports_the_constants() {
    let r = report(&nswcp(&["verify", "--suite", "alpha"]));
    let names: Vec<&str> = r["certificates"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"alpha_2_error"));
    assert!(names.contains(&"completion_triangle"));
}

#[test]
fn ef1_suite_rejects_non_identical_agents() {
    let out = nswcp(&["verify", "--suite", "ef1", "--input", &demo("two_agents.json")]);
    assert_eq!(out.status.code(), Some(1));
}
