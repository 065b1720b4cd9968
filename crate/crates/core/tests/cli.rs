use std::path::Path;
use std::process::{Command, Output};

fn ymb(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ymb"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("ymb runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn instanton_check_passes_and_replays_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let out = ymb(&["instanton-check", "--seed", "3"], &a);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["manifest_version"], 1);
    assert_eq!(manifest["command"], "instanton-check");
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["pass"], true);
    assert!(manifest["outputs"]["instanton.json"].is_string());
    assert!(manifest["config_hash"].is_string());

    let b = dir.path().join("b");
    let m = a.join("manifest.json");
    let out = ymb(&["instanton-check", "--config", m.to_str().unwrap()], &b);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        std::fs::read(a.join("instanton.json")).unwrap(),
        std::fs::read(b.join("instanton.json")).unwrap()
    );
}

#[test]
fn tolerance_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), "c.json", r#"{"tolerances": {"gluing_residual": 0.0}}"#);
    let out = ymb(&["instanton-check", "--config", &c], &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(1));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("o/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["pass"], false);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("o");
    let cases = [
        r#"{"bogus": 1}"#,
        r#"{"eps": [0.01]}"#,
        r#"{"eps": [0.0, 0.01, 0.02]}"#,
        r#"{"glue": {"d1": 5.0, "d2": 4.0}}"#,
        r#"{"boundary": {"family": "nope"}}"#,
        r#"not json"#,
    ];
    for (k, body) in cases.iter().enumerate() {
        let c = write_config(dir.path(), &format!("c{k}.json"), body);
        let out = ymb(&["expansion-study", "--config", &c], &o);
        assert_eq!(
            out.status.code(),
            Some(2),
            "config {body}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let out = ymb(&["instanton-check", "--config", "/nonexistent/ymb.json"], &o);
    assert_eq!(out.status.code(), Some(2));
    let out = ymb(&["no-such-command"], &o);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn small_solution_beyond_guard_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), "c.json", r#"{"small_eps": [5.0, 0.02, 0.04]}"#);
    let out = ymb(&["small-solution", "--config", &c], &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not contracting"));
}

#[test]
fn strict_profile_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let out = ymb(
        &["instanton-check", "--tolerance-profile", "strict", "--threads", "2"],
        &dir.path().join("o"),
    );
    assert!(matches!(out.status.code(), Some(0) | Some(1)));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("o/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["tolerances"]["chern"], 1e-4);
    assert_eq!(manifest["threads"], 2);
}
