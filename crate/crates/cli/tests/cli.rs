use std::path::Path;
use std::process::{Command, Output};

fn hierfair(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hierfair")).args(args).current_dir(dir).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn generate_solve_audit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen = hierfair(
        &["generate", "--tree", "comb", "--nodes", "9", "--items", "8", "--p", "0.5", "--seed", "4", "-o", "inst.json"],
        d,
    );
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));
    for alg in ["sma", "mgys", "gys-leaves"] {
        let out = format!("{alg}.json");
        let solve = hierfair(&["solve", "--algorithm", alg, "--instance", "inst.json", "-o", &out], d);
        assert!(solve.status.success(), "{}", String::from_utf8_lossy(&solve.stderr));
        let audit = hierfair(&["audit", "--instance", "inst.json", "--allocation", &out], d);
        assert!(audit.status.success());
        let report = json(&audit);
        if alg != "gys-leaves" {
            assert_eq!(report["err1"], false, "{alg}: {report}");
            assert_eq!(report["err2"], 0);
        }
    }
    let oracle = hierfair(&["audit", "--instance", "inst.json", "--allocation", "mgys.json", "--oracle"], d);
    assert!(oracle.status.success());
    assert_eq!(json(&oracle)["reference"], "oracle");
}

#[test]
fn generation_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["generate", "--tree", "balanced", "--nodes", "10", "--items", "12", "--p", "0.3", "--seed", "9"];
    let a = hierfair(&args, dir.path());
    let b = hierfair(&args, dir.path());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn trace_goes_to_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("inst.json"),
        r#"{"m": 2, "nodes": [{"id": 1, "parent": null, "criterion": "lorenz"},
                               {"id": 2, "parent": 1}, {"id": 3, "parent": 1}],
            "leaf_valuations": {"2": {"type": "binary_additive", "approved": [0]},
                                "3": {"type": "binary_additive", "approved": [1]}}}"#,
    )
    .unwrap();
    let out = hierfair(&["solve", "--algorithm", "mgys", "--instance", "inst.json", "--trace"], d);
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let first: serde_json::Value = serde_json::from_str(stderr.lines().next().unwrap()).unwrap();
    assert_eq!(first["iteration"], 1);
    assert_eq!(first["event"], "augment");
    assert_eq!(json(&out)["utilities"]["1"], 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(hierfair(&["solve", "--algorithm", "sma", "--instance", "missing.json"], d).status.code(), Some(2));
    std::fs::write(d.join("bad.json"), r#"{"m": 1, "nodes": []}"#).unwrap();
    assert_eq!(hierfair(&["solve", "--algorithm", "sma", "--instance", "bad.json"], d).status.code(), Some(2));
    let bad_p = ["generate", "--tree", "comb", "--nodes", "5", "--items", "3", "--p", "1.5"];
    assert_eq!(hierfair(&bad_p, d).status.code(), Some(2));
    assert_eq!(hierfair(&["frobnicate"], d).status.code(), Some(2));

    // a zero timeout is recorded per row, not as an exit code
    std::fs::write(
        d.join("bench.json"),
        r#"{"configs": [{"id": "c", "instances": 2,
                         "generator": {"tree": "balanced", "nodes": 7, "items": 6, "p": 0.5}}],
            "algorithms": ["mgys", "sma"]}"#,
    )
    .unwrap();
    let bench = hierfair(&["bench", "--config", "bench.json", "-o", "rows.csv", "--jobs", "2", "--timeout", "0"], d);
    assert!(bench.status.success());
    let rows = std::fs::read_to_string(d.join("rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 5);
    assert!(rows.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn budget_exhaustion_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // three root children and 12 items: 4^12 root splits exceed the oracle budget
    let gen = hierfair(&["generate", "--tree", "balanced", "--nodes", "10", "--items", "12", "--p", "0.5", "-o", "i.json"], d);
    assert!(gen.status.success());
    assert!(hierfair(&["solve", "--algorithm", "sma", "--instance", "i.json", "-o", "a.json"], d).status.success());
    let out = hierfair(&["audit", "--instance", "i.json", "--allocation", "a.json", "--oracle"], d);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
