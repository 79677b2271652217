use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn supercurve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_supercurve"))
        .args(args)
        .env_remove("SUPERCURVE_THREADS")
        .output()
        .unwrap()
}

fn config(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

fn flat(dir: &Path) -> String {
    let out = dir.join("out");
    config(
        dir,
        "flat.json",
        &format!(r#"{{"grid": {{"n_s": 64, "n_t": 64, "P_s": 1, "P_t": 1}}, "output_dir": {:?}}}"#, out),
    )
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn verify_writes_report_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = flat(dir.path());
    let o = supercurve(&["verify", "--config", &cfg, "--checks", "classical_identity,construction,a1_a2", "--seed", "11"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = stdout_json(&o);
    assert_eq!(r["pass"], true);
    assert_eq!(r["environment"]["seed"], 11);
    let names: Vec<&str> = r["checks"].as_array().unwrap().iter().map(|c| c["check"].as_str().unwrap()).collect();
    assert_eq!(names.first(), Some(&"classical_identity"));
    assert_eq!(names.last(), Some(&"a1_a2"));
    for c in r["checks"].as_array().unwrap() {
        for key in ["lhs", "rhs_terms", "defect", "tolerance", "pass", "grid", "scheme"] {
            assert!(c.get(key).is_some(), "{key} missing in {c}");
        }
    }
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/verify.json")).unwrap()).unwrap();
    assert_eq!(saved, r);
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "coarse.json",
        r#"{"grid": {"n_s": 16, "n_t": 16, "P_s": 1, "P_t": 1}, "target": {"kind": "perturbed_r4", "dim": 4, "eps_j": 0.05}, "sampling": {"count": 2}}"#,
    );
    let report = dir.path().join("r.json");
    let o = supercurve(&["verify", "--config", &cfg, "--checks", "lagrangian_a1", "--report", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert_eq!(stdout_json(&o)["pass"], false);
    assert!(stderr(&o).contains("FAIL lagrangian_a1"));
    assert!(report.exists());
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = flat(dir.path());
    let o = supercurve(&["verify", "--config", &cfg, "--checks", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"));

    let missing = dir.path().join("missing.json");
    let o = supercurve(&["verify", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing.json"));

    let bad = config(dir.path(), "bad.json", r#"{"grid": {"n_s": 32}, "colour": 1}"#);
    let o = supercurve(&["verify", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.json"));

    assert_eq!(supercurve(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn thread_cap_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = flat(dir.path());
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_supercurve"))
            .args(["verify", "--config", &cfg, "--checks", "nijenhuis_contraction"])
            .env("SUPERCURVE_THREADS", threads)
            .output()
            .unwrap()
    };
    assert_eq!(run("1").status.code(), Some(0));
    let o = run("many");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("SUPERCURVE_THREADS"));
}

#[test]
fn construct_then_action_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = flat(dir.path());
    let fields = dir.path().join("fields");
    let f = fields.to_str().unwrap();
    let o = supercurve(&["construct", "--config", &cfg, "--out", f]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = stdout_json(&o);
    assert_eq!(r["degenerate"], false);
    assert_eq!(r["report"]["pass"], true);
    for name in ["manifest.json", "phi.json", "phi_0.f64", "psi1_1_im.f64", "xi.json", "report.json"] {
        assert!(fields.join(name).exists(), "{name}");
    }

    let o = supercurve(&["action", "--config", &cfg, "--fields", f]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let a = stdout_json(&o);
    assert!((a["A"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((a["A1"]["body"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(a["A1"]["soul"]["re"].is_number());
    assert!(a["A2"].is_number());
    // the constructed example has nonzero ψ₂ and ξ
    assert!(a.get("compare_a1_a2").is_none());
}

#[test]
fn action_compares_when_only_psi1_is_present() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "c.json",
        r#"{"grid": {"n_s": 32, "n_t": 32, "P_s": 1, "P_t": 1},
            "construction": {"zeta2": [0, 0], "xi": [[0, 0], [0, 0]]}}"#,
    );
    let fields = dir.path().join("f");
    let o = supercurve(&["construct", "--config", &cfg, "--out", fields.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = supercurve(&["action", "--config", &cfg, "--fields", fields.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let a = stdout_json(&o);
    assert!(a["compare_a1_a2"].is_object(), "{a}");
}

#[test]
fn construct_rejects_curved_targets() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "s.json", r#"{"grid": {"n_s": 32, "n_t": 32, "P_s": 1, "P_t": 1}, "target": {"kind": "sphere"}}"#);
    let o = supercurve(&["construct", "--config", &cfg, "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unsupported"), "{}", stderr(&o));
}

#[test]
fn degenerate_construction_warns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "d.json",
        r#"{"grid": {"n_s": 32, "n_t": 32, "P_s": 1, "P_t": 1}, "construction": {"winding_t": [0, 0]}}"#,
    );
    let o = supercurve(&["construct", "--config", &cfg, "--out", dir.path().join("d").to_str().unwrap()]);
    assert_eq!(stdout_json(&o)["degenerate"], true);
    assert!(stderr(&o).contains("warning"));
}

#[test]
fn action_reports_malformed_field_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = flat(dir.path());
    let fields = dir.path().join("fields");
    let f = fields.to_str().unwrap();
    assert_eq!(supercurve(&["construct", "--config", &cfg, "--out", f]).status.code(), Some(0));
    std::fs::write(fields.join("psi1_0_re.f64"), [0u8; 13]).unwrap();
    let o = supercurve(&["action", "--config", &cfg, "--fields", f]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("psi1_0_re.f64"), "{}", stderr(&o));

    std::fs::remove_file(fields.join("phi_1.f64")).unwrap();
    let o = supercurve(&["action", "--config", &cfg, "--fields", f]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("phi_1.f64"), "{}", stderr(&o));
}

#[test]
fn convergence_emits_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "s.json", r#"{"target": {"kind": "sphere"}}"#);
    let o = supercurve(&["convergence", "--check", "classical_identity", "--grids", "16,32,64", "--config", &cfg, "--scheme", "central2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["check", "scheme", "n", "h", "defect", "observed_order"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(&rows[0][1], "central2");
    assert_eq!(&rows[0][5], "");
    let p: f64 = rows[2][5].parse().unwrap();
    assert!((p - 2.0).abs() < 0.2, "{p}");
    assert!(stderr(&o).contains("PASS"));

    let o = supercurve(&["convergence", "--check", "construction", "--grids", "16,32,64"]);
    assert_eq!(o.status.code(), Some(2));
    let o = supercurve(&["convergence", "--check", "classical_identity", "--grids", "32,16,64"]);
    assert_eq!(o.status.code(), Some(2));
}
