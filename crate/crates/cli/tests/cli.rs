use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chainbound"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_cloud(path: &Path) {
    let mut text = String::from("x,y\n");
    for i in 0..20 {
        let t = i as f64 / 19.0;
        text.push_str(&format!("{},{}\n", t, (7.0 * t).sin() * 0.5));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn cover_emits_profile_csv() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("pts.csv");
    std::fs::write(&pts, "0\n1\n2\n").unwrap();
    let o = run(&["cover", "--points", pts.to_str().unwrap(), "--eps", "3,0.5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "eps,lower,upper,entropy");
    assert_eq!(lines[1], "3,1,1,0");
    assert!(lines[2].starts_with("0.5,2,3,"));
}

#[test]
fn entropy_reads_distance_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    std::fs::write(&m, "0,1\n1,0\n").unwrap();
    let o = run(&["entropy", "--matrix", m.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    // Two points at distance 1: N(ε) = 2 on (0, 1), so the integral is √log 2.
    let integral = v["entropy_integral"].as_f64().unwrap();
    assert!((integral - 2f64.ln().sqrt()).abs() < 0.02, "{integral}");
}

#[test]
fn discrete_check_reports_every_instance() {
    let dir = tempfile::tempdir().unwrap();
    let viol = dir.path().join("v.json");
    let o = run(&["discrete-check", "--instances", "200", "--seed", "3", "--violations", viol.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 200 * 5);
    assert!(rows.iter().all(|r| r.contains(",pass,")));
    assert_eq!(std::fs::read_to_string(&viol).unwrap().trim(), "[]");
}

#[test]
fn dudley_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("pts.csv");
    write_cloud(&pts);
    let mut outs = Vec::new();
    for tag in ["a", "b"] {
        let out = dir.path().join(format!("{tag}.json"));
        let prof = dir.path().join(format!("{tag}.profile.csv"));
        let o = run(&[
            "dudley",
            "--points",
            pts.to_str().unwrap(),
            "--sigma",
            "1",
            "--seed",
            "7",
            "--samples",
            "20000",
            "--format",
            "json",
            "--out",
            out.to_str().unwrap(),
            "--profile-out",
            prof.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outs.push((std::fs::read(&out).unwrap(), std::fs::read(&prof).unwrap()));
    }
    assert_eq!(outs[0], outs[1]);
    let v: serde_json::Value = serde_json::from_slice(&outs[0].0).unwrap();
    let checks: Vec<&str> = v["reports"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["check"].as_str().unwrap())
        .collect();
    assert_eq!(checks, ["telescoping", "projection_step", "stage1", "dudley"]);
    assert_eq!(v["all_pass"], true);
    let profile = String::from_utf8(outs[0].1.clone()).unwrap();
    assert!(profile.starts_with("k,eps,size\n0,"));
}

#[test]
fn regress_linear_grid() {
    let o = run(&["regress", "--class", "linear", "--seed", "1", "--grid", "64x8,128x8", "--trials", "50"]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("n,d,r,delta_star,median_err,normalized,slope"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn regress_summary_json() {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("s.json");
    let o = run(&[
        "regress",
        "--class",
        "l1",
        "--R",
        "1",
        "--seed",
        "2",
        "--n",
        "32",
        "--d",
        "64",
        "--trials",
        "20",
        "--summary",
        summary.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(v["class"], "l1");
    assert_eq!(v["cells"].as_array().unwrap().len(), 1);
}

#[test]
fn maurey_reproduces_net_bound() {
    let o = run(&["maurey", "--d", "3", "--R", "1", "--eps", "0.5", "--seed", "4", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["k"], 4);
    assert_eq!(v["bound"], "2401");
    assert_eq!(v["net"]["covers"], true);
    assert_eq!(v["sparsify"]["successes"], v["sparsify"]["trials"]);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 11\nformat = \"json\"\n\n[maurey]\nd = 2\neps = 0.7\n").unwrap();
    let o = run(&["maurey", "--config", cfg.to_str().unwrap(), "--eps", "0.5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["seed"], 11);
    assert_eq!(v["d"], 2);
    assert_eq!(v["eps"], 0.5);
}

#[test]
fn usage_and_config_errors_exit_2() {
    assert_eq!(code(&run(&["bogus"])), 2);
    assert_eq!(code(&run(&["gauss-check"])), 2, "missing seed");
    assert_eq!(code(&run(&["cover"])), 2, "missing input");
    assert_eq!(code(&run(&["maurey", "--seed", "1", "--eps", "-1"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[maurey]\nepsilon = 0.5\n").unwrap();
    assert_eq!(code(&run(&["maurey", "--seed", "1", "--config", cfg.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["cover", "--points", "/nonexistent/pts.csv"])), 2);
}
