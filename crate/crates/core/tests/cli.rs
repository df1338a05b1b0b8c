use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metric-gff")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn analytic_laws() {
    let v = json(&cli(&["analytic", "drift-hit", "0", "1", "1"]));
    assert!((v["value"].as_f64().unwrap() - 0.317_310_507_862_914).abs() < 1e-12);
    let v = json(&cli(&["analytic", "f", "--", "-0.5", "1"]));
    assert!((v["value"].as_f64().unwrap() + v["complement"].as_f64().unwrap() - 1.0).abs() < 1e-14);
    let v = json(&cli(&["analytic", "supercritical", "0.6"]));
    assert!((v["value"].as_f64().unwrap() - 0.3739).abs() < 1e-3);
    let v = json(&cli(&["analytic", "window", "sqrt-log", "2", "1000"]));
    assert!((v["vs_sqrt_log"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    let v = json(&cli(&["analytic", "edge-open", "1", "1", "0", "2"]));
    assert!((v["value"].as_f64().unwrap() - (1.0 - (-0.5f64).exp())).abs() < 1e-15);
    assert_eq!(cli(&["analytic", "drift-hit", "0", "1", "0"]).status.code(), Some(2));
    assert_eq!(cli(&["analytic", "constants", "2"]).status.code(), Some(2));
}

#[test]
fn green_command() {
    let v = json(&cli(&["green", "--d", "2", "--N", "1"]));
    assert!((v["G_N(0,0)"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().to_str().unwrap();
    let a = json(&cli(&["green", "--d", "3", "--N", "3", "--table", t, "--mode", "dense"]));
    let b = json(&cli(&["green", "--d", "3", "--N", "3", "--table", t, "--mode", "dense"]));
    assert_eq!(a, b);
    assert!(a["G(0,0)"].as_f64().unwrap() > a["G_N(0,0)"].as_f64().unwrap());
}

#[test]
fn simulate_writes_csv_and_honours_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"experiment":"crossing_2d","d":2,"N":[8],"samples":30,"seed":1}"#).unwrap();
    let c = cfg.to_str().unwrap();
    let out = dir.path().join("o.csv");
    let o = out.to_str().unwrap();
    assert!(cli(&["simulate", "--config", c, "--out", o, "--no-wall-time", "--seed", "5"]).status.success());
    let first = std::fs::read_to_string(&out).unwrap();
    assert!(first.starts_with("experiment,d,N,h,estimate,stderr_lo,stderr_hi,samples,seed,wall_s,meta"));
    assert!(first.lines().nth(1).unwrap().starts_with("crossing_2d,2,8,0.0,"));
    assert!(first.contains(",30,5,,"));
    let stdout = cli(&["simulate", "--config", c, "--no-wall-time", "--seed", "5", "--threads", "2"]);
    assert_eq!(String::from_utf8(stdout.stdout).unwrap(), first);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"experiment":"crossing_2d","d":2,"N":[8],"samples":0}"#).unwrap();
    let o = cli(&["simulate", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("samples"));
    assert_eq!(cli(&["simulate", "--config", "/nonexistent/x.json"]).status.code(), Some(2));
    let big = dir.path().join("big.json");
    std::fs::write(&big, r#"{"experiment":"critical_exponent_3d","d":3,"N":[11],"samples":1}"#).unwrap();
    assert_eq!(cli(&["simulate", "--config", big.to_str().unwrap()]).status.code(), Some(3));
    assert_eq!(cli(&["analytic", "f", "1", "2"]).status.code(), Some(0));
    assert_ne!(cli(&["no-such-command"]).status.code(), Some(0));
}

#[test]
fn martingale_trace_export() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("m.json");
    std::fs::write(&cfg, r#"{"experiment":"martingale_check","d":2,"N":[12],"samples":8,"seed":3,"k_max":4}"#).unwrap();
    let trace = dir.path().join("t.jsonl");
    let o = cli(&[
        "martingale",
        "--config",
        cfg.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
        "--replica",
        "2",
        "--no-wall-time",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    let lines: Vec<serde_json::Value> =
        std::fs::read_to_string(&trace).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 5);
    assert!(lines.iter().all(|l| l["var"].is_number() && l["M"].is_number()));
    let o =
        cli(&["martingale", "--config", cfg.to_str().unwrap(), "--trace", trace.to_str().unwrap(), "--replica", "8"]);
    assert_eq!(o.status.code(), Some(2));
}
