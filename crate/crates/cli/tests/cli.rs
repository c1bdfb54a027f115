use std::path::PathBuf;
use std::process::Command;

fn clp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clp"))
}

fn scratch(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("clp-cli-{}-{name}", std::process::id()))
}

const SMALL: &[&str] = &[
    "--set", "synth.nodes=300",
    "--set", "model.epochs=5",
    "--set", "quantile.epochs=5",
    "--set", "splits=1",
    "--set", "repetitions=1",
];

#[test]
fn synth_then_fit() {
    let path = scratch("graph.txt");
    let status = clp()
        .args(["synth", "--nodes", "500", "--seed", "3", "--out"])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let out = clp().arg("fit-powerlaw").arg(&path).output().unwrap();
    std::fs::remove_file(&path).ok();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["beta_hat", "d_min", "ks", "tail_size"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

#[test]
fn run_writes_report_and_flags_override_config() {
    let cfg = scratch("run.cfg");
    std::fs::write(&cfg, "# test\nalpha = 0.3\nsampler.mode = literal\n").unwrap();
    let out = clp()
        .args(["run", "--alpha", "0.2", "--lambda", "0.4", "--config"])
        .arg(&cfg)
        .args(SMALL)
        .output()
        .unwrap();
    std::fs::remove_file(&cfg).ok();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config_echo"]["alpha"], "0.2");
    assert_eq!(v["config_echo"]["sampler.lambda"], "0.4");
    assert_eq!(v["config_echo"]["sampler.mode"], "literal");
    assert_eq!(v["trials"].as_array().unwrap().len(), 2);
}

#[test]
fn sweep_lambda_writes_csv() {
    let csv = scratch("lambda.csv");
    let out = clp()
        .args(["sweep-lambda", "--lambdas", "0.45,0.15", "--sampler-mode", "literal", "--csv"])
        .arg(&csv)
        .args(SMALL)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    std::fs::remove_file(&csv).ok();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("lambda,"));
}

#[test]
fn bad_input_fails_cleanly() {
    let out = clp().args(["run", "--alpha", "1.5"]).output().unwrap();
    assert!(!out.status.success());
    let out = clp().args(["fit-powerlaw", "/nonexistent/edges.txt"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/edges.txt"));
    let out = clp().args(["sweep-cliques", "--grid", "10by5"]).output().unwrap();
    assert!(!out.status.success());
}
