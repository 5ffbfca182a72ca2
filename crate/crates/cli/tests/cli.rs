//! The command-line interface: outputs, configuration handling and exit
//! statuses.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_policy-regret"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn status(args: &[&str]) -> i32 {
    let dir = tempfile::tempdir().unwrap();
    run(args, dir.path()).status.code().unwrap()
}

#[test]
fn simulate_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let sim = run(&["simulate", "--n", "3000", "--seed", "4"], dir.path());
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    for name in ["data.csv", "oracle.csv", "simulation.json"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let data = dir.path().join("data.csv");
    let out = dir.path().join("analysis");
    let analysis = run(
        &[
            "analyze",
            "--input",
            data.to_str().unwrap(),
            "--assumption",
            "msm",
            "--lambda",
            "1.3",
            "--bootstrap",
            "0",
            "--measures",
            "accuracy,tpr,utility:1,0,0,2",
        ],
        &out,
    );
    assert!(analysis.status.success(), "{}", String::from_utf8_lossy(&analysis.stderr));
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    // header plus δ and baseline rows for three measures
    assert_eq!(csv.lines().count(), 7, "{csv}");
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["command"], "analyze");
    assert_eq!(json["result"]["intervals"].as_array().unwrap().len(), 6);
}

#[test]
fn grouped_analysis_reports_each_group() {
    let dir = tempfile::tempdir().unwrap();
    let sim = run(&["simulate", "--generator", "healthcare", "--n", "4000", "--seed", "2"], dir.path());
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let data = dir.path().join("data.csv");
    let out = dir.path().join("analysis");
    let analysis = run(
        &[
            "analyze",
            "--input",
            data.to_str().unwrap(),
            "--group-column",
            "group",
            "--bootstrap",
            "0",
            "--measures",
            "accuracy",
        ],
        &out,
    );
    assert!(analysis.status.success(), "{}", String::from_utf8_lossy(&analysis.stderr));
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    for group in ["group_a", "group_b"] {
        assert!(csv.lines().any(|l| l.starts_with(group)), "{group} missing from\n{csv}");
    }
}

#[test]
fn configuration_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, "seed = 5\n[separation]\nn_fixtures = 20\n").unwrap();
    let out = dir.path().join("sep");
    let result = run(
        &["separation", "--config", config.to_str().unwrap(), "--measures", "accuracy,ppv"],
        &out,
    );
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let csv = fs::read_to_string(out.join("separation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 20 * 2);
}

#[test]
fn configuration_errors_exit_with_one() {
    assert_eq!(status(&["separation", "--measures", ","]), 1);
    assert_eq!(status(&["coverage", "--trials", "0"]), 1);
    assert_eq!(status(&["separation", "--assumption", "telepathy"]), 1);
    assert_eq!(status(&["analyze"]), 1);
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "seed = 1\nfavourite_colour = \"blue\"\n").unwrap();
    assert_eq!(status(&["separation", "--config", config.to_str().unwrap()]), 1);
}

#[test]
fn data_errors_exit_with_two() {
    assert_eq!(status(&["analyze", "--input", "/nonexistent/data.csv"]), 2);
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "x_a,d,pi1,y\n0.1,1,0.5,1\n0.2,0,1.7,\n").unwrap();
    let result = run(&["analyze", "--input", data.to_str().unwrap()], dir.path());
    assert_eq!(result.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("error:") && stderr.contains("command: analyze"), "{stderr}");
}
