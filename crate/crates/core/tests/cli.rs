use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_fractal-cuntz");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.display().to_string()
}

#[test]
fn report_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["report", "--builtin", "example8", "--seed", "7", "--out", &out_arg(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["samples.csv", "convergence.csv", "relations.csv", "report_report.json", "separation.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("report_report.json")).unwrap()).unwrap();
    assert_eq!(report["task"], "report");
    assert_eq!(report["pass"], true);
    assert_eq!(report["config"]["builtin"], "example8");
    assert!(report["elapsed_ms"].is_u64());
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["tolerance"].is_f64()));
    let conv = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert!(conv.starts_with("k,error_sup,matrix_error,certified_bound,decay_ratio\n"));
    assert_eq!(conv.lines().count(), 9);
}

#[test]
fn each_subcommand_succeeds_on_builtins() {
    for builtin in ["example8", "example9-tent", "cantor3"] {
        for cmd in ["sample", "check-separation", "verify-relations", "approx"] {
            let dir = tempfile::tempdir().unwrap();
            let out = run(&[cmd, "--builtin", builtin, "--samples", "20000", "--levels", "1..5", "--out", &out_arg(dir.path())]);
            assert_eq!(out.status.code(), Some(0), "{cmd} {builtin}: {}", String::from_utf8_lossy(&out.stdout));
        }
    }
}

#[test]
fn config_file_with_custom_system() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"n": 3, "dimension": 1,
            "maps": [{"A": [[0.2]], "b": [0.0]}, {"A": [[0.2]], "b": [0.4]}, {"A": [[0.2]], "b": [0.8]}],
            "box": {"lo": [0.0], "hi": [1.0]}, "samples": 30000, "level": 2, "function": "x^2"}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("o");
    let out = run(&["report", "--config", cfg.to_str().unwrap(), "--levels", "1..4", "--out", &out_arg(&out_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let rel = fs::read_to_string(out_dir.join("relations.csv")).unwrap();
    assert_eq!(rel.lines().count(), 1 + 2 + 3);
}

#[test]
fn overlapping_system_fails_separation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("overlap.json");
    fs::write(
        &cfg,
        r#"{"n": 2, "dimension": 1, "maps": [{"A": [[0.5]], "b": [0.0]}, {"A": [[0.5]], "b": [0.1]}],
            "box": {"lo": [0.0], "hi": [1.0]}, "samples": 20000}"#,
    )
    .unwrap();
    let out = run(&["check-separation", "--config", cfg.to_str().unwrap(), "--out", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL separation"));
}

#[test]
fn invalid_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"builtin": "example8", "weights": [0.3, 0.3]}"#, "weights must sum to 1"),
        (
            r#"{"n": 2, "dimension": 1, "maps": [{"A": [[0.5]], "b": [0.0]}, {"A": [[1.5]], "b": [0.0]}],
                "box": {"lo": [0.0], "hi": [1.0]}}"#,
            "map 2 not contractive",
        ),
        (r#"{"builtin": "example8", "bogus": 1}"#, "unknown field"),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let cfg = dir.path().join(format!("c{i}.json"));
        fs::write(&cfg, text).unwrap();
        let out = run(&["sample", "--config", cfg.to_str().unwrap(), "--out", &out_arg(dir.path())]);
        assert_eq!(out.status.code(), Some(2));
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{err}");
    }
    let out = run(&["sample", "--builtin", "koch", "--out", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"builtin": "cantor3", "samples": 500, "seed": 1}"#).unwrap();
    let out = run(&["sample", "--config", cfg.to_str().unwrap(), "--samples", "1234", "--out", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let samples = fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 1235);
}
