use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn radmat(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radmat"))
        .current_dir(dir)
        .env_remove("RADMAT_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fingerprint_line(o: &Output) -> String {
    stdout(o).lines().next().unwrap_or_default().to_string()
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        radmat(dir.path(), &["experiment", "nosuch"]).status.code(),
        Some(1)
    );
    assert_eq!(radmat(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        radmat(dir.path(), &["gen-data", "--scenario", "orbit:3"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(radmat(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn data_and_model_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.json"),
        "{\"format_version\": 1, \"dims\": [",
    )
    .unwrap();
    assert_eq!(
        radmat(dir.path(), &["bench", "--model", "bad.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        radmat(dir.path(), &["bench", "--model", "missing.json"])
            .status
            .code(),
        Some(2)
    );
    fs::write(dir.path().join("cfg.json"), "{\"radar\": {\"noise\": 1}}").unwrap();
    assert_eq!(
        radmat(dir.path(), &["--config", "cfg.json", "gen-data"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        radmat(dir.path(), &["select-window", "--profiles", "none.csv"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn seed_flag_beats_environment() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["gen-data", "--per-class", "1"];
    let plain = fingerprint_line(&radmat(dir.path(), &args));
    let env = Command::new(env!("CARGO_BIN_EXE_radmat"))
        .current_dir(dir.path())
        .env("RADMAT_SEED", "5")
        .args(args)
        .output()
        .unwrap();
    let both = Command::new(env!("CARGO_BIN_EXE_radmat"))
        .current_dir(dir.path())
        .env("RADMAT_SEED", "5")
        .args(["--seed", "0"])
        .args(args)
        .output()
        .unwrap();
    assert!(plain.starts_with("fingerprint "));
    assert_ne!(fingerprint_line(&env), plain);
    assert_eq!(fingerprint_line(&both), plain);
}

#[test]
fn quiet_prints_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = radmat(dir.path(), &["--quiet", "gen-data", "--per-class", "1"]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
}

#[test]
fn file_pipeline_gen_train_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(radmat(d, &["gen-data", "--per-class", "30"])
        .status
        .success());
    let o = radmat(d, &["select-window"]);
    assert!(stdout(&o).contains("start_bin 6"), "{}", stdout(&o));
    let config = r#"{"train": {"epochs": 40}}"#;
    fs::write(d.join("cfg.json"), config).unwrap();
    assert!(radmat(d, &["--config", "cfg.json", "train"])
        .status
        .success());
    let header = fs::read_to_string(d.join("out/features.csv")).unwrap();
    assert!(header.starts_with("label,class_name,height_m,tilt_deg,session_id,b06,b07,"));
    assert!(radmat(
        d,
        &["gen-data", "--eval", "--per-class", "10", "--out", "ev"]
    )
    .status
    .success());
    let o = radmat(
        d,
        &[
            "--config",
            "cfg.json",
            "eval",
            "--profiles",
            "ev/profiles.csv",
            "--name",
            "held_out",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "held_out.report.json",
        "held_out.confusion.csv",
        "held_out.confusion.svg",
        "held_out.confidence.svg",
        "summary.csv",
    ] {
        assert!(d.join("out").join(f).exists(), "{f}");
    }
}

#[test]
fn report_refuses_mixed_fingerprints_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let small =
        r#"{"experiment": {"train_per_class": 20, "eval_per_class": 10}, "train": {"epochs": 10}}"#;
    fs::write(d.join("cfg.json"), small).unwrap();
    for (seed, out) in [("1", "a"), ("2", "b")] {
        let o = radmat(
            d,
            &[
                "--config",
                "cfg.json",
                "--seed",
                seed,
                "--out",
                out,
                "experiment",
                "baseline",
            ],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    fs::copy(
        d.join("b/baseline.report.json"),
        d.join("a/other.report.json"),
    )
    .unwrap();
    assert_eq!(
        radmat(d, &["report", "a", "--out", "merged"]).status.code(),
        Some(2)
    );
    assert!(radmat(d, &["report", "a", "--out", "merged", "--force"])
        .status
        .success());
    assert!(d.join("merged/summary.csv").exists());
    // matching fingerprints merge without --force
    assert!(radmat(d, &["report", "b", "--out", "rerendered"])
        .status
        .success());
    assert_eq!(
        fs::read(d.join("b/baseline.confusion.svg")).unwrap(),
        fs::read(d.join("rerendered/baseline.confusion.svg")).unwrap()
    );
}

#[test]
fn bench_reports_three_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let small =
        r#"{"experiment": {"train_per_class": 20, "eval_per_class": 10}, "train": {"epochs": 5}}"#;
    fs::write(d.join("cfg.json"), small).unwrap();
    assert!(
        radmat(d, &["--config", "cfg.json", "experiment", "baseline"])
            .status
            .success()
    );
    let o = radmat(
        d,
        &["--config", "cfg.json", "bench", "--iterations", "100000"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let median = text
        .split("median ")
        .nth(1)
        .and_then(|s| s.split(' ').next())
        .unwrap();
    let digits: String = median.chars().filter(|c| c.is_ascii_digit()).collect();
    assert_eq!(digits.trim_start_matches('0').len(), 3, "{median}");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("out/bench.json")).unwrap()).unwrap();
    assert_eq!(json["allocations_in_timed_loop"], 0);
    assert_eq!(
        radmat(d, &["bench", "--iterations", "10"]).status.code(),
        Some(2)
    );
}

#[test]
fn failed_check_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // one epoch on a tiny set cannot reach the baseline threshold
    let weak =
        r#"{"experiment": {"train_per_class": 4, "eval_per_class": 10}, "train": {"epochs": 1}}"#;
    fs::write(d.join("cfg.json"), weak).unwrap();
    let o = radmat(
        d,
        &["--config", "cfg.json", "experiment", "baseline", "--check"],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
    assert!(stdout(&o).contains("[FAIL] 1 baseline fidelity"));
}
