use std::path::Path;
use std::process::{Command, Output};

use radial_ks::gronwall::LemmaVerdict;
use radial_ks::harness::{ExperimentConfig, ExperimentKind};

fn radial_ks(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radial-ks"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn verify_lemma_prints_one_verdict_per_instance() {
    let tmp = tempfile::tempdir().unwrap();
    let out = radial_ks(
        &[
            "verify-lemma",
            "--instances",
            "5",
            "--seed",
            "7",
            "--output",
            "lemma",
        ],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    let verdicts: Vec<LemmaVerdict> = text
        .lines()
        .filter(|l| l.starts_with('{'))
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(
        verdicts.iter().map(|v| v.seed).collect::<Vec<_>>(),
        vec![7, 8, 9, 10, 11]
    );
    assert!(verdicts.iter().all(|v| v.pass));
    assert!(text.contains("criterion 10 PASS"));
    assert!(tmp.path().join("lemma/verdicts.jsonl").exists());
    assert!(tmp.path().join("lemma/report.json").exists());
}

#[test]
fn run_writes_trajectory_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = radial_ks(
        &[
            "run", "--solver", "limit", "--n", "3", "--m", "41", "--dt", "1e-3", "--t-end", "0.05",
            "--output", "r",
        ],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("r/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["solver"], "limit");
    assert_eq!(summary["params"]["n"], 3);
    assert_eq!(summary["params"]["eps"], 0.0);
    assert!((summary["final_time"].as_f64().unwrap() - 0.05).abs() < 1e-12);
    let traj = radial_ks::Trajectory::read_dir(&tmp.path().join("r/trajectory")).unwrap();
    assert_eq!(traj.grid.len(), 41);
}

#[test]
fn config_file_and_flag_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(ExperimentKind::Roundtrip);
    cfg.dims = vec![2];
    cfg.levels = 2;
    cfg.output = "from-file".into();
    std::fs::write(tmp.path().join("rt.toml"), cfg.to_toml_string().unwrap()).unwrap();
    let out = radial_ks(
        &["roundtrip", "--config", "rt.toml", "--output", "from-flag"],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("criterion  9 PASS"));
    assert!(tmp.path().join("from-flag/report.json").exists());
    assert!(!tmp.path().join("from-file").exists());

    // a config for another experiment is refused
    let wrong = radial_ks(&["sweep", "--config", "rt.toml"], tmp.path());
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn invalid_input_exits_with_error() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        vec!["sweep", "--eps", "1e-3,1e-2"],
        vec!["sweep", "--dims", "1"],
        vec!["run", "--solver", "sideways"],
        vec!["run", "--preset", "nope"],
    ] {
        let out = radial_ks(&args, tmp.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    }
    let missing = radial_ks(&["report", "nowhere"], tmp.path());
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn failing_criteria_give_nonzero_exit_and_report_rerenders() {
    let tmp = tempfile::tempdir().unwrap();
    // a single eps leaves every fitted order undefined
    let out = radial_ks(
        &[
            "sweep", "--eps", "1e-2", "--dims", "2", "--m", "81", "--dt", "1e-3", "--t-end", "0.2",
            "--output", "sw",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("criterion  4 FAIL") && text.contains("order undefined"));
    assert!(text.contains("criterion  6 PASS"));

    let csv = tmp.path().join("sw/n2/sweep.csv");
    let before = std::fs::read(&csv).unwrap();
    std::fs::remove_file(&csv).unwrap();
    let again = radial_ks(&["report", "sw"], tmp.path());
    assert_eq!(again.status.code(), Some(1));
    assert_eq!(stdout(&again), text);
    assert_eq!(std::fs::read(&csv).unwrap(), before);
}
