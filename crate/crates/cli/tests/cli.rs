use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use clap::CommandFactory;
use traitwave_cli::Cli;

fn traitwave(data_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_traitwave"))
        .arg("--data-dir")
        .arg(data_dir)
        .args(args)
        .env_remove("TRAITWAVE_DATA_DIR")
        .output()
        .expect("spawn traitwave")
}

fn ok(data_dir: &Path, args: &[&str]) -> Output {
    let out = traitwave(data_dir, args);
    assert!(
        out.status.success(),
        "traitwave {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn every_argument_is_documented() {
    let cli = Cli::command();
    cli.clone().debug_assert();
    let mut missing = Vec::new();
    let mut check = |owner: &str, cmd: &clap::Command| {
        for arg in cmd.get_arguments() {
            let id = arg.get_id().as_str();
            if id != "help" && id != "version" && arg.get_help().is_none() {
                missing.push(format!("{owner} {id}"));
            }
        }
    };
    check("traitwave", &cli);
    for sub in cli.get_subcommands() {
        assert!(
            sub.get_about().is_some(),
            "{} has no description",
            sub.get_name()
        );
        check(sub.get_name(), sub);
    }
    assert!(missing.is_empty(), "undocumented arguments: {missing:?}");
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = traitwave(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let out = traitwave(dir.path(), &["simulate", "--subjects", "many"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_labels_segments_and_captures() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate"]);
    let labels = fs::read_to_string(dir.path().join("labels.jsonl")).unwrap();
    assert_eq!(labels.lines().count(), 80);
    let cohort = fs::read_to_string(dir.path().join("cohort.jsonl")).unwrap();
    assert_eq!(cohort.lines().count(), 80);
    let captures = fs::read_dir(dir.path().join("captures")).unwrap().count();
    assert_eq!(captures, 320);
    // 120 rows of 30 bytes each.
    let len = fs::metadata(dir.path().join("captures/S001_sad.tgr"))
        .unwrap()
        .len();
    assert_eq!(len, 120 * 30);
}

#[test]
fn decode_reports_the_offset_of_a_truncated_capture() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["simulate", "--subjects", "2", "--seconds", "5"],
    );
    let full = dir.path().join("captures/S001_happy.tgr");

    let out = ok(dir.path(), &["decode", full.to_str().unwrap()]);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.starts_with("timestamp_ms,delta,"));

    let bytes = fs::read(&full).unwrap();
    let cut = dir.path().join("cut.tgr");
    fs::write(&cut, &bytes[..100]).unwrap();
    let out = traitwave(dir.path(), &["decode", cut.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("byte offset 90"), "{stderr}");
}

fn run_pipeline(dir: &Path) -> String {
    ok(dir, &["simulate", "--subjects", "40", "--seconds", "30"]);
    ok(dir, &["train", "--max-evaluations", "6", "--folds", "3"]);
    ok(dir, &["select"]);
    let out = ok(dir, &["evaluate"]);
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn pipeline_is_reproducible_bit_for_bit() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let eval_a = run_pipeline(a.path());
    let eval_b = run_pipeline(b.path());
    assert_eq!(eval_a, eval_b);
    assert_eq!(eval_a.lines().count(), 15);

    for name in [
        "split.json",
        "accuracy_grid.csv",
        "selector.json",
        "segments.csv",
    ] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
    let mut bundles: Vec<_> = fs::read_dir(a.path().join("models"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    bundles.sort();
    assert_eq!(bundles.len(), 56);
    for name in &bundles {
        let x = fs::read(a.path().join("models").join(name)).unwrap();
        let y = fs::read(b.path().join("models").join(name)).unwrap();
        assert!(x == y, "{name:?} differs between runs");
    }

    let selector: serde_json::Value =
        serde_json::from_slice(&fs::read(a.path().join("selector.json")).unwrap()).unwrap();
    assert_eq!(selector["entries"].as_array().unwrap().len(), 14);

    // The wire captures and the dataset rows give the same predictions.
    let from_dataset = ok(a.path(), &["predict", "--subject", "S003"]).stdout;
    let captures = a.path().join("captures");
    let from_wire = ok(
        a.path(),
        &[
            "predict",
            "--subject",
            "S003",
            "--captures",
            captures.to_str().unwrap(),
        ],
    )
    .stdout;
    assert_eq!(from_dataset, from_wire);
    let predictions: serde_json::Value = serde_json::from_slice(&from_wire).unwrap();
    assert_eq!(predictions.as_array().unwrap().len(), 14);
}

#[test]
fn a_different_seed_changes_the_cohort() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(a.path(), &["simulate", "--subjects", "4", "--seconds", "3"]);
    ok(
        b.path(),
        &[
            "--seed",
            "8",
            "simulate",
            "--subjects",
            "4",
            "--seconds",
            "3",
        ],
    );
    let x = fs::read(a.path().join("segments.csv")).unwrap();
    let y = fs::read(b.path().join("segments.csv")).unwrap();
    assert_ne!(x, y);
}
