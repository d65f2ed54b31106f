use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_bootband");

fn gbm_csv(dir: &Path, n: usize) -> PathBuf {
    let prices = bootband::synthetic::gbm_series(n, 11);
    let path = dir.join("prices.csv");
    let mut out = String::from("Date,Open,Close\n");
    for (d, v) in prices.timestamps().iter().zip(prices.values()) {
        out.push_str(&format!("{d},{v},{v}\n"));
    }
    fs::write(&path, out).unwrap();
    path
}

fn bootband(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    files
}

const SMALL: &[&str] = &[
    "--train-len",
    "120",
    "--test-len",
    "30",
    "--reps",
    "6",
    "--select-reps",
    "5",
    "--lmax",
    "6",
    "--epochs",
    "2",
    "--hidden",
    "3",
    "--seed",
    "5",
];

#[test]
fn help_lists_defaults() {
    let out = bootband(&["band", "--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for needle in [
        "[default: 1000]",
        "[default: 0.05]",
        "[default: lbb]",
        "[default: 19]",
        "[default: 200]",
    ] {
        assert!(text.contains(needle), "missing {needle}");
    }
}

#[test]
fn missing_input_is_a_usage_error() {
    let out = bootband(&["band", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = bootband(&["select-block", "--input", "/nonexistent.csv"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_column_and_unknown_config_key() {
    let dir = tempfile::tempdir().unwrap();
    let csv = gbm_csv(dir.path(), 60);
    let out = bootband(&[
        "resample",
        "--input",
        csv.to_str().unwrap(),
        "--column",
        "Volume",
        "--block-len",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "bogus = 1\n").unwrap();
    let out = bootband(&[
        "resample",
        "--input",
        csv.to_str().unwrap(),
        "--block-len",
        "2",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let csv = gbm_csv(dir.path(), 60);
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "block-len = 3\ncount = 4\nmethod = \"nbb\"\n").unwrap();
    let out_dir = dir.path().join("o");
    let out = bootband(&[
        "resample",
        "--input",
        csv.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--count",
        "2",
        "--seed",
        "9",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let m: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["settings"]["count"], 2);
    assert_eq!(m["settings"]["block-len"], 3);
    assert_eq!(m["settings"]["method"], "nbb");
    let header = fs::read_to_string(out_dir.join("replicates.csv")).unwrap();
    assert!(header.starts_with("date,original,rep_0,rep_1\n"));
}

#[test]
fn band_is_identical_across_job_counts_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let csv = gbm_csv(dir.path(), 150);
    let mut trees = Vec::new();
    for jobs in ["1", "3"] {
        let out_dir = dir.path().join(format!("jobs{jobs}"));
        let mut args = vec![
            "band",
            "--input",
            csv.to_str().unwrap(),
            "--jobs",
            jobs,
            "--out",
            out_dir.to_str().unwrap(),
            "--dump-replicates",
        ];
        args.extend_from_slice(SMALL);
        let out = bootband(&args);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        trees.push(tree(&out_dir));
    }
    assert_eq!(trees[0], trees[1]);
    for name in [
        "band.csv",
        "report.json",
        "selector_curve.csv",
        "replicates.csv",
        "manifest.json",
    ] {
        assert!(trees[0].contains_key(Path::new(name)), "missing {name}");
    }

    let replayed = dir.path().join("replay");
    let manifest = dir.path().join("jobs1/manifest.json");
    let out = bootband(&[
        "replay",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        replayed.to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(tree(&replayed), trees[0]);
}

#[test]
fn replay_rejects_changed_input() {
    let dir = tempfile::tempdir().unwrap();
    let csv = gbm_csv(dir.path(), 60);
    let out_dir = dir.path().join("o");
    let out = bootband(&[
        "select-block",
        "--input",
        csv.to_str().unwrap(),
        "--reps",
        "3",
        "--seed",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    fs::write(&csv, "Date,Close\n2020-01-01,1\n").unwrap();
    let out = bootband(&[
        "replay",
        "--manifest",
        out_dir.join("manifest.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(6));
}

#[test]
fn compare_ranks_three_methods() {
    let dir = tempfile::tempdir().unwrap();
    let csv = gbm_csv(dir.path(), 150);
    let out_dir = dir.path().join("o");
    let mut args = vec![
        "compare",
        "--input",
        csv.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ];
    args.extend_from_slice(SMALL);
    let out = bootband(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let c: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("compare.json")).unwrap()).unwrap();
    assert_eq!(c["ranking"].as_array().unwrap().len(), 3);
    for m in ["lbb", "mbb", "nbb"] {
        assert!(out_dir.join(m).join("band.csv").exists());
    }
}

#[test]
fn train_writes_model_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let csv = gbm_csv(dir.path(), 80);
    let out_dir = dir.path().join("o");
    let out = bootband(&[
        "train",
        "--input",
        csv.to_str().unwrap(),
        "--train-len",
        "60",
        "--epochs",
        "2",
        "--hidden",
        "4",
        "--seed",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let log = fs::read_to_string(out_dir.join("train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);
    let preds = fs::read_to_string(out_dir.join("predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), 21);
    let model = fs::read_to_string(out_dir.join("model.json")).unwrap();
    assert!(bootband::LstmModel::from_json(&model).is_ok());
}
