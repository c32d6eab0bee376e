//! Drives the `hec-adapt` binary end to end with tiny epoch counts.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
seed = 3

[detectors]
epochs = [3, 3, 3]
"#;

fn hec(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hec-adapt"))
        .args(["--config", dir.join("run.toml").to_str().unwrap()])
        .args(["--out", dir.join("out").to_str().unwrap()])
        .args(args)
        .env("HEC_ADAPT_THREADS", "1")
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn hec-adapt")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = hec(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn scratch() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
    dir
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect()
}

fn column(path: &Path, name: &str) -> usize {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().position(|h| h == name).unwrap()
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let dir = scratch();
    let out = dir.path().join("out");
    ok(dir.path(), &["gen-data"]);
    let series = fs::read_to_string(out.join("data/series.csv")).unwrap();
    let labels = fs::read_to_string(out.join("data/labels.csv")).unwrap();
    assert_eq!(series.lines().count(), labels.lines().count() * 96);

    ok(dir.path(), &["train-detectors"]);
    for slug in ["ae-iot", "ae-edge", "ae-cloud"] {
        for f in ["spec.toml", "params.bin", "error_model.toml"] {
            assert!(
                out.join("detectors").join(slug).join(f).exists(),
                "{slug}/{f}"
            );
        }
    }
    // Header, layer records and 271,017 f64 parameters.
    let iot = fs::metadata(out.join("detectors/ae-iot/params.bin"))
        .unwrap()
        .len();
    assert_eq!(iot, 8 + 4 + 9 * 2 + 8 * 271_017);
    assert_eq!(csv_rows(&out.join("detectors/training_log.csv")).len(), 9);
    assert!(out.join("detectors/splits.toml").exists());
    assert!(out.join("detectors/standardization.toml").exists());

    ok(dir.path(), &["train-policy"]);
    let episodes = out.join("policy/episodes.csv");
    let rows = csv_rows(&episodes);
    assert_eq!(rows.len(), 6000);
    let eps = column(&episodes, "epsilon");
    assert!(rows[2999][eps].parse::<f64>().unwrap() > 0.0);
    assert_eq!(rows[3000][eps].parse::<f64>().unwrap(), 0.0);

    let table = ok(dir.path(), &["evaluate"]);
    assert!(table.contains("Adaptive"));
    for f in [
        "comparison.csv",
        "comparison_test.csv",
        "comparison_disjoint.csv",
        "adaptive.json",
        "ae-iot.json",
    ] {
        assert!(out.join("reports").join(f).exists(), "{f}");
    }
    let comparison = csv_rows(&out.join("reports/comparison.csv"));
    assert_eq!(comparison.len(), 6);
    let disjoint = csv_rows(&out.join("reports/comparison_disjoint.csv"));
    assert_eq!(&disjoint[5][0], "Adaptive (cross-fit)");

    ok(
        dir.path(),
        &[
            "--alpha",
            "0.001",
            "evaluate",
            "--schemes",
            "ae-cloud,successive-4",
        ],
    );
    assert_eq!(csv_rows(&out.join("reports/comparison.csv")).len(), 2);

    ok(dir.path(), &["sweep-alpha", "--alphas", "0.0001,0.0045"]);
    let sweep = csv_rows(&out.join("sweep/alpha_sweep.csv"));
    assert_eq!(sweep.len(), 2);

    for cmd in [
        "gen-data",
        "train-detectors",
        "train-policy",
        "evaluate",
        "sweep-alpha",
    ] {
        let echoed = fs::read_to_string(out.join(format!("config.{cmd}.toml"))).unwrap();
        assert!(echoed.contains("seed = 3"), "{cmd}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (scratch(), scratch());
    for dir in [&a, &b] {
        for cmd in ["gen-data", "train-detectors", "train-policy"] {
            ok(dir.path(), &[cmd]);
        }
    }
    for f in [
        "data/series.csv",
        "detectors/ae-edge/params.bin",
        "policy/episodes.csv",
    ] {
        let x = fs::read(a.path().join("out").join(f)).unwrap();
        let y = fs::read(b.path().join("out").join(f)).unwrap();
        assert!(x == y, "{f} differs between identical runs");
    }
}

#[test]
fn missing_artifacts_and_bad_flags_fail_cleanly() {
    let dir = scratch();
    for args in [
        &["train-detectors"][..],
        &["train-policy"],
        &["evaluate"],
        &["--alpha", "-1", "gen-data"],
        &["evaluate", "--schemes", "bogus"],
        &["sweep-alpha", "--alphas", "0"],
    ] {
        let out = hec(dir.path(), args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(
            String::from_utf8_lossy(&out.stderr).contains("error"),
            "{args:?}"
        );
    }
}
