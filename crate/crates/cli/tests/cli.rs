use std::fs;
use std::path::Path;
use std::process::Command;

use matchange::artifacts::{pr_file, roc_file, FEATURES, METRICS, SCORES, VALID};
use matchange::commands::{EXIT_OK, EXIT_USAGE, TOP_TRIAL_DIR};
use matchange::output::{read_curve, SUMMARY_CSV, TRIALS_CSV};
use matchange::raster::RasterFile;
use matchange_core::eval::trapezoid;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_matchange"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p
}

const SMALL: &str = r#"{
  "schema_version": 1,
  "seed": 11,
  "trials": 2,
  "width": 64,
  "height": 64,
  "detectors": ["rx", "rxrob", "ccd", "fuse", "fusew"]
}"#;

fn simulate(cfg: &Path, out: &Path, extra: &[&str]) -> i32 {
    bin()
        .args(["simulate", "--config"])
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .args(extra)
        .status()
        .unwrap()
        .code()
        .unwrap()
}

#[test]
fn simulate_writes_tables_and_rerun_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(simulate(&cfg, &a, &["--workers", "1"]), EXIT_OK);
    assert_eq!(simulate(&cfg, &b, &["--workers", "3"]), EXIT_OK);

    let trials = fs::read_to_string(a.join(TRIALS_CSV)).unwrap();
    assert_eq!(trials.lines().count(), 3);
    assert!(trials.starts_with("trial_index,seed,snr_db,nu,"));
    let summary = fs::read_to_string(a.join(SUMMARY_CSV)).unwrap();
    assert_eq!(summary.lines().count(), 1 + 5);

    for f in [TRIALS_CSV, SUMMARY_CSV, "failures.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn top_trial_curves_match_reported_auc() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("run");
    assert_eq!(simulate(&cfg, &out, &["--detectors", "rx,ccd"]), EXIT_OK);
    let top = out.join(TOP_TRIAL_DIR);
    for f in [FEATURES, SCORES, VALID] {
        assert!(top.join(f).is_file(), "{f}");
    }
    let metrics = fs::read_to_string(top.join(METRICS)).unwrap();
    for line in metrics.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let auc: f64 = cols[1].parse().unwrap();
        let roc = read_curve(&top.join(roc_file(cols[0]))).unwrap();
        assert_eq!(roc.first(), Some(&(0.0, 0.0)));
        assert_eq!(roc.last(), Some(&(1.0, 1.0)));
        assert!((trapezoid(&roc) - auc).abs() < 1e-6, "{}: {} vs {auc}", cols[0], trapezoid(&roc));
        let pr = read_curve(&top.join(pr_file(cols[0]))).unwrap();
        assert!(pr.iter().all(|&(r, p)| (0.0..=1.0).contains(&r) && (0.0..=1.0).contains(&p)));
    }
    let scores = RasterFile::load(&top.join(SCORES)).unwrap();
    assert_eq!(scores.names, vec!["rx", "ccd"]);
    assert_eq!((scores.width, scores.height), (64, 64));

    let status = bin().arg("render").arg(&top).status().unwrap();
    assert_eq!(status.code(), Some(EXIT_OK));
    let render = top.join("render");
    for f in ["score_ccd.png", "feature_coherence_mag.png", "truth_contour.png", "scales.txt", "roc_ccd.csv"] {
        assert!(render.join(f).is_file(), "{f}");
    }
    assert_eq!(
        fs::read(render.join("roc_ccd.csv")).unwrap(),
        fs::read(top.join("roc_ccd.csv")).unwrap()
    );
}

#[test]
fn invalid_config_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "{\n  \"schema_version\": 1,\n  \"seed\": 1,\n  \"trials\": 1,\n  \"bogus\": true\n}\n");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("config.json:5:"), "{err}");

    let cfg = write_config(dir.path(), r#"{"schema_version": 1, "seed": 1, "trials": 1, "ranges": {"nu": [1.0, 0.5]}}"#);
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ranges.nu"));
}

#[test]
fn render_without_artifacts_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin().arg("render").arg(dir.path()).status().unwrap();
    assert_eq!(status.code(), Some(EXIT_USAGE));
}

#[test]
fn sweep_writes_one_directory_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema_version": 1, "seed": 5, "trials": 2, "width": 64, "height": 64,
            "detectors": ["ccd"], "sweep": {"factor": "looks", "levels": [2, 8]}}"#,
    );
    let status = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("s"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_OK));
    let sweep = fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3);
    assert!(sweep.lines().nth(1).unwrap().starts_with("looks,2,ccd,2,0,"));
    let trials = fs::read_to_string(dir.path().join("s/looks_8/trials.csv")).unwrap();
    assert!(trials.lines().skip(1).all(|l| l.split(',').nth(9) == Some("8")));
}
