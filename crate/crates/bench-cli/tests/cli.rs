use std::path::Path;
use std::process::{Command, Output};

fn bench(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cspace-bench"))
        .args(args)
        .env("CSPACE_BENCH_OUT", out)
        .output()
        .expect("spawn cspace-bench")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn scene_dataset_train_pipeline_uses_env_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = bench(dir.path(), &["gen-scene", "--obstacles", "2", "--seed", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let scene = dir.path().join("scene-2-5.toml");
    assert!(scene.exists());

    let s = scene.to_str().unwrap();
    let o = bench(dir.path(), &["gen-dataset", "--scene", s, "--count", "600", "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let data = dir.path().join("dataset-2-600-3.bin");
    assert!(data.exists());

    let d = data.to_str().unwrap();
    for extra in [&["--kind", "knn"][..], &["--kind", "svm", "--single"][..]] {
        let mut args = vec!["train", "--dataset", d, "--scene", s];
        args.extend_from_slice(extra);
        let o = bench(dir.path(), &args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(dir.path().join("composite-knn.model").exists());
    assert!(dir.path().join("single-svm.model").exists());
    let text = std::fs::read_to_string(dir.path().join("composite-knn.model")).unwrap();
    assert!(text.starts_with("cspace-classifier"));
}

#[test]
fn train_rejects_mismatched_scene() {
    let dir = tempfile::tempdir().unwrap();
    assert!(bench(dir.path(), &["gen-dataset", "--obstacles", "1", "--count", "50"]).status.success());
    assert!(bench(dir.path(), &["gen-scene", "--obstacles", "3", "--seed", "9"]).status.success());
    let d = dir.path().join("dataset-1-50-1.bin");
    let s = dir.path().join("scene-3-9.toml");
    let o = bench(dir.path(), &["train", "--dataset", d.to_str().unwrap(), "--scene", s.to_str().unwrap(), "--kind", "knn"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn histogram_passes_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = bench(dir.path(), &["eval-histogram", "--samples", "3000"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("histogram.csv")).unwrap();
    assert!(csv.starts_with("# histogram v1"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 5);
}

#[test]
fn decomposition_fault_is_reported_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let ok = bench(dir.path(), &["verify-decomposition", "--samples", "2000", "--sequential"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    let bad = bench(dir.path(), &["verify-decomposition", "--samples", "2000", "--inject-fault"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("FAIL"));
}

#[test]
fn small_accuracy_run_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("acc.csv");
    let o = bench(
        dir.path(),
        &[
            "eval-accuracy", "--kind", "knn", "--train", "1500", "--test", "500", "--test-seeds", "11,12",
            "--min-gap=-1", "--min-speedup=0", "--out", out.to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 3);
}

#[test]
fn small_planning_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = bench(
        dir.path(),
        &[
            "eval-planning", "--obstacles", "2", "--pairs", "2", "--train", "800", "--kind", "knn", "--max-time", "0.3",
        ],
    );
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!stdout(&o).contains("FAIL 2 obstacles exact"));
    assert!(dir.path().join("planning-knn.csv").exists());
}

#[test]
fn bad_arguments_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bench(dir.path(), &["eval-histogram", "--samples", "0"]).status.code(), Some(2));
    assert_eq!(bench(dir.path(), &["train", "--dataset", "/nonexistent.bin"]).status.code(), Some(2));
    assert!(!bench(dir.path(), &["no-such-verb"]).status.success());
}
