use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn nets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../examples/nets")
}

fn tensorc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tensorc")).args(args).output().unwrap()
}

fn lenet() -> String {
    nets().join("lenet.net").to_string_lossy().into_owned()
}

#[test]
fn check_accepts_examples() {
    for n in ["lenet", "alexnet", "inception"] {
        let f = nets().join(format!("{n}.net"));
        let o = tensorc(&["check", f.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{n}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn missing_file_is_io_error() {
    let o = tensorc(&["check", "/nonexistent/none.net"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_spec_is_diagnostic() {
    let f = nets().join("invalid/unbound_name.net");
    let o = tensorc(&["check", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("unbound_name.net:6:13:"), "{err}");
}

#[test]
fn analyze_reports_input_row() {
    let o = tensorc(&["analyze", &lenet()]);
    assert_eq!(o.status.code(), Some(0));
    let out = String::from_utf8_lossy(&o.stdout);
    let row = out.lines().find(|l| l.starts_with("val X1 = Cuda(X)")).expect("input row");
    assert!(row.ends_with("1.568000    1.568000     1.568000"), "{row}");
    assert!(out.contains("59.167999"));
}

#[test]
fn analyze_csv_has_header() {
    let o = tensorc(&["analyze", &lenet(), "--format", "csv", "--mode", "dealloc"]);
    assert_eq!(o.status.code(), Some(0));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.lines().count() > 12);
}

#[test]
fn unknown_pass_is_rejected() {
    let o = tensorc(&["compile", &lenet(), "--dump-pass", "nope"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn compile_writes_program() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lenet.gen.rs");
    let o = tensorc(&["compile", &lenet(), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.contains("impl Network<F> for Lenet"));
}

#[test]
fn train_then_resume_then_test() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("snap");
    let csv = dir.path().join("loss.csv");
    let base = |iters: &str| {
        vec![
            "train".to_string(),
            lenet(),
            "--data".into(),
            "synthetic:3".into(),
            "--snapshot".into(),
            snap.to_string_lossy().into_owned(),
            "--loss-csv".into(),
            csv.to_string_lossy().into_owned(),
            "--iters".into(),
            iters.into(),
        ]
    };
    let run = |args: Vec<String>| Command::new(env!("CARGO_BIN_EXE_tensorc")).args(args).output().unwrap();
    let o = run(base("2"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(snap.join("iteration").exists());
    let o = run(base("3"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let it = std::fs::read_to_string(snap.join("iteration")).unwrap();
    assert_eq!(it.trim(), "3");
    let o = tensorc(&["test", &lenet(), "--data", "synthetic:3", "--snapshot", snap.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn test_without_snapshot_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = tensorc(&["test", &lenet(), "--data", "synthetic:1", "--snapshot", dir.path().join("none").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
