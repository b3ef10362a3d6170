//! Runs the cheap cargo examples, which `cargo test` builds next to the test binaries.

use std::path::PathBuf;
use std::process::Command;

fn example(name: &str) -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    profile_dir.join("examples").join(format!("{name}{}", std::env::consts::EXE_SUFFIX))
}

fn run(name: &str) -> String {
    let path = example(name);
    assert!(path.exists(), "{} not built", path.display());
    let out = Command::new(&path).output().unwrap();
    assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn quickstart() {
    assert!(run("smg_quickstart").contains("final loss"));
}

#[test]
fn schedules() {
    let out = run("schedules");
    assert!(out.contains("K = 45.0") && out.contains("D = 42.00"));
}

#[test]
fn bound_audit() {
    let out = run("bound_audit");
    assert_eq!(out.matches("[satisfied]").count(), 2);
    assert!(out.contains("refused:"));
}

#[test]
fn single_shuffle() {
    assert_eq!(run("ssmg_single_shuffle").matches("[satisfied]").count(), 3);
}

#[test]
fn identities() {
    let out = run("identity_suite");
    assert_eq!(out.matches("PASS").count(), 5);
}

#[test]
fn libsvm_ingest_inline_sample() {
    assert!(run("libsvm_ingest").contains("4 samples, dimension 4"));
}

#[test]
fn comparison() {
    assert!(run("compare_optimizers").contains("adam"));
}
