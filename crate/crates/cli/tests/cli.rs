use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], config: &str, dir: &Path) -> Output {
    let path = dir.join("run.toml");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_emenclose"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn config_errors_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["sweep"], "sweep.tau_grid = [4, 2, 6]\n", dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("tau_grid strictly increasing"));

    let o = run(&["forward"], "medium.omgea = 1.0\n", dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown key 'medium.omgea'"));

    let o = run(&["forward"], "obstacle.lo = [-1.0, -0.25, -0.25]\n", dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("margin"));

    let o = run(&["forward"], "fem.trace = \"magic\"\n", dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cell-curl"));

    let missing = Command::new(env!("CARGO_BIN_EXE_emenclose"))
        .args(["forward", "--config", "/nonexistent/run.toml"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));

    let bad_command = Command::new(env!("CARGO_BIN_EXE_emenclose")).args(["reconstruct"]).output().unwrap();
    assert_eq!(bad_command.status.code(), Some(1));
}

#[test]
fn solver_failure_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    // Pure COCG with a two-step cap cannot converge.
    let o = run(&["forward"], "mesh.n = 8\nfem.solver = \"cocg\"\nfem.max_iter = 2\nforward.source = \"plane-wave\"\n", dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("did not converge"));
}

#[test]
fn forward_with_zero_data_writes_a_zero_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["forward", "--threads", "1"], "mesh.n = 8\nforward.source = \"zero\"\n", dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let vtk = fs::read_to_string(dir.path().join("out/fields.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version 3.0\n"));
    let summary = fs::read_to_string(dir.path().join("out/summary.json")).unwrap();
    assert!(summary.contains("\"max_e\": 0.0000000000000000e0"));
}

#[test]
fn sweep_without_obstacle_reports_none_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "mesh.n = 8\nobstacle.shape = \"empty\"\n";
    let o = run(&["sweep"], cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let first = fs::read(dir.path().join("out/summary.json")).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert!(text.contains("\"no_obstacle\": true"));
    for key in ["\"config\"", "\"metrics\"", "\"timings\"", "\"versions\""] {
        assert!(text.contains(key), "{key}");
    }
    let o = run(&["sweep", "--threads", "2"], cfg, dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read(dir.path().join("out/summary.json")).unwrap(), first);
}

#[test]
fn failed_validation_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    // On an 8³ mesh the sweep cannot resolve the box to within 0.1.
    let o = run(&["validate"], "mesh.n = 8\n", dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("criterion")).count(), 10);
    assert!(stdout.contains("criterion  1 PASS"));
    assert!(dir.path().join("out/validation.csv").exists());
}
