//! The command-line interface and the run/diagnose/converge plumbing.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nsfvfe::harness::{converge, parse_snapshot, write_snapshot_string, RunConfig};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn nsfvfe(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsfvfe"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn cube_config_text() -> String {
    std::fs::read_to_string(configs().join("inflow_cube.cfg"))
        .unwrap()
        .replace("path = unit_cube.tetmesh", &format!("path = {}", configs().join("unit_cube.tetmesh").display()))
}

#[test]
fn check_valid_cube_exits_zero() {
    let out = tempfile::tempdir().unwrap();
    let o = nsfvfe(&["check"], &configs().join("inflow_cube.cfg"), out.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(out.path().join("check.csv")).unwrap();
    assert!(csv.starts_with("check,value,threshold,pass\n"));
    assert!(!csv.contains(",false"));
}

#[test]
fn check_rejects_beta_outside_theorem_window() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", &cube_config_text().replace("beta = 0.25", "beta = 0.6"));
    let o = nsfvfe(&["check"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("beta = 0.6 outside (0, 0.5)"));
}

#[test]
fn bad_mesh_index_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = std::fs::read_to_string(configs().join("unit_cube.tetmesh")).unwrap().replace("0 4 6 7", "0 4 6 8");
    write(dir.path(), "m.tetmesh", &mesh);
    let cfg = write(dir.path(), "c.cfg", &cube_config_text().replace(&configs().join("unit_cube.tetmesh").display().to_string(), "m.tetmesh"));
    let o = nsfvfe(&["check"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 18") && err.contains("out of range"), "{err}");
}

#[test]
fn unknown_config_key_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", &cube_config_text().replace("mu = 1", "viscosity = 1"));
    let o = nsfvfe(&["run"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 9: unknown key `gas.viscosity`"));
}

fn vtk_data(text: &str) -> &str {
    &text[text.find("ASCII").unwrap()..]
}

#[test]
fn stationary_run_writes_identical_snapshots() {
    let out = tempfile::tempdir().unwrap();
    let o = nsfvfe(&["run"], &configs().join("stationary.cfg"), out.path());
    assert_eq!(o.status.code(), Some(0));
    let files: Vec<String> = (0..=5).map(|k| std::fs::read_to_string(out.path().join(format!("state_{k:05}.vtk"))).unwrap()).collect();
    assert!(!out.path().join("state_00006.vtk").exists());
    for f in &files[1..] {
        assert_eq!(vtk_data(f), vtk_data(&files[0]));
    }
    let summary = std::fs::read_to_string(out.path().join("summary.txt")).unwrap();
    assert!(summary.ends_with("PASS\n"), "{summary}");
    assert!(!out.path().join("FAILED").exists());
}

#[test]
fn inflow_run_mass_residual_within_tolerance() {
    let out = tempfile::tempdir().unwrap();
    let o = nsfvfe(&["run"], &configs().join("inflow_cube.cfg"), out.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.path().join("diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let (im, ir) = (
        header.iter().position(|h| *h == "total_mass").unwrap(),
        header.iter().position(|h| *h == "mass_residual").unwrap(),
    );
    let mut rows = 0;
    for l in lines {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[ir].abs() <= 10.0 * 1e-10 * v[im], "{l}");
        rows += 1;
    }
    assert_eq!(rows, 5);
    // every configured snapshot plus the last step
    for k in [0, 2, 4] {
        assert!(out.path().join(format!("state_{k:05}.vtk")).exists());
    }
    assert!(!out.path().join("state_00001.vtk").exists());
}

#[test]
fn steps_round_up_when_t_is_not_a_multiple() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", &cube_config_text().replace("T_final = 0.5", "T_final = 0.3"));
    let o = nsfvfe(&["run"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0));
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.starts_with("steps 3 dt 1.25e-1"), "{summary}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("not an integer"));
}

#[test]
fn diagnose_reproduces_run_csv_bytes() {
    let run_dir = tempfile::tempdir().unwrap();
    let diag_dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("inflow_cube.cfg");
    assert_eq!(nsfvfe(&["run"], &cfg, run_dir.path()).status.code(), Some(0));
    let snap = run_dir.path().join("trajectory.snap");
    let o = nsfvfe(&["diagnose", "--trajectory", snap.to_str().unwrap()], &cfg, diag_dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        std::fs::read(run_dir.path().join("diagnostics.csv")).unwrap(),
        std::fs::read(diag_dir.path().join("diagnostics.csv")).unwrap()
    );
}

#[test]
fn diagnose_rejects_truncated_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("inflow_cube.cfg");
    assert_eq!(nsfvfe(&["run"], &cfg, dir.path()).status.code(), Some(0));
    let snap = dir.path().join("trajectory.snap");
    let text = std::fs::read_to_string(&snap).unwrap();
    std::fs::write(&snap, &text[..text.len() / 2]).unwrap();
    let o = nsfvfe(&["diagnose"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("snapshot"));
}

#[test]
fn diagnose_reports_negative_density() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("inflow_cube.cfg");
    assert_eq!(nsfvfe(&["run"], &cfg, dir.path()).status.code(), Some(0));
    let snap = dir.path().join("trajectory.snap");
    let mut traj = parse_snapshot(&std::fs::read_to_string(&snap).unwrap()).unwrap();
    traj.states[3].rho.values[7] = -0.25;
    std::fs::write(&snap, write_snapshot_string(&traj)).unwrap();
    let o = nsfvfe(&["diagnose"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(1));
    let rep = std::fs::read_to_string(dir.path().join("diagnose_report.csv")).unwrap();
    assert_eq!(rep, "check,step,cell,value\nNegativeDensity,3,7,-2.5e-1\n");
    // rows for the states before the bad one
    assert_eq!(std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap().lines().count(), 4);
}

#[test]
fn diagnose_rejects_mesh_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(nsfvfe(&["run"], &configs().join("stationary.cfg"), dir.path()).status.code(), Some(0));
    let o = nsfvfe(&["diagnose"], &configs().join("inflow_cube.cfg"), dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mesh has 48"));
}

#[test]
fn converge_with_one_level_has_empty_order_column() {
    let out = tempfile::tempdir().unwrap();
    let o = nsfvfe(&["converge", "--levels", "1"], &configs().join("mms.cfg"), out.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.path().join("converge.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1].split(',').nth(6), Some(""));
    assert!(std::fs::read_to_string(out.path().join("converge.txt")).unwrap().contains("observed order (two finest levels): -"));
}

#[test]
fn converge_on_exact_stationary_reference_has_zero_error() {
    let text = "
mesh.builtin = kuhn_cube
gas.gamma = 4
scheme.T_final = 1.7320508075688772
scheme.dt_policy = h
data.u_b = const3 c=0,0,0
reference.r = const3 c=1.3
reference.v = const3 c=0,0,0
mms.enabled = on
";
    let cfg = RunConfig::parse(text, Path::new(".")).unwrap();
    let rep = converge(&cfg, 3, None).unwrap();
    assert_eq!(rep.levels.len(), 3);
    for (i, l) in rep.levels.iter().enumerate() {
        assert_eq!(l.cells, 6 * 8usize.pow(i as u32));
        assert_eq!(l.dt, l.h);
        assert!(l.error.abs() < 1e-13, "{}", l.error);
    }
    assert!((rep.levels[1].h - rep.levels[0].h / 2.0).abs() < 1e-14);
}

#[test]
fn solver_failure_writes_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let text = cube_config_text()
        .replace("[solver]", "")
        .replace("[output]", "[solver]\nmax_iters = 1\nstrategy = picard\n[output]");
    let cfg = write(dir.path(), "c.cfg", &text);
    let o = nsfvfe(&["run"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(dir.path().join("FAILED").exists());
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.starts_with("FAILED: "), "{summary}");
    assert!(dir.path().join("diagnostics.csv").exists());
    assert!(dir.path().join("state_00000.vtk").exists());
}

#[test]
fn usage_errors_exit_three() {
    let o = Command::new(env!("CARGO_BIN_EXE_nsfvfe")).arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    let o = Command::new(env!("CARGO_BIN_EXE_nsfvfe"))
        .args(["run", "--config", "/nonexistent/x.cfg"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    let o = Command::new(env!("CARGO_BIN_EXE_nsfvfe"))
        .args(["run", "--config", "/nonexistent/x.cfg"])
        .env("NSFVFE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
}
