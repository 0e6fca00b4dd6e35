//! Acceptance criteria. Each test writes one `criterion N: PASS|FAIL ...`
//! line straight to stderr (bypassing output capture) and then asserts.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nsfvfe::constitutive::RenormFunction;
use nsfvfe::diagnostics::{energy_inequality, mass_balance, renormalized_residual, BalanceReport, NORM_NAMES};
use nsfvfe::harness::{build_case, base_mesh, converge, identity_suite, ConvergenceReport, RunConfig, IDENTITY_TOL};
use nsfvfe::mesh::{classify_boundary, default_zero_tol, perturbed_box};
use nsfvfe::scheme::{run, Problem, Trajectory};
use nsfvfe::spaces::{proj_v, QField};
use nsfvfe::{Mat3, Vec3};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn load(name: &str) -> RunConfig {
    RunConfig::load(&configs().join(name)).unwrap()
}

fn report(n: usize, pass: bool, detail: &str) {
    let mark = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n}: {mark} {detail}");
}

/// The data sets every run-level criterion is checked on.
fn matrix() -> Vec<(&'static str, RunConfig)> {
    let mixed = load("inflow_cube.cfg");
    let closed = load("closed_box.cfg");
    let with_ub = |ub: &str| {
        let text = std::fs::read_to_string(configs().join("inflow_cube.cfg"))
            .unwrap()
            .replace("u_b = const3 c=1,0,0", &format!("u_b = {ub}"))
            .replace("inflow = axis=0 value=0 lo=0,0 hi=1,1\n", "")
            .replace("outflow = axis=0 value=1 lo=0,0 hi=1,1\n", "")
            .replace("u0 = const3 c=1,0,0", "u0 = const3 c=0,0,0");
        RunConfig::parse(&text, &configs()).unwrap()
    };
    vec![
        ("inflow", with_ub("affine a=-1,0,0,0,-1,0,0,0,-1 b=0.5,0.5,0.5")),
        ("outflow", with_ub("affine a=1,0,0,0,1,0,0,0,1 b=-0.5,-0.5,-0.5")),
        ("mixed", mixed),
        ("closed", closed),
    ]
}

struct MatrixRun {
    name: &'static str,
    prob: Problem,
    traj: Trajectory,
}

fn matrix_runs() -> &'static Vec<MatrixRun> {
    static RUNS: OnceLock<Vec<MatrixRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        matrix()
            .into_iter()
            .map(|(name, cfg)| {
                let case = build_case(&cfg, base_mesh(&cfg).unwrap()).unwrap();
                let traj = run(&case.prob, case.initial.clone()).unwrap();
                MatrixRun { name, prob: case.prob, traj }
            })
            .collect()
    })
}

/// `10 · tol_rel · scale` with `scale = Σ |terms|` at step `m`.
fn strict_violations(prob: &Problem, rep: &BalanceReport, two_sided: bool) -> Vec<(usize, f64, f64)> {
    let tol = prob.params.tol_rel;
    (0..rep.residual.len())
        .filter_map(|m| {
            let scale: f64 = rep.terms.iter().map(|t| t.at(m).abs()).sum();
            let r = rep.residual[m];
            let bad = if two_sided { r.abs() > 10.0 * tol * scale } else { r > 10.0 * tol * scale };
            bad.then_some((m, r, 10.0 * tol * scale))
        })
        .collect()
}

#[test]
fn criterion_1_identity_suite() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: Vec<(&str, f64)> = Vec::new();
    let mut max_cells = 0;
    for i in 0..50u64 {
        let n = [rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(1..=3)];
        let mesh = perturbed_box(n, 0.25, rng.gen());
        max_cells = max_cells.max(mesh.num_cells());
        let a = Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let b = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let u_b = proj_v(&mesh, |x| a * x + b);
        let partition = classify_boundary(&mesh, &u_b, default_zero_tol(&u_b)).unwrap();
        for r in identity_suite(&mesh, &u_b, &partition, 1000 + i) {
            match worst.iter_mut().find(|(n, _)| *n == r.name) {
                Some(w) => w.1 = w.1.max(r.relative),
                None => worst.push((r.name, r.relative)),
            }
        }
    }
    let elapsed = t0.elapsed();
    let pass = max_cells <= 200 && worst.iter().all(|(_, r)| *r <= IDENTITY_TOL) && elapsed < Duration::from_secs(30);
    let detail: Vec<String> = worst.iter().map(|(n, r)| format!("{n} {r:.1e}")).collect();
    report(1, pass, &format!("50 instances (<= {max_cells} tets), worst relative residuals {}, {elapsed:.1?}", detail.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_2_mass_conservation() {
    let t0 = Instant::now();
    let mut failures = Vec::new();
    for r in matrix_runs() {
        let rep = mass_balance(&r.prob, &r.traj).unwrap();
        let tol = r.prob.params.tol_rel;
        let mass = &rep.term("mass").unwrap().per_step;
        for m in 0..rep.residual.len() {
            if rep.residual[m].abs() > 10.0 * tol * mass[m] {
                failures.push(format!("{} step {m}: {:e}", r.name, rep.residual[m]));
            }
        }
    }
    let closed = matrix_runs().iter().find(|r| r.name == "closed").unwrap();
    let steps = closed.traj.num_steps();
    let balance = mass_balance(&closed.prob, &closed.traj).unwrap();
    let mass = &balance.term("mass").unwrap().per_step;
    let drift = (mass[steps] - mass[0]).abs() / mass[0];
    let elapsed = t0.elapsed();
    let pass = failures.is_empty()
        && steps == 64
        && closed.prob.mesh.num_cells() == 48
        && drift <= 1e-10
        && elapsed < Duration::from_secs(60);
    report(
        2,
        pass,
        &format!("{} residual violations; closed 48-tet box drift {drift:.1e} over {steps} steps, {elapsed:.1?}", failures.len()),
    );
    assert!(pass, "{failures:?}");
}

#[test]
fn criterion_3_positivity() {
    let mut worst = f64::INFINITY;
    let mut names = Vec::new();
    for r in matrix_runs() {
        let m = r.traj.states.iter().map(|s| s.min_rho()).fold(f64::INFINITY, f64::min);
        worst = worst.min(m);
        names.push(format!("{} {m:.3e}", r.name));
    }
    let pass = worst > 0.0;
    report(3, pass, &format!("min density per run: {}", names.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_4_energy_inequality() {
    let t0 = Instant::now();
    let mut bad = Vec::new();
    for r in matrix_runs() {
        let rep = energy_inequality(&r.prob, &r.traj).unwrap();
        for v in strict_violations(&r.prob, &rep, false) {
            bad.push(format!("{} {v:?}", r.name));
        }
    }
    let elapsed = t0.elapsed();
    let stationary = load("stationary.cfg");
    let case = build_case(&stationary, base_mesh(&stationary).unwrap()).unwrap();
    let traj = run(&case.prob, case.initial.clone()).unwrap();
    let rep = energy_inequality(&case.prob, &traj).unwrap();
    let eq = strict_violations(&case.prob, &rep, true);
    let mixed = &matrix_runs().iter().find(|r| r.name == "mixed").unwrap().prob;
    let setup_ok = mixed.mesh.num_cells() == 48
        && mixed.pressure.gas.gamma() == Some(4.0)
        && mixed.params.beta == 0.25
        && mixed.params.omega == 0.5;
    let pass = bad.is_empty() && eq.is_empty() && setup_ok && elapsed < Duration::from_secs(120);
    report(
        4,
        pass,
        &format!(
            "{} inequality violations over the run matrix, {} stationary equality violations, {elapsed:.1?}",
            bad.len(),
            eq.len()
        ),
    );
    assert!(pass, "{bad:?} {eq:?}");
}

#[test]
fn criterion_5_renormalized_continuity() {
    let mut bad = Vec::new();
    let mut worst_linear: f64 = 0.0;
    for r in matrix_runs() {
        let one = QField::constant(&r.prob.mesh, 1.0);
        let tol_abs = r.prob.params.tol_abs;
        for b in [RenormFunction::l_zeta(1.0).unwrap(), RenormFunction::Linear { c: 1.0 }] {
            let rep = renormalized_residual(&r.prob, &r.traj, &b, &one).unwrap();
            for m in 0..rep.residual.len() {
                // the report's tolerance is 10 (tol_abs + tol_rel · scale); drop the absolute part
                let strict = rep.tolerance[m] - 10.0 * tol_abs;
                if rep.residual[m].abs() > strict {
                    bad.push(format!("{} {b:?} step {m}: {:e} > {strict:e}", r.name, rep.residual[m]));
                }
            }
        }
        let lin = renormalized_residual(&r.prob, &r.traj, &RenormFunction::Linear { c: 1.0 }, &one).unwrap();
        let mass = mass_balance(&r.prob, &r.traj).unwrap();
        for m in 1..r.traj.states.len() {
            worst_linear = worst_linear.max((lin.residual[m] - (mass.residual[m] - mass.residual[m - 1])).abs());
        }
    }
    let pass = bad.is_empty() && worst_linear <= 1e-13;
    report(5, pass, &format!("{} violations; linear B vs mass residual max gap {worst_linear:.1e}", bad.len()));
    assert!(pass, "{bad:?}");
}

struct Study {
    report: ConvergenceReport,
    elapsed: Duration,
}

/// Six to 384 tets, `Δt = h`.
fn desk_study() -> &'static Study {
    static S: OnceLock<Study> = OnceLock::new();
    S.get_or_init(|| {
        let t0 = Instant::now();
        let report = converge(&load("mms.cfg"), 3, None).unwrap();
        Study { report, elapsed: t0.elapsed() }
    })
}

/// 48 to 3072 tets, `Δt = h/4`.
fn fine_study() -> &'static Study {
    static S: OnceLock<Study> = OnceLock::new();
    S.get_or_init(|| {
        let t0 = Instant::now();
        let report = converge(&load("probe_fine.cfg"), 3, None).unwrap();
        Study { report, elapsed: t0.elapsed() }
    })
}

fn cells(r: &ConvergenceReport) -> String {
    r.levels.iter().map(|l| l.cells.to_string()).collect::<Vec<_>>().join("->")
}

#[test]
fn criterion_6_consistency_decay() {
    let s = fine_study();
    let r = &s.report;
    let c = r.continuity_ratios().unwrap();
    let m = r.momentum_ratios().unwrap();
    let pass = r.failure.is_none()
        && r.levels.len() == 3
        && c.iter().chain(&m).all(|x| *x < 0.9)
        && s.elapsed < Duration::from_secs(600);
    report(
        6,
        pass,
        &format!("{} tets: continuity ratios {c:.3?}, momentum ratios {m:.3?}, {:.1?}", cells(r), s.elapsed),
    );
    assert!(pass);
}

fn mms_line(r: &ConvergenceReport) -> String {
    let e: Vec<String> = r.errors().iter().map(|x| format!("{x:.3e}")).collect();
    format!("{} tets: errors {}, order {:.3}", cells(r), e.join(" "), r.observed_order().unwrap_or(f64::NAN))
}

#[test]
fn criterion_7_mms_convergence() {
    let s = desk_study();
    let r = &s.report;
    let order = r.observed_order().unwrap_or(f64::NAN);
    let pass = r.failure.is_none()
        && r.levels.len() == 3
        && r.error_strictly_decreasing()
        && order >= 0.3
        && s.elapsed < Duration::from_secs(900);
    report(7, pass, &format!("{}, {:.1?}", mms_line(r), s.elapsed));
    let _ = writeln!(std::io::stderr(), "  (for reference, not the criterion) {}", mms_line(&fine_study().report));
    assert!(pass);
}

fn norm_spread(r: &ConvergenceReport) -> Vec<(&'static str, f64)> {
    let ratios = r.norm_ratios();
    NORM_NAMES
        .iter()
        .enumerate()
        .map(|(i, n)| (*n, ratios.iter().map(|row| row[i].max(1.0 / row[i])).fold(0.0, f64::max)))
        .collect()
}

fn spread_line(r: &ConvergenceReport) -> String {
    let s = norm_spread(r);
    let over: Vec<String> = s.iter().filter(|(_, f)| !(*f < 3.0)).map(|(n, f)| format!("{n} x{f:.2}")).collect();
    let worst = s.iter().map(|(_, f)| *f).fold(0.0, f64::max);
    format!("{} tets: largest level-to-level factor {worst:.2}; over 3: [{}]", cells(r), over.join(", "))
}

#[test]
fn criterion_8_uniform_bounds() {
    let r = &desk_study().report;
    let pass = r.failure.is_none() && r.levels.len() == 3 && norm_spread(r).iter().all(|(_, f)| *f < 3.0);
    report(8, pass, &spread_line(r));
    let _ = writeln!(std::io::stderr(), "  (for reference, not the criterion) {}", spread_line(&fine_study().report));
    assert!(pass);
}

fn run_suite(out: &Path) -> Vec<PathBuf> {
    let bin = env!("CARGO_BIN_EXE_nsfvfe");
    let mut csvs = Vec::new();
    for name in ["inflow_cube", "closed_box", "stationary"] {
        let dir = out.join(name);
        let st = Command::new(bin)
            .args(["run", "--config"])
            .arg(configs().join(format!("{name}.cfg")))
            .arg("--out")
            .arg(&dir)
            .env("NSFVFE_THREADS", "3")
            .output()
            .unwrap();
        assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
        csvs.push(dir.join("diagnostics.csv"));
    }
    let dir = out.join("mms");
    let st = Command::new(bin)
        .args(["converge", "--config"])
        .arg(configs().join("mms.cfg"))
        .arg("--out")
        .arg(&dir)
        .env("NSFVFE_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    csvs.push(dir.join("converge.csv"));
    csvs
}

#[test]
fn criterion_9_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (fa, fb) = (run_suite(a.path()), run_suite(b.path()));
    let mut differing = Vec::new();
    for (x, y) in fa.iter().zip(&fb) {
        if std::fs::read(x).unwrap() != std::fs::read(y).unwrap() {
            differing.push(x.file_name().unwrap().to_string_lossy().to_string());
        }
    }
    let pass = differing.is_empty();
    report(9, pass, &format!("{} CSVs compared across two executions, {} differ", fa.len(), differing.len()));
    assert!(pass, "{differing:?}");
}
