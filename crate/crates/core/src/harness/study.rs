//! Building problems from a config, single runs, re-diagnosis of stored
//! trajectories and refinement studies.

use std::fmt::Write as _;
use std::path::Path;

use super::check::identity_suite;
use super::config::{MeshSource, RunConfig};
use super::snapshot::{check_sizes, read_snapshot, write_snapshot};
use super::vtk::vtk_string;
use super::{io_err, HarnessError, IdentityResult};
use crate::analytic::MmsSources;
use crate::constitutive::RenormFunction;
use crate::diagnostics::{
    continuity_probe, csv_string, diagnostics_rows, energy_inequality, mass_balance, momentum_probe, relative_energy,
    renormalized_residual, uniform_norms, DiagnosticsRow, NORM_NAMES,
};
use crate::mesh::{check_admissibility, check_fit, io::read_mesh, kuhn_box, reference_tet, refine_uniform, AdmissibilityReport, FitReport, Mesh};
use crate::scheme::{init, run_with, BoundaryData, Problem, SchemeError, State, Trajectory};
use crate::spaces::QField;

/// The configured mesh with `mesh.refine` refinements applied.
pub fn base_mesh(cfg: &RunConfig) -> Result<Mesh, HarnessError> {
    let mut mesh = match &cfg.mesh {
        MeshSource::File(p) => read_mesh(p)?,
        MeshSource::ReferenceTet => reference_tet(),
        MeshSource::KuhnBox { n, lengths } => kuhn_box(*n, *lengths),
    };
    for _ in 0..cfg.refine {
        mesh = refine_uniform(&mesh);
    }
    Ok(mesh)
}

/// Level `ℓ` of a study: the base mesh refined `ℓ` more times.
pub fn level_mesh(cfg: &RunConfig, level: usize) -> Result<Mesh, HarnessError> {
    let mut mesh = base_mesh(cfg)?;
    for _ in 0..level {
        mesh = refine_uniform(&mesh);
    }
    Ok(mesh)
}

/// A ready-to-run problem and its initial state.
#[derive(Debug, Clone)]
pub struct Case {
    pub prob: Problem,
    pub initial: State,
}

pub fn build_case(cfg: &RunConfig, mesh: Mesh) -> Result<Case, HarnessError> {
    let bd = BoundaryData::from_fns(&mesh, |x| cfg.rho_b.value(x, 0.0).x, |x| cfg.u_b.value(x, 0.0))?;
    let mut prob = Problem::new(mesh, bd, cfg.scheme_params(0), cfg.gas_model()?)?;
    if cfg.mms {
        let reference = cfg.reference.clone().expect("mms requires a reference");
        let pressure = prob.pressure.clone();
        prob = prob.with_sources(MmsSources { reference, mu: cfg.gas.mu, lambda: cfg.gas.lambda, pressure });
    }
    let initial = init(&prob.mesh, &prob.bdata, |x| cfg.rho0.value(x, 0.0).x, |x| cfg.u0.value(x, 0.0))?;
    Ok(Case { prob, initial })
}

fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub warnings: Vec<String>,
    pub admissibility: AdmissibilityReport,
    pub fit: FitReport,
    pub identities: Vec<IdentityResult>,
}

impl CheckReport {
    pub fn pass(&self) -> bool {
        self.admissibility.is_admissible && self.fit.fits && self.identities.iter().all(IdentityResult::pass)
    }

    pub fn to_text(&self) -> String {
        let mark = |b: bool| if b { "pass" } else { "FAIL" };
        let mut out = String::new();
        for w in &self.warnings {
            writeln!(out, "warning: {w}").unwrap();
        }
        let a = &self.admissibility;
        writeln!(out, "{} admissibility: worst h_K/inradius {:.4}, {} offending cells", mark(a.is_admissible), a.worst_ratio, a.offending_cells.len()).unwrap();
        writeln!(out, "{} boundary fit: {} mismatched faces, {} uncovered regions", mark(self.fit.fits), self.fit.mismatched_faces.len(), self.fit.uncovered_regions.len()).unwrap();
        for m in &self.fit.mismatched_faces {
            writeln!(out, "  face {} ({:?}): {}", m.face, m.role, m.reason).unwrap();
        }
        for name in ["up1", "up2", "up3", "vv1", "proj"] {
            let worst = self.identities.iter().filter(|r| r.name == name).map(|r| r.relative).fold(0.0, f64::max);
            writeln!(out, "{} identity {name}: worst relative residual {worst:e}", mark(worst <= super::IDENTITY_TOL)).unwrap();
        }
        writeln!(out, "{}", if self.pass() { "PASS" } else { "FAIL" }).unwrap();
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,value,threshold,pass\n");
        let a = &self.admissibility;
        writeln!(out, "admissibility,{:e},{:e},{}", a.worst_ratio, f64::NAN, a.is_admissible).unwrap();
        writeln!(out, "fit,{},0,{}", self.fit.mismatched_faces.len() + self.fit.uncovered_regions.len(), self.fit.fits).unwrap();
        for r in &self.identities {
            writeln!(out, "{},{:e},{:e},{}", r.name, r.relative, super::IDENTITY_TOL, r.pass()).unwrap();
        }
        out
    }
}

/// Parameter windows, mesh admissibility, boundary fit and the identity
/// suite on `seeds` random instances.
pub fn check_config(cfg: &RunConfig, seeds: u64) -> Result<CheckReport, HarnessError> {
    let warnings = cfg.validate()?;
    let mesh = base_mesh(cfg)?;
    let case = build_case(cfg, mesh)?;
    let (mesh, bd) = (&case.prob.mesh, &case.prob.bdata);
    let mut admissibility = check_admissibility(mesh, cfg.shape_bound);
    admissibility.is_admissible &= admissibility.faces_matched;
    let fit = check_fit(mesh, &bd.partition, &cfg.inflow, &cfg.outflow);
    let identities = (0..seeds).flat_map(|s| identity_suite(mesh, &bd.u_b, &bd.partition, cfg.seed.wrapping_add(s))).collect();
    Ok(CheckReport { warnings, admissibility, fit, identities })
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub trajectory: Trajectory,
    pub rows: Vec<DiagnosticsRow>,
    pub csv: String,
    pub mass_pass: bool,
    pub energy_pass: bool,
    pub renorm_pass: bool,
    /// Set when the solver stopped early; outputs then hold the accepted steps.
    pub failure: Option<SchemeError>,
}

impl RunReport {
    pub fn pass(&self) -> bool {
        self.failure.is_none() && self.mass_pass && self.energy_pass && self.renorm_pass
    }

    pub fn summary(&self) -> String {
        let mark = |b: bool| if b { "pass" } else { "FAIL" };
        let mut out = String::new();
        if let Some(e) = &self.failure {
            writeln!(out, "FAILED: {e}").unwrap();
        }
        let t = &self.trajectory;
        writeln!(out, "steps {} dt {:e} t_final {:e}", t.num_steps(), t.dt, t.last().t).unwrap();
        let its: usize = t.info.iter().map(|i| i.iterations).sum();
        writeln!(out, "nonlinear iterations {its}").unwrap();
        let min_rho = self.rows.iter().map(|r| r.min_rho).fold(f64::INFINITY, f64::min);
        writeln!(out, "min density {min_rho:e}").unwrap();
        writeln!(out, "{} mass balance", mark(self.mass_pass)).unwrap();
        writeln!(out, "{} energy inequality", mark(self.energy_pass)).unwrap();
        writeln!(out, "{} renormalized continuity", mark(self.renorm_pass)).unwrap();
        writeln!(out, "{}", if self.pass() { "PASS" } else { "FAIL" }).unwrap();
        out
    }
}

fn vtk_name(k: usize) -> String {
    format!("state_{k:05}.vtk")
}

/// Runs one case and writes `diagnostics.csv`, `trajectory.snap`, VTK files
/// every `snapshot_every` steps (and at the end) and `summary.txt` into
/// `out`. A solver failure still writes everything for the accepted steps,
/// plus a `FAILED` marker file.
pub fn run_case(cfg: &RunConfig, case: &Case, out: &Path) -> Result<RunReport, HarnessError> {
    create_dir(out)?;
    let prob = &case.prob;
    let every = cfg.snapshot_every;
    let mut vtk_err = None;
    let observe = |s: &State, info: &crate::scheme::StepInfo| {
        log::info!("step {} t {:e}: {} iterations", s.k, s.t, info.iterations);
        if s.k % every == 0 && vtk_err.is_none() {
            vtk_err = write_file(&out.join(vtk_name(s.k)), &vtk_string(&prob.mesh, s)).err();
        }
    };
    write_file(&out.join(vtk_name(0)), &vtk_string(&prob.mesh, &case.initial))?;
    let (trajectory, failure) = match run_with(prob, case.initial.clone(), observe) {
        Ok(t) => (t, None),
        Err((t, e)) => (t, Some(e)),
    };
    if let Some(e) = vtk_err {
        return Err(e);
    }
    let last = trajectory.last();
    if last.k % every != 0 {
        write_file(&out.join(vtk_name(last.k)), &vtk_string(&prob.mesh, last))?;
    }
    write_snapshot(&trajectory, &out.join("trajectory.snap"))?;
    let rows = diagnostics_rows(prob, &trajectory, cfg.reference.as_ref())?;
    let csv = csv_string(&rows);
    write_file(&out.join("diagnostics.csv"), &csv)?;
    let mass_pass = mass_balance(prob, &trajectory)?.pass;
    let energy_pass = energy_inequality(prob, &trajectory)?.pass;
    let one = QField::constant(&prob.mesh, 1.0);
    let l1 = RenormFunction::l_zeta(1.0).expect("valid");
    let renorm_pass = renormalized_residual(prob, &trajectory, &l1, &one)?.pass
        && renormalized_residual(prob, &trajectory, &RenormFunction::Linear { c: 1.0 }, &one)?.pass;
    let report = RunReport { trajectory, rows, csv, mass_pass, energy_pass, renorm_pass, failure };
    write_file(&out.join("summary.txt"), &report.summary())?;
    let marker = out.join("FAILED");
    if let Some(e) = &report.failure {
        write_file(&marker, &format!("{e}\n"))?;
    } else if marker.exists() {
        std::fs::remove_file(&marker).map_err(|e| io_err(&marker, e))?;
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct DiagnoseReport {
    pub csv: String,
    /// `(step, cell, value)` of the first nonpositive density.
    pub negative_density: Option<(usize, usize, f64)>,
}

/// Recomputes the diagnostics table from a stored trajectory and writes it to
/// `out/diagnostics.csv`. A nonpositive density stops the table before that
/// step and is recorded in `out/diagnose_report.csv`.
pub fn diagnose(cfg: &RunConfig, snapshot: &Path, out: &Path) -> Result<DiagnoseReport, HarnessError> {
    let mut traj = read_snapshot(snapshot)?;
    let case = build_case(cfg, base_mesh(cfg)?)?;
    let prob = &case.prob;
    check_sizes(&traj, &prob.mesh)?;
    if (traj.dt - prob.dt).abs() > 1e-12 * prob.dt {
        return Err(HarnessError::Io(format!("snapshot dt {:e} differs from the configured {:e}", traj.dt, prob.dt)));
    }
    let negative_density = traj.states.iter().enumerate().find_map(|(k, s)| {
        s.rho.values.iter().enumerate().find(|(_, r)| !(**r > 0.0)).map(|(c, r)| (k, c, *r))
    });
    if let Some((k, _, _)) = negative_density {
        traj.states.truncate(k);
    }
    create_dir(out)?;
    let csv = if traj.states.is_empty() {
        csv_string(&[])
    } else {
        csv_string(&diagnostics_rows(prob, &traj, cfg.reference.as_ref())?)
    };
    write_file(&out.join("diagnostics.csv"), &csv)?;
    let mut report = String::from("check,step,cell,value\n");
    if let Some((k, c, r)) = negative_density {
        writeln!(report, "NegativeDensity,{k},{c},{r:e}").unwrap();
    }
    write_file(&out.join("diagnose_report.csv"), &report)?;
    Ok(DiagnoseReport { csv, negative_density })
}

/// One level of a refinement study.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub cells: usize,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    /// `sup ℰ + ∫(‖u-Ũ‖² + ‖∇_h(u-Ũ)‖²)`; NaN without a reference.
    pub error: f64,
    pub sup_rel_energy: f64,
    pub vel_l2: f64,
    pub vel_grad: f64,
    /// `|∫⟨R^C, φ⟩ dt|`.
    pub continuity_gap: Option<f64>,
    /// `|∫⟨R^M, φ⟩ dt|`.
    pub momentum_gap: Option<f64>,
    /// Final values, ordered as [`NORM_NAMES`].
    pub norms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub levels: Vec<LevelResult>,
    /// Present when a level failed; `levels` holds the completed ones.
    pub failure: Option<String>,
}

fn ratios(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| w[1] / w[0]).collect()
}

impl ConvergenceReport {
    pub fn errors(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.error).collect()
    }

    /// `log(e_{ℓ-1}/e_ℓ) / log(h_{ℓ-1}/h_ℓ)` for each consecutive pair.
    pub fn orders(&self) -> Vec<f64> {
        self.levels
            .windows(2)
            .map(|w| (w[0].error / w[1].error).ln() / (w[0].h / w[1].h).ln())
            .collect()
    }

    /// Order from the two finest levels.
    pub fn observed_order(&self) -> Option<f64> {
        self.orders().last().copied()
    }

    pub fn error_strictly_decreasing(&self) -> bool {
        self.levels.len() >= 2 && self.levels.windows(2).all(|w| w[1].error < w[0].error)
    }

    pub fn continuity_ratios(&self) -> Option<Vec<f64>> {
        let g: Option<Vec<f64>> = self.levels.iter().map(|l| l.continuity_gap).collect();
        g.map(|g| ratios(&g))
    }

    pub fn momentum_ratios(&self) -> Option<Vec<f64>> {
        let g: Option<Vec<f64>> = self.levels.iter().map(|l| l.momentum_gap).collect();
        g.map(|g| ratios(&g))
    }

    /// `norms[ℓ+1][i] / norms[ℓ][i]`, one row per consecutive pair.
    pub fn norm_ratios(&self) -> Vec<Vec<f64>> {
        self.levels
            .windows(2)
            .map(|w| w[0].norms.iter().zip(&w[1].norms).map(|(a, b)| b / a).collect())
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4e}"));
        let orders = self.orders();
        writeln!(out, "level cells h dt steps error order supE vel_l2 vel_grad continuity_gap momentum_gap").unwrap();
        for (i, l) in self.levels.iter().enumerate() {
            let order = if i == 0 { None } else { orders.get(i - 1).copied() };
            writeln!(
                out,
                "{i} {} {:.4e} {:.4e} {} {:.4e} {} {:.4e} {:.4e} {:.4e} {} {}",
                l.cells, l.h, l.dt, l.steps, l.error, opt(order), l.sup_rel_energy, l.vel_l2, l.vel_grad, opt(l.continuity_gap), opt(l.momentum_gap)
            )
            .unwrap();
        }
        writeln!(out, "observed order (two finest levels): {}", opt(self.observed_order())).unwrap();
        if let Some(r) = self.continuity_ratios() {
            writeln!(out, "continuity probe ratios: {r:.4?}").unwrap();
        }
        if let Some(r) = self.momentum_ratios() {
            writeln!(out, "momentum probe ratios: {r:.4?}").unwrap();
        }
        writeln!(out, "norm table (final values per level, then ratios)").unwrap();
        let ratios = self.norm_ratios();
        for (i, name) in NORM_NAMES.iter().enumerate() {
            let vals: Vec<String> = self.levels.iter().map(|l| format!("{:.4e}", l.norms[i])).collect();
            let rs: Vec<String> = ratios.iter().map(|r| format!("{:.3}", r[i])).collect();
            writeln!(out, "  {name:<14} {} | {}", vals.join(" "), rs.join(" ")).unwrap();
        }
        if let Some(f) = &self.failure {
            writeln!(out, "FAILED: {f}").unwrap();
        }
        out
    }

    /// One row per level; the order column is empty on the first level.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,cells,h,dt,steps,error,order,sup_rel_energy,vel_l2,vel_grad,continuity_gap,momentum_gap");
        for n in NORM_NAMES {
            write!(out, ",{n}").unwrap();
        }
        out.push('\n');
        let orders = self.orders();
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:e}"));
        for (i, l) in self.levels.iter().enumerate() {
            let order = if i == 0 { None } else { orders.get(i - 1).copied() };
            write!(
                out,
                "{i},{},{:e},{:e},{},{:e},{},{:e},{:e},{:e},{},{}",
                l.cells, l.h, l.dt, l.steps, l.error, opt(order), l.sup_rel_energy, l.vel_l2, l.vel_grad, opt(l.continuity_gap), opt(l.momentum_gap)
            )
            .unwrap();
            for x in &l.norms {
                write!(out, ",{x:e}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn run_level(cfg: &RunConfig, level: usize) -> Result<LevelResult, HarnessError> {
    let case = build_case(cfg, level_mesh(cfg, level)?)?;
    let prob = &case.prob;
    log::info!("level {level}: {} cells, h {:e}, dt {:e}", prob.mesh.num_cells(), prob.h, prob.dt);
    let traj = run_with(prob, case.initial.clone(), |_, _| {}).map_err(|(_, e)| e)?;
    let (mut error, mut sup_rel_energy, mut vel_l2, mut vel_grad) = (f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    if let Some(r) = &cfg.reference {
        let re = relative_energy(prob, &traj, r)?;
        error = re.error;
        sup_rel_energy = re.rel_energy.iter().copied().fold(0.0, f64::max);
        vel_l2 = re.vel_l2[1..].iter().sum::<f64>() * traj.dt;
        vel_grad = re.vel_grad[1..].iter().sum::<f64>() * traj.dt;
    }
    let continuity_gap = cfg.probe_continuity.as_ref().map(|phi| continuity_probe(prob, &traj, phi).map(|p| p.value.abs())).transpose()?;
    let momentum_gap = cfg.probe_momentum.as_ref().map(|phi| momentum_probe(prob, &traj, phi).map(|p| p.value.abs())).transpose()?;
    Ok(LevelResult {
        cells: prob.mesh.num_cells(),
        h: prob.h,
        dt: prob.dt,
        steps: traj.num_steps(),
        error,
        sup_rel_energy,
        vel_l2,
        vel_grad,
        continuity_gap,
        momentum_gap,
        norms: uniform_norms(prob, &traj)?.finals(),
    })
}

/// Runs levels `0..levels` and writes `converge.txt` and `converge.csv` to
/// `out` when given. A failing level ends the study with a partial report.
pub fn converge(cfg: &RunConfig, levels: usize, out: Option<&Path>) -> Result<ConvergenceReport, HarnessError> {
    let mut report = ConvergenceReport { levels: Vec::new(), failure: None };
    for level in 0..levels {
        match run_level(cfg, level) {
            Ok(r) => report.levels.push(r),
            Err(HarnessError::Scheme(e)) => {
                report.failure = Some(format!("level {level}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if let Some(dir) = out {
        create_dir(dir)?;
        write_file(&dir.join("converge.txt"), &report.to_text())?;
        write_file(&dir.join("converge.csv"), &report.to_csv())?;
    }
    Ok(report)
}
