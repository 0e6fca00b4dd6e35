//! Per-step diagnostics table.

use std::fmt::Write as _;
use std::path::Path;

use super::{energy_inequality, mass_balance, relative_energy, renormalized_residual, uniform_norms, DiagnosticsError, NORM_NAMES};
use crate::analytic::Reference;
use crate::constitutive::RenormFunction;
use crate::scheme::{Problem, Trajectory};
use crate::spaces::QField;

/// Column order of the table. The norm columns sit between `min_rho` and
/// `renorm_residual`.
pub const CSV_COLUMNS: [&str; 24] = [
    "t",
    "total_mass",
    "mass_residual",
    "energy_lhs",
    "energy_rhs",
    "energy_gap",
    "min_rho",
    NORM_NAMES[0],
    NORM_NAMES[1],
    NORM_NAMES[2],
    NORM_NAMES[3],
    NORM_NAMES[4],
    NORM_NAMES[5],
    NORM_NAMES[6],
    NORM_NAMES[7],
    NORM_NAMES[8],
    NORM_NAMES[9],
    NORM_NAMES[10],
    NORM_NAMES[11],
    NORM_NAMES[12],
    NORM_NAMES[13],
    NORM_NAMES[14],
    "renorm_residual",
    "relE",
];

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub total_mass: f64,
    pub mass_residual: f64,
    pub energy_lhs: f64,
    pub energy_rhs: f64,
    pub energy_gap: f64,
    pub min_rho: f64,
    pub norms: [f64; 15],
    /// `L_1` renormalization tested with `φ ≡ 1`.
    pub renorm_residual: f64,
    /// NaN without a reference solution.
    pub rel_e: f64,
}

impl DiagnosticsRow {
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![
            self.t,
            self.total_mass,
            self.mass_residual,
            self.energy_lhs,
            self.energy_rhs,
            self.energy_gap,
            self.min_rho,
        ];
        v.extend_from_slice(&self.norms);
        v.push(self.renorm_residual);
        v.push(self.rel_e);
        v
    }
}

pub fn diagnostics_rows(
    prob: &Problem,
    traj: &Trajectory,
    reference: Option<&Reference>,
) -> Result<Vec<DiagnosticsRow>, DiagnosticsError> {
    let mass = mass_balance(prob, traj)?;
    let energy = energy_inequality(prob, traj)?;
    let norms = uniform_norms(prob, traj)?;
    let l1 = RenormFunction::l_zeta(1.0).expect("ζ = 1 is valid");
    let renorm = renormalized_residual(prob, traj, &l1, &QField::constant(&prob.mesh, 1.0))?;
    let rel = reference.map(|r| relative_energy(prob, traj, r)).transpose()?;
    let total_mass = mass.term("mass").expect("mass term").per_step.clone();
    Ok(traj
        .states
        .iter()
        .enumerate()
        .map(|(m, s)| DiagnosticsRow {
            t: s.t,
            total_mass: total_mass[m],
            mass_residual: mass.residual[m],
            energy_lhs: energy.lhs[m],
            energy_rhs: energy.rhs[m],
            energy_gap: energy.residual[m],
            min_rho: s.min_rho(),
            norms: std::array::from_fn(|i| norms.columns[i][m]),
            renorm_residual: renorm.residual[m],
            rel_e: rel.as_ref().map_or(f64::NAN, |r| r.rel_energy[m]),
        })
        .collect())
}

/// The table as text: a header line, then one line per step in `{:e}` format.
pub fn csv_string(rows: &[DiagnosticsRow]) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.values().iter().map(|x| format!("{x:e}")).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn write_csv(path: &Path, rows: &[DiagnosticsRow]) -> Result<(), DiagnosticsError> {
    std::fs::write(path, csv_string(rows)).map_err(|e| DiagnosticsError::Io(format!("{}: {e}", path.display())))
}
