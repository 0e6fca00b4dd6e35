//! Discrete balances, uniform-estimate norms, the renormalized continuity
//! identity, consistency probes and the relative energy, all evaluated from
//! stored states.
//!
//! Nothing here calls the scheme's assembly; every term is recomputed from
//! `(ρ^k, u^k)` directly so that a bug in the residuals cannot hide itself.

mod csv;
mod energy;
mod norms;
mod probes;
mod renorm;

pub use csv::{csv_string, diagnostics_rows, write_csv, DiagnosticsRow, CSV_COLUMNS};
pub use energy::{energy_identity_defect, energy_inequality};
pub use norms::{uniform_norms, NormsReport, NORM_NAMES};
pub use probes::{continuity_probe, momentum_probe, relative_energy, ProbeReport, RelativeEnergyReport};
pub use renorm::{renormalized_residual, RenormReport};

use thiserror::Error;

use crate::mesh::Mesh;
use crate::scheme::{Problem, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("density {value} in cell {cell} at step {step} is outside the domain of B")]
    Domain { step: usize, cell: usize, value: f64 },
    #[error("reference density {value} is not positive at {x:?}")]
    NonPositiveReference { value: f64, x: [f64; 3] },
    #[error("trajectory does not match the mesh")]
    MeshMismatch,
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Lhs,
    Rhs,
    /// Nonnegative terms left out of the checked inequality.
    Dropped,
}

/// One named term, per step `k = 0..N` (entry 0 is the initial value or zero).
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub name: &'static str,
    pub side: Side,
    /// True for state quantities evaluated at step `m` rather than summed.
    pub instantaneous: bool,
    pub per_step: Vec<f64>,
}

impl Term {
    /// Value entering the balance at step `m`.
    pub fn at(&self, m: usize) -> f64 {
        if self.instantaneous {
            self.per_step[m]
        } else {
            self.per_step[..=m].iter().sum()
        }
    }

    pub fn cumulative(&self) -> Vec<f64> {
        (0..self.per_step.len()).map(|m| self.at(m)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    pub terms: Vec<Term>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `lhs - rhs` for `m = 0..N`.
    pub residual: Vec<f64>,
    pub tolerance: Vec<f64>,
    pub pass: bool,
}

impl BalanceReport {
    fn assemble(terms: Vec<Term>, tol: impl Fn(usize, f64) -> f64, two_sided: bool) -> Self {
        let n = terms.first().map_or(0, |t| t.per_step.len());
        let side_sum = |side: Side, m: usize| -> f64 {
            terms.iter().filter(|t| t.side == side).map(|t| t.at(m)).sum()
        };
        let lhs: Vec<f64> = (0..n).map(|m| side_sum(Side::Lhs, m)).collect();
        let rhs: Vec<f64> = (0..n).map(|m| side_sum(Side::Rhs, m)).collect();
        let residual: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
        let tolerance: Vec<f64> = (0..n)
            .map(|m| {
                let scale = terms.iter().map(|t| t.at(m).abs()).sum::<f64>();
                tol(m, scale)
            })
            .collect();
        let pass = residual.iter().zip(&tolerance).all(|(r, t)| {
            if two_sided {
                r.abs() <= *t
            } else {
                *r <= *t
            }
        });
        Self {
            terms,
            lhs,
            rhs,
            residual,
            tolerance,
            pass,
        }
    }

    pub fn term(&self, name: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.name == name)
    }
}

/// `10 (tol_abs + tol_rel · scale)`.
pub fn check_tolerance(prob: &Problem, scale: f64) -> f64 {
    10.0 * (prob.params.tol_abs + prob.params.tol_rel * scale)
}

fn check_traj(mesh: &Mesh, traj: &Trajectory) -> Result<(), DiagnosticsError> {
    for s in &traj.states {
        if s.rho.values.len() != mesh.num_cells() || s.u.dofs.len() != mesh.num_faces() {
            return Err(DiagnosticsError::MeshMismatch);
        }
    }
    Ok(())
}

/// `∫ρ^m + Δt Σ_k Σ_out ∫ρ^k u_B·n = ∫ρ⁰ - Δt Σ_k Σ_in ∫ρ_B u_B·n (+ Δt Σ_k ∫ s_ρ)`.
pub fn mass_balance(prob: &Problem, traj: &Trajectory) -> Result<BalanceReport, DiagnosticsError> {
    let mesh = &prob.mesh;
    let bd = &prob.bdata;
    check_traj(mesh, traj)?;
    let n = traj.states.len();
    let dt = traj.dt;
    let mut mass = vec![0.0; n];
    let mut initial = vec![0.0; n];
    let mut outflow = vec![0.0; n];
    let mut inflow = vec![0.0; n];
    let mut source = vec![0.0; n];
    for (k, s) in traj.states.iter().enumerate() {
        mass[k] = (0..mesh.num_cells()).map(|c| mesh.volume(c) * s.rho.values[c]).sum();
        if k == 0 {
            continue;
        }
        for &f in &bd.partition.outflow_faces {
            let face = mesh.face(f);
            outflow[k] += dt * face.area * s.rho.values[face.owner] * bd.u_b.dofs[f].dot(&face.normal);
        }
        for &f in &bd.partition.inflow_faces {
            let face = mesh.face(f);
            inflow[k] -= dt * face.area * bd.rho_b.values[face.owner] * bd.u_b.dofs[f].dot(&face.normal);
        }
        if let Some((sr, _)) = prob.source_loads(s.t) {
            source[k] = dt * sr.iter().sum::<f64>();
        }
    }
    initial[0] = mass[0];
    let terms = vec![
        Term { name: "mass", side: Side::Lhs, instantaneous: true, per_step: mass },
        Term { name: "outflow", side: Side::Lhs, instantaneous: false, per_step: outflow },
        Term { name: "initial_mass", side: Side::Rhs, instantaneous: false, per_step: initial },
        Term { name: "inflow", side: Side::Rhs, instantaneous: false, per_step: inflow },
        Term { name: "source", side: Side::Rhs, instantaneous: false, per_step: source },
    ];
    let mass_scale: Vec<f64> = {
        let m = &terms[0].per_step;
        (0..n).map(|i| m[..=i].iter().copied().fold(0.0, f64::max)).collect()
    };
    Ok(BalanceReport::assemble(terms, |m, _| check_tolerance(prob, mass_scale[m]), true))
}
