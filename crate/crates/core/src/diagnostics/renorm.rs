//! The renormalized continuity identity.
//!
//! Testing the continuity residual of cell `K` with `φ_K B'(ρ_K)` and
//! rearranging the upwind and boundary fluxes with the Bregman remainder
//! `E_B(a|b) = B(a) - B'(b)(a - b) - B(b)` gives a sum of terms that must
//! vanish whenever the continuity equation is solved. Each term is assembled
//! here on its own.

use rayon::prelude::*;

use super::{check_tolerance, check_traj, DiagnosticsError, Side, Term};
use crate::constitutive::RenormFunction;
use crate::mesh::FaceKind;
use crate::scheme::{Problem, State, Trajectory};
use crate::spaces::{div_h, QField};
use crate::upwind::face_flux;

const NAMES: [&str; 10] = [
    "time_derivative",
    "interior_flux",
    "penalty",
    "compression",
    "time_remainder",
    "interface_remainder",
    "outflow",
    "inflow",
    "inflow_remainder",
    "source",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RenormReport {
    /// Per step, already multiplied by `Δt`; entry 0 is zero.
    pub terms: Vec<Term>,
    /// Sum of the terms per step.
    pub residual: Vec<f64>,
    pub tolerance: Vec<f64>,
    pub pass: bool,
}

fn step_terms(
    prob: &Problem,
    b: &RenormFunction,
    phi: &[f64],
    k: usize,
    prev: &State,
    s: &State,
) -> Result<[f64; 10], DiagnosticsError> {
    let mesh = &prob.mesh;
    let bd = &prob.bdata;
    let dt = prob.dt;
    let rho = &s.rho.values;
    for (cell, &r) in rho.iter().enumerate() {
        if !(r > 0.0) {
            return Err(DiagnosticsError::Domain { step: k, cell, value: r });
        }
    }
    let ev: Vec<(f64, f64, f64)> = rho.iter().map(|&r| b.eval(r)).collect();
    let bq = QField::from_fn(mesh, |c| ev[c].0);
    let flux = face_flux(mesh, &bq, &s.u).map_err(|_| DiagnosticsError::MeshMismatch)?;
    let div = div_h(mesh, &s.u).values;
    let mut t = [0.0; 10];
    for c in 0..mesh.num_cells() {
        let vol = mesh.volume(c);
        let old = prev.rho.values[c];
        t[0] += vol * (ev[c].0 - b.eval(old).0) * phi[c];
        t[3] += dt * vol * phi[c] * ev[c].2 * div[c];
        t[4] += vol * b.bregman(old, rho[c]) * phi[c];
    }
    if let Some((sr, _)) = prob.source_loads(s.t) {
        for c in 0..mesh.num_cells() {
            t[9] -= dt * sr[c] * phi[c] * ev[c].1;
        }
    }
    for f in 0..mesh.num_faces() {
        let face = mesh.face(f);
        let c = face.owner;
        match bd.partition.kind(f) {
            FaceKind::Interior => {
                let l = face.neighbor.unwrap();
                let un = flux.un[f];
                t[1] += dt * face.area * flux.up[f] * (phi[c] - phi[l]);
                t[2] += dt * prob.penalty * face.area * (rho[l] - rho[c]) * (phi[l] * ev[l].1 - phi[c] * ev[c].1);
                let (up, down) = if un >= 0.0 { (c, l) } else { (l, c) };
                t[5] += dt * face.area * un.abs() * b.bregman(rho[up], rho[down]) * phi[down];
            }
            FaceKind::Outflow => {
                let un = bd.u_b.dofs[f].dot(&face.normal);
                t[6] += dt * face.area * ev[c].0 * un * phi[c];
            }
            FaceKind::Inflow => {
                let un = bd.u_b.dofs[f].dot(&face.normal);
                let rb = bd.rho_b.values[c];
                t[7] += dt * face.area * b.eval(rb).0 * un * phi[c];
                t[8] += dt * face.area * b.bregman(rb, rho[c]) * un.abs() * phi[c];
            }
            FaceKind::Slip => {}
        }
    }
    Ok(t)
}

/// Per-step residual of the renormalized identity for `B` tested with `φ`.
pub fn renormalized_residual(
    prob: &Problem,
    traj: &Trajectory,
    b: &RenormFunction,
    phi: &QField<f64>,
) -> Result<RenormReport, DiagnosticsError> {
    check_traj(&prob.mesh, traj)?;
    if phi.values.len() != prob.mesh.num_cells() {
        return Err(DiagnosticsError::MeshMismatch);
    }
    for (cell, &r) in traj.states[0].rho.values.iter().enumerate() {
        if !(r > 0.0) {
            return Err(DiagnosticsError::Domain { step: 0, cell, value: r });
        }
    }
    let n = traj.states.len();
    let rows = (1..n)
        .into_par_iter()
        .map(|k| step_terms(prob, b, &phi.values, k, &traj.states[k - 1], &traj.states[k]))
        .collect::<Result<Vec<_>, _>>()?;
    let column = |i: usize| -> Vec<f64> { std::iter::once(0.0).chain(rows.iter().map(|r| r[i])).collect() };
    let terms: Vec<Term> = NAMES
        .iter()
        .enumerate()
        .map(|(i, &name)| Term { name, side: Side::Lhs, instantaneous: true, per_step: column(i) })
        .collect();
    let residual: Vec<f64> = (0..n).map(|m| terms.iter().map(|t| t.per_step[m]).sum()).collect();
    let tolerance: Vec<f64> = (0..n)
        .map(|m| {
            // magnitude of the tested continuity equation: the terms plus ∫|B(ρ^m) φ|
            let content: f64 = if m == 0 {
                0.0
            } else {
                (0..prob.mesh.num_cells())
                    .map(|c| prob.mesh.volume(c) * (b.eval(traj.states[m].rho.values[c]).0 * phi.values[c]).abs())
                    .sum()
            };
            let scale = content + terms.iter().map(|t| t.per_step[m].abs()).sum::<f64>();
            check_tolerance(prob, scale)
        })
        .collect();
    let pass = residual.iter().zip(&tolerance).all(|(r, t)| r.abs() <= *t);
    Ok(RenormReport { terms, residual, tolerance, pass })
}
