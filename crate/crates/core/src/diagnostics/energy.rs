//! The discrete energy balance.
//!
//! Testing the momentum equation with `v^k` and the continuity equation with
//! `H_h'(ρ^k) - ½|v̂^k|²` gives an exact identity. Two of its terms,
//! `Σ_K |K| E_{H_h}(ρ^{k-1}|ρ^k)` and the upwind interface term
//! `Δt Σ_σ |σ| |u_σ·n| E_{H_h}(ρ_up|ρ_down)`, are nonnegative by convexity and
//! are dropped to get the checked inequality; they are still reported.

use rayon::prelude::*;

use super::{check_tolerance, check_traj, BalanceReport, DiagnosticsError, Side, Term};
use crate::constitutive::Potential;
use crate::mesh::FaceKind;
use crate::scheme::{Problem, State, Trajectory};
use crate::spaces::grad_h;
use crate::Mat3;

const NAMES: [(&str, Side, bool); 18] = [
    ("kinetic", Side::Lhs, true),
    ("internal", Side::Lhs, true),
    ("viscous_dissipation", Side::Lhs, false),
    ("time_jump_kinetic", Side::Lhs, false),
    ("upwind_dissipation", Side::Lhs, false),
    ("penalty_dissipation", Side::Lhs, false),
    ("outflow_kinetic", Side::Lhs, false),
    ("outflow_internal", Side::Lhs, false),
    ("inflow_relative", Side::Lhs, false),
    ("initial_energy", Side::Rhs, false),
    ("inflow_internal", Side::Rhs, false),
    ("viscous_boundary_work", Side::Rhs, false),
    ("pressure_work", Side::Rhs, false),
    ("background_work", Side::Rhs, false),
    ("inflow_kinetic", Side::Rhs, false),
    ("source_work", Side::Rhs, false),
    ("time_jump_internal", Side::Dropped, false),
    ("interface_internal", Side::Dropped, false),
];

fn frobenius(a: &Mat3, b: &Mat3) -> f64 {
    a.component_mul(b).sum()
}

/// All energy terms of step `k ≥ 1` (the instantaneous ones at `k`).
fn step_terms(prob: &Problem, prev: &State, s: &State, grad_b: &[Mat3]) -> [f64; 18] {
    let mesh = &prob.mesh;
    let bd = &prob.bdata;
    let pot = &prob.pressure;
    let (mu, lambda) = (prob.params.mu, prob.params.lambda);
    let dt = prob.dt;
    let rho = &s.rho.values;
    let rho_old = &prev.rho.values;
    let vhat = s.v(bd).hat(mesh).values;
    let vhat_old = prev.v(bd).hat(mesh).values;
    let uhat = s.u.hat(mesh).values;
    let grad_v = grad_h(mesh, &s.v(bd));
    let mut t = [0.0; 18];

    for k in 0..mesh.num_cells() {
        let vol = mesh.volume(k);
        t[0] += vol * 0.5 * rho[k] * vhat[k].norm_squared();
        t[1] += vol * pot.h(rho[k]);
        let gv = &grad_v[k];
        let gb = &grad_b[k];
        t[2] += dt * vol * (mu * gv.norm_squared() + (mu + lambda) * gv.trace().powi(2));
        t[3] += 0.5 * vol * rho_old[k] * (vhat[k] - vhat_old[k]).norm_squared();
        t[11] -= dt * vol * (mu * frobenius(gb, gv) + (mu + lambda) * gb.trace() * gv.trace());
        t[12] -= dt * vol * pot.p_h(rho[k]) * gb.trace();
        t[13] -= dt * vol * rho[k] * (gb * uhat[k]).dot(&vhat[k]);
        t[16] += vol * pot.relative(rho_old[k], rho[k]).unwrap_or(f64::NAN);
    }
    if let Some((sr, sm)) = prob.source_loads(s.t) {
        for k in 0..mesh.num_cells() {
            t[15] += dt * (sm[k].dot(&vhat[k]) + sr[k] * (pot.dh(rho[k]) - 0.5 * vhat[k].norm_squared()));
        }
    }
    for f in 0..mesh.num_faces() {
        let face = mesh.face(f);
        let k = face.owner;
        let un_b = bd.u_b.dofs[f].dot(&face.normal);
        match bd.partition.kind(f) {
            FaceKind::Interior => {
                let l = face.neighbor.unwrap();
                let un = s.u.dofs[f].dot(&face.normal);
                let (up, down) = if un >= 0.0 { (k, l) } else { (l, k) };
                t[4] += 0.5 * dt * face.area * rho[up] * un.abs() * (vhat[k] - vhat[l]).norm_squared();
                t[5] += prob.penalty * dt * face.area * (rho[l] - rho[k]) * (pot.dh(rho[l]) - pot.dh(rho[k]));
                t[17] += dt * face.area * un.abs() * pot.relative(rho[up], rho[down]).unwrap_or(f64::NAN);
            }
            FaceKind::Outflow => {
                t[6] += 0.5 * dt * face.area * rho[k] * un_b * vhat[k].norm_squared();
                t[7] += dt * face.area * pot.h(rho[k]) * un_b;
            }
            FaceKind::Inflow => {
                let rb = bd.rho_b.values[k];
                t[8] += dt * face.area * pot.relative(rb, rho[k]).unwrap_or(f64::NAN) * un_b.abs();
                t[10] += dt * face.area * pot.h(rb) * un_b.abs();
                t[14] += 0.5 * dt * face.area * rb * un_b.abs() * vhat[k].norm_squared();
            }
            FaceKind::Slip => {}
        }
    }
    t
}

fn all_terms(prob: &Problem, traj: &Trajectory) -> Vec<[f64; 18]> {
    let mesh = &prob.mesh;
    let grad_b = grad_h(mesh, &prob.bdata.u_b);
    let n = traj.states.len();
    let mut rows: Vec<[f64; 18]> = (1..n)
        .into_par_iter()
        .map(|k| step_terms(prob, &traj.states[k - 1], &traj.states[k], &grad_b))
        .collect();
    let s0 = &traj.states[0];
    let vhat0 = s0.v(&prob.bdata).hat(mesh).values;
    let mut first = [0.0; 18];
    for k in 0..mesh.num_cells() {
        let vol = mesh.volume(k);
        first[0] += vol * 0.5 * s0.rho.values[k] * vhat0[k].norm_squared();
        first[1] += vol * prob.pressure.h(s0.rho.values[k]);
    }
    first[9] = first[0] + first[1];
    rows.insert(0, first);
    rows
}

/// Checks `LHS ≤ RHS + tol` at every step, `tol = 10 (tol_abs + tol_rel · Σ|terms|)`.
pub fn energy_inequality(prob: &Problem, traj: &Trajectory) -> Result<BalanceReport, DiagnosticsError> {
    check_traj(&prob.mesh, traj)?;
    if prob.pressure.gas.gamma().is_none() {
        log::warn!("general pressure law: the penalty term pairs [[ρ]] with [[H_h'(ρ)]], which may be badly conditioned near vacuum");
    }
    let rows = all_terms(prob, traj);
    let terms = NAMES
        .iter()
        .enumerate()
        .map(|(i, &(name, side, instantaneous))| Term {
            name,
            side,
            instantaneous,
            per_step: rows.iter().map(|r| r[i]).collect(),
        })
        .collect();
    Ok(BalanceReport::assemble(terms, |_, scale| check_tolerance(prob, scale), false))
}

/// `LHS - RHS + dropped` per step `k ≥ 1`; zero for an exact solution of the
/// scheme.
pub fn energy_identity_defect(prob: &Problem, prev: &State, s: &State) -> f64 {
    let grad_b = grad_h(&prob.mesh, &prob.bdata.u_b);
    let t = step_terms(prob, prev, s, &grad_b);
    let mut prev_energy = 0.0;
    let vhat_old = prev.v(&prob.bdata).hat(&prob.mesh).values;
    for k in 0..prob.mesh.num_cells() {
        let vol = prob.mesh.volume(k);
        prev_energy += vol * (0.5 * prev.rho.values[k] * vhat_old[k].norm_squared() + prob.pressure.h(prev.rho.values[k]));
    }
    let lhs: f64 = t[..9].iter().sum::<f64>() - prev_energy;
    let rhs: f64 = t[10..16].iter().sum();
    lhs - rhs + t[16] + t[17]
}
