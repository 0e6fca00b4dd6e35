//! Running values of the quantities bounded uniformly in `h`.
//!
//! Column `m` holds the quantity over the time window `[0, t_m]`: suprema
//! are running maxima over `k ≤ m`, time integrals are sums over `1 ≤ k ≤ m`.

use rayon::prelude::*;

use super::{check_traj, DiagnosticsError};
use crate::constitutive::Potential;
use crate::scheme::{Problem, State, Trajectory};
use crate::spaces::{grad_h, lp_norm_v};

pub const NORM_NAMES: [&str; 15] = [
    "e0_rho_lgamma",
    "e0_p_l1",
    "e0_h_l1",
    "e1_rho_bd",
    "e1_h_bd",
    "e0p_rho_l2",
    "e1p_rho_bd",
    "e2_sqrt_rho_u",
    "e3_grad_v",
    "e3_v_l6",
    "e4_time_jumps",
    "e5_upwind",
    "e6_jump_flux",
    "e6_jump_pen",
    "rg_rho_lgp1",
];

#[derive(Debug, Clone, PartialEq)]
pub struct NormsReport {
    /// Exponent used for the `L^γ` columns.
    pub gamma: f64,
    /// `columns[i][m]`, names in [`NORM_NAMES`].
    pub columns: Vec<Vec<f64>>,
}

impl NormsReport {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let i = NORM_NAMES.iter().position(|n| *n == name)?;
        Some(&self.columns[i])
    }

    /// Values at the final time.
    pub fn finals(&self) -> Vec<f64> {
        self.columns.iter().map(|c| c.last().copied().unwrap_or(0.0)).collect()
    }
}

/// How a raw per-step value is accumulated.
#[derive(Clone, Copy)]
enum Acc {
    /// `max_k x_k`, reported as `x^{1/p}`.
    Sup(f64),
    /// `(Σ_k x_k)^{1/p}` over `k ≥ 1`.
    Sum(f64),
}

const ACC: [Acc; 15] = [
    Acc::Sup(0.0), // placeholder, replaced by γ
    Acc::Sup(1.0),
    Acc::Sup(1.0),
    Acc::Sum(0.0), // γ
    Acc::Sum(1.0),
    Acc::Sup(2.0),
    Acc::Sum(2.0),
    Acc::Sup(2.0),
    Acc::Sum(2.0),
    Acc::Sum(2.0),
    Acc::Sum(1.0),
    Acc::Sum(1.0),
    Acc::Sum(1.0),
    Acc::Sum(1.0),
    Acc::Sum(0.0), // γ + 1
];

/// Raw per-step values; time-integrated ones already carry the `Δt`.
fn raw(prob: &Problem, gamma: f64, prev: Option<&State>, s: &State) -> [f64; 15] {
    let mesh = &prob.mesh;
    let bd = &prob.bdata;
    let gas = &prob.pressure.gas;
    let dt = prob.dt;
    let hb = prob.h.powf(prob.params.beta);
    let rho = &s.rho.values;
    let v = s.v(bd);
    let vhat = v.hat(mesh).values;
    let uhat = s.u.hat(mesh).values;
    let mut r = [0.0; 15];
    for k in 0..mesh.num_cells() {
        let vol = mesh.volume(k);
        r[0] += vol * rho[k].powf(gamma);
        r[1] += vol * gas.p(rho[k]).abs();
        r[2] += vol * gas.h(rho[k]).abs();
        r[5] += vol * hb * rho[k] * rho[k];
        r[7] += vol * rho[k] * uhat[k].norm_squared();
    }
    let Some(prev) = prev else { return r };

    // boundary traces use the adjacent cell value
    let mut e1p = 0.0;
    for &f in mesh.boundary_faces() {
        let face = mesh.face(f);
        let un = bd.u_b.dofs[f].dot(&face.normal).abs();
        let rk = rho[face.owner];
        r[3] += dt * face.area * rk.powf(gamma) * un;
        r[4] += dt * face.area * gas.h(rk).abs() * un;
        e1p += face.area * (rk * un.sqrt()).powf(gamma);
    }
    r[6] = dt * hb * e1p.powf(2.0 / gamma);

    let g = grad_h(mesh, &v);
    r[8] = dt * (0..mesh.num_cells()).map(|k| mesh.volume(k) * g[k].norm_squared()).sum::<f64>();
    r[9] = dt * lp_norm_v(mesh, &v, 6.0).unwrap_or(f64::NAN).powi(2);

    let vhat_old = prev.v(bd).hat(mesh).values;
    for k in 0..mesh.num_cells() {
        let vol = mesh.volume(k);
        let drho = rho[k] - prev.rho.values[k];
        r[10] += vol * (hb * drho * drho + prev.rho.values[k] * (vhat[k] - vhat_old[k]).norm_squared());
        r[14] += dt * vol * rho[k].powf(gamma + 1.0);
    }
    for &f in mesh.interior_faces() {
        let face = mesh.face(f);
        let (k, l) = (face.owner, face.neighbor.unwrap());
        let un = s.u.dofs[f].dot(&face.normal);
        let up = if un >= 0.0 { rho[k] } else { rho[l] };
        let jump = rho[l] - rho[k];
        r[11] += dt * face.area * up * un.abs() * (vhat[l] - vhat[k]).norm_squared();
        r[12] += dt * hb * face.area * jump * jump * un.abs();
        r[13] += dt * prob.penalty * hb * face.area * jump * jump;
    }
    r
}

pub fn uniform_norms(prob: &Problem, traj: &Trajectory) -> Result<NormsReport, DiagnosticsError> {
    check_traj(&prob.mesh, traj)?;
    let gamma = prob.pressure.gas.gamma().unwrap_or_else(|| {
        log::warn!("general pressure law: L^γ columns use γ = 2");
        2.0
    });
    let n = traj.states.len();
    let rows: Vec<[f64; 15]> = (0..n)
        .into_par_iter()
        .map(|k| raw(prob, gamma, k.checked_sub(1).map(|j| &traj.states[j]), &traj.states[k]))
        .collect();
    let mut columns = Vec::with_capacity(15);
    for (i, acc) in ACC.iter().enumerate() {
        let acc = match (i, *acc) {
            (0, _) => Acc::Sup(gamma),
            (3, _) => Acc::Sum(gamma),
            (14, _) => Acc::Sum(gamma + 1.0),
            (_, a) => a,
        };
        let mut col = Vec::with_capacity(n);
        let mut running = 0.0f64;
        for (m, row) in rows.iter().enumerate() {
            let p = match acc {
                Acc::Sup(p) => {
                    running = running.max(row[i]);
                    p
                }
                Acc::Sum(p) => {
                    if m > 0 {
                        running += row[i];
                    }
                    p
                }
            };
            col.push(running.powf(1.0 / p));
        }
        columns.push(col);
    }
    Ok(NormsReport { gamma, columns })
}
