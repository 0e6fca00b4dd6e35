//! Consistency probes and the relative energy against a smooth reference.
//!
//! A probe evaluates the variational form of one equation on the computed
//! trajectory with a smooth test function `φ`, frozen at `t_k` inside step
//! `k`. For the exact solution of the forced system the result would be zero;
//! for the scheme it is the realized consistency remainder, which should
//! shrink under refinement.

use rayon::prelude::*;

use super::{check_traj, DiagnosticsError};
use crate::analytic::{CatalogField, Reference};
use crate::constitutive::Potential;
use crate::mesh::{FaceKind, Mesh};
use crate::quadrature::{tet_collapsed, tri_collapsed, TetRule, TriRule};
use crate::scheme::{Problem, Trajectory};
use crate::spaces::{grad_h, lp_norm_v, proj_v, VField};
use crate::{Mat3, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    /// `Δt G_k`, entry 0 is zero.
    pub per_step: Vec<f64>,
    /// `Σ_k Δt G_k`.
    pub value: f64,
}

impl ProbeReport {
    fn from_steps(per_step: Vec<f64>) -> Self {
        let value = per_step.iter().sum();
        Self { per_step, value }
    }
}

struct Rules {
    tet: TetRule,
    tri: TriRule,
}

impl Rules {
    fn new() -> Self {
        Self { tet: tet_collapsed(4), tri: tri_collapsed(4) }
    }

    fn face_mean(&self, mesh: &Mesh, f: usize, g: impl Fn(&Vec3) -> Vec3) -> Vec3 {
        self.tri.map(&mesh.face_points(f)).fold(Vec3::zeros(), |acc, (x, w)| acc + g(&x) * w)
    }

    /// `∫_K ∇φ` via the divergence theorem, `(i, j) = ∫_K ∂_j φ_i`.
    fn cell_gradient(&self, mesh: &Mesh, face_means: &[Vec3], k: usize) -> Mat3 {
        mesh.cell_faces(k)
            .iter()
            .fold(Mat3::zeros(), |acc, &f| acc + face_means[f] * mesh.outward_normal(f, k).transpose() * mesh.face(f).area)
    }
}

/// Realized `∫⟨R^C, φ⟩ dt` for a scalar `φ` (component 0 of the catalog field).
pub fn continuity_probe(prob: &Problem, traj: &Trajectory, phi: &CatalogField) -> Result<ProbeReport, DiagnosticsError> {
    let mesh = &prob.mesh;
    let bd = &prob.bdata;
    check_traj(mesh, traj)?;
    let rules = Rules::new();
    let dt = traj.dt;
    let n = traj.states.len();
    let steps: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            if k == 0 {
                return 0.0;
            }
            let (prev, s) = (&traj.states[k - 1], &traj.states[k]);
            let t = s.t;
            let sources = prob.sources.as_ref();
            let mut g = 0.0;
            for c in 0..mesh.num_cells() {
                let vol = mesh.volume(c);
                let verts = mesh.cell_points(c);
                let mut phi_mean = 0.0;
                let mut transport = 0.0;
                let mut src = 0.0;
                for (l, w) in rules.tet.points.iter().zip(&rules.tet.weights) {
                    let x = verts.iter().zip(l).fold(Vec3::zeros(), |a, (v, li)| a + v * *li);
                    let p = phi.value(&x, t).x;
                    let grad = phi.jacobian(&x, t).row(0).transpose();
                    phi_mean += w * p;
                    transport += w * s.u.eval_bary(mesh, c, l).dot(&grad);
                    if let Some(sr) = sources {
                        src += w * sr.s_rho(&x, t) * p;
                    }
                }
                g += vol * ((s.rho.values[c] - prev.rho.values[c]) / dt * phi_mean - s.rho.values[c] * transport - src);
            }
            for &f in mesh.boundary_faces() {
                let face = mesh.face(f);
                let un = bd.u_b.dofs[f].dot(&face.normal);
                let density = match bd.partition.kind(f) {
                    FaceKind::Outflow => s.rho.values[face.owner],
                    FaceKind::Inflow => bd.rho_b.values[face.owner],
                    _ => continue,
                };
                let phi_mean = rules.tri.mean(&mesh.face_points(f), |x| phi.value(x, t).x);
                g += face.area * density * un * phi_mean;
            }
            dt * g
        })
        .collect();
    Ok(ProbeReport::from_steps(steps))
}

/// Realized `∫⟨R^M, φ⟩ dt` for a vector `φ` vanishing on the boundary.
pub fn momentum_probe(prob: &Problem, traj: &Trajectory, phi: &CatalogField) -> Result<ProbeReport, DiagnosticsError> {
    let mesh = &prob.mesh;
    let bd = &prob.bdata;
    check_traj(mesh, traj)?;
    let rules = Rules::new();
    let dt = traj.dt;
    let (mu, lambda) = (prob.params.mu, prob.params.lambda);
    let grad_b = grad_h(mesh, &bd.u_b);
    let n = traj.states.len();
    let steps: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            if k == 0 {
                return 0.0;
            }
            let (prev, s) = (&traj.states[k - 1], &traj.states[k]);
            let t = s.t;
            let vhat = s.v(bd).hat(mesh).values;
            let vhat_old = prev.v(bd).hat(mesh).values;
            let uhat = s.u.hat(mesh).values;
            let grad_u = grad_h(mesh, &s.u);
            let face_means: Vec<Vec3> = (0..mesh.num_faces()).map(|f| rules.face_mean(mesh, f, |x| phi.value(x, t))).collect();
            let sources = prob.sources.as_ref();
            let mut g = 0.0;
            for c in 0..mesh.num_cells() {
                let vol = mesh.volume(c);
                let verts = mesh.cell_points(c);
                let rho = s.rho.values[c];
                let mut phi_mean = Vec3::zeros();
                let mut convect = 0.0;
                let mut background = 0.0;
                let mut src = 0.0;
                for (l, w) in rules.tet.points.iter().zip(&rules.tet.weights) {
                    let x = verts.iter().zip(l).fold(Vec3::zeros(), |a, (v, li)| a + v * *li);
                    let p = phi.value(&x, t);
                    let jp = phi.jacobian(&x, t);
                    let ub = bd.u_b.eval_bary(mesh, c, l);
                    phi_mean += p * *w;
                    // ρ u⊗û : ∇φ
                    convect += w * s.u.eval_bary(mesh, c, l).dot(&(jp * uhat[c]));
                    // ∇(u_B·φ) = ∇u_Bᵀ φ + ∇φᵀ u_B
                    let grad_dot = grad_b[c].transpose() * p + jp.transpose() * ub;
                    background += w * uhat[c].dot(&grad_dot);
                    if let Some(sm) = sources {
                        src += w * sm.s_m(&x, t).dot(&p);
                    }
                }
                let gp = rules.cell_gradient(mesh, &face_means, c);
                let gu = &grad_u[c];
                let time = (vhat[c] * rho - vhat_old[c] * prev.rho.values[c]).dot(&phi_mean) / dt;
                let viscous = mu * gu.component_mul(&gp).sum() / vol + (mu + lambda) * gu.trace() * gp.trace() / vol;
                let pressure = prob.pressure.p_h(rho) * gp.trace() / vol;
                g += vol * (time - rho * convect + rho * background + viscous - pressure - src);
            }
            dt * g
        })
        .collect();
    Ok(ProbeReport::from_steps(steps))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelativeEnergyReport {
    /// `ℰ(ρ^k, v̂^k | r(t_k), V(t_k))`.
    pub rel_energy: Vec<f64>,
    /// `‖u^k - Ũ(t_k)‖²_{L²}` with `Ũ = Π^V(V + u_B)`.
    pub vel_l2: Vec<f64>,
    /// `‖∇_h(u^k - Ũ(t_k))‖²_{L²}`.
    pub vel_grad: Vec<f64>,
    /// `sup_k ℰ + Σ_{k≥1} Δt (vel_l2 + vel_grad)`.
    pub error: f64,
}

/// Relative energy with the unregularized potential, plus velocity errors.
pub fn relative_energy(prob: &Problem, traj: &Trajectory, reference: &Reference) -> Result<RelativeEnergyReport, DiagnosticsError> {
    let mesh = &prob.mesh;
    check_traj(mesh, traj)?;
    let gas = &prob.pressure.gas;
    let rule = tet_collapsed(4);
    let rows = traj
        .states
        .par_iter()
        .map(|s| -> Result<(f64, f64, f64), DiagnosticsError> {
            let t = s.t;
            let vhat = s.v(&prob.bdata).hat(mesh).values;
            let mut e = 0.0;
            for c in 0..mesh.num_cells() {
                let rho = s.rho.values[c];
                let mut cell = 0.0;
                for (x, w) in rule.map(&mesh.cell_points(c)) {
                    let r = reference.r.value(&x, t).x;
                    if !(r > 0.0) {
                        return Err(DiagnosticsError::NonPositiveReference { value: r, x: [x.x, x.y, x.z] });
                    }
                    let dv = vhat[c] - reference.v.value(&x, t);
                    let rel = gas.relative(rho, r).map_err(|_| DiagnosticsError::Domain { step: s.k, cell: c, value: rho })?;
                    cell += w * (0.5 * rho * dv.norm_squared() + rel);
                }
                e += mesh.volume(c) * cell;
            }
            let target = proj_v(mesh, |x| reference.v.value(x, t) + reference.u_b.value(x, t));
            let diff: VField<Vec3> = s.u.sub(&target);
            let l2 = lp_norm_v(mesh, &diff, 2.0).map_err(|_| DiagnosticsError::MeshMismatch)?.powi(2);
            let gd = grad_h(mesh, &diff);
            let h1 = (0..mesh.num_cells()).map(|c| mesh.volume(c) * gd[c].norm_squared()).sum();
            Ok((e, l2, h1))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rel_energy: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let vel_l2: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let vel_grad: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let sup = rel_energy.iter().copied().fold(0.0, f64::max);
    let integrated: f64 = (1..rows.len()).map(|k| traj.dt * (vel_l2[k] + vel_grad[k])).sum();
    Ok(RelativeEnergyReport { rel_energy, vel_l2, vel_grad, error: sup + integrated })
}
