//! Residuals of the discrete continuity and momentum equations, and their
//! linearizations used by the Picard iteration.
//!
//! The continuity residual of cell `K` is the equation tested with `1_K`.
//! The momentum residual of interior face `σ` and direction `e_i` is the
//! equation tested with `φ_σ e_i`. Since `φ̂_σ = ¼` on both adjacent cells,
//! every cell-constant term enters as `¼ (L_K + L_L)` with a per-cell load `L`.

use rayon::prelude::*;

use super::{BoundaryData, Problem, SchemeError, State};
use crate::linalg::{LinalgError, TripletMatrix};
use crate::mesh::{FaceKind, Mesh};
use crate::spaces::{grad_h, QField, VField};
use crate::upwind::face_flux;
use crate::{Mat3, Vec3};

fn check_sizes(mesh: &Mesh, states: &[&State]) -> Result<(), SchemeError> {
    for s in states {
        if s.rho.values.len() != mesh.num_cells() || s.u.dofs.len() != mesh.num_faces() {
            return Err(SchemeError::MeshMismatch);
        }
    }
    Ok(())
}

fn check_pinned(mesh: &Mesh, bdata: &BoundaryData, u: &VField<Vec3>) -> Result<(), SchemeError> {
    for &f in mesh.boundary_faces() {
        if u.dofs[f] != bdata.u_b.dofs[f] {
            return Err(SchemeError::NotPinned { face: f });
        }
    }
    Ok(())
}

/// Per-cell continuity residual.
pub fn residual_continuity(prob: &Problem, prev: &State, cand: &State) -> Result<Vec<f64>, SchemeError> {
    let mesh = &prob.mesh;
    check_sizes(mesh, &[prev, cand])?;
    check_pinned(mesh, &prob.bdata, &cand.u)?;
    let table = face_flux(mesh, &cand.rho, &cand.u).map_err(|_| SchemeError::MeshMismatch)?;
    let sources = prob.source_loads(cand.t);
    let rho = &cand.rho.values;
    let out = (0..mesh.num_cells())
        .into_par_iter()
        .map(|k| {
            let mut r = mesh.volume(k) * (rho[k] - prev.rho.values[k]) / prob.dt;
            for &f in mesh.cell_faces(k) {
                let face = mesh.face(f);
                let un_b = || prob.bdata.u_b.dofs[f].dot(&mesh.outward_normal(f, k));
                match prob.kind(f) {
                    FaceKind::Interior => {
                        let l = face.other(k).unwrap();
                        r += face.area * table.flux(mesh, f, k);
                        r += prob.penalty * face.area * (rho[k] - rho[l]);
                    }
                    FaceKind::Outflow => r += face.area * rho[k] * un_b(),
                    FaceKind::Inflow => r += face.area * prob.bdata.rho_b.values[k] * un_b(),
                    FaceKind::Slip => {}
                }
            }
            if let Some((sr, _)) = &sources {
                r -= sr[k];
            }
            r
        })
        .collect();
    Ok(out)
}

/// Per-interior-face momentum residual, ordered as `mesh.interior_faces()`.
pub fn residual_momentum(prob: &Problem, prev: &State, cand: &State) -> Result<Vec<Vec3>, SchemeError> {
    let mesh = &prob.mesh;
    let bd = &prob.bdata;
    check_sizes(mesh, &[prev, cand])?;
    check_pinned(mesh, bd, &cand.u)?;
    let rho = &cand.rho.values;
    let vhat = cand.v(bd).hat(mesh).values;
    let vhat_old = prev.v(bd).hat(mesh).values;
    let uhat = cand.u.hat(mesh).values;
    let momentum = QField {
        values: (0..mesh.num_cells()).map(|k| vhat[k] * rho[k]).collect(),
    };
    let table = face_flux(mesh, &momentum, &cand.u).map_err(|_| SchemeError::MeshMismatch)?;
    let sources = prob.source_loads(cand.t);

    let loads: Vec<Vec3> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|k| {
            let vol = mesh.volume(k);
            let mut l = (vhat[k] * rho[k] - vhat_old[k] * prev.rho.values[k]) * (vol / prob.dt);
            for &f in mesh.cell_faces(k) {
                let face = mesh.face(f);
                let n = mesh.outward_normal(f, k);
                // background momentum, on every face
                l += bd.u_b.dofs[f] * (face.area * rho[k] * uhat[k].dot(&n));
                let un_b = bd.u_b.dofs[f].dot(&n);
                match prob.kind(f) {
                    FaceKind::Interior => {
                        let m = face.other(k).unwrap();
                        l += table.flux(mesh, f, k) * face.area;
                        l += (vhat[k] + vhat[m]) * (0.5 * prob.penalty * face.area * (rho[k] - rho[m]));
                    }
                    FaceKind::Outflow => l += vhat[k] * (face.area * rho[k] * un_b),
                    FaceKind::Inflow => l += vhat[k] * (face.area * bd.rho_b.values[k] * un_b),
                    FaceKind::Slip => {}
                }
            }
            if let Some((_, sm)) = &sources {
                l -= sm[k];
            }
            l
        })
        .collect();

    let grad = grad_h(mesh, &cand.u);
    let (mu, lambda) = (prob.params.mu, prob.params.lambda);
    let out = mesh
        .interior_faces()
        .par_iter()
        .map(|&f| {
            let face = mesh.face(f);
            let mut r = Vec3::zeros();
            for k in [face.owner, face.neighbor.unwrap()] {
                let n = mesh.outward_normal(f, k) * face.area;
                let div = grad[k].trace();
                r += loads[k] * 0.25;
                r += grad[k] * n * mu + n * ((mu + lambda) * div - prob.pressure.p_h(rho[k]));
            }
            r
        })
        .collect();
    Ok(out)
}

/// `x ↦ A x + c`.
#[derive(Debug, Clone)]
pub struct AffineOperator {
    pub matrix: TripletMatrix,
    pub constant: Vec<f64>,
}

impl AffineOperator {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.matrix.mul_vec(x);
        for (a, b) in y.iter_mut().zip(&self.constant) {
            *a += b;
        }
        y
    }

    /// The zero of the operator.
    pub fn solve(&self) -> Result<Vec<f64>, LinalgError> {
        let b: Vec<f64> = self.constant.iter().map(|c| -c).collect();
        self.matrix.solve(&b)
    }
}

/// Continuity residual at step time `t` as an affine function of `ρ`, for a
/// fixed velocity `u`.
pub fn continuity_operator(prob: &Problem, prev: &State, u: &VField<Vec3>, t: f64) -> AffineOperator {
    let mesh = &prob.mesh;
    let bd = &prob.bdata;
    let nc = mesh.num_cells();
    let sources = prob.source_loads(t);
    let mut a = TripletMatrix::new(nc);
    let mut c = vec![0.0; nc];
    for k in 0..nc {
        let vol = mesh.volume(k);
        let mut diag = vol / prob.dt;
        c[k] = -vol * prev.rho.values[k] / prob.dt;
        for &f in mesh.cell_faces(k) {
            let face = mesh.face(f);
            let n = mesh.outward_normal(f, k);
            match prob.kind(f) {
                FaceKind::Interior => {
                    let w = u.dofs[f].dot(&n);
                    diag += face.area * (w.max(0.0) + prob.penalty);
                    a.push(k, face.other(k).unwrap(), face.area * (w.min(0.0) - prob.penalty));
                }
                FaceKind::Outflow => diag += face.area * bd.u_b.dofs[f].dot(&n),
                FaceKind::Inflow => c[k] += face.area * bd.rho_b.values[k] * bd.u_b.dofs[f].dot(&n),
                FaceKind::Slip => {}
            }
        }
        a.push(k, k, diag);
        if let Some((sr, _)) = &sources {
            c[k] -= sr[k];
        }
    }
    AffineOperator { matrix: a, constant: c }
}

/// Position of every interior face in `mesh.interior_faces()`.
pub(crate) fn interior_slots(mesh: &Mesh) -> Vec<Option<usize>> {
    let mut slot = vec![None; mesh.num_faces()];
    for (i, &f) in mesh.interior_faces().iter().enumerate() {
        slot[f] = Some(i);
    }
    slot
}

fn push_block(a: &mut TripletMatrix, row: usize, col: usize, m: &Mat3) {
    for i in 0..3 {
        for j in 0..3 {
            if m[(i, j)] != 0.0 {
                a.push(3 * row + i, 3 * col + j, m[(i, j)]);
            }
        }
    }
}

/// Momentum residual as an affine function of the interior velocities
/// (three unknowns per interior face), for fixed density `rho` and
/// convecting velocity `w` in the upwind flux.
pub fn momentum_operator(
    prob: &Problem,
    prev: &State,
    rho: &QField<f64>,
    w: &VField<Vec3>,
    t: f64,
) -> AffineOperator {
    let mesh = &prob.mesh;
    let bd = &prob.bdata;
    let nc = mesh.num_cells();
    let slot = interior_slots(mesh);
    let ni = mesh.interior_faces().len();
    let r = &rho.values;
    let vhat_old = prev.v(bd).hat(mesh).values;
    let ub_hat = bd.u_b.hat(mesh).values;
    let grad_b = grad_h(mesh, &bd.u_b);
    let sources = prob.source_loads(t);
    let id = Mat3::identity();

    // L_K = Σ_M C_KM v̂_M + c_K
    let loads: Vec<(Vec<(usize, Mat3)>, Vec3)> = (0..nc)
        .into_par_iter()
        .map(|k| {
            let vol = mesh.volume(k);
            let bg = grad_b[k] * (r[k] * vol);
            let mut diag = id * (vol * r[k] / prob.dt) + bg;
            let mut off = Vec::new();
            let mut c = bg * ub_hat[k] - vhat_old[k] * (vol * prev.rho.values[k] / prob.dt);
            for &f in mesh.cell_faces(k) {
                let face = mesh.face(f);
                let n = mesh.outward_normal(f, k);
                match prob.kind(f) {
                    FaceKind::Interior => {
                        let m = face.other(k).unwrap();
                        let wn = w.dofs[f].dot(&n);
                        let pen = 0.5 * prob.penalty * face.area * (r[k] - r[m]);
                        diag += id * (face.area * r[k] * wn.max(0.0) + pen);
                        off.push((m, id * (face.area * r[m] * wn.min(0.0) + pen)));
                    }
                    FaceKind::Outflow => diag += id * (face.area * r[k] * bd.u_b.dofs[f].dot(&n)),
                    FaceKind::Inflow => {
                        diag += id * (face.area * bd.rho_b.values[k] * bd.u_b.dofs[f].dot(&n))
                    }
                    FaceKind::Slip => {}
                }
            }
            if let Some((_, sm)) = &sources {
                c -= sm[k];
            }
            off.push((k, diag));
            (off, c)
        })
        .collect();

    // v̂_M = ¼ Σ_{σ' interior} (u_σ' - u_{B,σ'})
    let vhat_const: Vec<Vec3> = (0..nc)
        .map(|m| {
            let mut s = Vec3::zeros();
            for &f in mesh.cell_faces(m) {
                if slot[f].is_some() {
                    s -= bd.u_b.dofs[f];
                }
            }
            s * 0.25
        })
        .collect();

    let (mu, lambda) = (prob.params.mu, prob.params.lambda);
    let mut a = TripletMatrix::new(3 * ni);
    let mut c = vec![0.0; 3 * ni];
    for (row, &f) in mesh.interior_faces().iter().enumerate() {
        let face = mesh.face(f);
        let mut cr = Vec3::zeros();
        for k in [face.owner, face.neighbor.unwrap()] {
            let (blocks, ck) = &loads[k];
            cr += ck * 0.25;
            for (m, cm) in blocks {
                cr += cm * vhat_const[*m] * 0.25;
                let b = cm / 16.0;
                for &g in mesh.cell_faces(*m) {
                    if let Some(col) = slot[g] {
                        push_block(&mut a, row, col, &b);
                    }
                }
            }
            let vol = mesh.volume(k);
            let n = mesh.outward_normal(f, k);
            for &g in mesh.cell_faces(k) {
                let ng = mesh.outward_normal(g, k);
                let scale = face.area * mesh.face(g).area / vol;
                let b = (id * (mu * n.dot(&ng)) + n * ng.transpose() * (mu + lambda)) * scale;
                match slot[g] {
                    Some(col) => push_block(&mut a, row, col, &b),
                    None => cr += b * bd.u_b.dofs[g],
                }
            }
            cr -= n * (face.area * prob.pressure.p_h(r[k]));
        }
        c[3 * row..3 * row + 3].copy_from_slice(cr.as_slice());
    }
    AffineOperator { matrix: a, constant: c }
}

/// Interior velocity unknowns of `u`, three per interior face.
pub(crate) fn pack_velocity(mesh: &Mesh, u: &VField<Vec3>) -> Vec<f64> {
    mesh.interior_faces()
        .iter()
        .flat_map(|&f| u.dofs[f].iter().copied().collect::<Vec<_>>())
        .collect()
}

/// `u_B` with the interior dofs replaced by `x`.
pub(crate) fn unpack_velocity(mesh: &Mesh, bdata: &BoundaryData, x: &[f64]) -> VField<Vec3> {
    let mut u = bdata.u_b.clone();
    for (i, &f) in mesh.interior_faces().iter().enumerate() {
        u.dofs[f] = Vec3::new(x[3 * i], x[3 * i + 1], x[3 * i + 2]);
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{CatalogField, MmsSources, Reference};
    use crate::constitutive::GasModel;
    use crate::mesh::{kuhn_box, reference_tet};
    use crate::scheme::{init, SchemeParams};
    use crate::spaces::{div_h, proj_v};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gas() -> GasModel {
        GasModel::isentropic(1.0, 4.0).unwrap()
    }

    fn inflow_problem(n: usize) -> Problem {
        let mesh = kuhn_box([n; 3], [1.0; 3]);
        let bd = BoundaryData::from_fns(&mesh, |_| 1.5, |x| Vec3::new(0.5 + 0.2 * x.y, 0.1 * x.z, 0.0)).unwrap();
        Problem::new(mesh, bd, SchemeParams::default(), gas()).unwrap()
    }

    fn random_state(prob: &Problem, seed: u64, t: f64) -> State {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = &prob.mesh;
        let rho = QField::from_fn(mesh, |_| rng.gen_range(0.5..2.0));
        let mut u = prob.bdata.u_b.clone();
        for &f in mesh.interior_faces() {
            u.dofs[f] += Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        State { k: 1, t, rho, u }
    }

    #[test]
    fn uniform_rest_state_has_zero_residuals() {
        let mesh = kuhn_box([2; 3], [1.0; 3]);
        let bd = BoundaryData::from_fns(&mesh, |_| 1.0, |_| Vec3::zeros()).unwrap();
        let prob = Problem::new(mesh, bd, SchemeParams::default(), gas()).unwrap();
        let s = init(&prob.mesh, &prob.bdata, |_| 2.0, |_| Vec3::zeros()).unwrap();
        assert!(residual_continuity(&prob, &s, &s).unwrap().iter().all(|&r| r == 0.0));
        let rm = residual_momentum(&prob, &s, &s).unwrap();
        let scale = prob.pressure.p_h(2.0) * prob.h * prob.h;
        assert!(rm.iter().all(|r| r.norm() < 1e-14 * scale), "{:?}", rm);
    }

    /// One cell, one outflow face of area A with `u_B·n = 1`, the others slip.
    #[test]
    fn single_cell_outflow_residual() {
        let mesh = reference_tet();
        // u_B = n on the slanted face, zero elsewhere
        let ub = VField::from_fn(&mesh, |f| {
            let n = mesh.face(f).normal;
            if n.iter().all(|&c| c > 0.0) {
                n
            } else {
                Vec3::zeros()
            }
        });
        let bd = BoundaryData::new(&mesh, QField::constant(&mesh, 1.0), ub).unwrap();
        assert_eq!(bd.partition.outflow_faces.len(), 1);
        assert_eq!(bd.partition.slip_faces.len(), 3);
        let f = bd.partition.outflow_faces[0];
        let a = mesh.face(f).area;
        let prob = Problem::new(mesh, bd, SchemeParams::default(), gas()).unwrap();
        let prev = State { k: 0, t: 0.0, rho: QField { values: vec![1.3] }, u: prob.bdata.u_b.clone() };
        let cand = State { k: 1, t: prob.dt, rho: QField { values: vec![1.0] }, u: prob.bdata.u_b.clone() };
        let r = residual_continuity(&prob, &prev, &cand).unwrap();
        let vol = prob.mesh.volume(0);
        let expected = vol * (1.0 - 1.3) / prob.dt + a * 1.0;
        assert!((r[0] - expected).abs() < 1e-15, "{} {}", r[0], expected);
    }

    #[test]
    fn continuity_sum_telescopes_to_boundary_terms() {
        let prob = inflow_problem(2);
        let prev = random_state(&prob, 1, 0.0);
        let cand = random_state(&prob, 2, prob.dt);
        let r = residual_continuity(&prob, &prev, &cand).unwrap();
        let mesh = &prob.mesh;
        let mut expected = (cand.rho.integral(mesh) - prev.rho.integral(mesh)) / prob.dt;
        for &f in &prob.bdata.partition.outflow_faces {
            let k = mesh.face(f).owner;
            expected += mesh.face(f).area * cand.rho.values[k] * prob.bdata.u_b.dofs[f].dot(&mesh.face(f).normal);
        }
        for &f in &prob.bdata.partition.inflow_faces {
            let k = mesh.face(f).owner;
            expected += mesh.face(f).area * prob.bdata.rho_b.values[k] * prob.bdata.u_b.dofs[f].dot(&mesh.face(f).normal);
        }
        let sum: f64 = r.iter().sum();
        assert!((sum - expected).abs() < 1e-13 * expected.abs().max(1.0), "{sum} {expected}");
    }

    #[test]
    fn operators_reproduce_residuals() {
        let mut prob = inflow_problem(2);
        let r = Reference {
            r: CatalogField::scalar_constant(1.0),
            v: CatalogField::TrigProduct {
                offset: Vec3::zeros(),
                amp: Vec3::new(0.1, 0.2, -0.1),
                k: Vec3::new(3.0, 3.0, 3.0),
                phase: Vec3::zeros(),
                nu: 1.0,
            },
            u_b: CatalogField::Const3 { c: Vec3::new(0.5, 0.0, 0.0) },
        };
        let pressure = prob.pressure.clone();
        prob = prob.with_sources(MmsSources { reference: r, mu: 1.0, lambda: 0.0, pressure });
        let prev = random_state(&prob, 3, 0.0);
        let cand = random_state(&prob, 4, prob.dt);
        let mesh = &prob.mesh;

        let rc = residual_continuity(&prob, &prev, &cand).unwrap();
        let oc = continuity_operator(&prob, &prev, &cand.u, cand.t).apply(&cand.rho.values);
        for (a, b) in rc.iter().zip(&oc) {
            assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()), "{a} {b}");
        }

        let rm = residual_momentum(&prob, &prev, &cand).unwrap();
        let x = pack_velocity(mesh, &cand.u);
        let om = momentum_operator(&prob, &prev, &cand.rho, &cand.u, cand.t).apply(&x);
        for (i, a) in rm.iter().enumerate() {
            for j in 0..3 {
                assert!((a[j] - om[3 * i + j]).abs() < 1e-12 * (1.0 + a.norm()), "{} {}", a[j], om[3 * i + j]);
            }
        }
        assert_eq!(unpack_velocity(mesh, &prob.bdata, &x), cand.u);
    }

    /// With constant density, zero velocity data and the convection switched
    /// off, the momentum residual is the gradient of the discrete viscous
    /// energy `½∫(μ|∇_h u|² + (μ+λ)(div_h u)²)`.
    #[test]
    fn viscous_part_is_energy_gradient() {
        let mesh = kuhn_box([2; 3], [1.0; 3]);
        let bd = BoundaryData::from_fns(&mesh, |_| 1.0, |_| Vec3::zeros()).unwrap();
        let params = SchemeParams { mu: 0.8, lambda: 0.3, ..Default::default() };
        let prob = Problem::new(mesh, bd, params, gas()).unwrap();
        let mesh = &prob.mesh;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..3 * mesh.interior_faces().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rho = QField::constant(mesh, 1.0);
        let prev = State { k: 0, t: 0.0, rho: rho.clone(), u: VField::zeros(mesh) };
        let zero = VField::zeros(mesh);
        let op = momentum_operator(&prob, &prev, &rho, &zero, prob.dt);
        // with w = 0 and ρ constant only the mass term |K|/Δt v̂ remains besides viscosity
        let energy = |x: &[f64]| {
            let u = unpack_velocity(mesh, &prob.bdata, x);
            let g = grad_h(mesh, &u);
            let d = div_h(mesh, &u);
            (0..mesh.num_cells())
                .map(|k| 0.5 * mesh.volume(k) * (0.8 * g[k].norm_squared() + 1.1 * d.values[k].powi(2)))
                .sum::<f64>()
        };
        let mass = |x: &[f64]| {
            let u = unpack_velocity(mesh, &prob.bdata, x);
            let vh = u.hat(mesh).values;
            (0..mesh.num_cells()).map(|k| 0.5 * mesh.volume(k) / prob.dt * vh[k].norm_squared()).sum::<f64>()
        };
        let y = op.apply(&x);
        let e = 1e-6;
        for j in (0..x.len()).step_by(7) {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += e;
            xm[j] -= e;
            let fd = (energy(&xp) + mass(&xp) - energy(&xm) - mass(&xm)) / (2.0 * e);
            // pressure of a constant density is orthogonal to V₀
            assert!((fd - y[j]).abs() < 1e-7, "{j}: {fd} {}", y[j]);
        }
    }

    #[test]
    fn constant_pressure_is_orthogonal_to_v0() {
        let prob = inflow_problem(2);
        let mesh = &prob.mesh;
        let phi = proj_v(mesh, |x| Vec3::new(x.x * (1.0 - x.x) * x.y * (1.0 - x.y), 0.0, x.z * (1.0 - x.z)));
        let d = div_h(mesh, &phi);
        let s: f64 = (0..mesh.num_cells()).map(|k| mesh.volume(k) * d.values[k]).sum();
        assert!(s.abs() < 1e-15);
    }

    #[test]
    fn continuity_matrix_is_a_column_dominant_z_matrix() {
        for seed in 0..5 {
            let prob = inflow_problem(2);
            let prev = random_state(&prob, seed, 0.0);
            let op = continuity_operator(&prob, &prev, &random_state(&prob, seed + 10, 0.0).u, prob.dt);
            let a = op.matrix.to_dense();
            let n = a.len();
            for j in 0..n {
                let mut col = 0.0;
                for i in 0..n {
                    if i != j {
                        assert!(a[i][j] <= 0.0);
                    }
                    col += a[i][j];
                }
                assert!(a[j][j] > 0.0 && col > 0.0);
            }
        }
    }
}
