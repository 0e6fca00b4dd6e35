//! Upwind values, the `Up` operator and face fluxes.
//!
//! For an interior face with stored normal `n_σ` (owner to neighbor),
//! `Up_σ[g, u] = g⁻ [u_σ·n_σ]⁺ + g⁺ [u_σ·n_σ]⁻` where `g⁻` is the owner value.
//! The flux out of the owner is `F_{σ,K} = Up_σ` and out of the neighbor
//! `F_{σ,L} = -Up_σ`; both come from a single evaluation per face.

use thiserror::Error;

use crate::mesh::{BoundaryPartition, FaceKind, Mesh};
use crate::quadrature::{tet_degree2, tri_collapsed};
use crate::spaces::{div_h, QField, SmoothScalar, VField, Value};
use crate::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UpwindError {
    #[error("face {0} is a boundary face")]
    BoundaryFace(usize),
    #[error("field sizes do not match the mesh ({cells} cells, {faces} faces)")]
    MeshMismatch { cells: usize, faces: usize },
    #[error("u - u_B is nonzero on boundary face {0}")]
    NotPinned(usize),
}

fn pos(x: f64) -> f64 {
    x.max(0.0)
}

fn neg(x: f64) -> f64 {
    x.min(0.0)
}

/// `Up = g⁻ [u_n]⁺ + g⁺ [u_n]⁻`.
pub fn up_operator<T: Value>(g_minus: T, g_plus: T, u_n: f64) -> T {
    g_minus * pos(u_n) + g_plus * neg(u_n)
}

/// Upwind value seen from `cell`: `g_K` if `u_σ·n_{σ,K} ≥ 0`, otherwise the
/// value of the other cell.
pub fn upwind_value<T: Value>(
    mesh: &Mesh,
    g: &QField<T>,
    u: &VField<Vec3>,
    f: usize,
    cell: usize,
) -> Result<T, UpwindError> {
    let face = mesh.face(f);
    let other = face.other(cell).ok_or(UpwindError::BoundaryFace(f))?;
    let un = u.dofs[f].dot(&mesh.outward_normal(f, cell));
    Ok(if un >= 0.0 {
        g.values[cell]
    } else {
        g.values[other]
    })
}

/// `u_σ·n_σ` for every face in the stored orientation.
pub fn normal_velocity(mesh: &Mesh, u: &VField<Vec3>) -> Vec<f64> {
    (0..mesh.num_faces())
        .map(|f| u.dofs[f].dot(&mesh.face(f).normal))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceFluxTable<T> {
    /// `u_σ·n_σ` per face.
    pub un: Vec<f64>,
    /// `Up_σ` per face, zero on boundary faces.
    pub up: Vec<T>,
}

impl<T: Value> FaceFluxTable<T> {
    /// `F_{σ,K}` for an interior face `f` adjacent to `cell`.
    pub fn flux(&self, mesh: &Mesh, f: usize, cell: usize) -> T {
        if mesh.face(f).owner == cell {
            self.up[f]
        } else {
            -self.up[f]
        }
    }
}

pub fn face_flux<T: Value>(
    mesh: &Mesh,
    g: &QField<T>,
    u: &VField<Vec3>,
) -> Result<FaceFluxTable<T>, UpwindError> {
    if g.values.len() != mesh.num_cells() || u.dofs.len() != mesh.num_faces() {
        return Err(UpwindError::MeshMismatch {
            cells: mesh.num_cells(),
            faces: mesh.num_faces(),
        });
    }
    let un = normal_velocity(mesh, u);
    let up = (0..mesh.num_faces())
        .map(|f| {
            let face = mesh.face(f);
            match face.neighbor {
                Some(nb) => up_operator(g.values[face.owner], g.values[nb], un[f]),
                None => T::zero(),
            }
        })
        .collect();
    Ok(FaceFluxTable { un, up })
}

/// `|Σ_K r_K Σ_{σ∈E(K)∩E_int} |σ| F_{σ,K} + Σ_{σ∈E_int} |σ| Up_σ [[r]]_σ|`.
pub fn identity_up2(
    mesh: &Mesh,
    r: &QField<f64>,
    g: &QField<f64>,
    u: &VField<Vec3>,
) -> Result<f64, UpwindError> {
    let table = face_flux(mesh, g, u)?;
    let mut lhs = 0.0;
    for k in 0..mesh.num_cells() {
        for &f in mesh.cell_faces(k) {
            if mesh.face(f).is_interior() {
                lhs += r.values[k] * mesh.face(f).area * table.flux(mesh, f, k);
            }
        }
    }
    let mut rhs = 0.0;
    for &f in mesh.interior_faces() {
        let face = mesh.face(f);
        let jump = r.values[face.neighbor.unwrap()] - r.values[face.owner];
        rhs -= face.area * table.up[f] * jump;
    }
    Ok((lhs - rhs).abs())
}

/// Two sides of the identity expressing `∫ g u·∇φ` through the fluxes,
/// for arbitrary `r ∈ Q` and `u - u_B ∈ V₀`. Returns `(lhs, rhs)`.
pub fn up3_sides(
    mesh: &Mesh,
    r: &QField<f64>,
    g: &QField<f64>,
    u: &VField<Vec3>,
    u_b: &VField<Vec3>,
    partition: &BoundaryPartition,
    phi: &dyn SmoothScalar,
) -> Result<(f64, f64), UpwindError> {
    for &f in mesh.boundary_faces() {
        if u.dofs[f] != u_b.dofs[f] {
            return Err(UpwindError::NotPinned(f));
        }
    }
    let table = face_flux(mesh, g, u)?;
    let vol_rule = tet_degree2();
    let face_rule = tri_collapsed(3);
    let div = div_h(mesh, u);

    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for k in 0..mesh.num_cells() {
        let (gk, rk) = (g.values[k], r.values[k]);
        let pts = mesh.cell_points(k);
        let mut cell_conv = 0.0;
        let mut cell_div = 0.0;
        for (l, w) in vol_rule.points.iter().zip(&vol_rule.weights) {
            let x = pts[0] * l[0] + pts[1] * l[1] + pts[2] * l[2] + pts[3] * l[3];
            cell_conv += w * u.eval_bary(mesh, k, l).dot(&phi.gradient(&x));
            cell_div += w * (rk - phi.value(&x));
        }
        lhs += mesh.volume(k) * gk * cell_conv;
        rhs += mesh.volume(k) * cell_div * gk * div.values[k];

        let faces = mesh.cell_faces(k);
        for (i, &f) in faces.iter().enumerate() {
            let face = mesh.face(f);
            let n = mesh.outward_normal(f, k);
            let fpts = mesh.face_points(f);
            let mut mean_phi = 0.0;
            let mut mean_corr = 0.0;
            for (l3, w) in face_rule.points.iter().zip(&face_rule.weights) {
                let x = fpts[0] * l3[0] + fpts[1] * l3[1] + fpts[2] * l3[2];
                let mut l4 = mesh.barycentric(k, &x);
                l4[i] = 0.0;
                let uk = u.eval_bary(mesh, k, &l4);
                let p = phi.value(&x);
                mean_phi += w * p;
                mean_corr += w * (uk - u.dofs[f]).dot(&n) * (p - rk);
            }
            rhs += face.area * gk * mean_corr;
            if let Some(other) = face.other(k) {
                rhs -= face.area * table.flux(mesh, f, k) * rk;
                let jump = g.values[other] - gk;
                let un_k = table.un[f] * mesh.orientation(f, k);
                rhs += face.area * (rk - mean_phi) * jump * neg(un_k);
            } else if matches!(partition.kind(f), FaceKind::Inflow | FaceKind::Outflow) {
                rhs += face.area * gk * u_b.dofs[f].dot(&face.normal) * (mean_phi - rk);
            }
        }
    }
    Ok((lhs, rhs))
}

pub fn identity_up3(
    mesh: &Mesh,
    r: &QField<f64>,
    g: &QField<f64>,
    u: &VField<Vec3>,
    u_b: &VField<Vec3>,
    partition: &BoundaryPartition,
    phi: &dyn SmoothScalar,
) -> Result<f64, UpwindError> {
    let (l, r) = up3_sides(mesh, r, g, u, u_b, partition, phi)?;
    Ok((l - r).abs())
}
