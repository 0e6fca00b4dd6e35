//! Structural checks on a mesh: admissibility, boundary fit and the
//! discrete identities evaluated on random fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{BoundaryPartition, Mesh};
use crate::spaces::{div_h, grad_h, identity_proj, identity_vv1, proj_v, QField, SmoothScalar, SmoothVector, VField};
use crate::upwind::{face_flux, identity_up2, up3_sides, upwind_value};
use crate::{Mat3, Vec3};

pub const IDENTITY_TOL: f64 = 1e-12;

/// One identity evaluated on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityResult {
    pub name: &'static str,
    /// `|lhs - rhs|` divided by the size of the terms.
    pub relative: f64,
}

impl IdentityResult {
    pub fn pass(&self) -> bool {
        self.relative <= IDENTITY_TOL
    }
}

/// `c + B x + (xᵀA_0x, xᵀA_1x, xᵀA_2x)`; the first component doubles as a scalar.
struct Quadratic {
    c: Vec3,
    b: Mat3,
    a: [Mat3; 3],
}

impl Quadratic {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut m = || Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let (b, a0, a1, a2) = (m(), m(), m(), m());
        let sym = |a: Mat3| (a + a.transpose()) * 0.5;
        Self { c: Vec3::new(0.5, -0.25, 0.75), b, a: [sym(a0), sym(a1), sym(a2)] }
    }
}

impl SmoothVector for Quadratic {
    fn value(&self, x: &Vec3) -> Vec3 {
        self.c + self.b * x + Vec3::from_fn(|i, _| x.dot(&(self.a[i] * x)))
    }
    fn jacobian(&self, x: &Vec3) -> Mat3 {
        let mut j = self.b;
        for i in 0..3 {
            j.set_row(i, &(j.row(i) + (self.a[i] * x * 2.0).transpose()));
        }
        j
    }
}

impl SmoothScalar for Quadratic {
    fn value(&self, x: &Vec3) -> f64 {
        SmoothVector::value(self, x).x
    }
    fn gradient(&self, x: &Vec3) -> Vec3 {
        self.jacobian(x).row(0).transpose()
    }
}

fn rel(diff: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Evaluates every identity once with fields drawn from `seed`. Boundary
/// velocity dofs are pinned to `u_b`.
pub fn identity_suite(mesh: &Mesh, u_b: &VField<Vec3>, partition: &BoundaryPartition, seed: u64) -> Vec<IdentityResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = QField::from_fn(mesh, |_| rng.gen_range(0.1..2.0));
    let g = QField::from_fn(mesh, |_| rng.gen_range(0.1..2.0));
    let mut u = VField::from_fn(mesh, |_| Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0)));
    for &f in mesh.boundary_faces() {
        u.dofs[f] = u_b.dofs[f];
    }
    let q = Quadratic::random(&mut rng);
    let mut out = Vec::new();

    // antisymmetry and per-side upwind recomputation
    let table = face_flux(mesh, &g, &u).expect("fields built on this mesh");
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for &f in mesh.interior_faces() {
        let face = mesh.face(f);
        let nb = face.neighbor.unwrap();
        diff = diff.max((table.flux(mesh, f, face.owner) + table.flux(mesh, f, nb)).abs());
        for k in [face.owner, nb] {
            let un = u.dofs[f].dot(&mesh.outward_normal(f, k));
            let up = upwind_value(mesh, &g, &u, f, k).expect("interior face");
            diff = diff.max((up * un - table.flux(mesh, f, k)).abs());
            scale = scale.max((up * un).abs());
        }
    }
    out.push(IdentityResult { name: "up1", relative: rel(diff, scale) });

    let d = identity_up2(mesh, &r, &g, &u).expect("fields built on this mesh");
    let scale: f64 = mesh
        .interior_faces()
        .iter()
        .map(|&f| {
            let face = mesh.face(f);
            face.area * table.up[f].abs() * (r.values[face.owner].abs() + r.values[face.neighbor.unwrap()].abs())
        })
        .sum();
    out.push(IdentityResult { name: "up2", relative: rel(d, scale) });

    let (l, rr) = up3_sides(mesh, &r, &g, &u, u_b, partition, &q).expect("pinned fields");
    let uhat = u.hat(mesh).values;
    let scale: f64 = (0..mesh.num_cells())
        .map(|k| {
            let x = mesh.centroid(k);
            mesh.volume(k) * g.values[k] * uhat[k].norm() * (SmoothScalar::gradient(&q, &x).norm() + r.values[k].abs() / mesh.diameter(k))
        })
        .sum::<f64>()
        .max(l.abs());
    out.push(IdentityResult { name: "up3", relative: rel((l - rr).abs(), scale) });

    let d = identity_vv1(mesh, &q, &r);
    let div = div_h(mesh, &proj_v(mesh, |x| SmoothVector::value(&q, x)));
    let scale: f64 = (0..mesh.num_cells()).map(|k| mesh.volume(k) * (div.values[k] * r.values[k]).abs()).sum();
    out.push(IdentityResult { name: "vv1", relative: rel(d, scale) });

    let d = identity_proj(mesh, &u, &q);
    let gu = grad_h(mesh, &u);
    let gq = grad_h(mesh, &proj_v(mesh, |x| SmoothVector::value(&q, x)));
    let scale = (0..mesh.num_cells()).map(|k| mesh.volume(k) * gu[k].amax() * gq[k].amax()).fold(0.0, f64::max);
    out.push(IdentityResult { name: "proj", relative: rel(d, scale) });
    out
}
