use super::{div_h, grad_h, proj_v, QField, SmoothVector, VField};
use crate::mesh::Mesh;
use crate::quadrature::tet_collapsed;
use crate::Mat3;

fn cell_integral_of_jacobian(mesh: &Mesh, phi: &dyn SmoothVector, k: usize) -> Mat3 {
    let rule = tet_collapsed(4);
    let mut s = Mat3::zeros();
    for (x, w) in rule.map(&mesh.cell_points(k)) {
        s += phi.jacobian(&x) * w;
    }
    s * mesh.volume(k)
}

/// `|∫ div_h ũ w - ∫ div u w|` with `ũ = Π^V u`.
pub fn identity_vv1(mesh: &Mesh, u: &dyn SmoothVector, w: &QField<f64>) -> f64 {
    let ut = proj_v(mesh, |x| u.value(x));
    let d = div_h(mesh, &ut);
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for k in 0..mesh.num_cells() {
        lhs += mesh.volume(k) * d.values[k] * w.values[k];
        rhs += cell_integral_of_jacobian(mesh, u, k).trace() * w.values[k];
    }
    (lhs - rhs).abs()
}

/// Largest entry of `∫ ∇_h v ⊗ ∇_h φ̃ - ∫ ∇_h v ⊗ ∇φ`, `φ̃ = Π^V φ`.
pub fn identity_proj(mesh: &Mesh, v: &VField<crate::Vec3>, phi: &dyn SmoothVector) -> f64 {
    let gv = grad_h(mesh, v);
    let gp = grad_h(mesh, &proj_v(mesh, |x| phi.value(x)));
    let mut diff = nalgebra::SMatrix::<f64, 9, 9>::zeros();
    for k in 0..mesh.num_cells() {
        let exact = cell_integral_of_jacobian(mesh, phi, k);
        diff += gv[k].kronecker(&(gp[k] * mesh.volume(k) - exact));
    }
    diff.amax()
}
