//! Piecewise-constant fields `Q` and Crouzeix-Raviart fields `V`.
//!
//! Fields do not hold a reference to their mesh; every operation takes the
//! mesh explicitly. A CR field stores one value per face, the face mean. On a
//! cell its affine restriction is `Σ_σ v_σ φ_σ` with `φ_σ = 1 - 3λ_σ`, where
//! `λ_σ` is the barycentric coordinate of the vertex opposite `σ`.

mod identities;

pub use identities::{identity_proj, identity_vv1};

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use thiserror::Error;

use crate::mesh::Mesh;
use crate::quadrature::{tet_collapsed, tet_degree2, tri_degree2};
use crate::{Mat3, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("point lies outside cell {cell} (min barycentric {min_lambda:e})")]
    OutsideCell { cell: usize, min_lambda: f64 },
    #[error("face {0} is a boundary face")]
    BoundaryFace(usize),
    #[error("invalid exponent p = {0}")]
    InvalidExponent(f64),
}

/// Scalar or vector field values.
pub trait Value:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<f64, Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + 'static
{
    fn zero() -> Self;
    fn norm(&self) -> f64;
    fn dot(&self, other: &Self) -> f64;
}

impl Value for f64 {
    fn zero() -> Self {
        0.0
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
    fn dot(&self, other: &Self) -> f64 {
        self * other
    }
}

impl Value for Vec3 {
    fn zero() -> Self {
        Vec3::zeros()
    }
    fn norm(&self) -> f64 {
        nalgebra::Matrix::norm(self)
    }
    fn dot(&self, other: &Self) -> f64 {
        nalgebra::Matrix::dot(self, other)
    }
}

/// One value per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct QField<T> {
    pub values: Vec<T>,
}

/// One value per face (the face mean).
#[derive(Debug, Clone, PartialEq)]
pub struct VField<T> {
    pub dofs: Vec<T>,
}

impl<T: Value> QField<T> {
    pub fn constant(mesh: &Mesh, c: T) -> Self {
        Self {
            values: vec![c; mesh.num_cells()],
        }
    }

    pub fn from_fn(mesh: &Mesh, f: impl FnMut(usize) -> T) -> Self {
        Self {
            values: (0..mesh.num_cells()).map(f).collect(),
        }
    }

    pub fn map<S: Value>(&self, f: impl Fn(T) -> S) -> QField<S> {
        QField {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `∫_Ω g`.
    pub fn integral(&self, mesh: &Mesh) -> T {
        let mut s = T::zero();
        for (k, &v) in self.values.iter().enumerate() {
            s += v * mesh.volume(k);
        }
        s
    }
}

impl<T: Value> VField<T> {
    pub fn constant(mesh: &Mesh, c: T) -> Self {
        Self {
            dofs: vec![c; mesh.num_faces()],
        }
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        Self::constant(mesh, T::zero())
    }

    pub fn from_fn(mesh: &Mesh, f: impl FnMut(usize) -> T) -> Self {
        Self {
            dofs: (0..mesh.num_faces()).map(f).collect(),
        }
    }

    /// Membership in `V₀`: every boundary dof is exactly zero.
    pub fn is_zero_on_boundary(&self, mesh: &Mesh) -> bool {
        mesh.boundary_faces()
            .iter()
            .all(|&f| self.dofs[f] == T::zero())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            dofs: self.dofs.iter().zip(&other.dofs).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            dofs: self.dofs.iter().zip(&other.dofs).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            dofs: self.dofs.iter().map(|&a| a * c).collect(),
        }
    }

    /// Cell mean `v̂_K = ¼ Σ_σ v_σ` (the projection `Π^Q` of a CR field).
    pub fn cell_mean(&self, mesh: &Mesh, k: usize) -> T {
        let mut s = T::zero();
        for &f in mesh.cell_faces(k) {
            s += self.dofs[f];
        }
        s * 0.25
    }

    pub fn hat(&self, mesh: &Mesh) -> QField<T> {
        QField::from_fn(mesh, |k| self.cell_mean(mesh, k))
    }

    /// Value of the affine restriction to cell `k` at barycentric point `l`.
    pub fn eval_bary(&self, mesh: &Mesh, k: usize, l: &[f64; 4]) -> T {
        let faces = mesh.cell_faces(k);
        let mut s = T::zero();
        for i in 0..4 {
            s += self.dofs[faces[i]] * (1.0 - 3.0 * l[i]);
        }
        s
    }
}

/// Barycentric tolerance used by [`eval_v`].
pub const INSIDE_TOL: f64 = 1e-10;

/// Evaluates `v` at `x` using the affine restriction to `cell`.
pub fn eval_v<T: Value>(mesh: &Mesh, v: &VField<T>, cell: usize, x: &Vec3) -> Result<T, SpaceError> {
    let l = mesh.barycentric(cell, x);
    let min_lambda = l.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_lambda < -INSIDE_TOL {
        return Err(SpaceError::OutsideCell { cell, min_lambda });
    }
    Ok(v.eval_bary(mesh, cell, &l))
}

/// `Π^Q f`: cell means with the degree-2 volume rule.
pub fn proj_q<T: Value>(mesh: &Mesh, f: impl Fn(&Vec3) -> T) -> QField<T> {
    let rule = tet_degree2();
    QField::from_fn(mesh, |k| {
        let mut s = T::zero();
        for (x, w) in rule.map(&mesh.cell_points(k)) {
            s += f(&x) * w;
        }
        s
    })
}

/// `Π^V f`: face means with the degree-2 face rule.
pub fn proj_v<T: Value>(mesh: &Mesh, f: impl Fn(&Vec3) -> T) -> VField<T> {
    let rule = tri_degree2();
    VField::from_fn(mesh, |fc| {
        let mut s = T::zero();
        for (x, w) in rule.map(&mesh.face_points(fc)) {
            s += f(&x) * w;
        }
        s
    })
}

/// Broken gradient of a vector CR field, `G_ij = ∂v_i/∂x_j`, one per cell.
pub fn grad_h(mesh: &Mesh, v: &VField<Vec3>) -> Vec<Mat3> {
    (0..mesh.num_cells())
        .map(|k| {
            let mut g = Mat3::zeros();
            for &f in mesh.cell_faces(k) {
                g += v.dofs[f] * (mesh.outward_normal(f, k) * mesh.face(f).area).transpose();
            }
            g / mesh.volume(k)
        })
        .collect()
}

/// Broken gradient of a scalar CR field.
pub fn grad_h_scalar(mesh: &Mesh, v: &VField<f64>) -> Vec<Vec3> {
    (0..mesh.num_cells())
        .map(|k| {
            let mut g = Vec3::zeros();
            for &f in mesh.cell_faces(k) {
                g += mesh.outward_normal(f, k) * (mesh.face(f).area * v.dofs[f]);
            }
            g / mesh.volume(k)
        })
        .collect()
}

pub fn div_h(mesh: &Mesh, v: &VField<Vec3>) -> QField<f64> {
    QField::from_fn(mesh, |k| {
        let mut s = 0.0;
        for &f in mesh.cell_faces(k) {
            s += mesh.face(f).area * v.dofs[f].dot(&mesh.outward_normal(f, k));
        }
        s / mesh.volume(k)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Traces<T> {
    /// Value on the `-n_σ` side.
    pub minus: T,
    /// Value on the `+n_σ` side.
    pub plus: T,
    pub jump: T,
    pub avg: T,
}

impl<T: Value> Traces<T> {
    fn new(minus: T, plus: T) -> Self {
        Self {
            minus,
            plus,
            jump: plus - minus,
            avg: (plus + minus) * 0.5,
        }
    }

    /// Traces seen with the opposite normal.
    pub fn flipped(&self) -> Self {
        Self::new(self.plus, self.minus)
    }
}

/// Traces, jump and average of `g` on an interior face with respect to the
/// stored normal.
pub fn traces<T: Value>(mesh: &Mesh, g: &QField<T>, f: usize) -> Result<Traces<T>, SpaceError> {
    let face = mesh.face(f);
    let nb = face.neighbor.ok_or(SpaceError::BoundaryFace(f))?;
    Ok(Traces::new(g.values[face.owner], g.values[nb]))
}

fn check_p(p: f64) -> Result<(), SpaceError> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(SpaceError::InvalidExponent(p))
    }
}

/// `‖g‖_{L^p}` of a piecewise-constant field; `p = ∞` allowed.
pub fn lp_norm_q<T: Value>(mesh: &Mesh, g: &QField<T>, p: f64) -> Result<f64, SpaceError> {
    check_p(p)?;
    if p.is_infinite() {
        return Ok(g.values.iter().map(|v| v.norm()).fold(0.0, f64::max));
    }
    let s: f64 = g
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| mesh.volume(k) * v.norm().powf(p))
        .sum();
    Ok(s.powf(1.0 / p))
}

/// `‖v‖_{L^p}` of a CR field. Exact for `p = 2`; other exponents use a
/// collapsed Gauss rule.
pub fn lp_norm_v<T: Value>(mesh: &Mesh, v: &VField<T>, p: f64) -> Result<f64, SpaceError> {
    check_p(p)?;
    if p.is_infinite() {
        // affine per cell: the maximum is attained at a vertex
        let mut m: f64 = 0.0;
        for k in 0..mesh.num_cells() {
            for i in 0..4 {
                let mut l = [0.0; 4];
                l[i] = 1.0;
                m = m.max(v.eval_bary(mesh, k, &l).norm());
            }
        }
        return Ok(m);
    }
    let rule = if p == 2.0 {
        tet_degree2()
    } else {
        tet_collapsed(6)
    };
    let mut s = 0.0;
    for k in 0..mesh.num_cells() {
        let mut c = 0.0;
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            c += w * v.eval_bary(mesh, k, l).norm().powf(p);
        }
        s += mesh.volume(k) * c;
    }
    Ok(s.powf(1.0 / p))
}

/// `‖g‖_{Q^{1,p}}^p = Σ_{σ∈E_int} |σ| |[[g]]|^p / h^{p-1}`.
pub fn broken_q1p_pow<T: Value>(mesh: &Mesh, g: &QField<T>, p: f64) -> Result<f64, SpaceError> {
    check_p(p)?;
    if p.is_infinite() {
        return Err(SpaceError::InvalidExponent(p));
    }
    let h = mesh.h();
    Ok(mesh
        .interior_faces()
        .iter()
        .map(|&f| {
            let face = mesh.face(f);
            let j = g.values[face.neighbor.unwrap()] - g.values[face.owner];
            face.area * j.norm().powf(p) / h.powf(p - 1.0)
        })
        .sum())
}

/// `‖v‖_{V^{1,p}}^p = ∫ |∇_h v|^p` with the Frobenius norm.
pub fn broken_v1p_pow(mesh: &Mesh, v: &VField<Vec3>, p: f64) -> Result<f64, SpaceError> {
    check_p(p)?;
    if p.is_infinite() {
        return Err(SpaceError::InvalidExponent(p));
    }
    Ok(grad_h(mesh, v)
        .iter()
        .enumerate()
        .map(|(k, g)| mesh.volume(k) * g.norm().powf(p))
        .sum())
}

/// A differentiable scalar field on `Ω`.
pub trait SmoothScalar {
    fn value(&self, x: &Vec3) -> f64;
    fn gradient(&self, x: &Vec3) -> Vec3;
}

/// A differentiable vector field on `Ω`.
pub trait SmoothVector {
    fn value(&self, x: &Vec3) -> Vec3;
    /// `J_ij = ∂f_i/∂x_j`.
    fn jacobian(&self, x: &Vec3) -> Mat3;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{kuhn_box, kuhn_cube, perturbed_box, reference_tet};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn affine(a: Mat3, b: Vec3) -> impl Fn(&Vec3) -> Vec3 {
        move |x| a * x + b
    }

    #[test]
    fn proj_q_examples() {
        let m = reference_tet();
        assert_eq!(proj_q(&m, |_| 7.0).values, vec![7.0]);
        let q = proj_q(&m, |x| x.x);
        assert!((q.values[0] - 0.25).abs() < 1e-15);
        let v = proj_v(&m, |x| x.x);
        assert!((v.hat(&m).values[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn proj_v_examples() {
        let m = reference_tet();
        let v = proj_v(&m, |x| x.x);
        let opp_origin = m.cell_faces(0)[0];
        assert!((v.dofs[opp_origin] - 1.0 / 3.0).abs() < 1e-15);
        let z = proj_v(&m, |_| Vec3::zeros());
        assert!(z.is_zero_on_boundary(&m));
        assert!(z.dofs.iter().all(|d| *d == Vec3::zeros()));
    }

    #[test]
    fn eval_examples() {
        let m = reference_tet();
        let c = VField::constant(&m, Vec3::new(1.0, -2.0, 3.0));
        let x = Vec3::new(0.1, 0.2, 0.3);
        assert!((eval_v(&m, &c, 0, &x).unwrap() - Vec3::new(1.0, -2.0, 3.0)).norm() < 1e-14);
        let v = proj_v(&m, |x| x.x);
        assert!((eval_v(&m, &v, 0, &m.centroid(0)).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(
            eval_v(&m, &v, 0, &Vec3::new(1.0, 1.0, 1.0)),
            Err(SpaceError::OutsideCell { cell: 0, .. })
        ));
    }

    #[test]
    fn basis_face_mean_duality() {
        let m = reference_tet();
        let rule = tri_degree2();
        for s in 0..4 {
            let basis = VField::from_fn(&m, |f| if f == s { 1.0 } else { 0.0 });
            for t in 0..4 {
                let mean: f64 = rule
                    .map(&m.face_points(t))
                    .map(|(x, w)| w * eval_v(&m, &basis, 0, &x).unwrap())
                    .sum();
                let expect = if s == t { 1.0 } else { 0.0 };
                assert!((mean - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gradient_examples() {
        let m = kuhn_box([2, 2, 2], [1.0, 1.0, 1.0]);
        let v = proj_v(&m, |x| Vec3::new(x.x, 0.0, 0.0));
        let g = grad_h(&m, &v);
        let d = div_h(&m, &v);
        let mut e11 = Mat3::zeros();
        e11[(0, 0)] = 1.0;
        for k in 0..m.num_cells() {
            assert!((g[k] - e11).norm() < 1e-13);
            assert!((d.values[k] - 1.0).abs() < 1e-13);
        }
        let c = VField::constant(&m, Vec3::new(3.0, 1.0, 2.0));
        assert!(grad_h(&m, &c).iter().all(|g| g.norm() < 1e-13));
    }

    /// Independent route: fit the affine function through the four face
    /// centroid values of the cell.
    fn fitted_gradient(m: &Mesh, v: &VField<Vec3>, k: usize) -> Mat3 {
        let faces = m.cell_faces(k);
        let mut a = nalgebra::Matrix4::<f64>::zeros();
        for (i, &f) in faces.iter().enumerate() {
            let c = m.face(f).centroid;
            a[(i, 0)] = 1.0;
            a[(i, 1)] = c.x;
            a[(i, 2)] = c.y;
            a[(i, 3)] = c.z;
        }
        let lu = a.lu();
        let mut g = Mat3::zeros();
        for comp in 0..3 {
            let rhs = nalgebra::Vector4::from_fn(|i, _| v.dofs[faces[i]][comp]);
            let c = lu.solve(&rhs).unwrap();
            for j in 0..3 {
                g[(comp, j)] = c[j + 1];
            }
        }
        g
    }

    #[test]
    fn random_gradient_matches_fit() {
        let m = kuhn_cube();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = VField::from_fn(&m, |_| Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0)));
        let g = grad_h(&m, &v);
        let d = div_h(&m, &v);
        for k in 0..m.num_cells() {
            assert!((g[k] - fitted_gradient(&m, &v, k)).norm() < 1e-12);
            assert!((g[k].trace() - d.values[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn traces_examples() {
        let m = Mesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
                Vec3::new(1.0, 1.0, 1.0),
            ],
            vec![[0, 1, 2, 3], [1, 2, 3, 4]],
        )
        .unwrap();
        let f = m.interior_faces()[0];
        let g = QField { values: vec![2.0, 5.0] };
        let t = traces(&m, &g, f).unwrap();
        assert_eq!((t.jump, t.avg), (3.0, 3.5));
        assert_eq!(t.flipped().jump, -3.0);
        let c = QField::constant(&m, 4.0);
        let t = traces(&m, &c, f).unwrap();
        assert_eq!((t.jump, t.avg), (0.0, 4.0));
        let b = m.boundary_faces()[0];
        assert_eq!(traces(&m, &g, b), Err(SpaceError::BoundaryFace(b)));

        // Q^{1,2} seminorm of a 0/1 field: A / h
        let step = QField { values: vec![0.0, 1.0] };
        let q = broken_q1p_pow(&m, &step, 2.0).unwrap();
        assert!((q - m.face(f).area / m.h()).abs() < 1e-15);
    }

    #[test]
    fn norm_examples() {
        let m = kuhn_box([2, 1, 1], [1.0, 2.0, 0.5]);
        let c = QField::constant(&m, 3.0);
        assert_eq!(broken_q1p_pow(&m, &c, 2.0).unwrap(), 0.0);
        let v = proj_v(&m, |x| Vec3::new(x.x, 0.0, 0.0));
        assert!((broken_v1p_pow(&m, &v, 2.0).unwrap() - m.total_volume()).abs() < 1e-12);
        assert!(matches!(lp_norm_q(&m, &c, 0.5), Err(SpaceError::InvalidExponent(_))));
        assert!((lp_norm_q(&m, &c, 2.0).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(lp_norm_q(&m, &c, f64::INFINITY).unwrap(), 3.0);
        // ∫ x² over [0,1]×[0,2]×[0,0.5] = 1/3
        let s = proj_v(&m, |x| x.x);
        assert!((lp_norm_v(&m, &s, 2.0).unwrap().powi(2) - 1.0 / 3.0).abs() < 1e-12);
        assert!((lp_norm_v(&m, &s, 4.0).unwrap().powi(4) - 0.2).abs() < 1e-12);
        assert!((lp_norm_v(&m, &s, f64::INFINITY).unwrap() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn affine_reproduction(seed in 0u64..1000, a in prop::array::uniform9(-2.0f64..2.0), b in prop::array::uniform3(-2.0f64..2.0)) {
            let m = perturbed_box([2, 2, 1], 0.2, seed);
            let am = Mat3::from_row_slice(&a);
            let bv = Vec3::from_row_slice(&b);
            let f = affine(am, bv);
            let v = proj_v(&m, &f);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for k in 0..m.num_cells() {
                let mut l: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
                let s: f64 = l.iter().sum();
                l.iter_mut().for_each(|x| *x /= s);
                let p = m.cell_points(k);
                let x = p[0] * l[0] + p[1] * l[1] + p[2] * l[2] + p[3] * l[3];
                prop_assert!((eval_v(&m, &v, k, &x).unwrap() - f(&x)).norm() < 1e-12);
            }
            let g = grad_h(&m, &v);
            for gk in g {
                prop_assert!((gk - am).norm() < 1e-11);
            }
        }

        #[test]
        fn face_mean_duality(seed in 0u64..1000) {
            // quadratic field: compare stored dof with the face mean from a
            // high-order rule
            let m = perturbed_box([1, 2, 1], 0.2, seed);
            let f = |x: &Vec3| x.x * x.y - 2.0 * x.z * x.z + x.y;
            let v = proj_v(&m, f);
            let rule = crate::quadrature::tri_collapsed(4);
            for fc in 0..m.num_faces() {
                let mean = rule.mean(&m.face_points(fc), f);
                prop_assert!((mean - v.dofs[fc]).abs() < 1e-12);
            }
        }

        #[test]
        fn jensen_stability(seed in 0u64..1000) {
            let m = perturbed_box([2, 1, 1], 0.15, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = VField::from_fn(&m, |_| rng.gen_range(-1.0..1.0));
            let hat = v.hat(&m);
            for q in [1.0, 2.0, 6.0] {
                prop_assert!(lp_norm_q(&m, &hat, q).unwrap() <= lp_norm_v(&m, &v, q).unwrap() * (1.0 + 1e-12));
            }
        }

        #[test]
        fn v0_closed_under_combination(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let m = perturbed_box([2, 1, 1], 0.1, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut rand_v0 = || {
                let mut v = VField::from_fn(&m, |_| Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0)));
                for &f in m.boundary_faces() {
                    v.dofs[f] = Vec3::zeros();
                }
                v
            };
            let (x, y) = (rand_v0(), rand_v0());
            prop_assert!(x.scale(a).add(&y.scale(b)).is_zero_on_boundary(&m));
        }
    }

    #[test]
    fn projection_of_vanishing_function_has_zero_boundary_means() {
        // vanishes on every boundary face of the unit cube, so its face means do too
        let m = kuhn_box([2, 2, 2], [1.0, 1.0, 1.0]);
        let v = proj_v(&m, |x| x.x * (1.0 - x.x) * x.y * (1.0 - x.y) * x.z * (1.0 - x.z));
        for &f in m.boundary_faces() {
            assert!(v.dofs[f].abs() < 1e-17);
        }
    }
}
