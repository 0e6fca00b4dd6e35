//! Closed-form space-time fields used as initial/boundary data, reference
//! solutions and test functions, plus manufactured sources.
//!
//! Every catalog entry is vector valued; scalar quantities use component 0.
//! Time dependence, where present, is the factor `cos(νt)` on the varying part.

use crate::constitutive::RegularizedPressure;
use crate::spaces::{SmoothScalar, SmoothVector};
use crate::{Mat3, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub enum CatalogField {
    /// `c`.
    Const3 { c: Vec3 },
    /// `A x + b`.
    Affine { a: Mat3, b: Vec3 },
    /// `offset_i + amp_i · Π_j sin(k_j x_j + phase_j) · cos(νt)`.
    TrigProduct {
        offset: Vec3,
        amp: Vec3,
        k: Vec3,
        phase: Vec3,
        nu: f64,
    },
    /// `offset_i + amp_i · exp(-|x - center|² / width²) · cos(νt)`.
    GaussianBump {
        offset: Vec3,
        amp: Vec3,
        center: Vec3,
        width: f64,
        nu: f64,
    },
}

impl CatalogField {
    pub fn constant(c: Vec3) -> Self {
        Self::Const3 { c }
    }

    pub fn scalar_constant(c: f64) -> Self {
        Self::Const3 {
            c: Vec3::new(c, 0.0, 0.0),
        }
    }

    /// Scalar shape and its first and second derivatives, without the time factor.
    fn shape(&self, x: &Vec3) -> (f64, Vec3, Mat3) {
        match self {
            Self::TrigProduct { k, phase, .. } => {
                let s = Vec3::from_fn(|j, _| (k[j] * x[j] + phase[j]).sin());
                let c = Vec3::from_fn(|j, _| (k[j] * x[j] + phase[j]).cos());
                let p = s.x * s.y * s.z;
                let mut g = Vec3::zeros();
                let mut h = Mat3::zeros();
                for a in 0..3 {
                    let (b, d) = ((a + 1) % 3, (a + 2) % 3);
                    g[a] = k[a] * c[a] * s[b] * s[d];
                    h[(a, a)] = -k[a] * k[a] * p;
                    h[(a, b)] = k[a] * k[b] * c[a] * c[b] * s[d];
                    h[(b, a)] = h[(a, b)];
                }
                (p, g, h)
            }
            Self::GaussianBump { center, width, .. } => {
                let d = x - center;
                let w2 = width * width;
                let e = (-d.norm_squared() / w2).exp();
                let g = d * (-2.0 * e / w2);
                let h = (d * d.transpose() * (4.0 / w2) - Mat3::identity() * 2.0) * (e / w2);
                (e, g, h)
            }
            _ => (0.0, Vec3::zeros(), Mat3::zeros()),
        }
    }

    fn time_factor(&self, t: f64) -> (f64, f64) {
        match self {
            Self::TrigProduct { nu, .. } | Self::GaussianBump { nu, .. } => {
                ((nu * t).cos(), -nu * (nu * t).sin())
            }
            _ => (1.0, 0.0),
        }
    }

    pub fn value(&self, x: &Vec3, t: f64) -> Vec3 {
        match self {
            Self::Const3 { c } => *c,
            Self::Affine { a, b } => a * x + b,
            Self::TrigProduct { offset, amp, .. } | Self::GaussianBump { offset, amp, .. } => {
                let (s, _, _) = self.shape(x);
                offset + amp * (s * self.time_factor(t).0)
            }
        }
    }

    /// `J_ij = ∂f_i/∂x_j`.
    pub fn jacobian(&self, x: &Vec3, t: f64) -> Mat3 {
        match self {
            Self::Const3 { .. } => Mat3::zeros(),
            Self::Affine { a, .. } => *a,
            Self::TrigProduct { amp, .. } | Self::GaussianBump { amp, .. } => {
                let (_, g, _) = self.shape(x);
                amp * g.transpose() * self.time_factor(t).0
            }
        }
    }

    /// Hessian of component `i`.
    pub fn hessian(&self, i: usize, x: &Vec3, t: f64) -> Mat3 {
        match self {
            Self::Const3 { .. } | Self::Affine { .. } => Mat3::zeros(),
            Self::TrigProduct { amp, .. } | Self::GaussianBump { amp, .. } => {
                let (_, _, h) = self.shape(x);
                h * (amp[i] * self.time_factor(t).0)
            }
        }
    }

    pub fn time_derivative(&self, x: &Vec3, t: f64) -> Vec3 {
        match self {
            Self::Const3 { .. } | Self::Affine { .. } => Vec3::zeros(),
            Self::TrigProduct { amp, .. } | Self::GaussianBump { amp, .. } => {
                let (s, _, _) = self.shape(x);
                amp * (s * self.time_factor(t).1)
            }
        }
    }

    /// The field frozen at time `t`.
    pub fn at(&self, t: f64) -> Frozen<'_> {
        Frozen { field: self, t }
    }
}

/// A catalog field at a fixed time.
#[derive(Debug, Clone, Copy)]
pub struct Frozen<'a> {
    pub field: &'a CatalogField,
    pub t: f64,
}

impl SmoothVector for Frozen<'_> {
    fn value(&self, x: &Vec3) -> Vec3 {
        self.field.value(x, self.t)
    }
    fn jacobian(&self, x: &Vec3) -> Mat3 {
        self.field.jacobian(x, self.t)
    }
}

impl SmoothScalar for Frozen<'_> {
    fn value(&self, x: &Vec3) -> f64 {
        self.field.value(x, self.t).x
    }
    fn gradient(&self, x: &Vec3) -> Vec3 {
        self.field.jacobian(x, self.t).row(0).transpose()
    }
}

/// Strong solution `(r, U = V + u_B)` of the forced system.
#[derive(Debug, Clone)]
pub struct Reference {
    pub r: CatalogField,
    pub v: CatalogField,
    /// Time independent.
    pub u_b: CatalogField,
}

/// Sources making a [`Reference`] an exact solution of
/// `∂_t r + div(rU) = s_ρ` and
/// `∂_t(rV) + div(rU⊗V) + r(U·∇)u_B + ∇p_h(r) - μΔU - (μ+λ)∇div U = s_m`.
#[derive(Debug, Clone)]
pub struct MmsSources {
    pub reference: Reference,
    pub mu: f64,
    pub lambda: f64,
    pub pressure: RegularizedPressure,
}

impl MmsSources {
    pub fn u(&self, x: &Vec3, t: f64) -> Vec3 {
        self.reference.v.value(x, t) + self.reference.u_b.value(x, t)
    }

    pub fn s_rho(&self, x: &Vec3, t: f64) -> f64 {
        let rf = &self.reference;
        let r = rf.r.value(x, t).x;
        let grad_r = rf.r.jacobian(x, t).row(0).transpose();
        let u = self.u(x, t);
        let div_u = (rf.v.jacobian(x, t) + rf.u_b.jacobian(x, t)).trace();
        rf.r.time_derivative(x, t).x + grad_r.dot(&u) + r * div_u
    }

    pub fn s_m(&self, x: &Vec3, t: f64) -> Vec3 {
        let rf = &self.reference;
        let r = rf.r.value(x, t).x;
        let dr = rf.r.time_derivative(x, t).x;
        let grad_r = rf.r.jacobian(x, t).row(0).transpose();
        let v = rf.v.value(x, t);
        let jv = rf.v.jacobian(x, t);
        let jb = rf.u_b.jacobian(x, t);
        let u = v + rf.u_b.value(x, t);
        let ju = jv + jb;
        let div_u = ju.trace();
        let div_ru = grad_r.dot(&u) + r * div_u;

        let time = v * dr + rf.v.time_derivative(x, t) * r;
        let conv = v * div_ru + jv * u * r;
        let background = jb * u * r;
        let pressure = grad_r * self.pressure.dp_h(r);

        let mut lap = Vec3::zeros();
        let mut grad_div = Vec3::zeros();
        for i in 0..3 {
            let hv = rf.v.hessian(i, x, t) + rf.u_b.hessian(i, x, t);
            lap[i] = hv.trace();
            // ∂_j ∂_i U_i summed over i gives (∇div U)_j
            grad_div += hv.row(i).transpose();
        }
        time + conv + background + pressure - lap * self.mu - grad_div * (self.mu + self.lambda)
    }
}
