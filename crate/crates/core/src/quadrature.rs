//! Quadrature on tetrahedra and triangles.
//!
//! Points are given in barycentric coordinates and weights sum to one, so an
//! integral is `|K| Σ w_i f(x_i)`.

use crate::Vec3;

#[derive(Debug, Clone)]
pub struct Rule<const N: usize> {
    pub points: Vec<[f64; N]>,
    pub weights: Vec<f64>,
}

pub type TetRule = Rule<4>;
pub type TriRule = Rule<3>;

impl<const N: usize> Rule<N> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Physical points for the simplex with the given vertices.
    pub fn map(&self, verts: &[Vec3; N]) -> impl Iterator<Item = (Vec3, f64)> + '_ {
        let verts = *verts;
        self.points.iter().zip(&self.weights).map(move |(l, &w)| {
            let mut x = Vec3::zeros();
            for i in 0..N {
                x += verts[i] * l[i];
            }
            (x, w)
        })
    }

    /// Mean of `f` over the simplex.
    pub fn mean<F: FnMut(&Vec3) -> f64>(&self, verts: &[Vec3; N], mut f: F) -> f64 {
        self.map(verts).map(|(x, w)| w * f(&x)).sum()
    }
}

/// Four-point rule, exact for quadratics.
pub fn tet_degree2() -> TetRule {
    let a = 0.585_410_196_624_968_5;
    let b = 0.138_196_601_125_010_5;
    Rule {
        points: vec![[a, b, b, b], [b, a, b, b], [b, b, a, b], [b, b, b, a]],
        weights: vec![0.25; 4],
    }
}

/// Three-point rule, exact for quadratics.
pub fn tri_degree2() -> TriRule {
    let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
    Rule {
        points: vec![[a, b, b], [b, a, b], [b, b, a]],
        weights: vec![1.0 / 3.0; 3],
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Newton iteration on P_n from the Chebyshev guess
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, t);
            let dt = p / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, t);
        x[i] = 0.5 * (1.0 - t);
        w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

fn legendre(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, dp)
}

/// Collapsed tensor-product rule on the triangle, exact for degree `2n - 2`.
pub fn tri_collapsed(n: usize) -> TriRule {
    let (x, w) = gauss_legendre_01(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let s = x[i];
            let t = x[j] * (1.0 - s);
            points.push([1.0 - s - t, s, t]);
            weights.push(2.0 * w[i] * w[j] * (1.0 - s));
        }
    }
    Rule { points, weights }
}

/// Collapsed tensor-product rule on the tetrahedron, exact for degree `2n - 3`.
pub fn tet_collapsed(n: usize) -> TetRule {
    let (x, w) = gauss_legendre_01(n);
    let mut points = Vec::with_capacity(n * n * n);
    let mut weights = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let s = x[i];
                let t = x[j] * (1.0 - s);
                let r = x[k] * (1.0 - s - t);
                points.push([1.0 - s - t - r, s, t, r]);
                weights.push(6.0 * w[i] * w[j] * w[k] * (1.0 - x[i]).powi(2) * (1.0 - x[j]));
            }
        }
    }
    Rule { points, weights }
}
