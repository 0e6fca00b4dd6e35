use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{signed_volume, Mesh};
use crate::Vec3;

/// The unit simplex `(0,0,0), (1,0,0), (0,1,0), (0,0,1)`.
pub fn reference_tet() -> Mesh {
    Mesh::new(
        vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ],
        vec![[0, 1, 2, 3]],
    )
    .expect("reference tetrahedron is valid")
}

/// Unit cube split into the six Kuhn tetrahedra.
pub fn kuhn_cube() -> Mesh {
    kuhn_box([1, 1, 1], [1.0, 1.0, 1.0])
}

/// Box `[0,lx]×[0,ly]×[0,lz]` with `n` subdivisions per axis, every sub-box
/// split into six Kuhn tetrahedra along its main diagonal.
pub fn kuhn_box(n: [usize; 3], lengths: [f64; 3]) -> Mesh {
    let [nx, ny, nz] = n;
    let id = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push(Vec3::new(
                    lengths[0] * i as f64 / nx as f64,
                    lengths[1] * j as f64 / ny as f64,
                    lengths[2] * k as f64 / nz as f64,
                ));
            }
        }
    }
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut cells = Vec::with_capacity(6 * nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                for perm in PERMS {
                    let mut c = [i, j, k];
                    let mut tet = [id(c[0], c[1], c[2]); 4];
                    for (s, &axis) in perm.iter().enumerate() {
                        c[axis] += 1;
                        tet[s + 1] = id(c[0], c[1], c[2]);
                    }
                    cells.push(tet);
                }
            }
        }
    }
    Mesh::new(vertices, cells).expect("Kuhn box is valid")
}

/// [`kuhn_box`] on the unit cube with interior vertices moved by up to
/// `amp` times the grid spacing in each coordinate. The amplitude is halved
/// until no cell flips orientation.
pub fn perturbed_box(n: [usize; 3], amp: f64, seed: u64) -> Mesh {
    let base = kuhn_box(n, [1.0, 1.0, 1.0]);
    let spacing = 1.0 / *n.iter().max().unwrap() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifts: Vec<Vec3> = base
        .vertices()
        .iter()
        .map(|p| {
            let interior = (0..3).all(|i| p[i] > 1e-12 && p[i] < 1.0 - 1e-12);
            if interior {
                Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0))
            } else {
                Vec3::zeros()
            }
        })
        .collect();
    let mut a = amp;
    loop {
        let verts: Vec<Vec3> = base
            .vertices()
            .iter()
            .zip(&shifts)
            .map(|(p, s)| p + s * (a * spacing))
            .collect();
        let flips = base.cells().iter().any(|c| {
            let (p, q) = (c.map(|i| base.vertices()[i]), c.map(|i| verts[i]));
            let v0 = signed_volume(&p[0], &p[1], &p[2], &p[3]);
            let v1 = signed_volume(&q[0], &q[1], &q[2], &q[3]);
            v0 * v1 <= 0.0 || v1.abs() < 0.05 * v0.abs()
        });
        if !flips {
            if let Ok(m) = Mesh::new(verts, base.cells().to_vec()) {
                return m;
            }
        }
        a *= 0.5;
    }
}
