use std::collections::HashMap;

use super::Mesh;

/// Red refinement: every tetrahedron is split into four corner tetrahedra
/// and four tetrahedra around the shortest diagonal of the inner octahedron.
pub fn refine_uniform(mesh: &Mesh) -> Mesh {
    let mut vertices = mesh.vertices().to_vec();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, vertices: &mut Vec<_>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoints.entry(key).or_insert_with(|| {
            vertices.push((vertices[a] + vertices[b]) * 0.5);
            vertices.len() - 1
        })
    };

    let mut cells = Vec::with_capacity(8 * mesh.num_cells());
    for c in mesh.cells() {
        let [v0, v1, v2, v3] = *c;
        let m01 = mid(v0, v1, &mut vertices);
        let m02 = mid(v0, v2, &mut vertices);
        let m03 = mid(v0, v3, &mut vertices);
        let m12 = mid(v1, v2, &mut vertices);
        let m13 = mid(v1, v3, &mut vertices);
        let m23 = mid(v2, v3, &mut vertices);

        cells.push([v0, m01, m02, m03]);
        cells.push([m01, v1, m12, m13]);
        cells.push([m02, m12, v2, m23]);
        cells.push([m03, m13, m23, v3]);

        // diagonal endpoints and the cycle of the remaining four midpoints
        let options = [
            ((m01, m23), [m02, m03, m13, m12]),
            ((m02, m13), [m01, m03, m23, m12]),
            ((m03, m12), [m01, m02, m23, m13]),
        ];
        let len = |(a, b): (usize, usize), vs: &Vec<crate::Vec3>| (vs[a] - vs[b]).norm();
        let mut best = 0;
        for i in 1..3 {
            if len(options[i].0, &vertices) < len(options[best].0, &vertices) {
                best = i;
            }
        }
        let ((a, b), ring) = options[best];
        for i in 0..4 {
            cells.push([a, b, ring[i], ring[(i + 1) % 4]]);
        }
    }
    Mesh::new(vertices, cells).expect("refinement of a valid mesh is valid")
}

#[cfg(test)]
mod tests {
    use super::super::{kuhn_cube, reference_tet};
    use super::*;

    #[test]
    fn one_tet_to_eight() {
        let m = reference_tet();
        let r = refine_uniform(&m);
        assert_eq!(r.num_cells(), 8);
        assert!((r.total_volume() - m.total_volume()).abs() < 1e-15);
    }

    #[test]
    fn cube_refinement_counts() {
        let m = kuhn_cube();
        let r = refine_uniform(&m);
        assert_eq!(r.num_cells(), 48);
        assert_eq!(r.boundary_faces().len(), 4 * m.boundary_faces().len());
        assert!((r.total_volume() - 1.0).abs() < 1e-12);
        assert!((r.boundary_area() - 6.0).abs() < 1e-12);
        // Kuhn tetrahedra are self-similar under red refinement
        assert!((r.h() - m.h() / 2.0).abs() < 1e-12);
        let rr = refine_uniform(&r);
        assert_eq!(rr.num_cells(), 384);
        assert!((rr.h() - m.h() / 4.0).abs() < 1e-12);
    }

    #[test]
    fn reference_tet_diameters_after_refinement() {
        // the inner octahedron diagonal of the unit simplex is sqrt(3)/2 > sqrt(2)/2,
        // so the first refinement does not halve h; later ones do.
        let m = reference_tet();
        let r1 = refine_uniform(&m);
        let r2 = refine_uniform(&r1);
        assert!((r1.h() - 3f64.sqrt() / 2.0).abs() < 1e-12);
        assert!((r2.h() - r1.h() / 2.0).abs() < 1e-12);
        assert!(r2.h() <= m.h() / 2.0);
    }
}
