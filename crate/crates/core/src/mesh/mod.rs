//! Tetrahedral meshes with a canonical face table.
//!
//! Faces are numbered by sorting their vertex triples, so the face table does
//! not depend on the order in which cells are given. The owner of a face is
//! the lower-indexed adjacent cell; the stored normal `n_σ` points from the
//! owner to the neighbor on interior faces and out of the domain on boundary
//! faces.

mod boundary;
mod generate;
pub mod io;
mod refine;

pub use boundary::{
    check_fit, classify_boundary, default_zero_tol, BoundaryError, BoundaryPartition, FaceKind, FitReport,
    PlanarRegion,
};
pub use generate::{kuhn_box, kuhn_cube, perturbed_box, reference_tet};
pub use refine::refine_uniform;

use std::collections::HashMap;

use thiserror::Error;

use crate::{Mat3, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("mesh has no cells")]
    Empty,
    #[error("cell {cell} references vertex {vertex} but only {count} vertices exist")]
    VertexOutOfRange {
        cell: usize,
        vertex: usize,
        count: usize,
    },
    #[error("cell {cell} repeats a vertex")]
    RepeatedVertex { cell: usize },
    #[error("cell {cell} is degenerate (volume {volume:e})")]
    Degenerate { cell: usize, volume: f64 },
    #[error("cells {first} and {second} use the same vertices")]
    DuplicateCell { first: usize, second: usize },
    #[error("face {vertices:?} is shared by {count} cells")]
    NonManifoldFace { vertices: [usize; 3], count: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    /// Sorted vertex indices.
    pub vertices: [usize; 3],
    pub owner: usize,
    pub neighbor: Option<usize>,
    pub area: f64,
    /// Unit normal, owner to neighbor (interior) or outward (boundary).
    pub normal: Vec3,
    pub centroid: Vec3,
}

impl Face {
    pub fn is_interior(&self) -> bool {
        self.neighbor.is_some()
    }

    /// The cell on the other side of the face, seen from `cell`.
    pub fn other(&self, cell: usize) -> Option<usize> {
        if cell == self.owner {
            self.neighbor
        } else if Some(cell) == self.neighbor {
            Some(self.owner)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    cells: Vec<[usize; 4]>,
    faces: Vec<Face>,
    /// `cell_faces[k][i]` is the face opposite local vertex `i` of cell `k`.
    cell_faces: Vec<[usize; 4]>,
    cell_volume: Vec<f64>,
    cell_centroid: Vec<Vec3>,
    cell_diameter: Vec<f64>,
    cell_inradius: Vec<f64>,
    interior_faces: Vec<usize>,
    boundary_faces: Vec<usize>,
    h: f64,
    h_frak: f64,
}

/// Signed volume of the tetrahedron `(a, b, c, d)`.
pub(crate) fn signed_volume(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    (b - a).cross(&(c - a)).dot(&(d - a)) / 6.0
}

impl Mesh {
    /// Builds the full face table and geometric measures.
    pub fn new(vertices: Vec<Vec3>, cells: Vec<[usize; 4]>) -> Result<Self, MeshError> {
        if cells.is_empty() {
            return Err(MeshError::Empty);
        }
        let nv = vertices.len();
        for (k, c) in cells.iter().enumerate() {
            for &v in c {
                if v >= nv {
                    return Err(MeshError::VertexOutOfRange {
                        cell: k,
                        vertex: v,
                        count: nv,
                    });
                }
            }
            let mut s = *c;
            s.sort_unstable();
            if s.windows(2).any(|w| w[0] == w[1]) {
                return Err(MeshError::RepeatedVertex { cell: k });
            }
        }

        let mut seen: HashMap<[usize; 4], usize> = HashMap::with_capacity(cells.len());
        for (k, c) in cells.iter().enumerate() {
            let mut s = *c;
            s.sort_unstable();
            if let Some(&first) = seen.get(&s) {
                return Err(MeshError::DuplicateCell { first, second: k });
            }
            seen.insert(s, k);
        }

        let mut cell_volume = Vec::with_capacity(cells.len());
        let mut cell_centroid = Vec::with_capacity(cells.len());
        let mut cell_diameter = Vec::with_capacity(cells.len());
        for (k, c) in cells.iter().enumerate() {
            let p = c.map(|i| vertices[i]);
            let vol = signed_volume(&p[0], &p[1], &p[2], &p[3]).abs();
            let mut diam: f64 = 0.0;
            for i in 0..4 {
                for j in i + 1..4 {
                    diam = diam.max((p[i] - p[j]).norm());
                }
            }
            if !(vol > 1e-14 * diam.powi(3)) {
                return Err(MeshError::Degenerate {
                    cell: k,
                    volume: vol,
                });
            }
            cell_volume.push(vol);
            cell_centroid.push((p[0] + p[1] + p[2] + p[3]) / 4.0);
            cell_diameter.push(diam);
        }

        // (sorted triple, cell, local vertex opposite)
        let mut slots: Vec<([usize; 3], usize, usize)> = Vec::with_capacity(4 * cells.len());
        for (k, c) in cells.iter().enumerate() {
            for i in 0..4 {
                let mut tri = [c[(i + 1) % 4], c[(i + 2) % 4], c[(i + 3) % 4]];
                tri.sort_unstable();
                slots.push((tri, k, i));
            }
        }
        slots.sort_unstable();

        let mut faces = Vec::new();
        let mut cell_faces = vec![[usize::MAX; 4]; cells.len()];
        let mut i = 0;
        while i < slots.len() {
            let mut j = i + 1;
            while j < slots.len() && slots[j].0 == slots[i].0 {
                j += 1;
            }
            let count = j - i;
            if count > 2 {
                return Err(MeshError::NonManifoldFace {
                    vertices: slots[i].0,
                    count,
                });
            }
            let tri = slots[i].0;
            let (owner, owner_local) = (slots[i].1, slots[i].2);
            let neighbor = (count == 2).then(|| slots[i + 1].1);
            let fid = faces.len();
            cell_faces[owner][owner_local] = fid;
            if count == 2 {
                cell_faces[slots[i + 1].1][slots[i + 1].2] = fid;
            }

            let p = tri.map(|v| vertices[v]);
            let cross = (p[1] - p[0]).cross(&(p[2] - p[0]));
            let area = 0.5 * cross.norm();
            let centroid = (p[0] + p[1] + p[2]) / 3.0;
            let mut normal = cross / cross.norm();
            if normal.dot(&(centroid - cell_centroid[owner])) < 0.0 {
                normal = -normal;
            }
            faces.push(Face {
                vertices: tri,
                owner,
                neighbor,
                area,
                normal,
                centroid,
            });
            i = j;
        }

        let cell_inradius: Vec<f64> = (0..cells.len())
            .map(|k| {
                let surface: f64 = cell_faces[k].iter().map(|&f| faces[f].area).sum();
                3.0 * cell_volume[k] / surface
            })
            .collect();
        let interior_faces = (0..faces.len())
            .filter(|&f| faces[f].is_interior())
            .collect();
        let boundary_faces = (0..faces.len())
            .filter(|&f| !faces[f].is_interior())
            .collect();
        let h = cell_diameter.iter().cloned().fold(0.0, f64::max);
        let h_frak = cell_inradius.iter().cloned().fold(f64::INFINITY, f64::min);

        Ok(Self {
            vertices,
            cells,
            faces,
            cell_faces,
            cell_volume,
            cell_centroid,
            cell_diameter,
            cell_inradius,
            interior_faces,
            boundary_faces,
            h,
            h_frak,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }
    pub fn cells(&self) -> &[[usize; 4]] {
        &self.cells
    }
    pub fn faces(&self) -> &[Face] {
        &self.faces
    }
    pub fn face(&self, f: usize) -> &Face {
        &self.faces[f]
    }
    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }
    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }
    pub fn cell_faces(&self, k: usize) -> &[usize; 4] {
        &self.cell_faces[k]
    }
    pub fn volume(&self, k: usize) -> f64 {
        self.cell_volume[k]
    }
    pub fn centroid(&self, k: usize) -> Vec3 {
        self.cell_centroid[k]
    }
    pub fn diameter(&self, k: usize) -> f64 {
        self.cell_diameter[k]
    }
    pub fn inradius(&self, k: usize) -> f64 {
        self.cell_inradius[k]
    }
    pub fn interior_faces(&self) -> &[usize] {
        &self.interior_faces
    }
    pub fn boundary_faces(&self) -> &[usize] {
        &self.boundary_faces
    }
    /// Mesh size: largest cell diameter.
    pub fn h(&self) -> f64 {
        self.h
    }
    /// Smallest inscribed-ball radius.
    pub fn h_frak(&self) -> f64 {
        self.h_frak
    }
    pub fn total_volume(&self) -> f64 {
        self.cell_volume.iter().sum()
    }
    pub fn boundary_area(&self) -> f64 {
        self.boundary_faces.iter().map(|&f| self.faces[f].area).sum()
    }

    /// Vertex positions of cell `k`.
    pub fn cell_points(&self, k: usize) -> [Vec3; 4] {
        self.cells[k].map(|v| self.vertices[v])
    }

    pub fn face_points(&self, f: usize) -> [Vec3; 3] {
        self.faces[f].vertices.map(|v| self.vertices[v])
    }

    /// `+1` if `n_σ` points out of `cell`, `-1` otherwise.
    pub fn orientation(&self, f: usize, cell: usize) -> f64 {
        if self.faces[f].owner == cell {
            1.0
        } else {
            -1.0
        }
    }

    /// Unit normal of face `f` pointing out of `cell` (`n_{σ,K}`).
    pub fn outward_normal(&self, f: usize, cell: usize) -> Vec3 {
        self.faces[f].normal * self.orientation(f, cell)
    }

    /// Barycentric coordinates of `x` with respect to cell `k`.
    pub fn barycentric(&self, k: usize, x: &Vec3) -> [f64; 4] {
        let p = self.cell_points(k);
        let m = Mat3::from_columns(&[p[1] - p[0], p[2] - p[0], p[3] - p[0]]);
        let inv = m.try_inverse().expect("non-degenerate cell");
        let l = inv * (x - p[0]);
        [1.0 - l.x - l.y - l.z, l.x, l.y, l.z]
    }

    /// Diameter of the vertex bounding box.
    pub fn domain_diameter(&self) -> f64 {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (hi - lo).norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub is_admissible: bool,
    /// Largest `h_K / 𝔥_K` over all cells.
    pub worst_ratio: f64,
    pub offending_cells: Vec<usize>,
    /// Every face is shared by at most two cells and the boundary is a closed
    /// two-manifold.
    pub faces_matched: bool,
}

/// Checks face matching and the shape-regularity bound `h_K / 𝔥_K ≤ shape_bound`.
pub fn check_admissibility(mesh: &Mesh, shape_bound: f64) -> AdmissibilityReport {
    let mut worst_ratio: f64 = 0.0;
    let mut offending_cells = Vec::new();
    for k in 0..mesh.num_cells() {
        let ratio = mesh.diameter(k) / mesh.inradius(k);
        worst_ratio = worst_ratio.max(ratio);
        if ratio > shape_bound {
            offending_cells.push(k);
        }
    }

    // each boundary edge must be shared by exactly two boundary faces
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    for &f in mesh.boundary_faces() {
        let v = mesh.face(f).vertices;
        for (a, b) in [(v[0], v[1]), (v[0], v[2]), (v[1], v[2])] {
            *edges.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let faces_matched = edges.values().all(|&c| c == 2);

    AdmissibilityReport {
        is_admissible: offending_cells.is_empty() && faces_matched,
        worst_ratio,
        offending_cells,
        faces_matched,
    }
}
