//! Legacy ASCII VTK output: the mesh with cell densities and cell-mean velocities.

use std::fmt::Write as _;

use crate::mesh::Mesh;
use crate::scheme::State;

pub fn vtk_string(mesh: &Mesh, s: &State) -> String {
    let mut out = String::new();
    let nc = mesh.num_cells();
    writeln!(out, "# vtk DataFile Version 3.0\nstep {} t {:e}\nASCII\nDATASET UNSTRUCTURED_GRID", s.k, s.t).unwrap();
    writeln!(out, "POINTS {} double", mesh.vertices().len()).unwrap();
    for v in mesh.vertices() {
        writeln!(out, "{:e} {:e} {:e}", v.x, v.y, v.z).unwrap();
    }
    writeln!(out, "CELLS {nc} {}", 5 * nc).unwrap();
    for c in mesh.cells() {
        writeln!(out, "4 {} {} {} {}", c[0], c[1], c[2], c[3]).unwrap();
    }
    writeln!(out, "CELL_TYPES {nc}").unwrap();
    for _ in 0..nc {
        out.push_str("10\n");
    }
    writeln!(out, "CELL_DATA {nc}\nSCALARS rho double 1\nLOOKUP_TABLE default").unwrap();
    for r in &s.rho.values {
        writeln!(out, "{r:e}").unwrap();
    }
    out.push_str("VECTORS u double\n");
    for u in s.u.hat(mesh).values {
        writeln!(out, "{:e} {:e} {:e}", u.x, u.y, u.z).unwrap();
    }
    out
}
