use thiserror::Error;

use super::Mesh;
use crate::spaces::VField;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaceKind {
    Interior,
    Inflow,
    Outflow,
    Slip,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundaryError {
    #[error("boundary velocity has {got} dofs, mesh has {expected} faces")]
    MissingDofs { expected: usize, got: usize },
}

/// Split of the boundary faces by the sign of `u_B·n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPartition {
    kinds: Vec<FaceKind>,
    pub inflow_faces: Vec<usize>,
    pub outflow_faces: Vec<usize>,
    pub slip_faces: Vec<usize>,
}

impl BoundaryPartition {
    pub fn kind(&self, f: usize) -> FaceKind {
        self.kinds[f]
    }
    pub fn kinds(&self) -> &[FaceKind] {
        &self.kinds
    }
    pub fn is_inflow(&self, f: usize) -> bool {
        self.kinds[f] == FaceKind::Inflow
    }
    pub fn is_outflow(&self, f: usize) -> bool {
        self.kinds[f] == FaceKind::Outflow
    }
}

/// `1e-12 · max_σ |u_{B,σ}|`.
pub fn default_zero_tol(u_b: &VField<Vec3>) -> f64 {
    1e-12 * u_b.dofs.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn classify_boundary(
    mesh: &Mesh,
    u_b: &VField<Vec3>,
    zero_tol: f64,
) -> Result<BoundaryPartition, BoundaryError> {
    if u_b.dofs.len() != mesh.num_faces() {
        return Err(BoundaryError::MissingDofs {
            expected: mesh.num_faces(),
            got: u_b.dofs.len(),
        });
    }
    let mut kinds = vec![FaceKind::Interior; mesh.num_faces()];
    let mut p = BoundaryPartition {
        kinds: Vec::new(),
        inflow_faces: Vec::new(),
        outflow_faces: Vec::new(),
        slip_faces: Vec::new(),
    };
    for &f in mesh.boundary_faces() {
        let un = u_b.dofs[f].dot(&mesh.face(f).normal);
        if un.abs() <= zero_tol {
            kinds[f] = FaceKind::Slip;
            p.slip_faces.push(f);
        } else if un < 0.0 {
            kinds[f] = FaceKind::Inflow;
            p.inflow_faces.push(f);
        } else {
            kinds[f] = FaceKind::Outflow;
            p.outflow_faces.push(f);
        }
    }
    p.kinds = kinds;
    Ok(p)
}

/// A flat polygonal piece of the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarRegion {
    pub point: Vec3,
    pub normal: Vec3,
    /// Polygon vertices, in order, lying in the plane.
    pub polygon: Vec<Vec3>,
}

impl PlanarRegion {
    /// Axis-aligned rectangle in the plane `x_axis = value`.
    pub fn axis_rect(axis: usize, value: f64, lo: [f64; 2], hi: [f64; 2]) -> Self {
        let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
        let corner = |s: f64, t: f64| {
            let mut p = Vec3::zeros();
            p[axis] = value;
            p[a] = s;
            p[b] = t;
            p
        };
        let mut normal = Vec3::zeros();
        normal[axis] = 1.0;
        Self {
            point: corner(lo[0], lo[1]),
            normal,
            polygon: vec![
                corner(lo[0], lo[1]),
                corner(hi[0], lo[1]),
                corner(hi[0], hi[1]),
                corner(lo[0], hi[1]),
            ],
        }
    }

    fn frame(&self) -> (Vec3, Vec3, Vec3) {
        let n = self.normal.normalize();
        let trial = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let e1 = n.cross(&trial).normalize();
        let e2 = n.cross(&e1);
        (n, e1, e2)
    }

    fn project(&self, x: &Vec3) -> (f64, [f64; 2]) {
        let (n, e1, e2) = self.frame();
        let d = x - self.point;
        (d.dot(&n), [d.dot(&e1), d.dot(&e2)])
    }

    fn polygon_2d(&self) -> Vec<[f64; 2]> {
        self.polygon.iter().map(|p| self.project(p).1).collect()
    }

    pub fn area(&self) -> f64 {
        let poly = self.polygon_2d();
        let n = poly.len();
        let mut s = 0.0;
        for i in 0..n {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            s += a[0] * b[1] - b[0] * a[1];
        }
        0.5 * s.abs()
    }

    /// Closed-region membership with tolerance `tol`.
    fn contains(&self, x: &Vec3, tol: f64) -> bool {
        let (dist, q) = self.project(x);
        if dist.abs() > tol {
            return false;
        }
        let poly = self.polygon_2d();
        if point_segment_dist(&q, &poly) <= tol {
            return true;
        }
        let mut inside = false;
        let n = poly.len();
        for i in 0..n {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            if (a[1] > q[1]) != (b[1] > q[1]) {
                let xc = a[0] + (q[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if q[0] < xc {
                    inside = !inside;
                }
            }
        }
        inside
    }

    fn contains_strictly(&self, x: &Vec3, tol: f64) -> bool {
        let (_, q) = self.project(x);
        self.contains(x, tol) && point_segment_dist(&q, &self.polygon_2d()) > tol
    }

    fn on_plane(&self, x: &Vec3, tol: f64) -> bool {
        self.project(x).0.abs() <= tol
    }
}

fn point_segment_dist(q: &[f64; 2], poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            (((q[0] - a[0]) * dx + (q[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (px, py) = (a[0] + t * dx - q[0], a[1] + t * dy - q[1]);
        best = best.min((px * px + py * py).sqrt());
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Inflow,
    Outflow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceMismatch {
    pub face: usize,
    pub role: Role,
    pub reason: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UncoveredRegion {
    pub role: Role,
    pub region: usize,
    pub declared_area: f64,
    pub covered_area: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitReport {
    pub fits: bool,
    pub mismatched_faces: Vec<FaceMismatch>,
    pub uncovered_regions: Vec<UncoveredRegion>,
}

/// Checks that the closure of the declared inflow (outflow) regions equals the
/// union of the faces classified as inflow (outflow).
pub fn check_fit(
    mesh: &Mesh,
    partition: &BoundaryPartition,
    inflow: &[PlanarRegion],
    outflow: &[PlanarRegion],
) -> FitReport {
    let tol = 1e-9 * mesh.domain_diameter();
    let mut report = FitReport::default();
    for (role, regions, faces) in [
        (Role::Inflow, inflow, &partition.inflow_faces),
        (Role::Outflow, outflow, &partition.outflow_faces),
    ] {
        fit_role(mesh, role, regions, faces, tol, &mut report);
    }
    report.fits = report.mismatched_faces.is_empty() && report.uncovered_regions.is_empty();
    report
}

fn sample_points(p: &[Vec3; 3]) -> Vec<Vec3> {
    let mut out = p.to_vec();
    out.push((p[0] + p[1] + p[2]) / 3.0);
    for (i, j) in [(0, 1), (1, 2), (0, 2)] {
        out.push((p[i] + p[j]) * 0.5);
    }
    for i in 0..3 {
        out.push(p[i] * (2.0 / 3.0) + (p[(i + 1) % 3] + p[(i + 2) % 3]) / 6.0);
    }
    out
}

fn fit_role(
    mesh: &Mesh,
    role: Role,
    regions: &[PlanarRegion],
    classified: &[usize],
    tol: f64,
    report: &mut FitReport,
) {
    let mut covered = vec![0.0; regions.len()];
    for &f in classified {
        let pts = sample_points(&mesh.face_points(f));
        match regions.iter().position(|r| pts.iter().all(|x| r.contains(x, tol))) {
            Some(i) => covered[i] += mesh.face(f).area,
            None => {
                let straddles = regions.iter().any(|r| {
                    pts.iter().all(|x| r.on_plane(x, tol)) && pts.iter().any(|x| r.contains(x, tol))
                });
                report.mismatched_faces.push(FaceMismatch {
                    face: f,
                    role,
                    reason: if straddles {
                        "face straddles the edge of a declared region"
                    } else {
                        "classified face lies outside every declared region"
                    },
                });
            }
        }
    }

    // boundary faces inside a declared region but classified otherwise
    for &f in mesh.boundary_faces() {
        if classified.contains(&f) {
            continue;
        }
        let pts = sample_points(&mesh.face_points(f));
        let on_region = regions.iter().any(|r| {
            pts.iter().all(|x| r.on_plane(x, tol))
                && [3, 7, 8, 9].iter().any(|&i| r.contains_strictly(&pts[i], tol))
        });
        if on_region {
            report.mismatched_faces.push(FaceMismatch {
                face: f,
                role,
                reason: "face in a declared region is not classified accordingly",
            });
        }
    }

    for (i, r) in regions.iter().enumerate() {
        let declared = r.area();
        if (covered[i] - declared).abs() > 1e-9 * declared.max(tol * tol) {
            report.uncovered_regions.push(UncoveredRegion {
                role,
                region: i,
                declared_area: declared,
                covered_area: covered[i],
            });
        }
    }
}
