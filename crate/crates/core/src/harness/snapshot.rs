//! Plain-text trajectory snapshots.
//!
//! ```text
//! nsfvfe-trajectory 1
//! cells 6 faces 18 dt 2.5e-1 states 3
//! state 0 0e0
//! <one density per line, `cells` lines>
//! <three velocity components per line, `faces` lines>
//! state 1 2.5e-1
//! ...
//! ```
//!
//! Numbers use Rust's shortest round-trip formatting, so reading a snapshot
//! back reproduces the states bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::scheme::{State, Trajectory};
use crate::spaces::{QField, VField};
use crate::Vec3;

pub const MAGIC: &str = "nsfvfe-trajectory 1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SnapshotError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("snapshot ends early (expected {expected})")]
    Truncated { expected: String },
    #[error("snapshot has {cells} cells and {faces} faces, mesh has {mesh_cells} and {mesh_faces}")]
    MeshMismatch {
        cells: usize,
        faces: usize,
        mesh_cells: usize,
        mesh_faces: usize,
    },
    #[error("{0}")]
    Io(String),
}

pub fn write_snapshot_string(traj: &Trajectory) -> String {
    let s0 = &traj.states[0];
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(
        out,
        "cells {} faces {} dt {:e} states {}",
        s0.rho.values.len(),
        s0.u.dofs.len(),
        traj.dt,
        traj.states.len()
    )
    .unwrap();
    for s in &traj.states {
        writeln!(out, "state {} {:e}", s.k, s.t).unwrap();
        for r in &s.rho.values {
            writeln!(out, "{r:e}").unwrap();
        }
        for u in &s.u.dofs {
            writeln!(out, "{:e} {:e} {:e}", u.x, u.y, u.z).unwrap();
        }
    }
    out
}

pub fn write_snapshot(traj: &Trajectory, path: &Path) -> Result<(), SnapshotError> {
    std::fs::write(path, write_snapshot_string(traj)).map_err(|e| SnapshotError::Io(format!("{}: {e}", path.display())))
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, expected: &str) -> Result<(usize, &'a str), SnapshotError> {
        self.it
            .next()
            .map(|(i, l)| (i + 1, l.trim()))
            .ok_or_else(|| SnapshotError::Truncated { expected: expected.to_string() })
    }
}

fn num<T: std::str::FromStr>(line: usize, tok: Option<&str>, what: &str) -> Result<T, SnapshotError>
where
    T::Err: std::fmt::Display,
{
    let tok = tok.ok_or_else(|| SnapshotError::Parse { line, msg: format!("missing {what}") })?;
    tok.parse::<T>().map_err(|e| SnapshotError::Parse { line, msg: format!("{what} `{tok}`: {e}") })
}

fn finite(line: usize, x: f64) -> Result<f64, SnapshotError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(SnapshotError::Parse { line, msg: format!("non-finite value {x}") })
    }
}

fn keyword(line: usize, tok: Option<&str>, kw: &str) -> Result<(), SnapshotError> {
    match tok {
        Some(t) if t == kw => Ok(()),
        other => Err(SnapshotError::Parse { line, msg: format!("expected `{kw}`, found `{}`", other.unwrap_or("")) }),
    }
}

fn no_trailing<'a>(line: usize, mut toks: impl Iterator<Item = &'a str>) -> Result<(), SnapshotError> {
    match toks.next() {
        None => Ok(()),
        Some(t) => Err(SnapshotError::Parse { line, msg: format!("unexpected `{t}`") }),
    }
}

/// Parses a snapshot. Densities are not checked for sign here.
pub fn parse_snapshot(text: &str) -> Result<Trajectory, SnapshotError> {
    let mut lines = Lines { it: text.lines().enumerate() };
    let (ln, magic) = lines.next("header")?;
    if magic != MAGIC {
        return Err(SnapshotError::Parse { line: ln, msg: format!("expected `{MAGIC}`") });
    }
    let (ln, dims) = lines.next("dimensions")?;
    let mut t = dims.split_whitespace();
    keyword(ln, t.next(), "cells")?;
    let cells: usize = num(ln, t.next(), "cell count")?;
    keyword(ln, t.next(), "faces")?;
    let faces: usize = num(ln, t.next(), "face count")?;
    keyword(ln, t.next(), "dt")?;
    let dt = finite(ln, num(ln, t.next(), "dt")?)?;
    keyword(ln, t.next(), "states")?;
    let nstates: usize = num(ln, t.next(), "state count")?;
    no_trailing(ln, t)?;
    if cells == 0 || nstates == 0 {
        return Err(SnapshotError::Parse { line: ln, msg: "empty trajectory".into() });
    }
    if !(dt > 0.0) {
        return Err(SnapshotError::Parse { line: ln, msg: "dt must be positive".into() });
    }
    // cap preallocation by what the text could hold
    let budget = text.len();
    let mut states = Vec::with_capacity(nstates.min(budget));
    for j in 0..nstates {
        let (ln, head) = lines.next(&format!("state {j}"))?;
        let mut t = head.split_whitespace();
        keyword(ln, t.next(), "state")?;
        let k: usize = num(ln, t.next(), "step index")?;
        if k != j {
            return Err(SnapshotError::Parse { line: ln, msg: format!("expected state {j}, found {k}") });
        }
        let time = finite(ln, num(ln, t.next(), "time")?)?;
        no_trailing(ln, t)?;
        let mut rho = Vec::with_capacity(cells.min(budget));
        for c in 0..cells {
            let (ln, l) = lines.next(&format!("density {c} of state {j}"))?;
            let mut t = l.split_whitespace();
            rho.push(finite(ln, num(ln, t.next(), "density")?)?);
            no_trailing(ln, t)?;
        }
        let mut u = Vec::with_capacity(faces.min(budget));
        for f in 0..faces {
            let (ln, l) = lines.next(&format!("velocity {f} of state {j}"))?;
            let mut t = l.split_whitespace();
            let mut c = [0.0; 3];
            for x in &mut c {
                *x = finite(ln, num(ln, t.next(), "velocity component")?)?;
            }
            no_trailing(ln, t)?;
            u.push(Vec3::new(c[0], c[1], c[2]));
        }
        states.push(State { k, t: time, rho: QField { values: rho }, u: VField { dofs: u } });
    }
    if let Some((ln, l)) = lines.it.find(|(_, l)| !l.trim().is_empty()) {
        return Err(SnapshotError::Parse { line: ln + 1, msg: format!("trailing content `{}`", l.trim()) });
    }
    Ok(Trajectory { dt, states, info: Vec::new() })
}

pub fn read_snapshot(path: &Path) -> Result<Trajectory, SnapshotError> {
    let text = std::fs::read_to_string(path).map_err(|e| SnapshotError::Io(format!("{}: {e}", path.display())))?;
    parse_snapshot(&text)
}

/// Checks the snapshot sizes against a mesh.
pub fn check_sizes(traj: &Trajectory, mesh: &crate::mesh::Mesh) -> Result<(), SnapshotError> {
    let s = &traj.states[0];
    let (cells, faces) = (s.rho.values.len(), s.u.dofs.len());
    if cells != mesh.num_cells() || faces != mesh.num_faces() {
        return Err(SnapshotError::MeshMismatch { cells, faces, mesh_cells: mesh.num_cells(), mesh_faces: mesh.num_faces() });
    }
    Ok(())
}
