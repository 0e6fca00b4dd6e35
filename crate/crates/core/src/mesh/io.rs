//! The line-oriented `tetmesh 1` format.
//!
//! ```text
//! tetmesh 1
//! nv 4
//! 0 0 0
//! 1 0 0
//! 0 1 0
//! 0 0 1
//! nt 1
//! 0 1 2 3
//! ```
//!
//! Indices are 0-based. Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::{Mesh, MeshError};
use crate::Vec3;

#[derive(Debug, Error)]
pub enum MeshIoError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unexpected end of file, expected {0}")]
    Eof(&'static str),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn perr(line: usize, msg: impl Into<String>) -> MeshIoError {
    MeshIoError::Parse {
        line,
        msg: msg.into(),
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &'static str) -> Result<(usize, &'a str), MeshIoError> {
        for (i, l) in self.inner.by_ref() {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Ok((i + 1, t));
        }
        Err(MeshIoError::Eof(what))
    }
}

fn count_line(lines: &mut Lines, key: &'static str) -> Result<usize, MeshIoError> {
    let (ln, l) = lines.next(key)?;
    let mut it = l.split_whitespace();
    if it.next() != Some(key) {
        return Err(perr(ln, format!("expected `{key} <count>`")));
    }
    let n = it
        .next()
        .ok_or_else(|| perr(ln, format!("missing {key} count")))?
        .parse::<usize>()
        .map_err(|e| perr(ln, format!("bad {key} count: {e}")))?;
    if it.next().is_some() {
        return Err(perr(ln, "trailing tokens"));
    }
    Ok(n)
}

fn fields<T: std::str::FromStr, const N: usize>(ln: usize, l: &str) -> Result<[T; N], MeshIoError>
where
    T::Err: std::fmt::Display,
{
    let toks: Vec<&str> = l.split_whitespace().collect();
    if toks.len() != N {
        return Err(perr(ln, format!("expected {N} values, found {}", toks.len())));
    }
    let mut out = Vec::with_capacity(N);
    for t in toks {
        out.push(t.parse::<T>().map_err(|e| perr(ln, format!("`{t}`: {e}")))?);
    }
    out.try_into().map_err(|_| perr(ln, "internal"))
}

/// Parses a mesh without building it (no geometric validation).
pub fn parse_raw(text: &str) -> Result<(Vec<Vec3>, Vec<[usize; 4]>), MeshIoError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (ln, header) = lines.next("header")?;
    let mut h = header.split_whitespace();
    if h.next() != Some("tetmesh") || h.next() != Some("1") || h.next().is_some() {
        return Err(perr(ln, "expected header `tetmesh 1`"));
    }
    let nv = count_line(&mut lines, "nv")?;
    // guard against absurd counts before allocating
    let mut vertices = Vec::with_capacity(nv.min(1 << 20));
    for _ in 0..nv {
        let (ln, l) = lines.next("vertex")?;
        let [x, y, z] = fields::<f64, 3>(ln, l)?;
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(perr(ln, "non-finite coordinate"));
        }
        vertices.push(Vec3::new(x, y, z));
    }
    let nt = count_line(&mut lines, "nt")?;
    let mut cells = Vec::with_capacity(nt.min(1 << 20));
    for _ in 0..nt {
        let (ln, l) = lines.next("cell")?;
        let c = fields::<usize, 4>(ln, l)?;
        if let Some(&bad) = c.iter().find(|&&i| i >= nv) {
            return Err(perr(ln, format!("vertex index {bad} out of range (nv = {nv})")));
        }
        cells.push(c);
    }
    if let Ok((ln, _)) = lines.next("") {
        return Err(perr(ln, "trailing content after cells"));
    }
    Ok((vertices, cells))
}

pub fn parse_mesh(text: &str) -> Result<Mesh, MeshIoError> {
    let (v, c) = parse_raw(text)?;
    Ok(Mesh::new(v, c)?)
}

pub fn read_mesh(path: &Path) -> Result<Mesh, MeshIoError> {
    parse_mesh(&std::fs::read_to_string(path)?)
}

/// Coordinates are written with the shortest round-trip representation.
pub fn write_mesh_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "tetmesh 1");
    let _ = writeln!(s, "nv {}", mesh.vertices().len());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:?} {:?} {:?}", v.x, v.y, v.z);
    }
    let _ = writeln!(s, "nt {}", mesh.num_cells());
    for c in mesh.cells() {
        let _ = writeln!(s, "{} {} {} {}", c[0], c[1], c[2], c[3]);
    }
    s
}

pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<(), MeshIoError> {
    std::fs::write(path, write_mesh_string(mesh))?;
    Ok(())
}
