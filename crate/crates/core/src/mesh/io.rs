//! Text mesh format.
//!
//! ```text
//! SHPS 1 <p> <N>
//! ELEM <id>
//! x y z          ((p+1)² lines, tensor order, η fastest)
//! ...
//! ```
//!
//! Coordinates are written with shortest round-trip formatting, so a
//! save/load cycle reproduces nodes bit-for-bit. Connectivity is rebuilt on
//! load.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{build_connectivity, Element, SurfaceMesh};
use crate::error::{Error, Result};

pub fn write_mesh(mesh: &SurfaceMesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "SHPS 1 {} {}", mesh.order(), mesh.len());
    for e in mesh.elements() {
        let _ = writeln!(out, "ELEM {}", e.id);
        for x in &e.nodes {
            let _ = writeln!(out, "{:?} {:?} {:?}", x[0], x[1], x[2]);
        }
    }
    out
}

pub fn save_mesh(mesh: &SurfaceMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_mesh(mesh)).map_err(|e| Error::io(path, e))
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses elements, then builds connectivity with the default tolerance.
pub fn read_mesh(text: &str) -> Result<SurfaceMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .peekable();

    let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "empty mesh file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "SHPS" {
        return Err(parse_err(ln, format!("malformed header `{header}`")));
    }
    if fields[1] != "1" {
        return Err(parse_err(ln, format!("unsupported format version {}", fields[1])));
    }
    let p: usize = fields[2]
        .parse()
        .map_err(|_| parse_err(ln, format!("bad order `{}`", fields[2])))?;
    let n: usize = fields[3]
        .parse()
        .map_err(|_| parse_err(ln, format!("bad element count `{}`", fields[3])))?;
    let per = (p + 1) * (p + 1);

    let mut elements = Vec::with_capacity(n);
    while let Some((ln, line)) = lines.next() {
        let mut it = line.split_whitespace();
        if it.next() != Some("ELEM") {
            return Err(parse_err(ln, format!("expected `ELEM <id>`, found `{line}`")));
        }
        let id: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(ln, "missing or invalid element id"))?;
        let mut nodes = Vec::with_capacity(per);
        while let Some(&(ln, l)) = lines.peek() {
            if l.starts_with("ELEM") {
                break;
            }
            lines.next();
            let xs: Vec<f64> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err(ln, format!("bad coordinate line `{l}` in element {id}")))?;
            if xs.len() != 3 {
                return Err(parse_err(
                    ln,
                    format!("element {id}: expected 3 coordinates, found {}", xs.len()),
                ));
            }
            nodes.push([xs[0], xs[1], xs[2]]);
        }
        if nodes.len() != per {
            return Err(parse_err(
                ln,
                format!("element {id} has {} nodes, expected {per} for order {p}", nodes.len()),
            ));
        }
        elements.push(Element { id, order: p, nodes });
    }
    if elements.len() != n {
        return Err(parse_err(
            ln,
            format!("header declares {n} elements, file contains {}", elements.len()),
        ));
    }
    build_connectivity(elements, None)
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<SurfaceMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_mesh(&text)
}
