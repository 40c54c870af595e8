//! Line-oriented mesh dump.
//!
//! ```text
//! dim nv nc ne
//! x [y]            (nv lines)
//! v0 v1 [v2]       (nc lines)
//! v0 v1 marker     (one line per boundary facet, sorted by vertex pair)
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::{BoundaryMarker, Point, SimplicialMesh};
use crate::error::{Error, Result};

pub fn write_dump<W: Write>(mesh: &SimplicialMesh, mut w: W) -> Result<()> {
    writeln!(
        w,
        "{} {} {} {}",
        mesh.dim(),
        mesh.n_vertices(),
        mesh.n_cells(),
        mesh.n_edges()
    )?;
    for p in mesh.vertices() {
        if mesh.dim() == 1 {
            writeln!(w, "{}", p[0])?;
        } else {
            writeln!(w, "{} {}", p[0], p[1])?;
        }
    }
    for c in 0..mesh.n_cells() {
        let line: Vec<String> = mesh.cell(c).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    for ([a, b], marker) in mesh.boundary_facets() {
        writeln!(w, "{a} {b} {}", marker.as_str())?;
    }
    Ok(())
}

fn bad(detail: impl Into<String>) -> Error {
    Error::Format {
        what: "mesh dump",
        detail: detail.into(),
    }
}

fn parse<T: std::str::FromStr>(tok: Option<&str>) -> Result<T> {
    tok.ok_or_else(|| bad("missing field"))?
        .parse()
        .map_err(|_| bad("unparsable field"))
}

pub fn read_dump<R: BufRead>(r: R) -> Result<SimplicialMesh> {
    let mut lines = r.lines();
    let mut next = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| bad("unexpected end of input"))?
            .map_err(Error::from)
    };
    let header = next()?;
    let mut h = header.split_whitespace();
    let dim: usize = parse(h.next())?;
    let nv: usize = parse(h.next())?;
    let nc: usize = parse(h.next())?;
    let ne: usize = parse(h.next())?;
    let mut coords: Vec<Point> = Vec::with_capacity(nv);
    for _ in 0..nv {
        let l = next()?;
        let mut t = l.split_whitespace();
        let x = parse(t.next())?;
        let y = if dim == 2 { parse(t.next())? } else { 0.0 };
        coords.push([x, y]);
    }
    let mut cells = Vec::with_capacity(nc * (dim + 1));
    for _ in 0..nc {
        let l = next()?;
        let mut t = l.split_whitespace();
        for _ in 0..=dim {
            cells.push(parse(t.next())?);
        }
    }
    let mut boundary = BTreeMap::new();
    while let Ok(l) = next() {
        if l.trim().is_empty() {
            continue;
        }
        let mut t = l.split_whitespace();
        let a: usize = parse(t.next())?;
        let b: usize = parse(t.next())?;
        let marker = t
            .next()
            .and_then(BoundaryMarker::parse)
            .ok_or_else(|| bad("unknown marker"))?;
        boundary.insert(super::facet_key(a, b), marker);
    }
    let mesh = SimplicialMesh::new(dim, coords, cells, &boundary)?;
    if mesh.n_edges() != ne {
        return Err(bad(format!("header declares {ne} facets, mesh has {}", mesh.n_edges())));
    }
    Ok(mesh)
}
