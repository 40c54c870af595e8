//! Simplicial meshes on intervals and polygons.
//!
//! Vertices are stored padded to two coordinates (the second is zero in 1D) and cells as a
//! flat index array with `dim + 1` entries per cell. A *facet* is an edge in 2D and a
//! vertex in 1D; facets are identified by their sorted vertex pair (1D facets repeat the
//! vertex), which also fixes the orientation of facet normals.

mod build;
mod io;
mod patch;
mod refine;

pub use build::Domain;
pub use io::{read_dump, write_dump};
pub use patch::PatchIndex;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type Point = [f64; 2];

/// Boundary condition attached to a boundary facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMarker {
    Dirichlet,
    GammaR,
    GammaN,
}

impl BoundaryMarker {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryMarker::Dirichlet => "dirichlet",
            BoundaryMarker::GammaR => "gamma_r",
            BoundaryMarker::GammaN => "gamma_n",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dirichlet" => Some(BoundaryMarker::Dirichlet),
            "gamma_r" => Some(BoundaryMarker::GammaR),
            "gamma_n" => Some(BoundaryMarker::GammaN),
            _ => None,
        }
    }
}

/// Sorted vertex pair identifying a facet. In 1D both entries are the same vertex.
pub type FacetKey = [usize; 2];

pub(crate) fn facet_key(a: usize, b: usize) -> FacetKey {
    if a <= b {
        [a, b]
    } else {
        [b, a]
    }
}

/// A facet with its incident cells (one on the boundary, two in the interior).
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub vertices: FacetKey,
    cells: [usize; 2],
    n_cells: u8,
    pub marker: Option<BoundaryMarker>,
}

impl Edge {
    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.n_cells as usize]
    }

    pub fn is_boundary(&self) -> bool {
        self.n_cells == 1
    }
}

/// Parent record of a green (closure) cell, kept so that the pair can be rolled back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct GreenParent {
    /// Parent triangle, counter-clockwise.
    pub parent: [usize; 3],
    /// Vertex bisecting the parent's refined edge.
    pub midpoint: usize,
}

#[derive(Debug, Clone)]
pub struct SimplicialMesh {
    dim: usize,
    coords: Vec<Point>,
    cells: Vec<usize>,
    edges: Vec<Edge>,
    edge_index: BTreeMap<FacetKey, usize>,
    /// Facet ids per cell; entry `j` is the facet opposite local vertex `j`.
    cell_edges: Vec<usize>,
    measures: Vec<f64>,
    diameters: Vec<f64>,
    green: Vec<Option<GreenParent>>,
}

impl SimplicialMesh {
    /// Builds a mesh from raw parts. Boundary facets must all carry a marker.
    ///
    /// 2D cells are reoriented counter-clockwise. Fails on degenerate cells, facets with
    /// more than two incident cells, unmarked boundary facets (which is how hanging nodes
    /// show up) and markers on interior facets.
    pub fn new(
        dim: usize,
        coords: Vec<Point>,
        cells: Vec<usize>,
        boundary: &BTreeMap<FacetKey, BoundaryMarker>,
    ) -> Result<Self> {
        let n_cells = cells.len() / (dim + 1);
        Self::with_green(dim, coords, cells, boundary, vec![None; n_cells])
    }

    pub(crate) fn with_green(
        dim: usize,
        coords: Vec<Point>,
        mut cells: Vec<usize>,
        boundary: &BTreeMap<FacetKey, BoundaryMarker>,
        green: Vec<Option<GreenParent>>,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return invalid(format!("mesh dimension must be 1 or 2, got {dim}"));
        }
        let nv = dim + 1;
        if cells.is_empty() || !cells.len().is_multiple_of(nv) {
            return invalid("cell array is empty or not a multiple of dim + 1");
        }
        if let Some(&v) = cells.iter().find(|&&v| v >= coords.len()) {
            return invalid(format!("cell references missing vertex {v}"));
        }
        let n_cells = cells.len() / nv;
        debug_assert_eq!(green.len(), n_cells);

        let mut measures = Vec::with_capacity(n_cells);
        let mut diameters = Vec::with_capacity(n_cells);
        for c in 0..n_cells {
            let cell = &mut cells[c * nv..(c + 1) * nv];
            let signed = signed_measure(dim, &coords, cell);
            if signed.abs() <= f64::EPSILON * diameter(&coords, cell).powi(dim as i32) {
                return invalid(format!("cell {c} has zero measure"));
            }
            if dim == 2 && signed < 0.0 {
                cell.swap(1, 2);
            }
            if dim == 1 && signed < 0.0 {
                cell.swap(0, 1);
            }
            measures.push(signed.abs());
            diameters.push(diameter(&coords, cell));
        }

        let mut incident: BTreeMap<FacetKey, Vec<usize>> = BTreeMap::new();
        for c in 0..n_cells {
            let cell = &cells[c * nv..(c + 1) * nv];
            for j in 0..nv {
                incident.entry(local_facet(dim, cell, j)).or_default().push(c);
            }
        }
        let mut edges = Vec::with_capacity(incident.len());
        let mut edge_index = BTreeMap::new();
        for (key, cs) in incident {
            if cs.len() > 2 {
                return invalid(format!("facet {key:?} has {} incident cells", cs.len()));
            }
            let marker = boundary.get(&key).copied();
            if cs.len() == 1 && marker.is_none() {
                return invalid(format!("boundary facet {key:?} has no marker (hanging node?)"));
            }
            if cs.len() == 2 && marker.is_some() {
                return invalid(format!("interior facet {key:?} carries a boundary marker"));
            }
            edge_index.insert(key, edges.len());
            let mut pair = [cs[0], cs[0]];
            if cs.len() == 2 {
                pair = [cs[0].min(cs[1]), cs[0].max(cs[1])];
            }
            edges.push(Edge {
                vertices: key,
                cells: pair,
                n_cells: cs.len() as u8,
                marker,
            });
        }
        if let Some(key) = boundary.keys().find(|k| !edge_index.contains_key(*k)) {
            return invalid(format!("boundary marker on unknown facet {key:?}"));
        }

        let mut cell_edges = Vec::with_capacity(cells.len());
        for c in 0..n_cells {
            let cell = &cells[c * nv..(c + 1) * nv];
            for j in 0..nv {
                cell_edges.push(edge_index[&local_facet(dim, cell, j)]);
            }
        }

        Ok(Self {
            dim,
            coords,
            cells,
            edges,
            edge_index,
            cell_edges,
            measures,
            diameters,
            green,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.coords.len()
    }

    pub fn n_cells(&self) -> usize {
        self.measures.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Vertices per cell.
    pub fn cell_size(&self) -> usize {
        self.dim + 1
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.coords[v]
    }

    pub fn vertices(&self) -> &[Point] {
        &self.coords
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let nv = self.dim + 1;
        &self.cells[c * nv..(c + 1) * nv]
    }

    pub fn cell_points(&self, c: usize) -> [Point; 3] {
        let mut pts = [[0.0; 2]; 3];
        for (p, &v) in pts.iter_mut().zip(self.cell(c)) {
            *p = self.coords[v];
        }
        pts
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&facet_key(a, b)).copied()
    }

    /// Facets of a cell; entry `j` is opposite local vertex `j`.
    pub fn cell_edges(&self, c: usize) -> &[usize] {
        let nv = self.dim + 1;
        &self.cell_edges[c * nv..(c + 1) * nv]
    }

    pub fn measure(&self, c: usize) -> f64 {
        self.measures[c]
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    /// Cell diameter H_B.
    pub fn diameter(&self, c: usize) -> f64 {
        self.diameters[c]
    }

    pub fn diameters(&self) -> &[f64] {
        &self.diameters
    }

    /// Global mesh size, the largest cell diameter.
    pub fn mesh_size(&self) -> f64 {
        self.diameters.iter().copied().fold(0.0, f64::max)
    }

    pub fn total_measure(&self) -> f64 {
        self.measures.iter().sum()
    }

    /// Measure of a facet: edge length in 2D, 1 (counting measure) in 1D.
    pub fn edge_measure(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].vertices;
        if self.dim == 1 {
            1.0
        } else {
            dist(self.coords[a], self.coords[b])
        }
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edges[e].vertices;
        midpoint(self.coords[a], self.coords[b])
    }

    /// Unit normal of facet `e`, pointing from the lower-id incident cell to the
    /// higher-id one. Boundary facets get the outward normal.
    pub fn edge_normal(&self, e: usize) -> Point {
        let edge = &self.edges[e];
        let from = edge.cells[0];
        let inside = self.cell_centroid(from);
        let [a, b] = edge.vertices;
        let pa = self.coords[a];
        let mut n = if self.dim == 1 {
            [1.0, 0.0]
        } else {
            let pb = self.coords[b];
            let t = [pb[0] - pa[0], pb[1] - pa[1]];
            let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
            [t[1] / len, -t[0] / len]
        };
        // orient away from the lower-id cell
        if (pa[0] - inside[0]) * n[0] + (pa[1] - inside[1]) * n[1] < 0.0 {
            n = [-n[0], -n[1]];
        }
        n
    }

    pub fn cell_centroid(&self, c: usize) -> Point {
        let mut m = [0.0; 2];
        let cell = self.cell(c);
        for &v in cell {
            m[0] += self.coords[v][0];
            m[1] += self.coords[v][1];
        }
        let k = cell.len() as f64;
        [m[0] / k, m[1] / k]
    }

    pub fn boundary_marker(&self, e: usize) -> Option<BoundaryMarker> {
        self.edges[e].marker
    }

    /// Boundary facets as `(key, marker)` in key order.
    pub fn boundary_facets(&self) -> impl Iterator<Item = (FacetKey, BoundaryMarker)> + '_ {
        self.edges.iter().filter_map(|e| e.marker.map(|m| (e.vertices, m)))
    }

    pub fn boundary_map(&self) -> BTreeMap<FacetKey, BoundaryMarker> {
        self.boundary_facets().collect()
    }

    pub fn has_marker(&self, marker: BoundaryMarker) -> bool {
        self.edges.iter().any(|e| e.marker == Some(marker))
    }

    /// Whether cell `c` is a green closure cell.
    pub fn is_green(&self, c: usize) -> bool {
        self.green[c].is_some()
    }

    pub(crate) fn green_parent(&self, c: usize) -> Option<GreenParent> {
        self.green[c]
    }

    /// Gradients of the barycentric coordinates of cell `c` (constant on the cell).
    pub fn barycentric_gradients(&self, c: usize) -> [Point; 3] {
        let p = self.cell_points(c);
        if self.dim == 1 {
            let l = p[1][0] - p[0][0];
            [[-1.0 / l, 0.0], [1.0 / l, 0.0], [0.0, 0.0]]
        } else {
            let two_a = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
            let mut g = [[0.0; 2]; 3];
            for i in 0..3 {
                let j = (i + 1) % 3;
                let k = (i + 2) % 3;
                g[i] = [(p[j][1] - p[k][1]) / two_a, (p[k][0] - p[j][0]) / two_a];
            }
            g
        }
    }

    /// Barycentric coordinates of `x` with respect to cell `c`.
    pub fn barycentric(&self, c: usize, x: &[f64]) -> [f64; 3] {
        let p = self.cell_points(c);
        if self.dim == 1 {
            let t = (x[0] - p[0][0]) / (p[1][0] - p[0][0]);
            [1.0 - t, t, 0.0]
        } else {
            let g = self.barycentric_gradients(c);
            let dx = [x[0] - p[0][0], x[1] - p[0][1]];
            let l1 = g[1][0] * dx[0] + g[1][1] * dx[1];
            let l2 = g[2][0] * dx[0] + g[2][1] * dx[1];
            [1.0 - l1 - l2, l1, l2]
        }
    }

    /// Maps barycentric coordinates on cell `c` to a physical point.
    pub fn map_point(&self, c: usize, bary: &[f64]) -> Point {
        let mut x = [0.0; 2];
        for (&v, &l) in self.cell(c).iter().zip(bary) {
            x[0] += l * self.coords[v][0];
            x[1] += l * self.coords[v][1];
        }
        x
    }

    /// Finds a cell containing `x` (linear scan, tolerance relative to cell size).
    pub fn locate(&self, x: &[f64]) -> Option<(usize, [f64; 3])> {
        let nv = self.dim + 1;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for c in 0..self.n_cells() {
            let l = self.barycentric(c, x);
            let worst = l[..nv].iter().copied().fold(f64::INFINITY, f64::min);
            if best.as_ref().is_none_or(|b| worst > b.2) {
                best = Some((c, l, worst));
            }
        }
        best.filter(|b| b.2 >= -1e-12).map(|(c, l, _)| (c, l))
    }
}

pub(crate) fn local_facet(dim: usize, cell: &[usize], j: usize) -> FacetKey {
    if dim == 1 {
        let v = cell[1 - j];
        [v, v]
    } else {
        facet_key(cell[(j + 1) % 3], cell[(j + 2) % 3])
    }
}

pub(crate) fn signed_measure(dim: usize, coords: &[Point], cell: &[usize]) -> f64 {
    let p0 = coords[cell[0]];
    let p1 = coords[cell[1]];
    if dim == 1 {
        p1[0] - p0[0]
    } else {
        let p2 = coords[cell[2]];
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }
}

fn diameter(coords: &[Point], cell: &[usize]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..cell.len() {
        for j in i + 1..cell.len() {
            d = d.max(dist(coords[cell[i]], coords[cell[j]]));
        }
    }
    d
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub(crate) fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}
