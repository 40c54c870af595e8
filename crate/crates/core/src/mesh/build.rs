use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{facet_key, midpoint, BoundaryMarker, FacetKey, Point, SimplicialMesh};
use crate::error::{invalid, Result};

/// Axis-aligned domain for structured mesh generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Rectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
}

impl Domain {
    pub fn unit_interval() -> Self {
        Domain::Interval { a: 0.0, b: 1.0 }
    }

    pub fn unit_square() -> Self {
        Domain::Rectangle {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 1.0,
        }
    }

    /// Unit interval or unit square.
    pub fn unit(dim: usize) -> Self {
        if dim == 1 {
            Self::unit_interval()
        } else {
            Self::unit_square()
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
        }
    }

    pub fn measure(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => b - a,
            Domain::Rectangle { x0, x1, y0, y1 } => (x1 - x0) * (y1 - y0),
        }
    }

    /// Lower and upper corners, padded to two coordinates.
    pub fn bounds(&self) -> (Point, Point) {
        match *self {
            Domain::Interval { a, b } => ([a, 0.0], [b, 0.0]),
            Domain::Rectangle { x0, x1, y0, y1 } => ([x0, y0], [x1, y1]),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Domain::Interval { a, b } => a.is_finite() && b.is_finite() && b > a,
            Domain::Rectangle { x0, x1, y0, y1 } => {
                [x0, x1, y0, y1].iter().all(|v| v.is_finite()) && x1 > x0 && y1 > y0
            }
        };
        if ok {
            Ok(())
        } else {
            invalid(format!("degenerate domain {self:?}"))
        }
    }
}

impl SimplicialMesh {
    /// Structured mesh with `n` subdivisions per axis; in 2D every grid square is split
    /// into two triangles along its lower-left to upper-right diagonal. `marker` assigns a
    /// boundary condition from the facet midpoint.
    pub fn uniform(domain: &Domain, n: usize, marker: impl Fn(Point) -> BoundaryMarker) -> Result<Self> {
        if n == 0 {
            return invalid("number of subdivisions must be at least 1");
        }
        domain.validate()?;
        match *domain {
            Domain::Interval { a, b } => {
                let coords: Vec<Point> = (0..=n).map(|i| [a + (b - a) * i as f64 / n as f64, 0.0]).collect();
                let cells: Vec<usize> = (0..n).flat_map(|i| [i, i + 1]).collect();
                let mut boundary = BTreeMap::new();
                boundary.insert([0, 0], marker(coords[0]));
                boundary.insert([n, n], marker(coords[n]));
                SimplicialMesh::new(1, coords, cells, &boundary)
            }
            Domain::Rectangle { x0, x1, y0, y1 } => {
                let id = |i: usize, j: usize| j * (n + 1) + i;
                let mut coords = Vec::with_capacity((n + 1) * (n + 1));
                for j in 0..=n {
                    for i in 0..=n {
                        coords.push([
                            x0 + (x1 - x0) * i as f64 / n as f64,
                            y0 + (y1 - y0) * j as f64 / n as f64,
                        ]);
                    }
                }
                let mut cells = Vec::with_capacity(6 * n * n);
                for j in 0..n {
                    for i in 0..n {
                        let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
                        cells.extend_from_slice(&[v00, v10, v11]);
                        cells.extend_from_slice(&[v00, v11, v01]);
                    }
                }
                let mut boundary: BTreeMap<FacetKey, BoundaryMarker> = BTreeMap::new();
                let mut mark = |a: usize, b: usize| {
                    boundary.insert(facet_key(a, b), marker(midpoint(coords[a], coords[b])));
                };
                for i in 0..n {
                    mark(id(i, 0), id(i + 1, 0));
                    mark(id(i, n), id(i + 1, n));
                    mark(id(0, i), id(0, i + 1));
                    mark(id(n, i), id(n, i + 1));
                }
                SimplicialMesh::new(2, coords, cells, &boundary)
            }
        }
    }

    /// Macroscopic mesh: every boundary facet is Dirichlet.
    pub fn uniform_dirichlet(domain: &Domain, n: usize) -> Result<Self> {
        Self::uniform(domain, n, |_| BoundaryMarker::Dirichlet)
    }

    /// Microscopic cell mesh: facets selected by `is_robin` are Γ_R, the rest Γ_N.
    /// Γ_R must not be empty.
    pub fn uniform_cell(domain: &Domain, n: usize, is_robin: impl Fn(Point) -> bool) -> Result<Self> {
        let mesh = Self::uniform(domain, n, |p| {
            if is_robin(p) {
                BoundaryMarker::GammaR
            } else {
                BoundaryMarker::GammaN
            }
        })?;
        if !mesh.has_marker(BoundaryMarker::GammaR) {
            return invalid("micro mesh has an empty Robin boundary");
        }
        Ok(mesh)
    }
}
