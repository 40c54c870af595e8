//! P1 Lagrange spaces and the linear algebra behind them.

mod assembly;
mod projection;
pub mod quadrature;
mod solver;
mod sparse;

pub use assembly::{
    assemble_boundary_load, assemble_boundary_mass, assemble_load, assemble_mass, assemble_stiffness, integrate_cells,
    load_of_ones,
};
pub use projection::{interpolate, l2_project, quasi_interpolate, ritz_project, ritz_project_robin};
pub use quadrature::QuadRule;
pub use solver::{solve_spd, SpdSolver, SOLVE_TOLERANCE};
pub use sparse::SparseSymOperator;

use std::sync::Arc;

use crate::error::Result;
use crate::mesh::{BoundaryMarker, Point, SimplicialMesh};

/// Nodal P1 space over a mesh. Dofs are the mesh vertices.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Arc<SimplicialMesh>,
    dof_of_vertex: Vec<usize>,
    dirichlet_mask: Vec<bool>,
}

impl FeSpace {
    /// Builds the space; dofs on Dirichlet-marked facets are clamped.
    pub fn new(mesh: Arc<SimplicialMesh>) -> Self {
        let n = mesh.n_vertices();
        let mut dirichlet_mask = vec![false; n];
        for (key, marker) in mesh.boundary_facets() {
            if marker == BoundaryMarker::Dirichlet {
                for v in key {
                    dirichlet_mask[v] = true;
                }
            }
        }
        Self {
            mesh,
            dof_of_vertex: (0..n).collect(),
            dirichlet_mask,
        }
    }

    pub fn mesh(&self) -> &SimplicialMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<SimplicialMesh> {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_of_vertex.len()
    }

    pub fn dof_of_vertex(&self, v: usize) -> usize {
        self.dof_of_vertex[v]
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet_mask
    }

    pub fn has_dirichlet(&self) -> bool {
        self.dirichlet_mask.iter().any(|&m| m)
    }

    /// Dofs of cell `c` in local vertex order.
    pub fn cell_dofs(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        self.mesh.cell(c).iter().map(|&v| self.dof_of_vertex[v])
    }

    /// Value of a coefficient vector on cell `c` at barycentric point `bary`.
    pub fn eval_on_cell(&self, coeffs: &[f64], c: usize, bary: &[f64]) -> f64 {
        self.cell_dofs(c).zip(bary).map(|(d, l)| coeffs[d] * l).sum()
    }

    /// Gradient of a coefficient vector on cell `c` (constant).
    pub fn gradient_on_cell(&self, coeffs: &[f64], c: usize) -> Point {
        let g = self.mesh.barycentric_gradients(c);
        let mut out = [0.0; 2];
        for (d, gi) in self.cell_dofs(c).zip(g) {
            out[0] += coeffs[d] * gi[0];
            out[1] += coeffs[d] * gi[1];
        }
        out
    }

    /// Point evaluation; fails outside the mesh.
    pub fn evaluate(&self, coeffs: &[f64], x: &[f64]) -> Result<f64> {
        let (c, l) = self
            .mesh
            .locate(x)
            .ok_or_else(|| crate::Error::PointOutside { point: x.to_vec() })?;
        Ok(self.eval_on_cell(coeffs, c, &l))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Domain;

    #[test]
    fn dirichlet_mask_marks_boundary_vertices() {
        let m = SimplicialMesh::uniform_dirichlet(&Domain::unit_square(), 3).unwrap();
        let s = FeSpace::new(Arc::new(m));
        assert_eq!(s.dirichlet_mask().iter().filter(|&&b| b).count(), 12);
        let micro = SimplicialMesh::uniform_cell(&Domain::unit_square(), 3, |p| p[1] == 0.0).unwrap();
        assert!(!FeSpace::new(Arc::new(micro)).has_dirichlet());
    }
}
