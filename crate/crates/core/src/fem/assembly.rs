//! Assembly of P1 bilinear forms and load vectors.
//!
//! Bilinear forms use exact closed forms; loads of general fields use a quadrature rule.
//! Local contributions are computed per cell (in parallel) and summed in cell order.

use super::quadrature::gauss_legendre;
use super::{FeSpace, QuadRule, SparseSymOperator};
use crate::error::{invalid, Result};
use crate::mesh::{BoundaryMarker, Point};
use crate::par;

fn assemble_local(space: &FeSpace, local: impl Fn(usize) -> [[f64; 3]; 3] + Sync + Send) -> SparseSymOperator {
    let blocks = par::map_range(space.mesh().n_cells(), local);
    let nv = space.mesh().cell_size();
    let mut triplets = Vec::with_capacity(blocks.len() * nv * nv);
    for (c, block) in blocks.iter().enumerate() {
        let dofs: Vec<usize> = space.cell_dofs(c).collect();
        for i in 0..nv {
            for j in 0..nv {
                triplets.push((dofs[i], dofs[j], block[i][j]));
            }
        }
    }
    SparseSymOperator::from_triplets(space.n_dofs(), triplets)
}

/// `coeff ∫ ∇ξ_i · ∇ξ_j`.
pub fn assemble_stiffness(space: &FeSpace, coeff: f64) -> SparseSymOperator {
    let mesh = space.mesh();
    assemble_local(space, |c| {
        let g = mesh.barycentric_gradients(c);
        let area = mesh.measure(c);
        let mut k = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                k[i][j] = coeff * area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            }
        }
        k
    })
}

/// `∫ ξ_i ξ_j`.
pub fn assemble_mass(space: &FeSpace) -> SparseSymOperator {
    let mesh = space.mesh();
    let denom = if mesh.dim() == 1 { 6.0 } else { 12.0 };
    assemble_local(space, |c| {
        let s = mesh.measure(c) / denom;
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if i == j { 2.0 * s } else { s };
            }
        }
        m
    })
}

/// Trace mass `∫_Γ η_k η_l` over facets carrying `marker`, together with the trace load
/// `g_k = ∫_Γ η_k`. In 1D the facets are points and the trace is a point evaluation.
pub fn assemble_boundary_mass(space: &FeSpace, marker: BoundaryMarker) -> Result<(SparseSymOperator, Vec<f64>)> {
    let mesh = space.mesh();
    let mut triplets = Vec::new();
    let mut g = vec![0.0; space.n_dofs()];
    for (e, edge) in mesh.edges().iter().enumerate() {
        if edge.marker != Some(marker) {
            continue;
        }
        let [a, b] = edge.vertices;
        let (da, db) = (space.dof_of_vertex(a), space.dof_of_vertex(b));
        if mesh.dim() == 1 {
            triplets.push((da, da, 1.0));
            g[da] += 1.0;
        } else {
            let len = mesh.edge_measure(e);
            triplets.extend_from_slice(&[
                (da, da, len / 3.0),
                (db, db, len / 3.0),
                (da, db, len / 6.0),
                (db, da, len / 6.0),
            ]);
            g[da] += len / 2.0;
            g[db] += len / 2.0;
        }
    }
    if triplets.is_empty() {
        return invalid(format!("no boundary facets marked {}", marker.as_str()));
    }
    Ok((SparseSymOperator::from_triplets(space.n_dofs(), triplets), g))
}

/// `∫_Γ u η_k` over facets carrying `marker` (4-point Gauss per facet in 2D, point
/// evaluation in 1D). Zero if no facet carries the marker.
pub fn assemble_boundary_load(space: &FeSpace, marker: BoundaryMarker, u: impl Fn(Point) -> f64) -> Vec<f64> {
    let mesh = space.mesh();
    let (nodes, weights) = gauss_legendre(4);
    let mut out = vec![0.0; space.n_dofs()];
    for (e, edge) in mesh.edges().iter().enumerate() {
        if edge.marker != Some(marker) {
            continue;
        }
        let [a, b] = edge.vertices;
        let (da, db) = (space.dof_of_vertex(a), space.dof_of_vertex(b));
        if mesh.dim() == 1 {
            out[da] += u(mesh.vertex(a));
            continue;
        }
        let (pa, pb) = (mesh.vertex(a), mesh.vertex(b));
        let len = mesh.edge_measure(e);
        for (&t, &w) in nodes.iter().zip(&weights) {
            let val = len * w * u([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
            out[da] += val * (1.0 - t);
            out[db] += val * t;
        }
    }
    out
}

/// `∫ ξ_i`, the load vector of the constant one.
pub fn load_of_ones(space: &FeSpace) -> Vec<f64> {
    let mesh = space.mesh();
    let k = mesh.cell_size() as f64;
    let mut m = vec![0.0; space.n_dofs()];
    for c in 0..mesh.n_cells() {
        for d in space.cell_dofs(c) {
            m[d] += mesh.measure(c) / k;
        }
    }
    m
}

/// `∫ u ξ_i` with the given rule.
pub fn assemble_load<F>(space: &FeSpace, rule: &QuadRule, u: F) -> Vec<f64>
where
    F: Fn(Point) -> f64 + Sync + Send,
{
    let mesh = space.mesh();
    let nv = mesh.cell_size();
    let locals = par::map_range(mesh.n_cells(), |c| {
        let mut loc = [0.0; 3];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let v = w * u(mesh.map_point(c, p));
            for i in 0..nv {
                loc[i] += v * p[i];
            }
        }
        let area = mesh.measure(c);
        loc.map(|v| v * area)
    });
    let mut out = vec![0.0; space.n_dofs()];
    for (c, loc) in locals.iter().enumerate() {
        for (i, d) in space.cell_dofs(c).enumerate() {
            out[d] += loc[i];
        }
    }
    out
}

/// Per-cell integrals `∫_B u` with the given rule.
pub fn integrate_cells<F>(space: &FeSpace, rule: &QuadRule, u: F) -> Vec<f64>
where
    F: Fn(usize, Point) -> f64 + Sync + Send,
{
    let mesh = space.mesh();
    par::map_range(mesh.n_cells(), |c| {
        let s: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * u(c, mesh.map_point(c, p)))
            .sum();
        s * mesh.measure(c)
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::mesh::{Domain, SimplicialMesh};

    fn reference_triangle() -> FeSpace {
        let mut b = std::collections::BTreeMap::new();
        for k in [[0, 1], [1, 2], [0, 2]] {
            b.insert(k, BoundaryMarker::GammaR);
        }
        let m = SimplicialMesh::new(2, vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![0, 1, 2], &b).unwrap();
        FeSpace::new(Arc::new(m))
    }

    fn square(n: usize) -> FeSpace {
        FeSpace::new(Arc::new(
            SimplicialMesh::uniform_dirichlet(&Domain::unit_square(), n).unwrap(),
        ))
    }

    fn interval(n: usize) -> FeSpace {
        FeSpace::new(Arc::new(
            SimplicialMesh::uniform_dirichlet(&Domain::unit_interval(), n).unwrap(),
        ))
    }

    #[test]
    fn reference_triangle_stiffness() {
        let k = assemble_stiffness(&reference_triangle(), 1.0).to_dense();
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn reference_triangle_mass() {
        let m = assemble_mass(&reference_triangle()).to_dense();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 2.0 / 24.0 } else { 1.0 / 24.0 };
                assert!((m[i][j] - e).abs() < 1e-16);
            }
        }
    }

    #[test]
    fn interval_stiffness_and_mass() {
        let k = assemble_stiffness(&interval(2), 1.0).to_dense();
        assert_eq!(
            k,
            vec![vec![2.0, -2.0, 0.0], vec![-2.0, 4.0, -2.0], vec![0.0, -2.0, 2.0]]
        );
        let m = assemble_mass(&interval(1)).to_dense();
        assert!((m[0][0] - 1.0 / 3.0).abs() < 1e-16 && (m[0][1] - 1.0 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn stiffness_kernel_and_symmetry() {
        let k = assemble_stiffness(&square(5), 2.5);
        assert!(k.row_sums().iter().all(|s| s.abs() < 1e-12));
        assert!(k.asymmetry() < 1e-12);
    }

    #[test]
    fn partition_of_unity() {
        let s = square(4);
        let m = assemble_mass(&s);
        let ones = load_of_ones(&s);
        let quad = assemble_load(&s, &QuadRule::degree2(2), |_| 1.0);
        for ((a, b), c) in m.row_sums().iter().zip(&ones).zip(&quad) {
            assert!((a - b).abs() < 1e-15 && (a - c).abs() < 1e-15);
        }
        assert!((m.total_sum() - 1.0).abs() < 1e-12);
        assert!((ones.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_mass_identities() {
        let mesh = SimplicialMesh::uniform_cell(&Domain::unit_square(), 4, |p| p[1] == 0.0).unwrap();
        let s = FeSpace::new(Arc::new(mesh));
        let (gy, g) = assemble_boundary_mass(&s, BoundaryMarker::GammaR).unwrap();
        assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        for (r, gk) in gy.row_sums().iter().zip(&g) {
            assert!((r - gk).abs() < 1e-14);
        }
        for v in 0..s.n_dofs() {
            if s.mesh().vertex(v)[1] > 0.0 {
                assert_eq!(g[v], 0.0);
                assert!(gy.row(v).all(|(_, x)| x == 0.0));
            }
        }
        assert!(assemble_boundary_mass(&s, BoundaryMarker::Dirichlet).is_err());
    }

    #[test]
    fn single_segment_trace_matrix() {
        let mut b = std::collections::BTreeMap::new();
        b.insert([0, 1], BoundaryMarker::GammaR);
        b.insert([1, 2], BoundaryMarker::GammaN);
        b.insert([0, 2], BoundaryMarker::GammaN);
        let m = SimplicialMesh::new(2, vec![[0.0, 0.0], [3.0, 0.0], [0.0, 1.0]], vec![0, 1, 2], &b).unwrap();
        let (gy, g) = assemble_boundary_mass(&FeSpace::new(Arc::new(m)), BoundaryMarker::GammaR).unwrap();
        assert!((gy.get(0, 0) - 1.0).abs() < 1e-15 && (gy.get(0, 1) - 0.5).abs() < 1e-15);
        assert_eq!(g, vec![1.5, 1.5, 0.0]);
    }

    #[test]
    fn boundary_load_of_affine_trace() {
        let mesh = SimplicialMesh::uniform_cell(&Domain::unit_square(), 3, |p| p[1] == 0.0).unwrap();
        let s = FeSpace::new(Arc::new(mesh));
        let (gy, g) = assemble_boundary_mass(&s, BoundaryMarker::GammaR).unwrap();
        assert_eq!(
            assemble_boundary_load(&s, BoundaryMarker::GammaR, |_| 1.0)
                .iter()
                .zip(&g)
                .filter(|(a, b)| (*a - *b).abs() > 1e-15)
                .count(),
            0
        );
        // load of a P1 trace equals Gy times its nodal values
        let u = |p: Point| 2.0 - 3.0 * p[0] + p[1];
        let nodal: Vec<f64> = (0..s.n_dofs()).map(|v| u(s.mesh().vertex(v))).collect();
        for (a, b) in assemble_boundary_load(&s, BoundaryMarker::GammaR, u)
            .iter()
            .zip(gy.mul_vec(&nodal))
        {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
