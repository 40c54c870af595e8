//! Projections of continuous fields onto P1 spaces.

use super::{
    assemble_boundary_load, assemble_boundary_mass, assemble_load, assemble_mass, assemble_stiffness, FeSpace,
    QuadRule, SpdSolver,
};
use crate::error::Result;
use crate::mesh::{BoundaryMarker, Point};
use crate::par;

/// Nodal interpolant.
pub fn interpolate(space: &FeSpace, u: impl Fn(Point) -> f64) -> Vec<f64> {
    let mesh = space.mesh();
    let mut out = vec![0.0; space.n_dofs()];
    for v in 0..mesh.n_vertices() {
        out[space.dof_of_vertex(v)] = u(mesh.vertex(v));
    }
    out
}

/// L² projection, ignoring the Dirichlet mask.
pub fn l2_project<F>(space: &FeSpace, rule: &QuadRule, u: F) -> Result<Vec<f64>>
where
    F: Fn(Point) -> f64 + Sync + Send,
{
    let rhs = assemble_load(space, rule, u);
    SpdSolver::new(&assemble_mass(space), None)?.solve(&rhs)
}

/// `∫ coeff ∇u · ∇ξ_i` for every dof, with a degree-4 rule.
fn energy_load<G>(space: &FeSpace, coeff: f64, grad_u: &G) -> Vec<f64>
where
    G: Fn(Point) -> Point + Sync + Send,
{
    let mesh = space.mesh();
    let rule = QuadRule::exact_for(mesh.dim(), 4);
    let locals = par::map_range(mesh.n_cells(), |c| {
        let mut mean = [0.0; 2];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let g = grad_u(mesh.map_point(c, p));
            mean[0] += w * g[0];
            mean[1] += w * g[1];
        }
        let area = mesh.measure(c);
        mesh.barycentric_gradients(c)
            .map(|gi| coeff * area * (gi[0] * mean[0] + gi[1] * mean[1]))
    });
    let mut out = vec![0.0; space.n_dofs()];
    for (c, loc) in locals.iter().enumerate() {
        for (i, d) in space.cell_dofs(c).enumerate() {
            out[d] += loc[i];
        }
    }
    out
}

/// Ritz projection for `coeff ∫ ∇u·∇v`. Dirichlet dofs take the nodal values of `u`
/// (zero for fields vanishing on the boundary) and the free dofs satisfy Galerkin
/// orthogonality of the gradient error.
pub fn ritz_project<F, G>(space: &FeSpace, coeff: f64, u: F, grad_u: G) -> Result<Vec<f64>>
where
    F: Fn(Point) -> f64,
    G: Fn(Point) -> Point + Sync + Send,
{
    let k = assemble_stiffness(space, coeff);
    let mask = space.dirichlet_mask();
    let mut lift = interpolate(space, u);
    for (l, &m) in lift.iter_mut().zip(mask) {
        if !m {
            *l = 0.0;
        }
    }
    let mut rhs = energy_load(space, coeff, &grad_u);
    let k_lift = k.mul_vec(&lift);
    rhs.iter_mut().zip(&k_lift).for_each(|(r, kl)| *r -= kl);
    let mut x = SpdSolver::new(&k, Some(mask))?.solve(&rhs)?;
    x.iter_mut().zip(&lift).for_each(|(x, l)| *x += l);
    Ok(x)
}

/// Ritz projection for the Robin form `d ∫ ∇u·∇v + kr ∫_{Γ_R} u v` on a space without
/// Dirichlet dofs.
pub fn ritz_project_robin<F, G>(space: &FeSpace, d: f64, kr: f64, u: F, grad_u: G) -> Result<Vec<f64>>
where
    F: Fn(Point) -> f64,
    G: Fn(Point) -> Point + Sync + Send,
{
    let (gy, _) = assemble_boundary_mass(space, BoundaryMarker::GammaR)?;
    let op = assemble_stiffness(space, d).linear_combination(1.0, &gy, kr);
    let mut rhs = energy_load(space, d, &grad_u);
    let trace = assemble_boundary_load(space, BoundaryMarker::GammaR, u);
    rhs.iter_mut().zip(&trace).for_each(|(r, t)| *r += kr * t);
    SpdSolver::new(&op, None)?.solve(&rhs)
}

/// Clément-type quasi-interpolant: the coefficient at vertex `x` is the mean of `u`
/// over the patch of cells containing `x`.
pub fn quasi_interpolate<F>(space: &FeSpace, rule: &QuadRule, u: F) -> Vec<f64>
where
    F: Fn(Point) -> f64 + Sync + Send,
{
    let mesh = space.mesh();
    let cell_int = super::integrate_cells(space, rule, |_, x| u(x));
    let patches = mesh.patch_index();
    let mut out = vec![0.0; space.n_dofs()];
    for v in 0..mesh.n_vertices() {
        let s: f64 = patches.omega_x[v].iter().map(|&c| cell_int[c]).sum();
        out[space.dof_of_vertex(v)] = s / patches.omega_x_measure[v];
    }
    out
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::mesh::{Domain, SimplicialMesh};

    fn square(n: usize) -> FeSpace {
        FeSpace::new(Arc::new(
            SimplicialMesh::uniform_dirichlet(&Domain::unit_square(), n).unwrap(),
        ))
    }

    fn l2_h1_errors(space: &FeSpace, c: &[f64]) -> (f64, f64) {
        let mesh = space.mesh();
        let rule = QuadRule::exact_for(2, 6);
        let (mut l2, mut h1) = (0.0, 0.0);
        for cell in 0..mesh.n_cells() {
            let g = space.gradient_on_cell(c, cell);
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let x = mesh.map_point(cell, p);
                let wa = w * mesh.measure(cell);
                let e = (PI * x[0]).sin() * (PI * x[1]).sin() - space.eval_on_cell(c, cell, p);
                let gx = PI * (PI * x[0]).cos() * (PI * x[1]).sin() - g[0];
                let gy = PI * (PI * x[0]).sin() * (PI * x[1]).cos() - g[1];
                l2 += wa * e * e;
                h1 += wa * (gx * gx + gy * gy);
            }
        }
        (l2.sqrt(), h1.sqrt())
    }

    #[test]
    fn ritz_reproduces_space_functions() {
        let s = square(4);
        let u = |x: Point| 1.0 + 2.0 * x[0] - 3.0 * x[1];
        let c = ritz_project(&s, 1.5, u, |_| [2.0, -3.0]).unwrap();
        let nodal = interpolate(&s, u);
        for (a, b) in c.iter().zip(&nodal) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn robin_ritz_reproduces_space_functions() {
        let m = SimplicialMesh::uniform_cell(&Domain::unit_square(), 3, |p| p[0] == 0.0).unwrap();
        let s = FeSpace::new(Arc::new(m));
        let u = |x: Point| 0.5 - x[0] + 0.25 * x[1];
        let c = ritz_project_robin(&s, 1.0, 2.0, u, |_| [-1.0, 0.25]).unwrap();
        for (a, b) in c.iter().zip(&interpolate(&s, u)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn ritz_rates_on_sine() {
        let u = |x: Point| (PI * x[0]).sin() * (PI * x[1]).sin();
        let du = |x: Point| {
            [
                PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
                PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
            ]
        };
        let errs: Vec<(f64, f64)> = [8, 16, 32]
            .iter()
            .map(|&n| {
                let s = square(n);
                l2_h1_errors(&s, &ritz_project(&s, 1.0, u, du).unwrap())
            })
            .collect();
        for w in errs.windows(2) {
            let r_l2 = (w[0].0 / w[1].0).log2();
            let r_h1 = (w[0].1 / w[1].1).log2();
            assert!((r_l2 - 2.0).abs() < 0.2, "L2 rate {r_l2}");
            assert!((r_h1 - 1.0).abs() < 0.2, "H1 rate {r_h1}");
        }
    }

    #[test]
    fn l2_projection_is_idempotent() {
        let s = square(3);
        let c = l2_project(&s, &QuadRule::degree2(2), |x| x[0] - 2.0 * x[1]).unwrap();
        for v in 0..s.n_dofs() {
            let x = s.mesh().vertex(v);
            assert!((c[v] - (x[0] - 2.0 * x[1])).abs() < 1e-10);
        }
    }

    #[test]
    fn quasi_interpolant_of_constant_and_affine() {
        let s = square(4);
        let rule = QuadRule::degree2(2);
        assert!(quasi_interpolate(&s, &rule, |_| 3.5)
            .iter()
            .all(|c| (c - 3.5).abs() < 1e-14));
        // interior vertices of the structured mesh have centrally symmetric patches
        let c = quasi_interpolate(&s, &rule, |x| 2.0 * x[0] + x[1]);
        for v in 0..s.n_dofs() {
            if !s.dirichlet_mask()[v] {
                let x = s.mesh().vertex(v);
                assert!((c[v] - (2.0 * x[0] + x[1])).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn quasi_interpolant_local_error_is_first_order() {
        let u = |x: Point| (PI * x[0]).sin() * (PI * x[1]).sin();
        let rule = QuadRule::exact_for(2, 4);
        let errs: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| {
                let s = square(n);
                let c = quasi_interpolate(&s, &rule, u);
                let mesh = s.mesh();
                // max over cells of ‖u − I u‖_B / (H_B √|B|)
                (0..mesh.n_cells())
                    .map(|b| {
                        let e2: f64 = rule
                            .points
                            .iter()
                            .zip(&rule.weights)
                            .map(|(p, w)| w * (u(mesh.map_point(b, p)) - s.eval_on_cell(&c, b, p)).powi(2))
                            .sum();
                        (e2 * mesh.measure(b)).sqrt()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        // per-cell L² error ∝ H_B·√|B| ∝ H², so the global max halves twice per level
        for w in errs.windows(2) {
            let r = (w[0] / w[1]).log2();
            assert!(r > 1.7, "rate {r}");
        }
    }
}
