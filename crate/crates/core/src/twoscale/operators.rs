use super::{Forcing, ModelParams, Reduction};
use crate::error::Result;
use crate::fem::{
    assemble_boundary_load, assemble_boundary_mass, assemble_load, assemble_mass, assemble_stiffness, load_of_ones,
    FeSpace, QuadRule, SparseSymOperator, SpdSolver,
};
use crate::mesh::BoundaryMarker;
use crate::par;

/// Assembled blocks of the semidiscrete two-scale system.
///
/// The four-index operator coupling `β_{jl}` to test function `ξ_i η_k` is never formed:
/// it equals `Mx_ij · Ky_kl` with `Ky = D·Sy + κR·Gy`.
#[derive(Debug, Clone)]
pub struct SystemOperators {
    pub params: ModelParams,
    pub macro_space: FeSpace,
    pub micro_space: FeSpace,
    /// `A ∫ ∇ξ_i·∇ξ_j` with Dirichlet rows and columns replaced by the identity.
    pub p: SparseSymOperator,
    pub mx: SparseSymOperator,
    pub sy: SparseSymOperator,
    pub my: SparseSymOperator,
    pub gy: SparseSymOperator,
    pub ky: SparseSymOperator,
    /// `g_k = ∫_{Γ_R} η_k`.
    pub g: Vec<f64>,
    /// `m_i = ∫_Ω ξ_i`.
    pub m: Vec<f64>,
    /// `∫_Y η_k`.
    pub w: Vec<f64>,
    pub y_measure: f64,
    pub gamma_r_measure: f64,
    p_solver: SpdSolver,
    my_solver: SpdSolver,
    mx_solver: SpdSolver,
}

/// Assembles all blocks and factors the macro stiffness and both mass matrices.
pub fn assemble_system(macro_space: &FeSpace, micro_space: &FeSpace, params: &ModelParams) -> Result<SystemOperators> {
    params.check_structure()?;
    let mask = macro_space.dirichlet_mask();
    let p = assemble_stiffness(macro_space, params.a).with_dirichlet(mask);
    let mx = assemble_mass(macro_space);
    let sy = assemble_stiffness(micro_space, 1.0);
    let my = assemble_mass(micro_space);
    let (gy, g) = assemble_boundary_mass(micro_space, BoundaryMarker::GammaR)?;
    let ky = sy.linear_combination(params.d, &gy, params.kappa * params.r);
    let m = load_of_ones(macro_space);
    let w = load_of_ones(micro_space);
    let p_solver = SpdSolver::new(&p, Some(mask))?;
    let my_solver = SpdSolver::new(&my, None)?;
    let mx_solver = SpdSolver::new(&mx, None)?;
    Ok(SystemOperators {
        params: *params,
        macro_space: macro_space.clone(),
        micro_space: micro_space.clone(),
        y_measure: w.iter().sum(),
        gamma_r_measure: g.iter().sum(),
        p,
        mx,
        sy,
        my,
        gy,
        ky,
        g,
        m,
        w,
        p_solver,
        my_solver,
        mx_solver,
    })
}

impl SystemOperators {
    pub fn n_macro(&self) -> usize {
        self.macro_space.n_dofs()
    }

    pub fn n_micro(&self) -> usize {
        self.micro_space.n_dofs()
    }

    pub fn p_solver(&self) -> &SpdSolver {
        &self.p_solver
    }

    pub fn my_solver(&self) -> &SpdSolver {
        &self.my_solver
    }

    pub fn mx_solver(&self) -> &SpdSolver {
        &self.mx_solver
    }

    /// Weights `w` with `g(ρ(x_j, ·)) = w · β_j` for the chosen reduction.
    pub fn reduction_weights(&self, reduction: Reduction) -> Vec<f64> {
        match reduction {
            Reduction::MeanY => self.w.iter().map(|v| v / self.y_measure).collect(),
            Reduction::TraceMean => self.g.iter().map(|v| v / self.gamma_r_measure).collect(),
        }
    }

    /// Entry `Q_{ijkl}` of the four-index micro operator.
    pub fn q_entry(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.mx.get(i, j) * self.ky.get(k, l)
    }

    /// Entry `E_{ijk} = κ Mx_ij g_k`.
    pub fn e_entry(&self, i: usize, j: usize, k: usize) -> f64 {
        self.params.kappa * self.mx.get(i, j) * self.g[k]
    }

    /// Entry `c_{ik} = κ p_F m_i g_k`.
    pub fn c_entry(&self, i: usize, k: usize) -> f64 {
        self.params.kappa * self.params.p_f * self.m[i] * self.g[k]
    }

    /// Robin forcing of micro row `i`: `κ(α_i + p_F) g`.
    pub fn robin_forcing(&self, alpha_i: f64) -> Vec<f64> {
        let s = self.params.kappa * (alpha_i + self.params.p_f);
        self.g.iter().map(|g| s * g).collect()
    }

    /// Source loads of the cell problems at time `t`, one row per macroscopic node,
    /// row-major `n_macro × n_micro`. Zero if the forcing has no micro sources.
    pub fn micro_source_loads(&self, forcing: &dyn Forcing, t: f64) -> Vec<f64> {
        let (nm, nu) = (self.n_macro(), self.n_micro());
        if !forcing.has_micro_source() {
            return vec![0.0; nm * nu];
        }
        let rule = QuadRule::exact_for(self.micro_space.dim(), 4);
        let macro_mesh = self.macro_space.mesh();
        let rows = par::map_range(nm, |i| {
            let x = macro_mesh.vertex(i);
            let mut row = assemble_load(&self.micro_space, &rule, |y| forcing.micro_source(t, x, y));
            let robin = assemble_boundary_load(&self.micro_space, BoundaryMarker::GammaR, |y| {
                forcing.robin_source(t, x, y)
            });
            let neumann = assemble_boundary_load(&self.micro_space, BoundaryMarker::GammaN, |y| {
                forcing.neumann_source(t, x, y)
            });
            for k in 0..nu {
                row[k] += robin[k] + neumann[k];
            }
            row
        });
        rows.concat()
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::mesh::{Domain, SimplicialMesh};

    fn tiny(kappa: f64) -> SystemOperators {
        let macro_space = FeSpace::new(Arc::new(
            SimplicialMesh::uniform_dirichlet(&Domain::unit_interval(), 2).unwrap(),
        ));
        let micro_space = FeSpace::new(Arc::new(
            SimplicialMesh::uniform_cell(&Domain::unit_interval(), 2, |y| y[0] == 0.0).unwrap(),
        ));
        let params = ModelParams {
            kappa,
            ..Default::default()
        };
        assemble_system(&macro_space, &micro_space, &params).unwrap()
    }

    #[test]
    fn vanishing_coupling() {
        let ops = tiny(0.0);
        for (k, l, v) in ops.ky.triplets() {
            assert_eq!(v, ops.params.d * ops.sy.get(k, l));
        }
        for i in 0..3 {
            for k in 0..3 {
                assert_eq!(ops.c_entry(i, k), 0.0);
                for j in 0..3 {
                    assert_eq!(ops.e_entry(i, j, k), 0.0);
                }
            }
        }
    }

    #[test]
    fn constants_are_steady_for_ky() {
        let ops = tiny(2.0);
        let ky1 = ops.ky.mul_vec(&vec![1.0; ops.n_micro()]);
        for (a, g) in ky1.iter().zip(&ops.g) {
            assert!((a - ops.params.kappa * ops.params.r * g).abs() < 1e-14);
        }
        assert_eq!(ops.g, vec![1.0, 0.0, 0.0]);
        assert!((ops.y_measure - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_invalid_parameters() {
        let macro_space = FeSpace::new(Arc::new(
            SimplicialMesh::uniform_dirichlet(&Domain::unit_interval(), 2).unwrap(),
        ));
        let micro_space = FeSpace::new(Arc::new(
            SimplicialMesh::uniform_cell(&Domain::unit_interval(), 2, |y| y[0] == 0.0).unwrap(),
        ));
        let params = ModelParams {
            d: 0.0,
            ..Default::default()
        };
        assert!(assemble_system(&macro_space, &micro_space, &params).is_err());
    }
}
