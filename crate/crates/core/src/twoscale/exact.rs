use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::SystemOperators;
use crate::error::{invalid, Error, Result};
use crate::fem::SparseSymOperator;

/// Largest micro space handled by the dense exponential.
pub const EXACT_MAX_DOFS: usize = 512;

/// Exact propagator of `My ḃ + Ky b = r` with constant `r`.
///
/// With `My = L Lᵀ` and `L⁻¹ Ky L⁻ᵀ = V Λ Vᵀ`, the variable `z = Vᵀ Lᵀ b` decouples into
/// scalar equations `ż_j = -λ_j z_j + q_j`.
#[derive(Debug, Clone)]
pub struct MicroExponential {
    /// `L⁻ᵀ V`, mapping modal coordinates back to coefficients.
    to_coeffs: DMatrix<f64>,
    /// `Vᵀ Lᵀ`.
    to_modes: DMatrix<f64>,
    /// `Vᵀ L⁻¹`, applied to the right-hand side.
    rhs_to_modes: DMatrix<f64>,
    eigenvalues: DVector<f64>,
}

fn dense(op: &SparseSymOperator) -> DMatrix<f64> {
    let n = op.dim();
    let mut m = DMatrix::zeros(n, n);
    for (i, j, v) in op.triplets() {
        m[(i, j)] += v;
    }
    m
}

impl MicroExponential {
    pub fn new(my: &SparseSymOperator, ky: &SparseSymOperator) -> Result<Self> {
        let n = my.dim();
        if n > EXACT_MAX_DOFS {
            return Err(Error::DimensionExceeded {
                dofs: n,
                limit: EXACT_MAX_DOFS,
            });
        }
        let chol = dense(my)
            .cholesky()
            .ok_or_else(|| Error::Validation("micro mass matrix is not positive definite".into()))?;
        let l = chol.l();
        let l_inv = l
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Validation("singular Cholesky factor".into()))?;
        let mut s = &l_inv * dense(ky) * l_inv.transpose();
        s = (&s + s.transpose()) * 0.5;
        let eig = SymmetricEigen::new(s);
        let v = eig.eigenvectors;
        Ok(Self {
            to_coeffs: l_inv.transpose() * &v,
            to_modes: v.transpose() * l.transpose(),
            rhs_to_modes: v.transpose() * l_inv,
            eigenvalues: eig.eigenvalues,
        })
    }

    /// `b(t)` from `b(0) = b0` under the constant right-hand side `rhs`. A zero eigenvalue
    /// (pure Neumann cell) integrates its forcing linearly in time.
    pub fn evolve(&self, b0: &[f64], rhs: &[f64], t: f64) -> Vec<f64> {
        let z0 = &self.to_modes * DVector::from_column_slice(b0);
        let q = &self.rhs_to_modes * DVector::from_column_slice(rhs);
        let z = DVector::from_iterator(
            z0.len(),
            (0..z0.len()).map(|j| {
                let lam = self.eigenvalues[j];
                let phi = if lam == 0.0 { t } else { -(-lam * t).exp_m1() / lam };
                (-lam * t).exp() * z0[j] + phi * q[j]
            }),
        );
        (&self.to_coeffs * z).iter().copied().collect()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.eigenvalues.as_slice()
    }

    /// Coefficient vectors of the `count` slowest modes (`Ky v = λ My v`, `vᵀ My v = 1`).
    pub fn slowest_modes(&self, count: usize) -> Vec<Vec<f64>> {
        let mut order: Vec<usize> = (0..self.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| self.eigenvalues[a].total_cmp(&self.eigenvalues[b]));
        order
            .iter()
            .take(count)
            .map(|&j| self.to_coeffs.column(j).iter().copied().collect())
            .collect()
    }
}

/// Exact solution at time `t` of micro row `i` with the macroscopic pressure frozen at
/// `alpha_i` and no sources.
pub fn micro_exact_linear(ops: &SystemOperators, beta0_row: &[f64], alpha_i: f64, t: f64) -> Result<Vec<f64>> {
    if beta0_row.len() != ops.n_micro() {
        return invalid(format!(
            "row has {} entries, micro space has {}",
            beta0_row.len(),
            ops.n_micro()
        ));
    }
    let exp = MicroExponential::new(&ops.my, &ops.ky)?;
    Ok(exp.evolve(beta0_row, &ops.robin_forcing(alpha_i), t))
}
