use serde::{Deserialize, Serialize};

use super::{elliptic_solve, CoupledState, Forcing, ReactionTerm, SystemOperators};
use crate::error::{invalid, Error, Result};
use crate::fem::{SparseSymOperator, SpdSolver};
use crate::par;

pub const COUPLING_TOLERANCE: f64 = 1e-9;
pub const COUPLING_MAX_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    ImplicitEuler,
    CrankNicolson,
}

impl Scheme {
    /// Weight of the new time level.
    fn theta(self) -> f64 {
        match self {
            Scheme::ImplicitEuler => 1.0,
            Scheme::CrankNicolson => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    /// One micro sweep with the old pressure, then one macroscopic solve.
    Segregated,
    /// Gauss–Seidel between micro sweeps and macroscopic solves until the coupled update
    /// is below tolerance.
    #[default]
    Iterated,
}

/// Diagnostics of one time step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepStats {
    pub outer_iterations: usize,
    pub elliptic_iterations: usize,
    pub max_ratio: Option<f64>,
}

/// Time stepper with the micro system matrix `My + θ dt Ky` factored once.
///
/// Every micro row solves `My ḃ_i + Ky b_i = κ(α_i + p_F) g + l_i(t)`, where `l_i` are
/// the forcing loads at macroscopic node `i`.
pub struct Stepper<'a> {
    ops: &'a SystemOperators,
    reaction: &'a ReactionTerm,
    forcing: &'a dyn Forcing,
    dt: f64,
    scheme: Scheme,
    mode: CouplingMode,
    lhs: SpdSolver,
    /// `My - (1 - θ) dt Ky`.
    explicit: SparseSymOperator,
    loads: Option<(f64, Vec<f64>)>,
}

impl<'a> Stepper<'a> {
    pub fn new(
        ops: &'a SystemOperators,
        reaction: &'a ReactionTerm,
        forcing: &'a dyn Forcing,
        dt: f64,
        scheme: Scheme,
        mode: CouplingMode,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return invalid(format!("time step {dt} must be positive"));
        }
        let th = scheme.theta();
        let lhs = SpdSolver::new(&ops.my.linear_combination(1.0, &ops.ky, th * dt), None)?;
        let explicit = ops.my.linear_combination(1.0, &ops.ky, -(1.0 - th) * dt);
        Ok(Self {
            ops,
            reaction,
            forcing,
            dt,
            scheme,
            mode,
            lhs,
            explicit,
            loads: None,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn loads_at(&mut self, t: f64) -> Vec<f64> {
        match &self.loads {
            Some((tc, l)) if *tc == t => l.clone(),
            _ => {
                let l = self.ops.micro_source_loads(self.forcing, t);
                self.loads = Some((t, l.clone()));
                l
            }
        }
    }

    /// Micro update of every row from `beta_old` (pressure `alpha_old`, loads `l_old`) to
    /// the new level (pressure `alpha_new`, loads `l_new`).
    pub fn micro_sweep(
        &self,
        beta_old: &[f64],
        alpha_old: &[f64],
        alpha_new: &[f64],
        l_old: &[f64],
        l_new: &[f64],
    ) -> Vec<f64> {
        let ops = self.ops;
        let nu = ops.n_micro();
        let th = self.scheme.theta();
        let (kappa, p_f, dt) = (ops.params.kappa, ops.params.p_f, self.dt);
        let mut beta = vec![0.0; beta_old.len()];
        par::for_each_row_mut(&mut beta, nu, |i, row| {
            let old = &beta_old[i * nu..(i + 1) * nu];
            let mut rhs = self.explicit.mul_vec(old);
            let forcing = kappa * (th * alpha_new[i] + (1.0 - th) * alpha_old[i] + p_f);
            for k in 0..nu {
                let load = th * l_new[i * nu + k] + (1.0 - th) * l_old[i * nu + k];
                rhs[k] += dt * (forcing * ops.g[k] + load);
            }
            row.copy_from_slice(&self.lhs.solve_unchecked(&rhs));
        });
        beta
    }

    /// Advances `state` by one time step.
    pub fn step(&mut self, state: &CoupledState) -> Result<(CoupledState, StepStats)> {
        let t_new = state.t + self.dt;
        let l_old = self.loads_at(state.t);
        let l_new = self.loads_at(t_new);
        let mut stats = StepStats::default();
        let mut alpha = state.alpha.clone();
        let mut beta = state.beta.clone();
        for outer in 1..=COUPLING_MAX_ITERATIONS {
            let beta_next = self.micro_sweep(&state.beta, &state.alpha, &alpha, &l_old, &l_new);
            let solve = elliptic_solve(self.ops, self.reaction, self.forcing, t_new, &beta_next, &alpha)?;
            stats.outer_iterations = outer;
            stats.elliptic_iterations += solve.iterations;
            if let Some(r) = solve.max_ratio {
                stats.max_ratio = Some(stats.max_ratio.map_or(r, |m: f64| m.max(r)));
            }
            let change = max_abs_diff(&solve.alpha, &alpha).max(max_abs_diff(&beta_next, &beta));
            let scale = max_abs(&solve.alpha).max(max_abs(&beta_next));
            alpha = solve.alpha;
            beta = beta_next;
            if self.mode == CouplingMode::Segregated || change <= COUPLING_TOLERANCE * scale {
                return Ok((CoupledState::new(t_new, alpha, beta, state.n_micro()), stats));
            }
            if outer == COUPLING_MAX_ITERATIONS {
                return Err(Error::CouplingNotConverged {
                    iterations: outer,
                    update: change / scale,
                });
            }
        }
        unreachable!()
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// One time step with a freshly factored stepper.
pub fn step(
    state: &CoupledState,
    dt: f64,
    ops: &SystemOperators,
    reaction: &ReactionTerm,
    forcing: &dyn Forcing,
    mode: CouplingMode,
    scheme: Scheme,
) -> Result<CoupledState> {
    Ok(Stepper::new(ops, reaction, forcing, dt, scheme, mode)?.step(state)?.0)
}
