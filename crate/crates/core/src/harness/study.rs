use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::norms::{field_errors_sq, snapshot_errors, two_scale_errors_sq, ErrorAccumulator, ErrorReport};
use super::{fit_slope, successive_rates, ManufacturedProblem};
use crate::error::{invalid, Result};
use crate::estimator::{estimate, AdaptProblem};
use crate::fem::{assemble_boundary_load, ritz_project, FeSpace, QuadRule, SpdSolver};
use crate::mesh::{BoundaryMarker, Point, SimplicialMesh};
use crate::par;
use crate::twoscale::{
    assemble_system, initial_state, CoupledState, CouplingMode, Forcing, ReactionTerm, Scheme, StepStats, Stepper,
    SystemOperators,
};

/// Time step as a function of the macro level `n` (mesh parameter `1/n`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DtRule {
    Fixed {
        dt: f64,
    },
    /// The largest `dt ≤ factor·T/n²` that divides `T`.
    Quadratic {
        factor: f64,
    },
}

impl Default for DtRule {
    fn default() -> Self {
        DtRule::Quadratic { factor: 4.0 }
    }
}

impl DtRule {
    pub fn dt(self, n: usize, t_final: f64) -> f64 {
        match self {
            DtRule::Fixed { dt } => dt,
            DtRule::Quadratic { factor } => {
                let target = factor * t_final / (n * n) as f64;
                t_final / (t_final / target).ceil()
            }
        }
    }
}

fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) {
        return invalid(format!("time step {dt} must be positive"));
    }
    let steps = (t_final / dt).round();
    if (steps * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return invalid(format!("time step {dt} does not divide T = {t_final}"));
    }
    Ok(steps as usize)
}

/// Operators and initial state of a manufactured problem at the given resolutions.
pub fn setup(problem: &ManufacturedProblem, n_macro: usize, n_micro: usize) -> Result<(SystemOperators, CoupledState)> {
    let (xs, ys) = problem.spaces(n_macro, n_micro)?;
    let ops = assemble_system(&xs, &ys, &problem.params)?;
    let (state, _) = initial_state(&ops, &problem.reaction, problem, |x, y| problem.initial_rho(x, y))?;
    Ok((ops, state))
}

/// Integrates to `T` with the iterated coupling, handing every state (including the
/// initial one) to `observer`. Returns the operators and the final state.
pub fn run_problem_observed(
    problem: &ManufacturedProblem,
    n_macro: usize,
    n_micro: usize,
    dt: f64,
    scheme: Scheme,
    mut observer: impl FnMut(&SystemOperators, &CoupledState, Option<&StepStats>),
) -> Result<(SystemOperators, CoupledState)> {
    let steps = step_count(problem.params.t_final, dt)?;
    let (ops, mut state) = setup(problem, n_macro, n_micro)?;
    observer(&ops, &state, None);
    {
        let mut stepper = Stepper::new(&ops, &problem.reaction, problem, dt, scheme, CouplingMode::Iterated)?;
        for n in 1..=steps {
            let (mut next, stats) = stepper.step(&state)?;
            // pin the clock to the grid so sources are evaluated at exact step times
            next.t = n as f64 * dt;
            observer(&ops, &next, Some(&stats));
            state = next;
        }
    }
    Ok((ops, state))
}

pub struct Trajectory {
    pub ops: SystemOperators,
    pub states: Vec<CoupledState>,
}

pub fn run_problem(
    problem: &ManufacturedProblem,
    n_macro: usize,
    n_micro: usize,
    dt: f64,
    scheme: Scheme,
) -> Result<Trajectory> {
    let mut states = Vec::new();
    let (ops, _) = run_problem_observed(problem, n_macro, n_micro, dt, scheme, |_, s, _| states.push(s.clone()))?;
    Ok(Trajectory { ops, states })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub level: usize,
    #[serde(rename = "H")]
    pub h_macro: f64,
    pub h: f64,
    pub dt: f64,
    pub e_pi_l2: f64,
    pub e_pi_h1: f64,
    pub e_rho: f64,
    pub e_rho_l2: f64,
    pub e_rho_grad_y: f64,
    /// `η_R` at the final time.
    pub eta_r: f64,
    /// `η_R / ‖∇(π - π^H)(T)‖`.
    pub effectivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateTable {
    pub rows: Vec<ConvergenceRow>,
}

#[derive(Serialize)]
struct RateCsvRow {
    level: usize,
    #[serde(rename = "H")]
    h_macro: f64,
    h: f64,
    dt: f64,
    #[serde(rename = "e_pi_L2")]
    e_pi_l2: f64,
    #[serde(rename = "e_pi_H1")]
    e_pi_h1: f64,
    e_rho: f64,
    #[serde(rename = "rate_pi_L2")]
    rate_pi_l2: Option<f64>,
    #[serde(rename = "rate_pi_H1")]
    rate_pi_h1: Option<f64>,
    rate_rho: Option<f64>,
    #[serde(rename = "eta_R")]
    eta_r: f64,
    effectivity: f64,
}

#[derive(Serialize)]
struct SplitCsvRow {
    level: usize,
    #[serde(rename = "H")]
    h_macro: f64,
    h: f64,
    #[serde(rename = "e_rho_L2")]
    e_rho_l2: f64,
    e_rho_grad_y: f64,
    #[serde(rename = "rate_rho_L2")]
    rate_rho_l2: Option<f64>,
    rate_rho_grad_y: Option<f64>,
}

impl RateTable {
    fn column(&self, f: impl Fn(&ConvergenceRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    pub fn mesh_sizes(&self) -> Vec<f64> {
        self.column(|r| r.h_macro)
    }

    pub fn rates(&self, f: impl Fn(&ConvergenceRow) -> f64) -> Vec<Option<f64>> {
        successive_rates(&self.mesh_sizes(), &self.column(f))
    }

    /// Least-squares order of a column against `H`.
    pub fn slope(&self, f: impl Fn(&ConvergenceRow) -> f64) -> f64 {
        fit_slope(&self.mesh_sizes(), &self.column(f))
    }

    /// `level, H, h, dt, e_pi_L2, e_pi_H1, e_rho, rate_pi_L2, rate_pi_H1, rate_rho, eta_R, effectivity`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let (r_l2, r_h1, r_rho) = (
            self.rates(|r| r.e_pi_l2),
            self.rates(|r| r.e_pi_h1),
            self.rates(|r| r.e_rho),
        );
        let mut out = csv::Writer::from_writer(w);
        for (k, r) in self.rows.iter().enumerate() {
            out.serialize(RateCsvRow {
                level: r.level,
                h_macro: r.h_macro,
                h: r.h,
                dt: r.dt,
                e_pi_l2: r.e_pi_l2,
                e_pi_h1: r.e_pi_h1,
                e_rho: r.e_rho,
                rate_pi_l2: r_l2[k],
                rate_pi_h1: r_h1[k],
                rate_rho: r_rho[k],
                eta_r: r.eta_r,
                effectivity: r.effectivity,
            })?;
        }
        out.flush()?;
        Ok(())
    }

    /// The two components of `e_rho` with their rates.
    pub fn write_split_csv<W: Write>(&self, w: W) -> Result<()> {
        let (r_l2, r_gy) = (self.rates(|r| r.e_rho_l2), self.rates(|r| r.e_rho_grad_y));
        let mut out = csv::Writer::from_writer(w);
        for (k, r) in self.rows.iter().enumerate() {
            out.serialize(SplitCsvRow {
                level: r.level,
                h_macro: r.h_macro,
                h: r.h,
                e_rho_l2: r.e_rho_l2,
                e_rho_grad_y: r.e_rho_grad_y,
                rate_rho_l2: r_l2[k],
                rate_rho_grad_y: r_gy[k],
            })?;
        }
        out.flush()?;
        Ok(())
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// Refines `H` and `h` together: level `k` uses `n = levels[k]` cells per direction on
/// both scales.
pub fn convergence_study(
    problem: &ManufacturedProblem,
    levels: &[usize],
    dt_rule: DtRule,
    scheme: Scheme,
) -> Result<RateTable> {
    if levels.len() < 3 {
        return invalid("a convergence study needs at least three levels");
    }
    let mut rows = Vec::new();
    for (level, &n) in levels.iter().enumerate() {
        let dt = dt_rule.dt(n, problem.params.t_final);
        let mut acc = ErrorAccumulator::default();
        let mut last_h1 = 0.0;
        let (ops, state) = run_problem_observed(problem, n, n, dt, scheme, |ops, s, _| {
            let e = snapshot_errors(ops, s, problem);
            last_h1 = e.pi_h1_sq.sqrt();
            acc.push(s.t, e);
        })?;
        let report: ErrorReport = acc.report();
        let eta = estimate(&state, &ops, &problem.reaction, problem, 1.0)?.eta_global;
        rows.push(ConvergenceRow {
            level,
            h_macro: ops.macro_space.mesh().mesh_size(),
            h: ops.micro_space.mesh().mesh_size(),
            dt,
            e_pi_l2: report.e_pi_l2,
            e_pi_h1: report.e_pi_h1,
            e_rho: report.e_rho,
            e_rho_l2: report.e_rho_l2,
            e_rho_grad_y: report.e_rho_grad_y,
            eta_r: eta,
            effectivity: ratio(eta, last_h1),
        });
    }
    Ok(RateTable { rows })
}

/// `(Π_x ⊗ R_y) ρ`: L² projection in `x` of the Robin–Ritz projection in `y`, i.e. the
/// tensor coefficients `β` with `(Mx ⊗ Ky) β = ∫_Ω ξ_i (D∫_Y ∇_yρ·∇η_k + κR∫_{Γ_R} ρ η_k)`.
pub fn two_scale_ritz<F, G>(ops: &SystemOperators, rho: F, grad_y_rho: G) -> Result<Vec<f64>>
where
    F: Fn(Point, Point) -> f64 + Sync + Send,
    G: Fn(Point, Point) -> Point + Sync + Send,
{
    let (xs, ys) = (&ops.macro_space, &ops.micro_space);
    let (xm, ym) = (xs.mesh(), ys.mesh());
    let (nm, nu) = (ops.n_macro(), ops.n_micro());
    let (d, kr) = (ops.params.d, ops.params.kappa * ops.params.r);
    let rx = QuadRule::exact_for(xm.dim(), 4);
    let ry = QuadRule::exact_for(ym.dim(), 4);
    // ∫_Ω ξ_a (Ritz load in y at x) per macro cell, in local vertex order
    let locals = par::map_range(xm.n_cells(), |c| {
        let mut loc = vec![vec![0.0; nu]; xm.cell_size()];
        for (p, w) in rx.points.iter().zip(&rx.weights) {
            let x = xm.map_point(c, p);
            let mut load = assemble_boundary_load(ys, BoundaryMarker::GammaR, |y| kr * rho(x, y));
            for cy in 0..ym.n_cells() {
                let grads = ym.barycentric_gradients(cy);
                let mut avg = [0.0; 2];
                for (q, wy) in ry.points.iter().zip(&ry.weights) {
                    let g = grad_y_rho(x, ym.map_point(cy, q));
                    avg[0] += wy * g[0];
                    avg[1] += wy * g[1];
                }
                let m = ym.measure(cy);
                for (k, gk) in ys.cell_dofs(cy).zip(grads) {
                    load[k] += d * m * (avg[0] * gk[0] + avg[1] * gk[1]);
                }
            }
            for (a, row) in loc.iter_mut().enumerate() {
                for (v, l) in row.iter_mut().zip(&load) {
                    *v += w * p[a] * l * xm.measure(c);
                }
            }
        }
        loc
    });
    let mut rhs = vec![0.0; nm * nu];
    for (c, loc) in locals.iter().enumerate() {
        for (i, row) in xs.cell_dofs(c).zip(loc) {
            for (v, l) in rhs[i * nu..(i + 1) * nu].iter_mut().zip(row) {
                *v += l;
            }
        }
    }
    let ky = SpdSolver::new(&ops.ky, None)?;
    let mut beta = vec![0.0; nm * nu];
    for i in 0..nm {
        beta[i * nu..(i + 1) * nu].copy_from_slice(&ky.solve(&rhs[i * nu..(i + 1) * nu])?);
    }
    let mut column = vec![0.0; nm];
    for k in 0..nu {
        for i in 0..nm {
            column[i] = beta[i * nu + k];
        }
        let solved = ops.mx_solver().solve(&column)?;
        for i in 0..nm {
            beta[i * nu + k] = solved[i];
        }
    }
    Ok(beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RitzRow {
    pub level: usize,
    #[serde(rename = "H")]
    pub h_macro: f64,
    pub h: f64,
    /// `‖π - R_H π‖`.
    pub l2: f64,
    /// `‖∇(π - R_H π)‖`.
    pub h1: f64,
    /// `‖ρ - (Π_x ⊗ R_y) ρ‖_{L²(Ω×Y)}`.
    pub two_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RitzTable {
    pub rows: Vec<RitzRow>,
}

impl RitzTable {
    pub fn slope(&self, f: impl Fn(&RitzRow) -> f64) -> f64 {
        let h: Vec<f64> = self.rows.iter().map(|r| r.h_macro).collect();
        let e: Vec<f64> = self.rows.iter().map(f).collect();
        fit_slope(&h, &e)
    }
}

/// Projection errors of the exact fields at `t = 0`, without time stepping.
pub fn ritz_study(problem: &ManufacturedProblem, levels: &[usize]) -> Result<RitzTable> {
    let mut rows = Vec::new();
    for (level, &n) in levels.iter().enumerate() {
        let (xs, ys) = problem.spaces(n, n)?;
        let ops = assemble_system(&xs, &ys, &problem.params)?;
        let a = problem.params.a;
        let pi_h = ritz_project(&xs, a, |x| problem.pi(0.0, x), |x| problem.grad_pi(0.0, x))?;
        let (l2, h1) = field_errors_sq(&xs, &pi_h, |x| problem.pi(0.0, x), |x| problem.grad_pi(0.0, x));
        let beta = two_scale_ritz(
            &ops,
            |x, y| problem.rho(0.0, x, y),
            |x, y| problem.grad_y_rho(0.0, x, y),
        )?;
        let (ts, _) = two_scale_errors_sq(
            &ops,
            &beta,
            |x, y| problem.rho(0.0, x, y),
            |x, y| problem.grad_y_rho(0.0, x, y),
        );
        rows.push(RitzRow {
            level,
            h_macro: xs.mesh().mesh_size(),
            h: ys.mesh().mesh_size(),
            l2: l2.sqrt(),
            h1: h1.sqrt(),
            two_scale: ts.sqrt(),
        });
    }
    Ok(RitzTable { rows })
}

/// A manufactured problem frozen at `t = 0` on a fixed micro mesh: the macro solve only
/// depends on the macro mesh, which is what the estimator and the adaptive loop vary.
pub struct SnapshotProblem<'a> {
    pub problem: &'a ManufacturedProblem,
    pub n_micro: usize,
}

impl AdaptProblem for SnapshotProblem<'_> {
    fn reaction(&self) -> &ReactionTerm {
        &self.problem.reaction
    }

    fn forcing(&self) -> &dyn Forcing {
        self.problem
    }

    fn solve(&self, mesh: Arc<SimplicialMesh>) -> Result<(SystemOperators, CoupledState)> {
        let xs = FeSpace::new(mesh);
        let ys = FeSpace::new(Arc::new(self.problem.micro_mesh(self.n_micro)?));
        let ops = assemble_system(&xs, &ys, &self.problem.params)?;
        let p = self.problem;
        let (state, _) = initial_state(&ops, &p.reaction, p, |x, y| p.initial_rho(x, y))?;
        Ok((ops, state))
    }

    fn h1_error(&self, ops: &SystemOperators, state: &CoupledState) -> Option<f64> {
        let p = self.problem;
        let (_, h1) = field_errors_sq(
            &ops.macro_space,
            &state.alpha,
            |x| p.pi(state.t, x),
            |x| p.grad_pi(state.t, x),
        );
        Some(h1.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectivityRow {
    pub level: usize,
    #[serde(rename = "H")]
    pub h_macro: f64,
    #[serde(rename = "eta_R")]
    pub eta_r: f64,
    #[serde(rename = "e_pi_H1")]
    pub e_pi_h1: f64,
    /// `η_R / ‖∇e_π‖`, 1 when both vanish.
    pub index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectivityTable {
    pub rows: Vec<EffectivityRow>,
}

impl EffectivityTable {
    /// `max index / min index`.
    pub fn spread(&self) -> f64 {
        let (lo, hi) = self.rows.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), r| {
            (lo.min(r.index), hi.max(r.index))
        });
        hi / lo
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Estimator against the true macro error at `t = 0` on uniform levels (`n` cells per
/// direction on both scales).
pub fn effectivity_study(problem: &ManufacturedProblem, levels: &[usize]) -> Result<EffectivityTable> {
    let mut rows = Vec::new();
    for (level, &n) in levels.iter().enumerate() {
        let snap = SnapshotProblem { problem, n_micro: n };
        let (ops, state) = snap.solve(Arc::new(problem.macro_mesh(n)?))?;
        let eta = estimate(&state, &ops, &problem.reaction, problem, 1.0)?.eta_global;
        let err = snap.h1_error(&ops, &state).unwrap_or(0.0);
        rows.push(EffectivityRow {
            level,
            h_macro: ops.macro_space.mesh().mesh_size(),
            eta_r: eta,
            e_pi_h1: err,
            index: ratio(eta, err),
        });
    }
    Ok(EffectivityTable { rows })
}
