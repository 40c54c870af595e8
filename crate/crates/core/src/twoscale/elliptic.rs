use super::{CoupledState, Forcing, ReactionTerm, SystemOperators};
use crate::error::{Error, Result};
use crate::fem::QuadRule;
use crate::mesh::Point;
use crate::par;

/// Relative update at which the fixed-point iteration stops.
pub const ELLIPTIC_TOLERANCE: f64 = 1e-10;
pub const ELLIPTIC_MAX_ITERATIONS: usize = 200;

/// Result of a nonlinear macroscopic solve.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticSolve {
    pub alpha: Vec<f64>,
    pub iterations: usize,
    /// Largest observed ratio of successive update norms (`None` if fewer than two
    /// updates were large enough to measure).
    pub max_ratio: Option<f64>,
    pub last_update: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Reduced micro field `g(ρ(x_j, ·))` at every macroscopic node.
pub fn reduced_rho(ops: &SystemOperators, reaction: &ReactionTerm, beta: &[f64]) -> Vec<f64> {
    let w = ops.reduction_weights(reaction.reduction);
    beta.chunks(ops.n_micro())
        .map(|row| row.iter().zip(&w).map(|(b, w)| b * w).sum())
        .collect()
}

/// `F_i = ∫ (f(π^H, g(ρ^{H,h})) + source(t, ·)) ξ_i` with the degree-2 rule.
pub fn eval_f(
    ops: &SystemOperators,
    reaction: &ReactionTerm,
    forcing: &dyn Forcing,
    t: f64,
    alpha: &[f64],
    beta: &[f64],
) -> Vec<f64> {
    let space = &ops.macro_space;
    let mesh = space.mesh();
    let n = ops.n_macro();
    if reaction.is_zero() && !forcing.has_macro_source() {
        return vec![0.0; n];
    }
    let r = reduced_rho(ops, reaction, beta);
    let rule = QuadRule::degree2(mesh.dim());
    let source = forcing.has_macro_source();
    let locals = par::map_range(mesh.n_cells(), |c| {
        let mut loc = [0.0; 3];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let s = space.eval_on_cell(alpha, c, p);
            let rr = space.eval_on_cell(&r, c, p);
            let mut v = reaction.f(s, rr);
            if source {
                v += forcing.macro_source(t, mesh.map_point(c, p));
            }
            for (l, pi) in loc.iter_mut().zip(p) {
                *l += w * v * pi;
            }
        }
        let area = mesh.measure(c);
        loc.map(|v| v * area)
    });
    let mut out = vec![0.0; n];
    for (c, loc) in locals.iter().enumerate() {
        for (d, l) in space.cell_dofs(c).zip(loc) {
            out[d] += l;
        }
    }
    out
}

/// Banach iteration `α ← P⁻¹ F(α, β)` for the macroscopic pressure at time `t`.
pub fn elliptic_solve(
    ops: &SystemOperators,
    reaction: &ReactionTerm,
    forcing: &dyn Forcing,
    t: f64,
    beta: &[f64],
    alpha0: &[f64],
) -> Result<EllipticSolve> {
    let mask = ops.macro_space.dirichlet_mask();
    let mut alpha: Vec<f64> = alpha0
        .iter()
        .zip(mask)
        .map(|(&a, &m)| if m { 0.0 } else { a })
        .collect();
    let mut previous: Option<f64> = None;
    let mut max_ratio: Option<f64> = None;
    for iteration in 1..=ELLIPTIC_MAX_ITERATIONS {
        let f = eval_f(ops, reaction, forcing, t, &alpha, beta);
        let next = ops.p_solver().solve(&f)?;
        let diff: Vec<f64> = next.iter().zip(&alpha).map(|(a, b)| a - b).collect();
        let update = norm(&diff);
        let scale = norm(&next);
        if let Some(prev) = previous {
            // ratios of updates at rounding level carry no information
            if prev > 1e3 * f64::EPSILON * scale {
                let ratio = update / prev;
                max_ratio = Some(max_ratio.map_or(ratio, |m: f64| m.max(ratio)));
            }
        }
        alpha = next;
        if update <= ELLIPTIC_TOLERANCE * scale || reaction.is_independent_of_s() {
            return Ok(EllipticSolve {
                alpha,
                iterations: iteration,
                max_ratio,
                last_update: update,
            });
        }
        previous = Some(update);
    }
    let last = previous.unwrap_or(0.0);
    Err(Error::NonContraction {
        iterations: ELLIPTIC_MAX_ITERATIONS,
        previous: last,
        last,
    })
}

/// Initial state: `β(0)` is the L² projection of `rho_i` onto the tensor space and `α(0)`
/// solves the stationary macroscopic problem for that `β(0)`.
pub fn initial_state<F>(
    ops: &SystemOperators,
    reaction: &ReactionTerm,
    forcing: &dyn Forcing,
    rho_i: F,
) -> Result<(CoupledState, EllipticSolve)>
where
    F: Fn(Point, Point) -> f64 + Sync + Send,
{
    let beta = project_two_scale(ops, rho_i)?;
    let solve = elliptic_solve(ops, reaction, forcing, 0.0, &beta, &vec![0.0; ops.n_macro()])?;
    let state = CoupledState::new(0.0, solve.alpha.clone(), beta, ops.n_micro());
    Ok((state, solve))
}

/// L² projection onto `V_H ⊗ W_h`: tensor quadrature of `∫∫ u ξ_i η_k` followed by mass
/// solves on both scales.
pub fn project_two_scale<F>(ops: &SystemOperators, u: F) -> Result<Vec<f64>>
where
    F: Fn(Point, Point) -> f64 + Sync + Send,
{
    let (xs, ys) = (&ops.macro_space, &ops.micro_space);
    let (xm, ym) = (xs.mesh(), ys.mesh());
    let (nm, nu) = (ops.n_macro(), ops.n_micro());
    let rx = QuadRule::exact_for(xm.dim(), 4);
    let ry = QuadRule::exact_for(ym.dim(), 4);
    // micro quadrature points with the weighted basis values
    type WeightedPoint = (Point, f64, Vec<(usize, f64)>);
    let mut ypts: Vec<WeightedPoint> = Vec::new();
    for cy in 0..ym.n_cells() {
        for (q, w) in ry.points.iter().zip(&ry.weights) {
            let basis = ys.cell_dofs(cy).zip(q.iter().copied()).collect();
            ypts.push((ym.map_point(cy, q), w * ym.measure(cy), basis));
        }
    }
    let blocks = par::map_range(xm.n_cells(), |cx| {
        let mut block = vec![0.0; xm.cell_size() * nu];
        for (q, w) in rx.points.iter().zip(&rx.weights) {
            let x = xm.map_point(cx, q);
            let wx = w * xm.measure(cx);
            for (y, wy, basis) in &ypts {
                let v = wx * wy * u(x, *y);
                for (a, lx) in q.iter().take(xm.cell_size()).enumerate() {
                    for &(k, ly) in basis {
                        block[a * nu + k] += v * lx * ly;
                    }
                }
            }
        }
        block
    });
    let mut load = vec![0.0; nm * nu];
    for (cx, block) in blocks.iter().enumerate() {
        for (a, i) in xs.cell_dofs(cx).enumerate() {
            for k in 0..nu {
                load[i * nu + k] += block[a * nu + k];
            }
        }
    }
    // (Mx ⊗ My) β = load: micro solves per row, then macro solves per column
    let rows = par::try_map_range(nm, |i| ops.my_solver().solve(&load[i * nu..(i + 1) * nu]))?;
    let cols = par::try_map_range(nu, |k| {
        let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
        ops.mx_solver().solve(&col)
    })?;
    let mut beta = vec![0.0; nm * nu];
    for (k, col) in cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            beta[i * nu + k] = *v;
        }
    }
    Ok(beta)
}
