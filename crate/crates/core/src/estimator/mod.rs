//! Residual a posteriori estimator for the macroscopic pressure and the adaptive loop.
//!
//! For P1 elements `Δπ^H` vanishes cellwise, so the element residual is the reaction
//! (plus any manufactured source) evaluated at the discrete state, and the edge residual
//! is the jump of the normal flux `A∇π^H·n` across interior facets.

mod adapt;

pub use adapt::{adapt_loop, AdaptHistory, AdaptProblem, AdaptRound, AdaptStatus};

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::fem::{FeSpace, QuadRule};
use crate::mesh::Point;
use crate::par;
use crate::twoscale::{reduced_rho, CoupledState, Forcing, ReactionTerm, SystemOperators};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorReport {
    /// `η_{R,B}` per macro cell.
    pub eta_b: Vec<f64>,
    pub eta_b_sq: Vec<f64>,
    /// `η_R`.
    pub eta_global: f64,
    pub lambda_b: Vec<f64>,
    /// Cells with `λ_B > 1`, ascending.
    pub marked: Vec<usize>,
    /// `‖π^H‖_{L²(Ω)}`.
    pub l2_pi: f64,
    /// `‖R_B‖_B` per cell.
    pub element_norms: Vec<f64>,
    /// `‖R_E‖_E` per facet (zero on the boundary).
    pub edge_norms: Vec<f64>,
}

/// Samples of `R_B = f(π^H, g(ρ^{H,h})) + source` at the degree-2 points of cell `c`.
pub fn element_residual(
    state: &CoupledState,
    ops: &SystemOperators,
    reaction: &ReactionTerm,
    forcing: &dyn Forcing,
    c: usize,
) -> Vec<f64> {
    let r = reduced_rho(ops, reaction, &state.beta);
    element_samples(state, ops, reaction, forcing, &r, c)
}

fn element_samples(
    state: &CoupledState,
    ops: &SystemOperators,
    reaction: &ReactionTerm,
    forcing: &dyn Forcing,
    r: &[f64],
    c: usize,
) -> Vec<f64> {
    let space = &ops.macro_space;
    let rule = QuadRule::degree2(space.dim());
    rule.points
        .iter()
        .map(|p| residual_at(state, space, reaction, forcing, r, c, p))
        .collect()
}

fn residual_at(
    state: &CoupledState,
    space: &FeSpace,
    reaction: &ReactionTerm,
    forcing: &dyn Forcing,
    r: &[f64],
    c: usize,
    bary: &[f64],
) -> f64 {
    let mut v = reaction.f(
        space.eval_on_cell(&state.alpha, c, bary),
        space.eval_on_cell(r, c, bary),
    );
    if forcing.has_macro_source() {
        v += forcing.macro_source(state.t, space.mesh().map_point(c, bary));
    }
    v
}

fn element_norm(samples: &[f64], rule: &QuadRule, measure: f64) -> f64 {
    (measure * samples.iter().zip(&rule.weights).map(|(v, w)| w * v * v).sum::<f64>()).sqrt()
}

/// Signed flux jump `(A∇π_b - A∇π_a)·n` with `n` pointing from cell `a` into cell `b`.
fn flux_jump(space: &FeSpace, a_coeff: f64, alpha: &[f64], a: usize, b: usize, normal: Point) -> f64 {
    let mesh = space.mesh();
    let (ca, cb) = (mesh.cell_centroid(a), mesh.cell_centroid(b));
    let s = if (cb[0] - ca[0]) * normal[0] + (cb[1] - ca[1]) * normal[1] < 0.0 {
        -1.0
    } else {
        1.0
    };
    let (ga, gb) = (space.gradient_on_cell(alpha, a), space.gradient_on_cell(alpha, b));
    s * a_coeff * ((gb[0] - ga[0]) * normal[0] + (gb[1] - ga[1]) * normal[1])
}

/// `‖R_E‖_E`: `|jump|·√|E|` on interior facets, zero on the boundary.
pub fn edge_residual(state: &CoupledState, ops: &SystemOperators, e: usize) -> f64 {
    let mesh = ops.macro_space.mesh();
    let edge = mesh.edge(e);
    match *edge.cells() {
        [a, b] => {
            let j = flux_jump(&ops.macro_space, ops.params.a, &state.alpha, a, b, mesh.edge_normal(e));
            j.abs() * mesh.edge_measure(e).sqrt()
        }
        _ => 0.0,
    }
}

/// `η²_{R,B} = H_B²‖R_B‖²_B + Σ_E β_E h_E ‖R_E‖²_E` with `β_E = ½` on interior facets and
/// `h_E = |E|` (in 1D, where facets are points, `h_E = H_B`), and the marking variable
/// `λ_B = N η²_{R,B} / (η̄ (‖π^H‖ + η_R²))`.
pub fn estimate(
    state: &CoupledState,
    ops: &SystemOperators,
    reaction: &ReactionTerm,
    forcing: &dyn Forcing,
    eta_bar: f64,
) -> Result<EstimatorReport> {
    if !(eta_bar > 0.0 && eta_bar.is_finite()) {
        return invalid(format!("eta_bar must be positive, got {eta_bar}"));
    }
    let space = &ops.macro_space;
    let mesh = space.mesh();
    let rule = QuadRule::degree2(mesh.dim());
    let r = reduced_rho(ops, reaction, &state.beta);
    let element_norms = par::map_range(mesh.n_cells(), |c| {
        element_norm(
            &element_samples(state, ops, reaction, forcing, &r, c),
            &rule,
            mesh.measure(c),
        )
    });
    let edge_norms = par::map_range(mesh.n_edges(), |e| edge_residual(state, ops, e));
    let eta_b_sq: Vec<f64> = (0..mesh.n_cells())
        .map(|c| {
            let h = mesh.diameter(c);
            let edges: f64 = mesh
                .cell_edges(c)
                .iter()
                .filter(|&&e| !mesh.edge(e).is_boundary())
                .map(|&e| {
                    let h_e = if mesh.dim() == 1 { h } else { mesh.edge_measure(e) };
                    0.5 * h_e * edge_norms[e].powi(2)
                })
                .sum();
            h * h * element_norms[c].powi(2) + edges
        })
        .collect();
    let eta_sq: f64 = eta_b_sq.iter().sum();
    let mx_alpha = ops.mx.mul_vec(&state.alpha);
    let l2_pi = state
        .alpha
        .iter()
        .zip(&mx_alpha)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        .max(0.0)
        .sqrt();
    let (lambda_b, marked) = refinement_indicators(&eta_b_sq, l2_pi, eta_bar);
    Ok(EstimatorReport {
        eta_b: eta_b_sq.iter().map(|v| v.sqrt()).collect(),
        eta_b_sq,
        eta_global: eta_sq.sqrt(),
        lambda_b,
        marked,
        l2_pi,
        element_norms,
        edge_norms,
    })
}

/// `λ_B = N η²_{R,B} / (η̄ (‖π^H‖ + Σ η²_{R,B}))` and the cells with `λ_B > 1`. Cells
/// with a vanishing indicator get `λ_B = 0`.
pub fn refinement_indicators(eta_b_sq: &[f64], l2_pi: f64, eta_bar: f64) -> (Vec<f64>, Vec<usize>) {
    let n = eta_b_sq.len() as f64;
    let denom = eta_bar * (l2_pi + eta_b_sq.iter().sum::<f64>());
    let lambda: Vec<f64> = eta_b_sq
        .iter()
        .map(|&e| if e == 0.0 { 0.0 } else { n * e / denom })
        .collect();
    let marked = (0..lambda.len()).filter(|&c| lambda[c] > 1.0).collect();
    (lambda, marked)
}

/// Values at the vertices of a nested finer mesh of a coarse P1 field; `parents` maps
/// every fine cell to the coarse cell containing it.
pub fn prolongate(coarse: &FeSpace, fine: &FeSpace, parents: &[usize], coeffs: &[f64]) -> Vec<f64> {
    let fm = fine.mesh();
    let mut out = vec![0.0; fine.n_dofs()];
    for f in 0..fm.n_cells() {
        let b = parents[f];
        for &v in fm.cell(f) {
            let l = coarse.mesh().barycentric(b, &fm.vertex(v));
            out[fine.dof_of_vertex(v)] = coarse.eval_on_cell(coeffs, b, &l);
        }
    }
    out
}

/// `⟨r(π^H), φ⟩ = Σ_B ∫_B R_B φ + Σ_E ∫_E R_E φ` for `φ` in the P1 space of a nested fine
/// mesh (`parents` maps fine cells to coarse cells).
pub fn residual_pairing(
    state: &CoupledState,
    ops: &SystemOperators,
    reaction: &ReactionTerm,
    forcing: &dyn Forcing,
    fine: &FeSpace,
    parents: &[usize],
    phi: &[f64],
) -> Result<f64> {
    let fm = fine.mesh();
    if parents.len() != fm.n_cells() || phi.len() != fine.n_dofs() {
        return invalid("fine space, parent map and test function disagree in size");
    }
    let space = &ops.macro_space;
    let cm = space.mesh();
    let r = reduced_rho(ops, reaction, &state.beta);
    let rule = QuadRule::exact_for(fm.dim(), 4);
    let cells = par::map_range(fm.n_cells(), |f| {
        let b = parents[f];
        let s: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| {
                let l = cm.barycentric(b, &fm.map_point(f, p));
                w * residual_at(state, space, reaction, forcing, &r, b, &l) * fine.eval_on_cell(phi, f, p)
            })
            .sum();
        s * fm.measure(f)
    });
    let mut total: f64 = cells.iter().sum();
    for e in 0..fm.n_edges() {
        let edge = fm.edge(e);
        if let [a, b] = *edge.cells() {
            let (pa, pb) = (parents[a], parents[b]);
            if pa == pb {
                continue;
            }
            let jump = flux_jump(space, ops.params.a, &state.alpha, pa, pb, fm.edge_normal(e));
            let mean_phi = edge.vertices.iter().map(|&v| phi[fine.dof_of_vertex(v)]).sum::<f64>() / 2.0;
            total += jump * mean_phi * fm.edge_measure(e);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests;
