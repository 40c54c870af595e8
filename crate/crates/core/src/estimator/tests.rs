use std::sync::Arc;

use super::*;
use crate::fem::{interpolate, FeSpace};
use crate::harness::{ManufacturedProblem, SnapshotProblem};
use crate::mesh::{Domain, SimplicialMesh};
use crate::twoscale::{assemble_system, initial_state, ModelParams, NoForcing};

fn ops_on(n_macro: usize, n_micro: usize) -> SystemOperators {
    let xs = FeSpace::new(Arc::new(
        SimplicialMesh::uniform_dirichlet(&Domain::unit_square(), n_macro).unwrap(),
    ));
    let ys = FeSpace::new(Arc::new(
        SimplicialMesh::uniform_cell(&Domain::unit_interval(), n_micro, |y| y[0] == 0.0).unwrap(),
    ));
    assemble_system(&xs, &ys, &ModelParams::default()).unwrap()
}

fn state_with(ops: &SystemOperators, alpha: Vec<f64>) -> CoupledState {
    let beta = vec![0.5; ops.n_macro() * ops.n_micro()];
    CoupledState::new(0.0, alpha, beta, ops.n_micro())
}

fn bump(ops: &SystemOperators) -> Vec<f64> {
    interpolate(&ops.macro_space, |x| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]) * 3.0)
}

#[test]
fn zero_reaction_has_zero_element_residual() {
    let ops = ops_on(3, 2);
    let s = state_with(&ops, bump(&ops));
    let zero = ReactionTerm::zero();
    for c in 0..ops.macro_space.mesh().n_cells() {
        assert!(element_residual(&s, &ops, &zero, &NoForcing, c)
            .iter()
            .all(|&v| v == 0.0));
    }
}

#[test]
fn constant_reaction_element_norm() {
    let ops = ops_on(3, 2);
    let s = state_with(&ops, bump(&ops));
    let r = ReactionTerm::affine(-2.5, 0.0, 0.0);
    let rep = estimate(&s, &ops, &r, &NoForcing, 1.0).unwrap();
    let mesh = ops.macro_space.mesh();
    for c in 0..mesh.n_cells() {
        assert!((rep.element_norms[c] - 2.5 * mesh.measure(c).sqrt()).abs() < 1e-13);
    }
}

#[test]
fn element_norm_matches_high_order_quadrature() {
    let ops = ops_on(8, 4);
    let mut s = state_with(&ops, bump(&ops));
    for (k, b) in s.beta.iter_mut().enumerate() {
        *b = 0.3 + 0.1 * ((k % 7) as f64);
    }
    let reaction = ReactionTerm::standard(0.5, 4.0);
    let rep = estimate(&s, &ops, &reaction, &NoForcing, 1.0).unwrap();
    let r = reduced_rho(&ops, &reaction, &s.beta);
    let space = &ops.macro_space;
    let mesh = space.mesh();
    let rule = QuadRule::exact_for(2, 6);
    let (mut fine, mut coarse) = (0.0, 0.0);
    for c in 0..mesh.n_cells() {
        let v: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| {
                w * reaction
                    .f(space.eval_on_cell(&s.alpha, c, p), space.eval_on_cell(&r, c, p))
                    .powi(2)
            })
            .sum();
        fine += v * mesh.measure(c);
        coarse += rep.element_norms[c].powi(2);
    }
    assert!((coarse - fine).abs() / fine < 1e-3, "{coarse} vs {fine}");
}

#[test]
fn linear_field_has_no_jumps() {
    let ops = ops_on(4, 2);
    let alpha = interpolate(&ops.macro_space, |x| 0.3 + 2.0 * x[0] - x[1]);
    let s = state_with(&ops, alpha);
    for e in 0..ops.macro_space.mesh().n_edges() {
        assert!(edge_residual(&s, &ops, e) < 1e-13);
    }
}

/// Gradient of the plane through three points, by Cramer's rule.
fn plane_gradient(p: [[f64; 2]; 3], v: [f64; 3]) -> [f64; 2] {
    let (a, b) = (
        [p[1][0] - p[0][0], p[1][1] - p[0][1]],
        [p[2][0] - p[0][0], p[2][1] - p[0][1]],
    );
    let (da, db) = (v[1] - v[0], v[2] - v[0]);
    let det = a[0] * b[1] - a[1] * b[0];
    [(da * b[1] - db * a[1]) / det, (a[0] * db - b[0] * da) / det]
}

#[test]
fn diagonal_jump_of_a_hat_function() {
    let ops = ops_on(1, 2);
    let mesh = ops.macro_space.mesh();
    let mut alpha = vec![0.0; 4];
    alpha[3] = 1.0;
    let s = state_with(&ops, alpha.clone());
    let interior: Vec<usize> = (0..mesh.n_edges()).filter(|&e| !mesh.edge(e).is_boundary()).collect();
    assert_eq!(interior.len(), 1);
    let e = interior[0];
    let [a, b] = *mesh.edge(e).cells() else { panic!() };
    let grad = |c: usize| {
        let vs = mesh.cell(c);
        let p = [mesh.vertex(vs[0]), mesh.vertex(vs[1]), mesh.vertex(vs[2])];
        plane_gradient(p, [alpha[vs[0]], alpha[vs[1]], alpha[vs[2]]])
    };
    let [u, v] = mesh.edge(e).vertices;
    let (pu, pv) = (mesh.vertex(u), mesh.vertex(v));
    let len = ((pv[0] - pu[0]).powi(2) + (pv[1] - pu[1]).powi(2)).sqrt();
    let n = [(pv[1] - pu[1]) / len, -(pv[0] - pu[0]) / len];
    let (ga, gb) = (grad(a), grad(b));
    let jump = (gb[0] - ga[0]) * n[0] + (gb[1] - ga[1]) * n[1];
    assert!((edge_residual(&s, &ops, e) - jump.abs() * len.sqrt()).abs() < 1e-12);
    for f in 0..mesh.n_edges() {
        if f != e {
            assert_eq!(edge_residual(&s, &ops, f), 0.0);
        }
    }
}

#[test]
fn zero_solution_has_zero_estimator() {
    let ops = ops_on(4, 2);
    let s = state_with(&ops, vec![0.0; ops.n_macro()]);
    let rep = estimate(&s, &ops, &ReactionTerm::zero(), &NoForcing, 0.1).unwrap();
    assert_eq!(rep.eta_global, 0.0);
    assert!(rep.marked.is_empty());
}

#[test]
fn huge_tolerance_marks_nothing() {
    let ops = ops_on(4, 2);
    let s = state_with(&ops, bump(&ops));
    let rep = estimate(&s, &ops, &ReactionTerm::standard(0.5, 4.0), &NoForcing, 1e12).unwrap();
    assert!(rep.eta_global > 0.0);
    assert!(rep.marked.is_empty());
}

#[test]
fn indicator_formula_on_four_cells() {
    let (lambda, marked) = refinement_indicators(&[1.0, 0.0, 0.0, 0.0], 0.0, 1.0);
    assert_eq!(lambda, vec![4.0, 0.0, 0.0, 0.0]);
    assert_eq!(marked, vec![0]);
}

#[test]
fn additivity_and_marking_consistency() {
    let ops = ops_on(6, 3);
    let s = state_with(&ops, bump(&ops));
    let rep = estimate(&s, &ops, &ReactionTerm::standard(0.5, 4.0), &NoForcing, 0.05).unwrap();
    let sum: f64 = rep.eta_b_sq.iter().sum();
    assert!((rep.eta_global.powi(2) - sum).abs() <= 1e-12 * sum);
    for (c, &l) in rep.lambda_b.iter().enumerate() {
        assert!(l >= 0.0 && rep.eta_b[c] >= 0.0);
        assert_eq!(l > 1.0, rep.marked.contains(&c));
    }
}

#[test]
fn rejects_nonpositive_tolerance() {
    let ops = ops_on(2, 2);
    let s = state_with(&ops, vec![0.0; ops.n_macro()]);
    assert!(estimate(&s, &ops, &ReactionTerm::zero(), &NoForcing, 0.0).is_err());
}

fn fine_space(ops: &SystemOperators, levels: usize) -> (FeSpace, Vec<usize>) {
    let mut mesh = ops.macro_space.mesh().clone();
    let mut parents: Vec<usize> = (0..mesh.n_cells()).collect();
    for _ in 0..levels {
        let all: Vec<usize> = (0..mesh.n_cells()).collect();
        let (m, p) = mesh.refine_with_parents(&all);
        parents = p.iter().map(|&q| parents[q]).collect();
        mesh = m;
    }
    (FeSpace::new(Arc::new(mesh)), parents)
}

#[test]
fn pairing_vanishes_for_zero_test_function() {
    let ops = ops_on(3, 2);
    let s = state_with(&ops, bump(&ops));
    let (fine, parents) = fine_space(&ops, 1);
    let phi = vec![0.0; fine.n_dofs()];
    let v = residual_pairing(
        &s,
        &ops,
        &ReactionTerm::standard(0.5, 4.0),
        &NoForcing,
        &fine,
        &parents,
        &phi,
    )
    .unwrap();
    assert_eq!(v, 0.0);
}

#[test]
fn galerkin_orthogonality_for_coarse_test_functions() {
    let ops = ops_on(4, 3);
    let reaction = ReactionTerm::affine(1.5, -0.3, 0.2);
    let (state, _) = initial_state(&ops, &reaction, &NoForcing, |x, y| 1.0 + x[0] * y[0]).unwrap();
    let (fine, parents) = fine_space(&ops, 1);
    let mask = ops.macro_space.dirichlet_mask();
    let scale = state.alpha.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in (0..ops.n_macro()).filter(|&i| !mask[i]) {
        let mut hat = vec![0.0; ops.n_macro()];
        hat[i] = 1.0;
        let phi = prolongate(&ops.macro_space, &fine, &parents, &hat);
        let v = residual_pairing(&state, &ops, &reaction, &NoForcing, &fine, &parents, &phi).unwrap();
        assert!(v.abs() < 1e-9 * scale.max(1.0), "dof {i}: {v}");
    }
}

#[test]
fn adapt_halts_immediately_above_initial_estimate() {
    let problem = ManufacturedProblem::localized();
    let snap = SnapshotProblem {
        problem: &problem,
        n_micro: 4,
    };
    let h = adapt_loop(&snap, problem.macro_mesh(4).unwrap(), 1e6, 5).unwrap();
    assert_eq!(h.rounds.len(), 1);
    assert_eq!(h.status, AdaptStatus::Converged);
    assert!(h.ensure_converged().is_ok());
}

struct Zero;

impl AdaptProblem for Zero {
    fn reaction(&self) -> &ReactionTerm {
        static Z: std::sync::OnceLock<ReactionTerm> = std::sync::OnceLock::new();
        Z.get_or_init(ReactionTerm::zero)
    }

    fn forcing(&self) -> &dyn Forcing {
        &NoForcing
    }

    fn solve(&self, mesh: Arc<SimplicialMesh>) -> Result<(SystemOperators, CoupledState)> {
        let xs = FeSpace::new(mesh);
        let ys = FeSpace::new(Arc::new(
            SimplicialMesh::uniform_cell(&Domain::unit_interval(), 2, |y| y[0] == 0.0).unwrap(),
        ));
        let ops = assemble_system(&xs, &ys, &ModelParams::default())?;
        let s = CoupledState::zeros(ops.n_macro(), ops.n_micro());
        Ok((ops, s))
    }
}

#[test]
fn adapt_with_zero_reaction_stops_at_round_one() {
    let h = adapt_loop(
        &Zero,
        SimplicialMesh::uniform_dirichlet(&Domain::unit_square(), 2).unwrap(),
        1e-3,
        4,
    )
    .unwrap();
    assert_eq!(h.rounds.len(), 1);
    assert_eq!(h.eta_trace(), vec![0.0]);
    let mut buf = Vec::new();
    h.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(
        text.starts_with("round,n_cells,eta_R,l2_pi,n_marked,h1_error\n1,8,0.0,0.0,0,\n"),
        "{text}"
    );
}

#[test]
fn incomplete_loop_reports_its_trace() {
    let problem = ManufacturedProblem::localized();
    let snap = SnapshotProblem {
        problem: &problem,
        n_micro: 4,
    };
    let h = adapt_loop(&snap, problem.macro_mesh(4).unwrap(), 1e-9, 2).unwrap();
    assert_eq!(h.status, AdaptStatus::Incomplete);
    match h.ensure_converged() {
        Err(crate::Error::AdaptIncomplete { rounds, trace }) => {
            assert_eq!(rounds, h.rounds.len());
            assert_eq!(trace, h.eta_trace());
        }
        _ => panic!("expected an incomplete loop"),
    }
}
