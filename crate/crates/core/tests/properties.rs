use std::sync::Arc;

use proptest::prelude::*;
use twoscale_core::estimator::{estimate, refinement_indicators, AdaptProblem};
use twoscale_core::harness::{ManufacturedProblem, SnapshotProblem};
use twoscale_core::mesh::{Domain, SimplicialMesh};
use twoscale_core::twoscale::{CoupledState, ReactionTerm};

/// Uniform square mesh refined by a sequence of marked-cell selectors.
fn refined_mesh(n: usize, picks: &[Vec<u32>]) -> (SimplicialMesh, Vec<usize>) {
    let mut mesh = SimplicialMesh::uniform_dirichlet(&Domain::unit_square(), n).unwrap();
    let mut ancestors: Vec<usize> = (0..mesh.n_cells()).collect();
    for pick in picks {
        let mut marked: Vec<usize> = pick.iter().map(|&p| p as usize % mesh.n_cells()).collect();
        marked.sort_unstable();
        marked.dedup();
        let (next, parents) = mesh.refine_with_parents(&marked);
        ancestors = parents.iter().map(|&p| ancestors[p]).collect();
        mesh = next;
    }
    (mesh, ancestors)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn refinement_keeps_the_mesh_conforming(
        n in 1usize..4,
        picks in prop::collection::vec(prop::collection::vec(any::<u32>(), 1..6), 0..4),
    ) {
        let (mesh, ancestors) = refined_mesh(n, &picks);
        let coarse = SimplicialMesh::uniform_dirichlet(&Domain::unit_square(), n).unwrap();
        prop_assert!((mesh.total_measure() - 1.0).abs() < 1e-12);
        let mut per_parent = vec![0.0; coarse.n_cells()];
        for c in 0..mesh.n_cells() {
            prop_assert!(mesh.measure(c) > 0.0);
            per_parent[ancestors[c]] += mesh.measure(c);
        }
        for (c, m) in per_parent.iter().enumerate() {
            prop_assert!((m - coarse.measure(c)).abs() < 1e-13);
        }
        for e in mesh.edges() {
            if e.is_boundary() {
                prop_assert!(e.marker.is_some());
            } else {
                prop_assert_eq!(e.cells().len(), 2);
                prop_assert!(e.marker.is_none());
            }
        }
        prop_assert!(mesh.mesh_size() <= coarse.mesh_size() + 1e-15);
    }

    #[test]
    fn marked_cells_shrink(n in 1usize..4, pick in prop::collection::vec(any::<u32>(), 1..6)) {
        let coarse = SimplicialMesh::uniform_dirichlet(&Domain::unit_square(), n).unwrap();
        let mut marked: Vec<usize> = pick.iter().map(|&p| p as usize % coarse.n_cells()).collect();
        marked.sort_unstable();
        marked.dedup();
        let (fine, parents) = coarse.refine_with_parents(&marked);
        for &m in &marked {
            let children: Vec<usize> = (0..fine.n_cells()).filter(|&c| parents[c] == m).collect();
            prop_assert!(children.len() >= 2);
            for c in children {
                prop_assert!(fine.measure(c) <= 0.5 * coarse.measure(m) + 1e-15);
            }
        }
    }

    #[test]
    fn estimator_is_additive_and_marks_consistently(
        picks in prop::collection::vec(prop::collection::vec(any::<u32>(), 1..4), 0..3),
        eta_bar in 0.01f64..10.0,
        scale in 0.0f64..3.0,
    ) {
        let problem = ManufacturedProblem::smooth();
        let snap = SnapshotProblem { problem: &problem, n_micro: 3 };
        let (mesh, _) = refined_mesh(3, &picks);
        let (ops, state) = snap.solve(Arc::new(mesh)).unwrap();
        let scaled = CoupledState::new(
            state.t,
            state.alpha.iter().map(|a| a * scale).collect(),
            state.beta.clone(),
            state.n_micro(),
        );
        let report = estimate(&scaled, &ops, &problem.reaction, &problem, eta_bar).unwrap();
        let sum: f64 = report.eta_b_sq.iter().sum();
        prop_assert!((report.eta_global.powi(2) - sum).abs() <= 1e-12 * sum.max(1e-300));
        prop_assert!(report.eta_b_sq.iter().chain(&report.lambda_b).all(|&v| v >= 0.0));
        for (b, (&sq, &eta)) in report.eta_b_sq.iter().zip(&report.eta_b).enumerate() {
            prop_assert!((eta * eta - sq).abs() <= 1e-12 * sq.max(1e-300));
            prop_assert_eq!(report.lambda_b[b] > 1.0, report.marked.contains(&b));
        }
        let (lambda, marked) = refinement_indicators(&report.eta_b_sq, report.l2_pi, eta_bar);
        prop_assert_eq!(lambda, report.lambda_b.clone());
        prop_assert_eq!(marked, report.marked.clone());
    }

    #[test]
    fn standard_reaction_meets_its_structural_assumptions(
        c_f in 0.05f64..0.9,
        theta in 0.5f64..8.0,
        s in -10.0f64..10.0,
        ds in -1.0f64..1.0,
        r in -10.0f64..10.0,
    ) {
        let f = ReactionTerm::standard(c_f, theta);
        prop_assert_eq!(f.f(0.0, r), 0.0);
        prop_assert_eq!(f.f(theta + s.abs() + 1e-9, r), 0.0);
        let lip = (f.f(s + ds, r) - f.f(s, r)).abs();
        prop_assert!(lip <= f.c_pi() * ds.abs() * (1.0 + 1e-12) + 1e-15);
        prop_assert!(f.c_pi() < 1.0);
    }

    #[test]
    fn checkpoints_round_trip_exactly(
        t in -1e3f64..1e3,
        n_macro in 1usize..5,
        n_micro in 1usize..5,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let alpha: Vec<f64> = (0..n_macro).map(|_| rng.gen::<f64>() * 1e6 - 5e5).collect();
        let beta: Vec<f64> = (0..n_macro * n_micro).map(|_| rng.gen::<f64>().powi(7) * 1e-300).collect();
        let state = CoupledState::new(t, alpha, beta, n_micro);
        let mut text = Vec::new();
        state.write_text(&mut text).unwrap();
        prop_assert_eq!(&CoupledState::read_text(text.as_slice()).unwrap(), &state);
        let mut bin = Vec::new();
        state.write_binary(&mut bin).unwrap();
        prop_assert_eq!(&CoupledState::read_binary(bin.as_slice()).unwrap(), &state);
    }
}
