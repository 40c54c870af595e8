use std::f64::consts::PI;

use twoscale_core::fem::interpolate;
use twoscale_core::harness::{
    convergence_study, effectivity_study, error_norms, run_problem, run_problem_observed, setup, source_consistency,
    DtRule, ManufacturedProblem, Solution,
};
use twoscale_core::twoscale::{CoupledState, ModelParams, ReactionTerm, Scheme};

fn problem(solution: Solution, macro_dim: usize, micro_dim: usize) -> ManufacturedProblem {
    let params = ModelParams::default();
    ManufacturedProblem::new(
        solution,
        params,
        ReactionTerm::standard(0.5, params.theta),
        macro_dim,
        micro_dim,
    )
}

#[test]
fn bilinear_solution_is_reproduced_at_the_nodes() {
    for (dx, dy) in [(1, 1), (2, 1), (2, 2)] {
        let p = problem(Solution::Bilinear, dx, dy);
        let traj = run_problem(&p, 4, 4, 0.1, Scheme::ImplicitEuler).unwrap();
        let (xm, ym) = (traj.ops.macro_space.mesh(), traj.ops.micro_space.mesh());
        for s in &traj.states {
            for i in 0..traj.ops.n_macro() {
                assert!(s.alpha[i].abs() < 1e-8);
                for k in 0..traj.ops.n_micro() {
                    let exact = p.rho(s.t, xm.vertex(i), ym.vertex(k));
                    assert!((s.beta_row(i)[k] - exact).abs() < 1e-8, "dims {dx}/{dy}, t {}", s.t);
                }
            }
        }
    }
}

#[test]
fn zero_problem_stays_zero() {
    let p = problem(Solution::Zero, 2, 1);
    assert_eq!(p.params.p_f, 0.0);
    let traj = run_problem(&p, 4, 4, 0.05, Scheme::CrankNicolson).unwrap();
    assert_eq!(traj.states.len(), 11);
    for s in &traj.states {
        assert!(s.alpha.iter().chain(&s.beta).all(|&v| v == 0.0));
    }
    let report = error_norms(&traj.ops, &traj.states, &p);
    assert_eq!(report.e_pi_h1, 0.0);
    assert_eq!(report.e_pi_l2, 0.0);
    assert_eq!(report.e_rho, 0.0);
}

#[test]
fn injected_sources_make_the_exact_pair_consistent() {
    let mut cases = vec![ManufacturedProblem::smooth(), ManufacturedProblem::localized()];
    for (dx, dy) in [(1, 1), (2, 2), (1, 2)] {
        cases.push(problem(Solution::Smooth, dx, dy));
        cases.push(problem(Solution::Bilinear, dx, dy));
    }
    for (n, p) in cases.iter().enumerate() {
        let r = source_consistency(p, 200, n as u64);
        assert!(
            r.max() <= 1e-6,
            "{:?} dims {}/{}: {r:?}",
            p.solution,
            p.macro_dim,
            p.micro_dim
        );
    }
}

#[test]
fn exact_pressure_vanishes_on_the_boundary() {
    for p in [
        ManufacturedProblem::smooth(),
        ManufacturedProblem::localized(),
        problem(Solution::Smooth, 1, 1),
    ] {
        for k in 0..=20 {
            let s = k as f64 / 20.0;
            let pts: Vec<[f64; 2]> = if p.macro_dim == 1 {
                vec![[0.0, 0.0], [1.0, 0.0]]
            } else {
                vec![[s, 0.0], [s, 1.0], [0.0, s], [1.0, s]]
            };
            for x in pts {
                assert!(p.pi(0.3, x).abs() < 1e-14);
            }
        }
    }
}

/// Composite Simpson rule on `[a, b]`.
fn simpson(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let n = 64;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for j in 1..n {
        sum += f(a + j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

#[test]
fn error_norms_of_the_interpolant_match_independent_quadrature() {
    let p = problem(Solution::Smooth, 1, 1);
    let n = 5;
    let (ops, _) = setup(&p, n, n).unwrap();
    let (xm, ym) = (ops.macro_space.mesh(), ops.micro_space.mesh());
    let t_final = p.params.t_final;
    let states: Vec<CoupledState> = [0.0, t_final]
        .iter()
        .map(|&t| {
            let alpha = interpolate(&ops.macro_space, |x| p.pi(t, x));
            let beta: Vec<f64> = (0..ops.n_macro())
                .flat_map(|i| (0..ops.n_micro()).map(move |k| (i, k)))
                .map(|(i, k)| p.rho(t, xm.vertex(i), ym.vertex(k)))
                .collect();
            CoupledState::new(t, alpha, beta, ops.n_micro())
        })
        .collect();
    let report = error_norms(&ops, &states, &p);

    // interpolation errors on each cell pair, with the interpolant written out by hand
    let h = 1.0 / n as f64;
    let node = |i: usize| i as f64 * h;
    let mut pi_h1 = [0.0f64; 2];
    let mut pi_l2 = [0.0f64; 2];
    let mut rho_l2 = [0.0f64; 2];
    for (s, &t) in [0.0, t_final].iter().enumerate() {
        for e in 0..n {
            let (a, b) = (node(e), node(e + 1));
            let (ua, ub) = (p.pi(t, [a, 0.0]), p.pi(t, [b, 0.0]));
            let slope = (ub - ua) / h;
            pi_l2[s] += simpson(a, b, |x| (p.pi(t, [x, 0.0]) - ua - slope * (x - a)).powi(2));
            pi_h1[s] += simpson(a, b, |x| (p.grad_pi(t, [x, 0.0])[0] - slope).powi(2));
            for f in 0..n {
                let (c, d) = (node(f), node(f + 1));
                let corner = |x: f64, y: f64| p.rho(t, [x, 0.0], [y, 0.0]);
                let bilinear = |x: f64, y: f64| {
                    let (u, v) = ((x - a) / h, (y - c) / h);
                    (1.0 - u) * (1.0 - v) * corner(a, c)
                        + u * (1.0 - v) * corner(b, c)
                        + (1.0 - u) * v * corner(a, d)
                        + u * v * corner(b, d)
                };
                rho_l2[s] += simpson(a, b, |x| simpson(c, d, |y| (corner(x, y) - bilinear(x, y)).powi(2)));
            }
        }
    }
    // the degree-4 rule is not exact for these integrands
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-3 * b;
    assert!(close(report.e_pi_h1, pi_h1[0].max(pi_h1[1]).sqrt()));
    assert!(close(report.e_pi_l2, pi_l2[0].max(pi_l2[1]).sqrt()));
    assert!(close(report.e_rho_l2, (0.5 * t_final * (rho_l2[0] + rho_l2[1])).sqrt()));
    assert!(report.e_rho >= report.e_rho_l2 && report.e_rho >= report.e_rho_grad_y);
}

#[test]
fn l2_error_is_bounded_by_the_gradient_error() {
    for (dim, c_p) in [(1, 1.0 / PI), (2, 1.0 / (PI * 2f64.sqrt()))] {
        let p = problem(Solution::Smooth, dim, 1);
        let traj = run_problem(&p, 6, 6, 0.05, Scheme::ImplicitEuler).unwrap();
        let report = error_norms(&traj.ops, &traj.states, &p);
        assert!(report.e_pi_l2 > 0.0);
        assert!(
            report.e_pi_l2 <= c_p * report.e_pi_h1 * (1.0 + 1e-9),
            "dim {dim}: {report:?}"
        );
    }
}

#[test]
fn supremum_norms_settle_under_refinement() {
    let p = ManufacturedProblem::smooth();
    let sups: Vec<(f64, f64)> = [8, 16, 32]
        .iter()
        .map(|&n| {
            let (mut pi, mut rho) = (0.0f64, 0.0f64);
            run_problem_observed(&p, n, n, 0.05, Scheme::ImplicitEuler, |_, s, _| {
                pi = s.alpha.iter().fold(pi, |m, v| m.max(v.abs()));
                rho = s.beta.iter().fold(rho, |m, v| m.max(v.abs()));
            })
            .unwrap();
            (pi, rho)
        })
        .collect();
    let (a, b) = (sups[1], sups[2]);
    assert!((a.0 - b.0).abs() < 0.01 * b.0, "{sups:?}");
    assert!((a.1 - b.1).abs() < 0.01 * b.1, "{sups:?}");
}

#[test]
fn rate_tables_are_reproducible() {
    let p = ManufacturedProblem::smooth();
    let a = convergence_study(&p, &[2, 4, 8], DtRule::default(), Scheme::CrankNicolson).unwrap();
    let b = convergence_study(&p, &[2, 4, 8], DtRule::default(), Scheme::CrankNicolson).unwrap();
    assert_eq!(a, b);
    assert!(a.rows.iter().all(|r| r.e_pi_l2 > 0.0 && r.e_rho >= r.e_rho_l2));
    let rates = a.rates(|r| r.e_pi_l2);
    assert!(rates[0].is_none() && rates[1..].iter().all(Option::is_some));
    assert!(convergence_study(&p, &[2, 4], DtRule::default(), Scheme::CrankNicolson).is_err());
}

#[test]
fn quadratic_rule_divides_the_final_time() {
    let rule = DtRule::Quadratic { factor: 4.0 };
    for n in [2, 3, 4, 7, 8, 16, 32] {
        let dt = rule.dt(n, 0.5);
        let steps = 0.5 / dt;
        assert!((steps - steps.round()).abs() < 1e-9);
        assert!(dt <= 2.0 / (n * n) as f64 + 1e-15);
    }
}

#[test]
fn unforced_problem_has_unit_effectivity() {
    let p = problem(Solution::Zero, 2, 1);
    let table = effectivity_study(&p, &[2, 4, 8, 16]).unwrap();
    for r in &table.rows {
        assert_eq!(r.eta_r, 0.0);
        assert_eq!(r.e_pi_h1, 0.0);
        assert_eq!(r.index, 1.0);
    }
    assert_eq!(table.spread(), 1.0);
}
