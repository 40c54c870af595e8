use serde::Serialize;

use super::ManufacturedProblem;
use crate::fem::{FeSpace, QuadRule};
use crate::mesh::Point;
use crate::par;
use crate::twoscale::{CoupledState, SystemOperators};

/// Squared errors of one state at one time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SnapshotErrors {
    pub pi_l2_sq: f64,
    pub pi_h1_sq: f64,
    pub rho_l2_sq: f64,
    pub rho_grad_y_sq: f64,
}

/// `(‖u - u_h‖²_L², |u - u_h|²_H¹)` of a P1 field against an exact function, degree-4 rule.
pub fn field_errors_sq(
    space: &FeSpace,
    coeffs: &[f64],
    u: impl Fn(Point) -> f64 + Sync,
    grad_u: impl Fn(Point) -> Point + Sync,
) -> (f64, f64) {
    let mesh = space.mesh();
    let rule = QuadRule::exact_for(mesh.dim(), 4);
    let per_cell = par::map_range(mesh.n_cells(), |c| {
        let g = space.gradient_on_cell(coeffs, c);
        let (mut l2, mut h1) = (0.0, 0.0);
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let x = mesh.map_point(c, p);
            l2 += w * (u(x) - space.eval_on_cell(coeffs, c, p)).powi(2);
            let gu = grad_u(x);
            h1 += w * ((gu[0] - g[0]).powi(2) + (gu[1] - g[1]).powi(2));
        }
        (l2 * mesh.measure(c), h1 * mesh.measure(c))
    });
    per_cell.iter().fold((0.0, 0.0), |(a, b), (l, h)| (a + l, b + h))
}

/// `(‖ρ - ρ^{H,h}‖²_{L²(Ω×Y)}, ‖∇_y(ρ - ρ^{H,h})‖²_{L²(Ω×Y)})` by tensor degree-4 quadrature.
pub fn two_scale_errors_sq(
    ops: &SystemOperators,
    beta: &[f64],
    rho: impl Fn(Point, Point) -> f64 + Sync,
    grad_y_rho: impl Fn(Point, Point) -> Point + Sync,
) -> (f64, f64) {
    let (xs, ys) = (&ops.macro_space, &ops.micro_space);
    let (xm, ym) = (xs.mesh(), ys.mesh());
    let nu = ops.n_micro();
    let rx = QuadRule::exact_for(xm.dim(), 4);
    let ry = QuadRule::exact_for(ym.dim(), 4);
    let per_cell = par::map_range(xm.n_cells(), |c| {
        let dofs: Vec<usize> = xs.cell_dofs(c).collect();
        let mut row = vec![0.0; nu];
        let (mut l2, mut gy) = (0.0, 0.0);
        for (p, wx) in rx.points.iter().zip(&rx.weights) {
            let x = xm.map_point(c, p);
            row.iter_mut().for_each(|v| *v = 0.0);
            for (a, &d) in dofs.iter().enumerate() {
                for (v, b) in row.iter_mut().zip(&beta[d * nu..(d + 1) * nu]) {
                    *v += p[a] * b;
                }
            }
            let (mut cl2, mut cgy) = (0.0, 0.0);
            for cy in 0..ym.n_cells() {
                let g = ys.gradient_on_cell(&row, cy);
                let (mut sl2, mut sgy) = (0.0, 0.0);
                for (q, wy) in ry.points.iter().zip(&ry.weights) {
                    let y = ym.map_point(cy, q);
                    sl2 += wy * (rho(x, y) - ys.eval_on_cell(&row, cy, q)).powi(2);
                    let ge = grad_y_rho(x, y);
                    sgy += wy * ((ge[0] - g[0]).powi(2) + (ge[1] - g[1]).powi(2));
                }
                cl2 += sl2 * ym.measure(cy);
                cgy += sgy * ym.measure(cy);
            }
            l2 += wx * cl2;
            gy += wx * cgy;
        }
        (l2 * xm.measure(c), gy * xm.measure(c))
    });
    per_cell.iter().fold((0.0, 0.0), |(a, b), (l, g)| (a + l, b + g))
}

pub fn snapshot_errors(ops: &SystemOperators, state: &CoupledState, problem: &ManufacturedProblem) -> SnapshotErrors {
    let t = state.t;
    let (pi_l2_sq, pi_h1_sq) = field_errors_sq(
        &ops.macro_space,
        &state.alpha,
        |x| problem.pi(t, x),
        |x| problem.grad_pi(t, x),
    );
    let (rho_l2_sq, rho_grad_y_sq) = two_scale_errors_sq(
        ops,
        &state.beta,
        |x, y| problem.rho(t, x, y),
        |x, y| problem.grad_y_rho(t, x, y),
    );
    SnapshotErrors {
        pi_l2_sq,
        pi_h1_sq,
        rho_l2_sq,
        rho_grad_y_sq,
    }
}

/// Time norms over the step grid.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ErrorReport {
    /// `max_n ‖∇(π - π^H)(t_n)‖`.
    pub e_pi_h1: f64,
    /// `max_n ‖(π - π^H)(t_n)‖`.
    pub e_pi_l2: f64,
    /// Trapezoid `L²(S; L²(Ω; H¹(Y)))`.
    pub e_rho: f64,
    /// The `L²(S; L²(Ω×Y))` part of `e_rho`.
    pub e_rho_l2: f64,
    /// The `L²(S; L²(Ω; H¹-seminorm))` part of `e_rho`.
    pub e_rho_grad_y: f64,
}

/// Streaming accumulation of [`ErrorReport`] over a trajectory.
#[derive(Debug, Clone, Default)]
pub struct ErrorAccumulator {
    last: Option<(f64, SnapshotErrors)>,
    max_pi_l2_sq: f64,
    max_pi_h1_sq: f64,
    int_rho_l2: f64,
    int_rho_gy: f64,
}

impl ErrorAccumulator {
    pub fn push(&mut self, t: f64, e: SnapshotErrors) {
        self.max_pi_l2_sq = self.max_pi_l2_sq.max(e.pi_l2_sq);
        self.max_pi_h1_sq = self.max_pi_h1_sq.max(e.pi_h1_sq);
        if let Some((t0, e0)) = self.last {
            let h = 0.5 * (t - t0);
            self.int_rho_l2 += h * (e0.rho_l2_sq + e.rho_l2_sq);
            self.int_rho_gy += h * (e0.rho_grad_y_sq + e.rho_grad_y_sq);
        }
        self.last = Some((t, e));
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport {
            e_pi_h1: self.max_pi_h1_sq.sqrt(),
            e_pi_l2: self.max_pi_l2_sq.sqrt(),
            e_rho: (self.int_rho_l2 + self.int_rho_gy).sqrt(),
            e_rho_l2: self.int_rho_l2.sqrt(),
            e_rho_grad_y: self.int_rho_gy.sqrt(),
        }
    }
}

/// Error norms of a stored trajectory.
pub fn error_norms(ops: &SystemOperators, trajectory: &[CoupledState], problem: &ManufacturedProblem) -> ErrorReport {
    let mut acc = ErrorAccumulator::default();
    for s in trajectory {
        acc.push(s.t, snapshot_errors(ops, s, problem));
    }
    acc.report()
}
