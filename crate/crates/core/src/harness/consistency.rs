use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::ManufacturedProblem;
use crate::mesh::Point;
use crate::twoscale::Forcing;

/// Largest strong-form residuals of the exact pair with the injected sources, each scaled
/// by `1 + |largest term|`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ConsistencyResiduals {
    pub macro_eq: f64,
    pub micro_eq: f64,
    pub robin: f64,
    pub neumann: f64,
}

impl ConsistencyResiduals {
    pub fn max(&self) -> f64 {
        self.macro_eq.max(self.micro_eq).max(self.robin).max(self.neumann)
    }
}

const STEP: f64 = 1e-3;

/// Fourth-order central first derivative of `u` at `s`.
fn d1(u: impl Fn(f64) -> f64, s: f64) -> f64 {
    let h = STEP;
    (-u(s + 2.0 * h) + 8.0 * u(s + h) - 8.0 * u(s - h) + u(s - 2.0 * h)) / (12.0 * h)
}

/// Fourth-order central second derivative.
fn d2(u: impl Fn(f64) -> f64, s: f64) -> f64 {
    let h = STEP;
    (-u(s + 2.0 * h) + 16.0 * u(s + h) - 30.0 * u(s) + 16.0 * u(s - h) - u(s - 2.0 * h)) / (12.0 * h * h)
}

fn shifted(p: Point, d: usize, s: f64) -> Point {
    let mut q = p;
    q[d] = s;
    q
}

fn relative(residual: f64, terms: &[f64]) -> f64 {
    residual.abs() / (1.0 + terms.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Evaluates the strong form of the forced system at seeded random points, with every
/// derivative of the exact fields replaced by finite differences.
pub fn source_consistency(problem: &ManufacturedProblem, samples: usize, seed: u64) -> ConsistencyResiduals {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = problem.params;
    let mut out = ConsistencyResiduals::default();
    let point = |dim: usize, rng: &mut ChaCha8Rng| {
        let mut x = [0.0; 2];
        for v in x.iter_mut().take(dim) {
            *v = rng.gen_range(0.05..0.95);
        }
        x
    };
    for _ in 0..samples {
        let t = rng.gen_range(0.0..p.t_final);
        let mut x = point(problem.macro_dim, &mut rng);
        // difference stencils must not straddle a kink
        while problem.kink_distance(x) < 3.0 * STEP {
            x = point(problem.macro_dim, &mut rng);
        }
        let y = point(problem.micro_dim, &mut rng);

        let lap_x: f64 = (0..problem.macro_dim)
            .map(|d| d2(|s| problem.pi(t, shifted(x, d, s)), x[d]))
            .sum();
        let reaction = problem.reaction.f(problem.pi(t, x), problem.reduced_rho(t, x));
        let src = problem.macro_source(t, x);
        let r = -p.a * lap_x - reaction - src;
        out.macro_eq = out.macro_eq.max(relative(r, &[p.a * lap_x, reaction, src]));

        let rho_t = d1(|s| problem.rho(s, x, y), t);
        let lap_y: f64 = (0..problem.micro_dim)
            .map(|d| d2(|s| problem.rho(t, x, shifted(y, d, s)), y[d]))
            .sum();
        let src = problem.micro_source(t, x, y);
        let r = rho_t - p.d * lap_y - src;
        out.micro_eq = out.micro_eq.max(relative(r, &[rho_t, p.d * lap_y, src]));

        // a point on Γ_R and one on Γ_N with their outward normal directions
        let (yr, yn, axis) = if problem.micro_dim == 1 {
            ([0.0, 0.0], [1.0, 0.0], 0)
        } else {
            ([y[0], 0.0], [y[0], 1.0], 1)
        };
        let flux_r = -p.d * d1(|s| problem.rho(t, x, shifted(yr, axis, s)), yr[axis]);
        let transfer = p.kappa * (problem.pi(t, x) + p.p_f - p.r * problem.rho(t, x, yr));
        let src = problem.robin_source(t, x, yr);
        out.robin = out
            .robin
            .max(relative(flux_r - transfer - src, &[flux_r, transfer, src]));
        let flux_n = p.d * d1(|s| problem.rho(t, x, shifted(yn, axis, s)), yn[axis]);
        let src = problem.neumann_source(t, x, yn);
        out.neumann = out.neumann.max(relative(flux_n - src, &[flux_n, src]));
    }
    out
}
