use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fem::quadrature::gauss_legendre;
use crate::fem::FeSpace;
use crate::mesh::{Domain, Point, SimplicialMesh};
use crate::twoscale::{Forcing, ModelParams, ReactionTerm, Reduction};

/// Exact solution families with known sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Solution {
    /// `π = Π sin(π x_d) (1 + t/T)`, `ρ = e^{-t} (1 + Π x_d)(1 + ½ Π cos(π y_e))`.
    Smooth,
    /// `π = 0`, `ρ = (1 + Σ x_d)(1 + y_1)`, constant in time; representable exactly by the
    /// tensor P1 space.
    Bilinear,
    /// `π = 0`, `ρ = 0`.
    Zero,
    /// `π = amp (1 - |x - x0|²/r0²)³` inside the disk `|x - x0| < r0`, zero outside;
    /// `ρ = (π + p_F)/R` so that the Robin flux vanishes. Constant in time.
    Localized {
        center: [f64; 2],
        radius: f64,
        amplitude: f64,
    },
}

/// A manufactured two-scale problem: exact fields, model data and the sources that make
/// the exact fields solve the forced system.
#[derive(Debug, Clone)]
pub struct ManufacturedProblem {
    pub solution: Solution,
    pub params: ModelParams,
    pub reaction: ReactionTerm,
    pub macro_dim: usize,
    pub micro_dim: usize,
    /// Gauss points per direction for reductions of the exact density.
    reduction_points: (Vec<f64>, Vec<f64>),
}

impl ManufacturedProblem {
    pub fn new(
        solution: Solution,
        params: ModelParams,
        reaction: ReactionTerm,
        macro_dim: usize,
        micro_dim: usize,
    ) -> Self {
        let mut params = params;
        if solution == Solution::Zero {
            params.p_f = 0.0;
        }
        Self {
            solution,
            params,
            reaction,
            macro_dim,
            micro_dim,
            reduction_points: gauss_legendre(12),
        }
    }

    /// Smooth pair on the unit square with a 1D cell and the default reaction.
    pub fn smooth() -> Self {
        let params = ModelParams::default();
        Self::new(
            Solution::Smooth,
            params,
            ReactionTerm::standard(0.5, params.theta),
            2,
            1,
        )
    }

    pub fn localized() -> Self {
        let params = ModelParams::default();
        Self::new(
            Solution::Localized {
                center: [0.35, 0.4],
                radius: 0.2,
                amplitude: 1.0,
            },
            params,
            ReactionTerm::standard(0.5, params.theta),
            2,
            1,
        )
    }

    pub fn macro_domain(&self) -> Domain {
        Domain::unit(self.macro_dim)
    }

    pub fn micro_domain(&self) -> Domain {
        Domain::unit(self.micro_dim)
    }

    /// Γ_R is the left endpoint of the cell in 1D and its bottom side in 2D.
    pub fn is_robin(&self, y: Point) -> bool {
        if self.micro_dim == 1 {
            y[0] == 0.0
        } else {
            y[1] == 0.0
        }
    }

    pub fn macro_mesh(&self, n: usize) -> Result<SimplicialMesh> {
        SimplicialMesh::uniform_dirichlet(&self.macro_domain(), n)
    }

    pub fn micro_mesh(&self, n: usize) -> Result<SimplicialMesh> {
        SimplicialMesh::uniform_cell(&self.micro_domain(), n, |y| self.is_robin(y))
    }

    pub fn spaces(&self, n_macro: usize, n_micro: usize) -> Result<(FeSpace, FeSpace)> {
        Ok((
            FeSpace::new(Arc::new(self.macro_mesh(n_macro)?)),
            FeSpace::new(Arc::new(self.micro_mesh(n_micro)?)),
        ))
    }

    /// Bounding box of the support of the macroscopic source, if it is compact.
    pub fn source_bounding_box(&self) -> Option<(Point, Point)> {
        match self.solution {
            Solution::Localized { center, radius, .. } => Some((
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            )),
            _ => None,
        }
    }

    /// Distance of `x` to the set where the exact pressure is only C² (the rim of the
    /// localized bump); infinite for the smooth families.
    pub fn kink_distance(&self, x: Point) -> f64 {
        match self.solution {
            Solution::Localized { center, radius, .. } => (self.dist2(x, center).sqrt() - radius).abs(),
            _ => f64::INFINITY,
        }
    }

    fn xs<'a>(&self, x: &'a Point) -> &'a [f64] {
        &x[..self.macro_dim]
    }

    fn ys<'a>(&self, y: &'a Point) -> &'a [f64] {
        &y[..self.micro_dim]
    }

    pub fn pi(&self, t: f64, x: Point) -> f64 {
        match self.solution {
            Solution::Smooth => {
                self.xs(&x).iter().map(|v| (PI * v).sin()).product::<f64>() * (1.0 + t / self.params.t_final)
            }
            Solution::Bilinear | Solution::Zero => 0.0,
            Solution::Localized {
                center,
                radius,
                amplitude,
            } => {
                let u = 1.0 - self.dist2(x, center) / (radius * radius);
                if u > 0.0 {
                    amplitude * u.powi(3)
                } else {
                    0.0
                }
            }
        }
    }

    fn dist2(&self, x: Point, c: [f64; 2]) -> f64 {
        self.xs(&x).iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum()
    }

    pub fn grad_pi(&self, t: f64, x: Point) -> Point {
        let mut g = [0.0; 2];
        match self.solution {
            Solution::Smooth => {
                let xs = self.xs(&x);
                let time = 1.0 + t / self.params.t_final;
                for d in 0..self.macro_dim {
                    g[d] = time
                        * (0..self.macro_dim)
                            .map(|e| {
                                if e == d {
                                    PI * (PI * xs[e]).cos()
                                } else {
                                    (PI * xs[e]).sin()
                                }
                            })
                            .product::<f64>();
                }
            }
            Solution::Bilinear | Solution::Zero => {}
            Solution::Localized {
                center,
                radius,
                amplitude,
            } => {
                let u = 1.0 - self.dist2(x, center) / (radius * radius);
                if u > 0.0 {
                    for d in 0..self.macro_dim {
                        g[d] = amplitude * 3.0 * u * u * (-2.0 * (x[d] - center[d]) / (radius * radius));
                    }
                }
            }
        }
        g
    }

    pub fn laplace_pi(&self, t: f64, x: Point) -> f64 {
        match self.solution {
            Solution::Smooth => -(self.macro_dim as f64) * PI * PI * self.pi(t, x),
            Solution::Bilinear | Solution::Zero => 0.0,
            Solution::Localized {
                center,
                radius,
                amplitude,
            } => {
                let r2 = radius * radius;
                let d2 = self.dist2(x, center);
                let u = 1.0 - d2 / r2;
                if u > 0.0 {
                    let grad_u2 = 4.0 * d2 / (r2 * r2);
                    let lap_u = -2.0 * self.macro_dim as f64 / r2;
                    amplitude * (6.0 * u * grad_u2 + 3.0 * u * u * lap_u)
                } else {
                    0.0
                }
            }
        }
    }

    fn x_factor(&self, x: Point) -> f64 {
        match self.solution {
            Solution::Smooth => 1.0 + self.xs(&x).iter().product::<f64>(),
            Solution::Bilinear => 1.0 + self.xs(&x).iter().sum::<f64>(),
            _ => 0.0,
        }
    }

    fn grad_x_factor(&self, x: Point) -> Point {
        let mut g = [0.0; 2];
        let xs = self.xs(&x);
        for d in 0..self.macro_dim {
            g[d] = match self.solution {
                Solution::Smooth => (0..self.macro_dim).filter(|&e| e != d).map(|e| xs[e]).product(),
                Solution::Bilinear => 1.0,
                _ => 0.0,
            };
        }
        g
    }

    pub fn rho(&self, t: f64, x: Point, y: Point) -> f64 {
        match self.solution {
            Solution::Smooth => {
                let c: f64 = self.ys(&y).iter().map(|v| (PI * v).cos()).product();
                (-t).exp() * self.x_factor(x) * (1.0 + 0.5 * c)
            }
            Solution::Bilinear => self.x_factor(x) * (1.0 + y[0]),
            Solution::Zero => 0.0,
            Solution::Localized { .. } => (self.pi(t, x) + self.params.p_f) / self.params.r,
        }
    }

    pub fn grad_y_rho(&self, t: f64, x: Point, y: Point) -> Point {
        let mut g = [0.0; 2];
        match self.solution {
            Solution::Smooth => {
                let ys = self.ys(&y);
                let s = (-t).exp() * self.x_factor(x) * 0.5;
                for e in 0..self.micro_dim {
                    g[e] = s
                        * (0..self.micro_dim)
                            .map(|k| {
                                if k == e {
                                    -PI * (PI * ys[k]).sin()
                                } else {
                                    (PI * ys[k]).cos()
                                }
                            })
                            .product::<f64>();
                }
            }
            Solution::Bilinear => g[0] = self.x_factor(x),
            Solution::Zero | Solution::Localized { .. } => {}
        }
        g
    }

    /// `∇_x ρ(t, x, y)`.
    pub fn grad_x_rho(&self, t: f64, x: Point, y: Point) -> Point {
        match self.solution {
            Solution::Smooth => {
                let c: f64 = self.ys(&y).iter().map(|v| (PI * v).cos()).product();
                let s = (-t).exp() * (1.0 + 0.5 * c);
                self.grad_x_factor(x).map(|g| s * g)
            }
            Solution::Bilinear => self.grad_x_factor(x).map(|g| g * (1.0 + y[0])),
            Solution::Zero => [0.0; 2],
            Solution::Localized { .. } => self.grad_pi(t, x).map(|g| g / self.params.r),
        }
    }

    pub fn rho_t(&self, t: f64, x: Point, y: Point) -> f64 {
        match self.solution {
            Solution::Smooth => -self.rho(t, x, y),
            _ => 0.0,
        }
    }

    pub fn laplace_y_rho(&self, t: f64, x: Point, y: Point) -> f64 {
        match self.solution {
            Solution::Smooth => {
                let c: f64 = self.ys(&y).iter().map(|v| (PI * v).cos()).product();
                (-t).exp() * self.x_factor(x) * 0.5 * c * (-(self.micro_dim as f64) * PI * PI)
            }
            _ => 0.0,
        }
    }

    /// Outward unit normal of the unit cell at a boundary point.
    pub fn cell_normal(&self, y: Point) -> Point {
        let mut n = [0.0; 2];
        let ys = self.ys(&y);
        // pick the coordinate closest to a face
        let (mut best, mut dist) = (0, f64::INFINITY);
        for (e, v) in ys.iter().enumerate() {
            let d = v.min(1.0 - v).abs();
            if d < dist {
                best = e;
                dist = d;
            }
        }
        n[best] = if ys[best] < 0.5 { -1.0 } else { 1.0 };
        n
    }

    /// Exact reduction `g(ρ(t, x, ·))` by tensor Gauss quadrature.
    pub fn reduced_rho(&self, t: f64, x: Point) -> f64 {
        let (nodes, weights) = &self.reduction_points;
        match (self.reaction.reduction, self.micro_dim) {
            (Reduction::MeanY, 1) => nodes
                .iter()
                .zip(weights)
                .map(|(&y, w)| w * self.rho(t, x, [y, 0.0]))
                .sum(),
            (Reduction::MeanY, _) => {
                let mut s = 0.0;
                for (&y1, w1) in nodes.iter().zip(weights) {
                    for (&y2, w2) in nodes.iter().zip(weights) {
                        s += w1 * w2 * self.rho(t, x, [y1, y2]);
                    }
                }
                s
            }
            (Reduction::TraceMean, 1) => self.rho(t, x, [0.0, 0.0]),
            (Reduction::TraceMean, _) => nodes
                .iter()
                .zip(weights)
                .map(|(&y, w)| w * self.rho(t, x, [y, 0.0]))
                .sum(),
        }
    }

    pub fn initial_rho(&self, x: Point, y: Point) -> f64 {
        self.rho(0.0, x, y)
    }

    fn flux(&self, t: f64, x: Point, y: Point) -> f64 {
        let g = self.grad_y_rho(t, x, y);
        let n = self.cell_normal(y);
        self.params.d * (g[0] * n[0] + g[1] * n[1])
    }
}

impl Forcing for ManufacturedProblem {
    /// `-AΔπ - f(π, g(ρ))`.
    fn macro_source(&self, t: f64, x: Point) -> f64 {
        -self.params.a * self.laplace_pi(t, x) - self.reaction.f(self.pi(t, x), self.reduced_rho(t, x))
    }

    /// `∂_t ρ - D Δ_y ρ`.
    fn micro_source(&self, t: f64, x: Point, y: Point) -> f64 {
        self.rho_t(t, x, y) - self.params.d * self.laplace_y_rho(t, x, y)
    }

    /// `D ∇_y ρ · n - κ(π + p_F - R ρ)`.
    fn robin_source(&self, t: f64, x: Point, y: Point) -> f64 {
        let p = &self.params;
        self.flux(t, x, y) - p.kappa * (self.pi(t, x) + p.p_f - p.r * self.rho(t, x, y))
    }

    /// `D ∇_y ρ · n`.
    fn neumann_source(&self, t: f64, x: Point, y: Point) -> f64 {
        self.flux(t, x, y)
    }

    fn has_macro_source(&self) -> bool {
        self.solution != Solution::Zero
    }

    fn has_micro_source(&self) -> bool {
        matches!(self.solution, Solution::Smooth | Solution::Bilinear)
    }
}
