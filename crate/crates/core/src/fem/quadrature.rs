//! Quadrature on intervals and triangles in barycentric form.
//!
//! Weights are normalised to sum to one, so `∫_B f ≈ |B| Σ w_q f(x_q)`.

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            dp = 1.0;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    if n == 1 {
        nodes[0] = 0.5;
        weights[0] = 1.0;
    }
    (nodes, weights)
}

#[derive(Debug, Clone)]
pub struct QuadRule {
    /// Barycentric coordinates (third entry unused in 1D).
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    /// The assembly rule for nonlinear terms: 2-point Gauss in 1D, edge midpoints in 2D.
    pub fn degree2(dim: usize) -> Self {
        if dim == 1 {
            Self::gauss_interval(2)
        } else {
            let t = 1.0 / 3.0;
            QuadRule {
                points: vec![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
                weights: vec![t, t, t],
            }
        }
    }

    /// A rule exact for polynomials of total degree `degree`.
    pub fn exact_for(dim: usize, degree: usize) -> Self {
        if dim == 1 {
            Self::gauss_interval(degree / 2 + 1)
        } else if degree <= 2 {
            Self::degree2(2)
        } else {
            Self::collapsed_triangle(degree / 2 + 1)
        }
    }

    pub fn gauss_interval(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        QuadRule {
            points: x.iter().map(|&t| [1.0 - t, t, 0.0]).collect(),
            weights: w,
        }
    }

    /// Conical product (Duffy) rule with `n × n` points, exact to degree `2n - 2`.
    pub fn collapsed_triangle(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (&u, &wu) in x.iter().zip(&w) {
            for (&v, &wv) in x.iter().zip(&w) {
                let l1 = u;
                let l2 = v * (1.0 - u);
                points.push([1.0 - l1 - l2, l1, l2]);
                weights.push(2.0 * wu * wv * (1.0 - u));
            }
        }
        QuadRule { points, weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}
