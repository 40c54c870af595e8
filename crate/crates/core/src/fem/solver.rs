//! Direct solves for symmetric positive definite operators.
//!
//! The free (unmasked) dofs are reordered by reverse Cuthill-McKee and factored with an
//! envelope Cholesky decomposition. Solves are checked against the original operator and
//! refined once if the residual misses the tolerance.

use super::SparseSymOperator;
use crate::error::{Error, Result};

/// Required relative residual `‖b - A x‖ / ‖b‖` over the free dofs.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SpdSolver {
    op: SparseSymOperator,
    mask: Vec<bool>,
    /// `order[k]` is the dof eliminated k-th.
    order: Vec<usize>,
    /// First column of the envelope in each factor row.
    first: Vec<usize>,
    offset: Vec<usize>,
    factor: Vec<f64>,
}

impl SpdSolver {
    /// Factors `op` restricted to the dofs where `mask` is false (all dofs if `None`).
    pub fn new(op: &SparseSymOperator, mask: Option<&[bool]>) -> Result<Self> {
        let n = op.dim();
        let mask = mask.map(<[bool]>::to_vec).unwrap_or_else(|| vec![false; n]);
        assert_eq!(mask.len(), n);
        if op.triplets().any(|(_, _, v)| !v.is_finite()) {
            return Err(Error::Validation("operator has non-finite entries".into()));
        }
        let order = rcm_order(op, &mask);
        let mut position = vec![usize::MAX; n];
        for (k, &d) in order.iter().enumerate() {
            position[d] = k;
        }

        let m = order.len();
        let mut first = vec![0; m];
        for (k, &d) in order.iter().enumerate() {
            first[k] = op
                .row(d)
                .filter(|&(j, _)| !mask[j])
                .map(|(j, _)| position[j])
                .filter(|&p| p <= k)
                .min()
                .unwrap_or(k);
        }
        let mut offset = vec![0; m + 1];
        for k in 0..m {
            offset[k + 1] = offset[k] + (k - first[k] + 1);
        }
        let mut factor = vec![0.0; offset[m]];
        for (k, &d) in order.iter().enumerate() {
            for (j, v) in op.row(d) {
                if !mask[j] && position[j] <= k {
                    factor[offset[k] + position[j] - first[k]] = v;
                }
            }
        }

        for i in 0..m {
            let (fi, oi) = (first[i], offset[i]);
            for j in fi..i {
                let (fj, oj) = (first[j], offset[j]);
                let lo = fi.max(fj);
                let mut s = factor[oi + j - fi];
                for k in lo..j {
                    s -= factor[oi + k - fi] * factor[oj + k - fj];
                }
                factor[oi + j - fi] = s / factor[oj + j - fj];
            }
            let a_ii = factor[oi + i - fi];
            let d = a_ii - (fi..i).map(|k| factor[oi + k - fi].powi(2)).sum::<f64>();
            if !(d > 1e-14 * a_ii.abs()) {
                return Err(Error::Indefinite {
                    row: order[i],
                    pivot: d,
                });
            }
            factor[oi + i - fi] = d.sqrt();
        }

        Ok(Self {
            op: op.clone(),
            mask,
            order,
            first,
            offset,
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.mask.len()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    fn substitute(&self, rhs: &[f64]) -> Vec<f64> {
        let m = self.order.len();
        let mut y: Vec<f64> = self.order.iter().map(|&d| rhs[d]).collect();
        for i in 0..m {
            let (fi, oi) = (self.first[i], self.offset[i]);
            let s: f64 = (fi..i).map(|k| self.factor[oi + k - fi] * y[k]).sum();
            y[i] = (y[i] - s) / self.factor[oi + i - fi];
        }
        for i in (0..m).rev() {
            let (fi, oi) = (self.first[i], self.offset[i]);
            y[i] /= self.factor[oi + i - fi];
            let yi = y[i];
            for k in fi..i {
                y[k] -= self.factor[oi + k - fi] * yi;
            }
        }
        let mut x = vec![0.0; self.dim()];
        for (k, &d) in self.order.iter().enumerate() {
            x[d] = y[k];
        }
        x
    }

    fn residual(&self, rhs: &[f64], x: &[f64]) -> Vec<f64> {
        let ax = self.op.mul_vec(x);
        (0..self.dim())
            .map(|i| if self.mask[i] { 0.0 } else { rhs[i] - ax[i] })
            .collect()
    }

    /// Solves `A x = rhs` on the free dofs; masked entries of `x` are exactly zero.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(rhs.len(), self.dim());
        let b_norm = norm(rhs.iter().zip(&self.mask).filter(|(_, &m)| !m).map(|(v, _)| *v));
        if b_norm == 0.0 {
            return Ok(vec![0.0; self.dim()]);
        }
        let mut x = self.substitute(rhs);
        let mut rel = norm(self.residual(rhs, &x).into_iter()) / b_norm;
        if rel > SOLVE_TOLERANCE {
            let dx = self.substitute(&self.residual(rhs, &x));
            x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
            rel = norm(self.residual(rhs, &x).into_iter()) / b_norm;
        }
        if !(rel <= SOLVE_TOLERANCE) {
            return Err(Error::SolveNotConverged {
                residual: rel,
                tolerance: SOLVE_TOLERANCE,
            });
        }
        Ok(x)
    }

    /// Solve without the residual check, for hot loops whose operator is known to be
    /// well conditioned (mass-type matrices).
    pub fn solve_unchecked(&self, rhs: &[f64]) -> Vec<f64> {
        self.substitute(rhs)
    }
}

/// One-shot solve of `A x = rhs` with masked dofs clamped to zero.
pub fn solve_spd(op: &SparseSymOperator, rhs: &[f64], mask: Option<&[bool]>) -> Result<Vec<f64>> {
    SpdSolver::new(op, mask)?.solve(rhs)
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// Reverse Cuthill-McKee ordering of the free dofs.
fn rcm_order(op: &SparseSymOperator, mask: &[bool]) -> Vec<usize> {
    let n = op.dim();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            if mask[i] {
                Vec::new()
            } else {
                op.row(i).map(|(j, _)| j).filter(|&j| j != i && !mask[j]).collect()
            }
        })
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = mask.to_vec();
    let mut order = Vec::with_capacity(n);

    // Breadth-first sweep; returns the visit order and the index where the last level starts.
    let bfs = |start: usize, visited: &mut Vec<bool>| -> (Vec<usize>, usize) {
        let mut out = Vec::new();
        let mut level = vec![start];
        let mut last_level_start = 0;
        visited[start] = true;
        while !level.is_empty() {
            last_level_start = out.len();
            let mut next = Vec::new();
            for &v in &level {
                out.push(v);
                let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
                nb.sort_by_key(|&w| (degree[w], w));
                for w in nb {
                    visited[w] = true;
                    next.push(w);
                }
            }
            level = next;
        }
        (out, last_level_start)
    };

    while let Some(seed) = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| (degree[i], i)) {
        // start from a pseudo-peripheral node: lowest degree vertex of the farthest level
        let (sweep, last) = bfs(seed, &mut visited.clone());
        let start = sweep[last..]
            .iter()
            .copied()
            .min_by_key(|&v| (degree[v], v))
            .unwrap_or(seed);
        let (component, _) = bfs(start, &mut visited);
        order.extend(component);
    }
    order.reverse();
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_returns_rhs() {
        let x = solve_spd(&SparseSymOperator::identity(4), &[1.0, -2.0, 3.0, 0.5], None).unwrap();
        assert_eq!(x, vec![1.0, -2.0, 3.0, 0.5]);
    }

    #[test]
    fn masked_dofs_are_zero() {
        let a = SparseSymOperator::from_triplets(
            3,
            vec![
                (0, 0, 2.0),
                (0, 1, -1.0),
                (1, 0, -1.0),
                (1, 1, 2.0),
                (1, 2, -1.0),
                (2, 1, -1.0),
                (2, 2, 2.0),
            ],
        );
        let x = solve_spd(&a, &[5.0, 1.0, 5.0], Some(&[true, false, true])).unwrap();
        assert_eq!(x[0], 0.0);
        assert_eq!(x[2], 0.0);
        assert!((x[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn indefinite_is_reported() {
        let a = SparseSymOperator::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(
            solve_spd(&a, &[1.0, 1.0], None),
            Err(Error::Indefinite { .. })
        ));
        let singular = SparseSymOperator::from_triplets(2, vec![(0, 0, 1.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 1.0)]);
        assert!(solve_spd(&singular, &[1.0, -1.0], None).is_err());
    }

    /// Dense Gaussian elimination with partial pivoting, independent of the envelope code.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            x[i] = (b[i] - (i + 1..n).map(|j| a[i][j] * x[j]).sum::<f64>()) / a[i][i];
        }
        x
    }

    #[test]
    fn random_spd_matches_dense_elimination() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = 5;
            let g: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let mut a = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    a[i][j] = (0..n).map(|k| g[i][k] * g[j][k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 };
                }
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let t = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| (i, j, a[i][j]))
                .collect();
            let x = solve_spd(&SparseSymOperator::from_triplets(n, t), &b, None).unwrap();
            let x_ref = dense_solve(a, b);
            for (u, v) in x.iter().zip(&x_ref) {
                assert!((u - v).abs() < 1e-10 * (1.0 + v.abs()));
            }
        }
    }
}
