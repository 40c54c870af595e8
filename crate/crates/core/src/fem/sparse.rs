use std::io::Write;

use crate::error::Result;

/// Symmetric sparse operator in compressed-row form (both triangles stored).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymOperator {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymOperator {
    /// Builds the operator from `(row, col, value)` triplets; duplicates are summed in
    /// input order, so the result does not depend on how the triplets were produced.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r},{c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            cols,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn total_sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `alpha * self + beta * other`.
    pub fn linear_combination(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        assert_eq!(self.n, other.n);
        let t = self
            .triplets()
            .map(|(i, j, v)| (i, j, alpha * v))
            .chain(other.triplets().map(|(i, j, v)| (i, j, beta * v)))
            .collect();
        Self::from_triplets(self.n, t)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// Zeroes the rows and columns of masked dofs and puts 1 on their diagonal.
    pub fn with_dirichlet(&self, mask: &[bool]) -> Self {
        let mut t: Vec<_> = self.triplets().filter(|&(i, j, _)| !mask[i] && !mask[j]).collect();
        t.extend(mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| (i, i, 1.0)));
        Self::from_triplets(self.n, t)
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
            / scale
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, j, v) in self.triplets() {
            d[i][j] = v;
        }
        d
    }

    /// Coordinate-format text: header `n nnz`, then `row col value` lines.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.n, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(w, "{i} {j} {v:e}")?;
        }
        Ok(())
    }
}
