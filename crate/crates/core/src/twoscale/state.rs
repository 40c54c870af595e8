use std::io::{BufRead, Read, Write};

use super::SystemOperators;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"TSCKPT01";

/// Coefficients of the discrete pressure `Σ α_i ξ_i` and density `Σ β_ik ξ_i η_k` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub t: f64,
    pub alpha: Vec<f64>,
    /// Row-major `n_macro × n_micro`.
    pub beta: Vec<f64>,
    n_micro: usize,
}

fn format_err(what: &'static str, detail: impl Into<String>) -> Error {
    Error::Format {
        what,
        detail: detail.into(),
    }
}

impl CoupledState {
    pub fn new(t: f64, alpha: Vec<f64>, beta: Vec<f64>, n_micro: usize) -> Self {
        assert_eq!(
            beta.len(),
            alpha.len() * n_micro,
            "beta must have n_macro × n_micro entries"
        );
        Self {
            t,
            alpha,
            beta,
            n_micro,
        }
    }

    pub fn zeros(n_macro: usize, n_micro: usize) -> Self {
        Self::new(0.0, vec![0.0; n_macro], vec![0.0; n_macro * n_micro], n_micro)
    }

    pub fn n_macro(&self) -> usize {
        self.alpha.len()
    }

    pub fn n_micro(&self) -> usize {
        self.n_micro
    }

    pub fn beta_row(&self, i: usize) -> &[f64] {
        &self.beta[i * self.n_micro..(i + 1) * self.n_micro]
    }

    pub fn beta_row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.beta[i * self.n_micro..(i + 1) * self.n_micro]
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.alpha.iter().chain(&self.beta).all(|v| v.is_finite())
    }

    /// Point values `(π^H(x), ρ^{H,h}(x, y))`.
    pub fn reconstruct(&self, ops: &SystemOperators, x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
        let outside = |p: &[f64]| Error::PointOutside { point: p.to_vec() };
        let (cx, lx) = ops.macro_space.mesh().locate(x).ok_or_else(|| outside(x))?;
        let (cy, ly) = ops.micro_space.mesh().locate(y).ok_or_else(|| outside(y))?;
        let pi = ops.macro_space.eval_on_cell(&self.alpha, cx, &lx);
        let mut rho = 0.0;
        for (i, a) in ops.macro_space.cell_dofs(cx).zip(lx) {
            rho += a * ops.micro_space.eval_on_cell(self.beta_row(i), cy, &ly);
        }
        Ok((pi, rho))
    }

    /// Text checkpoint: a header `t n_macro n_micro`, a line with α, then one line per
    /// row of β. Values use the shortest representation that parses back exactly.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{:e} {} {}", self.t, self.n_macro(), self.n_micro)?;
        let line = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
        writeln!(w, "{}", line(&self.alpha))?;
        for i in 0..self.n_macro() {
            writeln!(w, "{}", line(self.beta_row(i)))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| format_err("checkpoint", "unexpected end of file"))?
                .map_err(Error::from)
        };
        let header = next()?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 3 {
            return Err(format_err("checkpoint", format!("bad header {header:?}")));
        }
        let parse_f = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| format_err("checkpoint", format!("{s:?}: {e}")))
        };
        let parse_u = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| format_err("checkpoint", format!("{s:?}: {e}")))
        };
        let (t, nm, nu) = (parse_f(h[0])?, parse_u(h[1])?, parse_u(h[2])?);
        let row = |line: String, n: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = line.split_whitespace().map(parse_f).collect::<Result<_>>()?;
            if v.len() != n {
                return Err(format_err(
                    "checkpoint",
                    format!("expected {n} values, found {}", v.len()),
                ));
            }
            Ok(v)
        };
        let alpha = row(next()?, nm)?;
        let mut beta = Vec::with_capacity(nm * nu);
        for _ in 0..nm {
            beta.extend(row(next()?, nu)?);
        }
        Ok(Self::new(t, alpha, beta, nu))
    }

    /// Binary checkpoint: magic, `t`, `n_macro`, `n_micro`, then α and β as little-endian f64.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&self.t.to_le_bytes())?;
        w.write_all(&(self.n_macro() as u64).to_le_bytes())?;
        w.write_all(&(self.n_micro as u64).to_le_bytes())?;
        for v in self.alpha.iter().chain(&self.beta) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(format_err("checkpoint", "bad magic"));
        }
        let mut buf = [0u8; 8];
        let mut word = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut buf)?;
            Ok(buf)
        };
        let t = f64::from_le_bytes(word(&mut r)?);
        let nm = u64::from_le_bytes(word(&mut r)?) as usize;
        let nu = u64::from_le_bytes(word(&mut r)?) as usize;
        let mut values = Vec::with_capacity(nm * (nu + 1));
        for _ in 0..nm * (nu + 1) {
            values.push(f64::from_le_bytes(word(&mut r)?));
        }
        let beta = values.split_off(nm);
        Ok(Self::new(t, values, beta, nu))
    }
}
