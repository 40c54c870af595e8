//! Manufactured solutions, error norms and rate studies.

mod consistency;
mod manufactured;
mod norms;
mod study;

pub use consistency::{source_consistency, ConsistencyResiduals};
pub use manufactured::{ManufacturedProblem, Solution};
pub use norms::{
    error_norms, field_errors_sq, snapshot_errors, two_scale_errors_sq, ErrorAccumulator, ErrorReport, SnapshotErrors,
};
pub use study::{
    convergence_study, effectivity_study, ritz_study, run_problem, run_problem_observed, setup, two_scale_ritz,
    ConvergenceRow, DtRule, EffectivityRow, EffectivityTable, RateTable, RitzRow, RitzTable, SnapshotProblem,
    Trajectory,
};

/// Least-squares slope of `ln y` against `ln x`. NaN if any value is not positive.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return f64::NAN;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Observed orders between consecutive levels, `ln(e_k/e_{k+1}) / ln(H_k/H_{k+1})`; the
/// first level has none.
pub fn successive_rates(h: &[f64], e: &[f64]) -> Vec<Option<f64>> {
    (0..e.len())
        .map(|k| (k > 0 && e[k] > 0.0 && e[k - 1] > 0.0).then(|| (e[k - 1] / e[k]).ln() / (h[k - 1] / h[k]).ln()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let x = [0.5, 0.25, 0.125, 0.0625];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.7)).collect();
        assert!((fit_slope(&x, &y) - 1.7).abs() < 1e-12);
        let r = successive_rates(&x, &y);
        assert!(r[0].is_none());
        assert!(r[1..].iter().all(|v| (v.unwrap() - 1.7).abs() < 1e-12));
    }

    #[test]
    fn slope_rejects_nonpositive_values() {
        assert!(fit_slope(&[1.0, 0.5], &[0.0, 1.0]).is_nan());
    }
}
