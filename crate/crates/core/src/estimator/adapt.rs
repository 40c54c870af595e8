use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use super::{estimate, EstimatorReport};
use crate::error::{invalid, Error, Result};
use crate::mesh::SimplicialMesh;
use crate::twoscale::{CoupledState, Forcing, ReactionTerm, SystemOperators};

/// What the adaptive loop needs from a problem: a discrete solve on a given macro mesh.
pub trait AdaptProblem {
    fn reaction(&self) -> &ReactionTerm;

    fn forcing(&self) -> &dyn Forcing;

    fn solve(&self, mesh: Arc<SimplicialMesh>) -> Result<(SystemOperators, CoupledState)>;

    /// Optional true error `‖∇(π - π^H)‖`, reported alongside the estimator.
    fn h1_error(&self, _ops: &SystemOperators, _state: &CoupledState) -> Option<f64> {
        None
    }
}

pub struct AdaptRound {
    pub round: usize,
    pub mesh: Arc<SimplicialMesh>,
    pub ops: SystemOperators,
    pub state: CoupledState,
    pub report: EstimatorReport,
    pub h1_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptStatus {
    /// `η_R < η̄` at the last round.
    Converged,
    /// Rounds exhausted, or nothing left to mark, before reaching the tolerance.
    Incomplete,
}

pub struct AdaptHistory {
    pub rounds: Vec<AdaptRound>,
    pub status: AdaptStatus,
    pub eta_bar: f64,
}

#[derive(Serialize)]
struct RoundRow {
    round: usize,
    n_cells: usize,
    #[serde(rename = "eta_R")]
    eta_r: f64,
    l2_pi: f64,
    n_marked: usize,
    h1_error: Option<f64>,
}

impl AdaptHistory {
    pub fn eta_trace(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.report.eta_global).collect()
    }

    pub fn last(&self) -> &AdaptRound {
        self.rounds.last().expect("at least one round")
    }

    /// Fails with [`Error::AdaptIncomplete`] unless the loop reached the tolerance.
    pub fn ensure_converged(&self) -> Result<()> {
        match self.status {
            AdaptStatus::Converged => Ok(()),
            AdaptStatus::Incomplete => Err(Error::AdaptIncomplete {
                rounds: self.rounds.len(),
                trace: self.eta_trace(),
            }),
        }
    }

    /// Per-round CSV: `round, n_cells, eta_R, l2_pi, n_marked, h1_error`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rounds {
            out.serialize(RoundRow {
                round: r.round,
                n_cells: r.mesh.n_cells(),
                eta_r: r.report.eta_global,
                l2_pi: r.report.l2_pi,
                n_marked: r.report.marked.len(),
                h1_error: r.h1_error,
            })?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Solve, estimate, mark, refine; repeated until `η_R < η̄` or `max_rounds` solves.
pub fn adapt_loop(
    problem: &dyn AdaptProblem,
    initial: SimplicialMesh,
    eta_bar: f64,
    max_rounds: usize,
) -> Result<AdaptHistory> {
    if max_rounds == 0 {
        return invalid("max_rounds must be at least 1");
    }
    let mut mesh = Arc::new(initial);
    let mut rounds = Vec::new();
    for round in 1..=max_rounds {
        let (ops, state) = problem.solve(mesh.clone())?;
        let report = estimate(&state, &ops, problem.reaction(), problem.forcing(), eta_bar)?;
        let h1_error = problem.h1_error(&ops, &state);
        let done = report.eta_global < eta_bar;
        let stalled = report.marked.is_empty();
        let next = (!done && !stalled && round < max_rounds).then(|| mesh.refine(&report.marked));
        rounds.push(AdaptRound {
            round,
            mesh: mesh.clone(),
            ops,
            state,
            report,
            h1_error,
        });
        if done {
            return Ok(AdaptHistory {
                rounds,
                status: AdaptStatus::Converged,
                eta_bar,
            });
        }
        match next {
            Some(m) => mesh = Arc::new(m),
            None => break,
        }
    }
    Ok(AdaptHistory {
        rounds,
        status: AdaptStatus::Incomplete,
        eta_bar,
    })
}
