//! The semidiscrete two-scale system in Kronecker-factored form.
//!
//! Macroscopic unknowns `α_i` (pressure at macro node `i`) and microscopic unknowns
//! `β_ik` (density at macro node `i`, micro node `k`). Given `β`, the pressure solves a
//! nonlinear elliptic problem; given `α`, every micro row is an independent linear
//! parabolic problem with mass matrix `My` and operator `Ky = D·Sy + κR·Gy`.

mod elliptic;
mod exact;
mod forcing;
mod operators;
mod params;
mod reaction;
mod state;
mod stepping;

pub use elliptic::{
    elliptic_solve, eval_f, initial_state, project_two_scale, reduced_rho, EllipticSolve, ELLIPTIC_MAX_ITERATIONS,
    ELLIPTIC_TOLERANCE,
};
pub use exact::{micro_exact_linear, MicroExponential, EXACT_MAX_DOFS};
pub use forcing::{Forcing, NoForcing};
pub use operators::{assemble_system, SystemOperators};
pub use params::ModelParams;
pub use reaction::{CustomReaction, ReactionKind, ReactionTerm, Reduction};
pub use state::CoupledState;
pub use stepping::{step, CouplingMode, Scheme, StepStats, Stepper, COUPLING_MAX_ITERATIONS, COUPLING_TOLERANCE};
