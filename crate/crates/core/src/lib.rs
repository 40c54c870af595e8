//! Two-scale P1 finite elements for a macroscopic elliptic pressure equation coupled,
//! at every macroscopic degree of freedom, to a microscopic parabolic cell problem
//! through a Robin transmission condition.
//!
//! The crate is organised bottom-up:
//!
//! * [`mesh`]: simplicial meshes in 1D/2D, patches, red-green refinement.
//! * [`fem`]: P1 spaces, quadrature, sparse assembly, SPD solves, projections.
//! * [`twoscale`]: the Kronecker-factored semidiscrete system and its time stepping.
//! * [`estimator`]: residual a posteriori estimator and the adaptive loop.
//! * [`harness`]: manufactured solutions, error norms, rate and effectivity studies.
//! * [`scenario`]: JSON-configured runs producing CSV/JSON artifacts.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod estimator;
pub mod fem;
pub mod harness;
pub mod mesh;
pub mod oracle;
pub mod par;
pub mod scenario;
pub mod twoscale;

pub use error::{Error, ErrorCategory, Result};
