//! Adaptive variable-step BDF time integration for nonlinear DAEs, with
//! step control driven by a BDF2/BDF3 local error estimate.
//!
//! The engine works on any [`Problem`] written in residual form
//! `R(t, U', U) = 0`. Two estimators are provided: a fully implicit one that
//! solves the BDF3 step with Newton, and a linear-implicit one that replaces
//! the BDF3 solve by a single Newton correction of the BDF2 solution.
//! Taylor–Hood Navier–Stokes problems live in [`fem`], and problems with known
//! solutions for verification in [`verification`].

pub mod bdf;
pub mod controller;
pub mod error;
pub mod estimators;
pub mod fem;
pub mod nonlinear;
pub mod problem;
pub mod sparse;
pub mod verification;

pub use bdf::{apply_xi, apply_xi_into, compute_coefficients, BdfStencil, HistoryBuffer};
pub use controller::{
    kappa_star, predict_step, run, run_constant, run_observed, smooth_step, ControllerConfig, RunError, RunLog,
    RunSummary, StepRecord,
};
pub use error::{Error, Result};
pub use estimators::{
    estimate_implicit, estimate_linear_implicit, linear_implicit_correction, EstimateNorm, EstimateReport,
    EstimatorKind,
};
pub use nonlinear::{solve_implicit_step, NewtonConfig, NewtonOutcome};
pub use problem::{check_jacobian, fd_jacobian, Component, ComponentPartition, Problem, StateVector};
pub use sparse::{factorize, CsrMatrix, SparseFactorization, SparsityPattern};
