//! Newton iteration for one implicit BDF step.

use serde::{Deserialize, Serialize};

use crate::bdf::{apply_xi_into, BdfStencil, HistoryBuffer};
use crate::error::{Error, Result};
use crate::problem::{inf_norm, Problem, StateVector};
use crate::sparse::factorize;

/// Smallest damping factor tried when an update overflows.
const MIN_DAMPING: f64 = 1.0 / 16.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonConfig {
    /// Converged once `||R||_inf <= abs_tol`.
    pub abs_tol: f64,
    /// ... or once `||R||_inf <= rel_tol * ||R_0||_inf`.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Initial step length of each update, in (0, 1].
    pub damping: f64,
    /// Updates performed before convergence is tested.
    #[serde(default)]
    pub min_iter: usize,
}

impl NewtonConfig {
    /// Defaults for a system with `n` unknowns.
    pub fn for_dimension(n: usize) -> Self {
        Self {
            abs_tol: 1e-10 * (n.max(1) as f64).sqrt(),
            rel_tol: 1e-8,
            max_iter: 20,
            damping: 1.0,
            min_iter: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(Error::Config("Newton tolerances must be positive".into()));
        }
        if self.max_iter == 0 || self.min_iter > self.max_iter {
            return Err(Error::Config("need 1 <= max_iter and min_iter <= max_iter".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config("damping must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub state: StateVector,
    pub iterations: usize,
    pub converged: bool,
    pub residual_norm: f64,
}

/// Solves `R(t_new, Xi(U), U) = 0` for the newest state `U` of the stencil.
///
/// Each update solves `J delta = -R` with `J = xi_0 dR/dU' + dR/dU` reassembled at
/// the current iterate. Dirichlet values at `t_new` are imposed on the guess
/// first. Non-convergence is reported through the outcome flag; only linear
/// solver failures and malformed inputs are errors.
pub fn solve_implicit_step<P: Problem + ?Sized>(
    problem: &P,
    stencil: &BdfStencil,
    history: &HistoryBuffer,
    t_new: f64,
    guess: &StateVector,
    cfg: &NewtonConfig,
) -> Result<NewtonOutcome> {
    cfg.validate()?;
    if let Some((_, s)) = history.newest() {
        guess.check_layout(s)?;
    }
    if !guess.is_finite() {
        return Err(Error::InvalidInput("Newton guess contains non-finite values".into()));
    }
    let n = guess.len();
    let mut u = guess.values().to_vec();
    problem.apply_constraints(t_new, &mut u);
    let mut udot = vec![0.0; n];
    apply_xi_into(stencil, &u, history, &mut udot)?;
    let mut r = problem.residual(t_new, &udot, &u);
    let norm0 = inf_norm(&r);
    let mut norm = norm0;
    let shift = stencil.shift();
    let dirichlet = problem.dirichlet_dofs();

    let mut iterations = 0;
    let converged = loop {
        if !norm.is_finite() {
            break false;
        }
        if iterations >= cfg.min_iter && (norm <= cfg.abs_tol || norm <= cfg.rel_tol * norm0) {
            break true;
        }
        if iterations == cfg.max_iter {
            break false;
        }
        let jac = problem.jacobian(t_new, &udot, &u, shift);
        let lu = factorize(&jac)?;
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let mut delta = lu.solve(&neg_r)?;
        for &i in dirichlet {
            delta[i] = 0.0;
        }

        let mut lambda = cfg.damping;
        let accepted = loop {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            let mut trial_dot = vec![0.0; n];
            apply_xi_into(stencil, &trial, history, &mut trial_dot)?;
            let trial_r = problem.residual(t_new, &trial_dot, &trial);
            if trial.iter().all(|v| v.is_finite()) && trial_r.iter().all(|v| v.is_finite()) {
                break Some((trial, trial_dot, trial_r));
            }
            lambda *= 0.5;
            if lambda < MIN_DAMPING {
                break None;
            }
        };
        iterations += 1;
        match accepted {
            Some((trial, trial_dot, trial_r)) => {
                u = trial;
                udot = trial_dot;
                r = trial_r;
                norm = inf_norm(&r);
            }
            None => break false,
        }
    };

    Ok(NewtonOutcome {
        state: guess.with_values(u)?,
        iterations,
        converged,
        residual_norm: norm,
    })
}
