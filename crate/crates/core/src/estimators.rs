//! Local temporal error estimates from the gap between a BDF2 step and a BDF3
//! step taken from the same history.
//!
//! The implicit estimator solves the BDF3 step with Newton; the linear-implicit
//! estimator replaces that solve by a single Newton correction of the BDF2
//! solution under the BDF3 stencil.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::bdf::{apply_xi_into, HistoryBuffer};
use crate::error::{Error, Result};
use crate::nonlinear::{solve_implicit_step, NewtonConfig};
use crate::problem::{Problem, StateVector};
use crate::sparse::factorize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Implicit,
    #[serde(rename = "li", alias = "linear-implicit")]
    LinearImplicit,
    /// Evaluate both; the linear-implicit value drives the step control.
    Both,
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "implicit" => Ok(Self::Implicit),
            "li" | "linear-implicit" => Ok(Self::LinearImplicit),
            "both" => Ok(Self::Both),
            other => Err(Error::Config(format!("unknown estimator '{other}'"))),
        }
    }
}

/// How per-component differences are measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateNorm {
    /// Plain L2 norm of the difference.
    #[default]
    Absolute,
    /// Difference norm divided by the norm of the BDF2 solution component.
    Relative,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport {
    /// Maximum over `per_component`.
    pub total: f64,
    pub per_component: Vec<(String, f64)>,
    pub kind: EstimatorKind,
    pub cost: Duration,
    /// Newton updates spent on the BDF3 solve (1 for the linear-implicit estimator).
    pub newton_iterations: usize,
}

impl EstimateReport {
    pub fn component(&self, name: &str) -> Option<f64> {
        self.per_component.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    fn from_components(per_component: Vec<(String, f64)>, kind: EstimatorKind, cost: Duration, iters: usize) -> Self {
        let total = per_component.iter().map(|(_, v)| *v).fold(0.0, f64::max);
        Self { total, per_component, kind, cost, newton_iterations: iters }
    }
}

/// Per-component discrete L2 norm of `a - b`.
pub fn component_l2_diff<P: Problem + ?Sized>(
    problem: &P,
    a: &StateVector,
    b: &StateVector,
) -> Result<Vec<(String, f64)>> {
    let diff = a.difference(b)?;
    if diff.len() != problem.dimension() {
        return Err(Error::Layout("states do not match the problem dimension".into()));
    }
    Ok(problem
        .partition()
        .components()
        .iter()
        .enumerate()
        .map(|(c, comp)| (comp.name.clone(), problem.l2_norm(c, &diff.values()[comp.range.clone()])))
        .collect())
}

fn measure<P: Problem + ?Sized>(
    problem: &P,
    u_bdf2: &StateVector,
    u_bdf3: &StateVector,
    norm: EstimateNorm,
) -> Result<Vec<(String, f64)>> {
    let mut per = component_l2_diff(problem, u_bdf2, u_bdf3)?;
    if norm == EstimateNorm::Relative {
        for (c, (_, v)) in per.iter_mut().enumerate() {
            let scale = problem.l2_norm(c, u_bdf2.component(c));
            *v /= scale.max(f64::MIN_POSITIVE);
        }
    }
    Ok(per)
}

fn check_depth(history: &HistoryBuffer) -> Result<()> {
    if history.len() < 3 {
        return Err(Error::HistoryUnderflow { required: 3, available: history.len() });
    }
    Ok(())
}

/// Fully implicit estimate: BDF3 solved by Newton from the BDF2 solution.
///
/// At least one Newton update is always taken so that the BDF3 solution is
/// never reported equal to its starting guess by a loose tolerance.
pub fn estimate_implicit<P: Problem + ?Sized>(
    problem: &P,
    history: &HistoryBuffer,
    t_new: f64,
    u_bdf2: &StateVector,
    newton: &NewtonConfig,
    norm: EstimateNorm,
) -> Result<EstimateReport> {
    let start = Instant::now();
    check_depth(history)?;
    let stencil = history.stencil(3, t_new)?;
    let cfg = NewtonConfig { min_iter: newton.min_iter.max(1), ..*newton };
    let out = solve_implicit_step(problem, &stencil, history, t_new, u_bdf2, &cfg)?;
    if !out.converged {
        return Err(Error::EstimatorFailed(format!(
            "BDF3 Newton did not converge in {} iterations (|R| = {:e})",
            out.iterations, out.residual_norm
        )));
    }
    let per = measure(problem, u_bdf2, &out.state, norm)?;
    Ok(EstimateReport::from_components(per, EstimatorKind::Implicit, start.elapsed(), out.iterations))
}

/// One Newton correction of the BDF2 solution under the BDF3 stencil:
/// returns `U_bdf2 + delta` with `J delta = -R(Xi3(U_bdf2), U_bdf2)` and
/// `J` assembled there with shift `xi_0` of BDF3. Constrained entries of
/// `delta` are zero.
pub fn linear_implicit_correction<P: Problem + ?Sized>(
    problem: &P,
    history: &HistoryBuffer,
    t_new: f64,
    u_bdf2: &StateVector,
) -> Result<StateVector> {
    check_depth(history)?;
    if let Some((_, s)) = history.newest() {
        u_bdf2.check_layout(s)?;
    }
    let stencil = history.stencil(3, t_new)?;
    let u = u_bdf2.values();
    let mut udot = vec![0.0; u.len()];
    apply_xi_into(&stencil, u, history, &mut udot)?;
    let r = problem.residual(t_new, &udot, u);
    let jac = problem.jacobian(t_new, &udot, u, stencil.shift());
    let lu = factorize(&jac)?;
    let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
    let mut delta = lu.solve(&neg_r)?;
    for &i in problem.dirichlet_dofs() {
        delta[i] = 0.0;
    }
    let corrected = u.iter().zip(&delta).map(|(a, d)| a + d).collect();
    u_bdf2.with_values(corrected)
}

/// Linear-implicit estimate: distance between the BDF2 solution and its
/// single-correction BDF3 surrogate.
pub fn estimate_linear_implicit<P: Problem + ?Sized>(
    problem: &P,
    history: &HistoryBuffer,
    t_new: f64,
    u_bdf2: &StateVector,
    norm: EstimateNorm,
) -> Result<EstimateReport> {
    let start = Instant::now();
    let corrected = linear_implicit_correction(problem, history, t_new, u_bdf2)?;
    let per = measure(problem, u_bdf2, &corrected, norm)?;
    Ok(EstimateReport::from_components(per, EstimatorKind::LinearImplicit, start.elapsed(), 1))
}

/// True when an estimator error should be treated as an infinite estimate
/// (forcing a rejection) rather than aborting the run.
pub fn is_recoverable(err: &Error) -> bool {
    matches!(
        err,
        Error::EstimatorFailed(_) | Error::SingularMatrix { .. } | Error::LinearSolver(_)
    )
}
