use adaptive_bdf::fem::{channel_flow, step_flow, NavierStokesProblem, CHANNEL_VISCOSITY, STEP_VISCOSITY};
use adaptive_bdf::verification::{
    make_linear_saddle_dae, make_polynomial_ode, make_riccati_ode, make_stiff_nonlinear_ode, ManufacturedProblem,
};
use adaptive_bdf::Problem;

use crate::commands::CliError;
use crate::config::{ProblemId, RunConfig};

/// A configured problem; flow problems are kept concrete for export.
pub enum BuiltProblem {
    Flow(NavierStokesProblem),
    Manufactured(Box<dyn ManufacturedProblem>),
}

impl BuiltProblem {
    pub fn as_problem(&self) -> &dyn Problem {
        match self {
            BuiltProblem::Flow(p) => p,
            BuiltProblem::Manufactured(p) => p.as_ref(),
        }
    }
}

pub fn build(cfg: &RunConfig) -> Result<BuiltProblem, CliError> {
    Ok(match cfg.problem {
        ProblemId::Cfd300 => BuiltProblem::Flow(step_flow(cfg.refine, cfg.viscosity.unwrap_or(STEP_VISCOSITY))),
        ProblemId::Channel => {
            BuiltProblem::Flow(channel_flow(cfg.refine, cfg.viscosity.unwrap_or(CHANNEL_VISCOSITY)))
        }
        _ => BuiltProblem::Manufactured(manufactured(cfg.problem, cfg.degree)?),
    })
}

/// Problems with known exact solutions.
pub fn manufactured(id: ProblemId, degree: u32) -> Result<Box<dyn ManufacturedProblem>, CliError> {
    match id {
        ProblemId::SaddleDae => Ok(Box::new(make_linear_saddle_dae())),
        ProblemId::StiffOde => Ok(Box::new(make_stiff_nonlinear_ode())),
        ProblemId::Riccati => Ok(Box::new(make_riccati_ode())),
        ProblemId::Polynomial => Ok(Box::new(make_polynomial_ode(degree))),
        other => Err(CliError::Config(format!("problem '{}' has no exact solution", other.name()))),
    }
}
