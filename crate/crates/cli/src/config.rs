use std::path::{Path, PathBuf};

use adaptive_bdf::{ControllerConfig, EstimatorKind};
use serde::{Deserialize, Serialize};

use crate::commands::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemId {
    /// Backward-facing step flow.
    Cfd300,
    /// Straight channel driven by an inlet pressure impulse.
    Channel,
    SaddleDae,
    StiffOde,
    Riccati,
    Polynomial,
}

impl ProblemId {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemId::Cfd300 => "cfd300",
            ProblemId::Channel => "channel",
            ProblemId::SaddleDae => "saddle-dae",
            ProblemId::StiffOde => "stiff-ode",
            ProblemId::Riccati => "riccati",
            ProblemId::Polynomial => "polynomial",
        }
    }

    pub fn is_flow(&self) -> bool {
        matches!(self, ProblemId::Cfd300 | ProblemId::Channel)
    }
}

impl std::str::FromStr for ProblemId {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        [
            ProblemId::Cfd300,
            ProblemId::Channel,
            ProblemId::SaddleDae,
            ProblemId::StiffOde,
            ProblemId::Riccati,
            ProblemId::Polynomial,
        ]
        .into_iter()
        .find(|p| p.name() == s)
        .ok_or_else(|| CliError::Config(format!("unknown problem '{s}'")))
    }
}

fn default_estimator() -> EstimatorKind {
    EstimatorKind::LinearImplicit
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_degree() -> u32 {
    2
}

/// Contents of a run configuration file (TOML).
///
/// The top-level `estimator` is authoritative and overwrites
/// `controller.estimator` when the file is loaded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemId,
    /// Mesh refinement level of the flow problems.
    #[serde(default)]
    pub refine: u32,
    /// Viscosity override for the flow problems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viscosity: Option<f64>,
    /// Degree of the polynomial test problem.
    #[serde(default = "default_degree")]
    pub degree: u32,
    #[serde(default)]
    pub t0: f64,
    pub t_end: f64,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Constant steps of size `controller.dt_min` instead of adaptive ones.
    #[serde(default)]
    pub reference: bool,
    /// Write the final state of a flow problem as node and element tables.
    #[serde(default)]
    pub export_final: bool,
    #[serde(default)]
    pub controller: ControllerConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.controller.estimator = cfg.estimator;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn set_estimator(&mut self, kind: EstimatorKind) {
        self.estimator = kind;
        self.controller.estimator = kind;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.t0.is_finite() && self.t_end.is_finite()) || self.t_end < self.t0 {
            return bad(format!("need finite t0 <= t_end, got [{}, {}]", self.t0, self.t_end));
        }
        if let Some(nu) = self.viscosity {
            if !(nu > 0.0 && nu.is_finite()) {
                return bad(format!("viscosity must be positive, got {nu}"));
            }
            if !self.problem.is_flow() {
                return bad(format!("problem '{}' has no viscosity", self.problem.name()));
            }
        }
        if self.problem == ProblemId::Polynomial && self.degree > 5 {
            return bad(format!("polynomial degree {} exceeds 5", self.degree));
        }
        if self.controller.estimator != self.estimator {
            return bad("controller.estimator disagrees with estimator".into());
        }
        self.controller.validate().map_err(|e| CliError::Config(e.to_string()))
    }

    /// The resolved configuration as written next to the outputs.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run configurations serialize")
    }
}
