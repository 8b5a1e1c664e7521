use std::path::Path;
use std::time::Instant;

use adaptive_bdf::fem::export::{write_elements, write_nodes};
use adaptive_bdf::verification::{convergence_study, observed_order, ConvergencePoint, Scheme};
use adaptive_bdf::{run_constant, run_observed, EstimatorKind, Problem, RunError, RunLog, RunSummary, StateVector};
use serde::Serialize;

use crate::config::{ProblemId, RunConfig};
use crate::output;
use crate::problems::{self, BuiltProblem};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("solver error: {0}")]
    Solver(#[from] adaptive_bdf::Error),
    #[error("run aborted at t = {time}: {reason}")]
    Aborted { time: f64, reason: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Solver(_) | CliError::Aborted { .. } => 1,
        }
    }
}

/// Result of one adaptive or reference run, complete or aborted.
#[derive(Debug)]
pub struct Execution {
    pub log: RunLog,
    pub aborted: Option<(f64, String)>,
    pub dofs: usize,
    pub wall_seconds: f64,
}

/// Runs the configured problem, reporting accepted states to `observer`.
pub fn execute(
    cfg: &RunConfig,
    problem: &dyn Problem,
    observer: &mut dyn FnMut(f64, &StateVector),
) -> Result<Execution, CliError> {
    let start = Instant::now();
    let result = if cfg.reference {
        run_constant(problem, &cfg.controller, cfg.t0, cfg.t_end, cfg.controller.dt_min, None, observer)
    } else {
        run_observed(problem, &cfg.controller, cfg.t0, cfg.t_end, observer)
    };
    let (log, aborted) = match result {
        Ok(log) => (log, None),
        Err(RunError::Aborted { time, reason, log }) => (*log, Some((time, reason.to_string()))),
        Err(RunError::Setup(e)) => return Err(e.into()),
    };
    Ok(Execution { log, aborted, dofs: problem.dimension(), wall_seconds: start.elapsed().as_secs_f64() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CostStats {
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
    pub count: usize,
}

impl CostStats {
    pub fn of(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self { mean: 0.0, std: 0.0, count: 0 };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Self { mean, std: var.sqrt(), count: n }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub implicit_seconds: CostStats,
    pub li_seconds: CostStats,
    /// Extremes of `est_li / est_impl` over levels with a nonzero implicit estimate.
    pub ratio_min: Option<f64>,
    pub ratio_max: Option<f64>,
}

impl Comparison {
    pub fn of(log: &RunLog) -> Self {
        let rows: Vec<_> = output::compared(log).collect();
        let imp: Vec<f64> = rows.iter().filter_map(|r| r.implicit_seconds).collect();
        let li: Vec<f64> = rows.iter().filter_map(|r| r.linear_implicit_seconds).collect();
        let ratios: Vec<f64> = rows
            .iter()
            .filter(|r| r.est_implicit.unwrap() > 0.0)
            .map(|r| r.est_linear_implicit.unwrap() / r.est_implicit.unwrap())
            .collect();
        Self {
            implicit_seconds: CostStats::of(&imp),
            li_seconds: CostStats::of(&li),
            ratio_min: ratios.iter().copied().reduce(f64::min),
            ratio_max: ratios.iter().copied().reduce(f64::max),
        }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    problem: &'a str,
    mode: &'a str,
    estimator: EstimatorKind,
    dofs: usize,
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    abort_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    abort_reason: Option<&'a str>,
    #[serde(flatten)]
    totals: &'a RunSummary,
    wall_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<&'a Comparison>,
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn export_final(dir: &Path, problem: &BuiltProblem, state: &StateVector) -> Result<(), CliError> {
    let BuiltProblem::Flow(flow) = problem else { return Ok(()) };
    fn io(p: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
        move |e| CliError::Io(format!("{}: {e}", p.display()))
    }
    let nodes = dir.join("final_nodes.txt");
    let f = std::fs::File::create(&nodes).map_err(io(&nodes))?;
    write_nodes(std::io::BufWriter::new(f), flow.space(), state.values()).map_err(io(&nodes))?;
    let elems = dir.join("elements.txt");
    let f = std::fs::File::create(&elems).map_err(io(&elems))?;
    write_elements(std::io::BufWriter::new(f), flow.space()).map_err(io(&elems))
}

fn run_and_write(cfg: &RunConfig, compare: bool) -> Result<(Execution, Option<Comparison>), CliError> {
    cfg.validate()?;
    let dir = cfg.output.as_path();
    create_dir(dir)?;
    output::write_text(&dir.join("config.toml"), &cfg.to_toml())?;
    let problem = problems::build(cfg)?;
    let mut last: Option<StateVector> = None;
    let keep = cfg.export_final && cfg.problem.is_flow();
    let exec = execute(cfg, problem.as_problem(), &mut |_, s| {
        if keep {
            last = Some(s.clone());
        }
    })?;
    let both = cfg.estimator == EstimatorKind::Both && !cfg.reference;
    output::write_steps(&dir.join("steps.csv"), &exec.log, both)?;
    let comparison = compare.then(|| Comparison::of(&exec.log));
    if compare {
        output::write_estimators(&dir.join("estimators.csv"), &exec.log)?;
    }
    let summary = Summary {
        problem: cfg.problem.name(),
        mode: if cfg.reference { "reference" } else { "adaptive" },
        estimator: cfg.estimator,
        dofs: exec.dofs,
        status: if exec.aborted.is_some() { "aborted" } else { "completed" },
        abort_time: exec.aborted.as_ref().map(|a| a.0),
        abort_reason: exec.aborted.as_ref().map(|a| a.1.as_str()),
        totals: &exec.log.summary,
        wall_seconds: exec.wall_seconds,
        comparison: comparison.as_ref(),
    };
    output::write_json(&dir.join("summary.json"), &summary)?;
    if let Some((time, reason)) = &exec.aborted {
        return Err(CliError::Aborted { time: *time, reason: reason.clone() });
    }
    if let Some(state) = &last {
        export_final(dir, &problem, state)?;
    }
    Ok((exec, comparison))
}

/// Runs the configuration and writes `config.toml`, `steps.csv` and
/// `summary.json` into its output directory. On abort the partial tables are
/// still written before the error is returned.
pub fn cmd_run(cfg: &RunConfig) -> Result<Execution, CliError> {
    run_and_write(cfg, false).map(|(e, _)| e)
}

/// Adaptive run with both estimators evaluated at every level (the
/// linear-implicit one drives the steps); additionally writes
/// `estimators.csv` and cost statistics.
pub fn cmd_compare_estimators(cfg: &RunConfig) -> Result<(Execution, Comparison), CliError> {
    if cfg.reference {
        return Err(CliError::Config("estimator comparison needs an adaptive run".into()));
    }
    let mut cfg = cfg.clone();
    cfg.set_estimator(EstimatorKind::Both);
    run_and_write(&cfg, true).map(|(e, c)| (e, c.expect("comparison requested")))
}

/// Step sizes of the convergence sweeps on `[0, 1]`.
pub const CONVERGENCE_STEPS: [f64; 4] = [1e-2, 5e-3, 2.5e-3, 1.25e-3];

/// Constant-step sweeps of BDF2, BDF3 and the linear-implicit corrected
/// scheme; writes `orders.csv`. Returns each study with its least-squares order.
pub fn cmd_convergence(
    problem: ProblemId,
    degree: u32,
    out: &Path,
) -> Result<Vec<(Scheme, Vec<ConvergencePoint>, f64)>, CliError> {
    let p = problems::manufactured(problem, degree)?;
    create_dir(out)?;
    let mut studies = Vec::new();
    for scheme in [Scheme::Bdf2, Scheme::Bdf3, Scheme::LinearImplicit] {
        studies.push((scheme, convergence_study(p.as_ref(), scheme, 0.0, 1.0, &CONVERGENCE_STEPS)?));
    }
    output::write_orders(&out.join("orders.csv"), &studies)?;
    Ok(studies
        .into_iter()
        .map(|(s, pts)| {
            let (hs, errs): (Vec<f64>, Vec<f64>) = pts.iter().map(|p| (p.h, p.error)).unzip();
            let slope = observed_order(&hs, &errs);
            (s, pts, slope)
        })
        .collect())
}
