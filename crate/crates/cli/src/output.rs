use std::io::Write;
use std::path::Path;

use adaptive_bdf::verification::{ConvergencePoint, Scheme};
use adaptive_bdf::{RunLog, StepRecord};
use serde::Serialize;

use crate::commands::CliError;

pub const STEPS_HEADER: [&str; 9] =
    ["n", "t", "dt", "est_total", "est_velocity", "est_pressure", "retries", "newton_iters", "estimator_seconds"];
pub const BOTH_COLUMNS: [&str; 2] = ["est_total_impl", "est_total_li"];
pub const ESTIMATORS_HEADER: [&str; 7] = ["n", "t", "est_impl", "est_li", "ratio", "impl_seconds", "li_seconds"];
pub const ORDERS_HEADER: [&str; 4] = ["scheme", "h", "error", "observed_order"];

fn io(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// One row per accepted time level.
pub fn write_steps(path: &Path, log: &RunLog, both: bool) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(io(path))?;
    let mut header: Vec<&str> = STEPS_HEADER.to_vec();
    if both {
        header.extend(BOTH_COLUMNS);
    }
    w.write_record(&header).map_err(io(path))?;
    for r in log.accepted() {
        let mut row = vec![
            r.level.to_string(),
            r.t.to_string(),
            format!("{:e}", r.dt),
            cell(r.est_total),
            cell(r.est_component("velocity")),
            cell(r.est_component("pressure")),
            r.retries.to_string(),
            r.newton_iterations.to_string(),
            format!("{:e}", r.estimator_seconds),
        ];
        if both {
            row.push(cell(r.est_implicit));
            row.push(cell(r.est_linear_implicit));
        }
        w.write_record(&row).map_err(io(path))?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Accepted levels at which both estimators were evaluated.
pub fn compared(log: &RunLog) -> impl Iterator<Item = &StepRecord> {
    log.accepted().filter(|r| r.est_implicit.is_some() && r.est_linear_implicit.is_some())
}

pub fn write_estimators(path: &Path, log: &RunLog) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(io(path))?;
    w.write_record(ESTIMATORS_HEADER).map_err(io(path))?;
    for r in compared(log) {
        let (imp, li) = (r.est_implicit.unwrap(), r.est_linear_implicit.unwrap());
        let ratio = if imp > 0.0 { Some(li / imp) } else { None };
        w.write_record([
            r.level.to_string(),
            r.t.to_string(),
            format!("{imp:e}"),
            format!("{li:e}"),
            cell(ratio),
            cell(r.implicit_seconds),
            cell(r.linear_implicit_seconds),
        ])
        .map_err(io(path))?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_orders(path: &Path, studies: &[(Scheme, Vec<ConvergencePoint>)]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(io(path))?;
    w.write_record(ORDERS_HEADER).map_err(io(path))?;
    for (scheme, points) in studies {
        for p in points {
            w.write_record([scheme.name().to_string(), p.h.to_string(), format!("{:e}", p.error), cell(p.observed_order)])
                .map_err(io(path))?;
        }
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
