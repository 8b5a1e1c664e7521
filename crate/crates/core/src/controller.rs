//! Adaptive time stepping: startup, step proposal, smoothing, accept/reject
//! with bounded retries, and the per-attempt run log.

use serde::{Deserialize, Serialize};

use crate::bdf::HistoryBuffer;
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_implicit, estimate_linear_implicit, is_recoverable, EstimateNorm, EstimateReport, EstimatorKind,
};
use crate::nonlinear::{solve_implicit_step, NewtonConfig};
use crate::problem::{Problem, StateVector};

/// Estimates below this fraction of the tolerance count as zero.
const ZERO_ESTIMATE: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    /// Target local error `epsilon`.
    pub tolerance: f64,
    /// Accuracy order `q` in the step-ratio exponent `1/(q+1)`.
    pub order: u32,
    pub kappa_min: f64,
    pub kappa_max: f64,
    /// Safety factor applied to the raw ratio.
    pub kappa_safety: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Smoothing weight of the previous step.
    pub alpha0: f64,
    /// Smoothing weight of the predicted step.
    pub alpha1: f64,
    pub max_retries: usize,
    pub estimator: EstimatorKind,
    pub norm: EstimateNorm,
    /// Newton settings; `None` selects the size-dependent defaults.
    pub newton: Option<NewtonConfig>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            order: 2,
            kappa_min: 0.1,
            kappa_max: 1.5,
            kappa_safety: 0.9,
            dt_min: 1e-4,
            dt_max: 1e-1,
            alpha0: 0.3,
            alpha1: 0.7,
            max_retries: 5,
            estimator: EstimatorKind::LinearImplicit,
            norm: EstimateNorm::Absolute,
            newton: None,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return fail("tolerance must be positive");
        }
        if self.order == 0 {
            return fail("order must be at least 1");
        }
        if !(0.0 < self.kappa_min && self.kappa_min < 1.0 && 1.0 < self.kappa_max && self.kappa_max.is_finite()) {
            return fail("need 0 < kappa_min < 1 < kappa_max");
        }
        if !(0.0 < self.kappa_safety && self.kappa_safety < 1.0) {
            return fail("need 0 < kappa_safety < 1");
        }
        if !(0.0 < self.dt_min && self.dt_min <= self.dt_max && self.dt_max.is_finite()) {
            return fail("need 0 < dt_min <= dt_max");
        }
        if !(self.alpha0 >= 0.0 && self.alpha1 >= 0.0 && (self.alpha0 + self.alpha1 - 1.0).abs() < 1e-12) {
            return fail("smoothing weights must be non-negative and sum to 1");
        }
        if self.max_retries == 0 {
            return fail("max_retries must be at least 1");
        }
        if let Some(n) = &self.newton {
            n.validate()?;
        }
        Ok(())
    }

    /// Largest accepted-to-accepted growth factor away from the step bounds.
    pub fn max_growth(&self) -> f64 {
        self.alpha0 + self.alpha1 * self.kappa_max
    }
}

/// Raw step ratio `(tolerance / est)^(1/(q+1))`; tiny estimates give `kappa_max`.
pub fn kappa_star(est: f64, cfg: &ControllerConfig) -> Result<f64> {
    if est.is_nan() || est < 0.0 {
        return Err(Error::InvalidInput(format!("error estimate {est} is negative or NaN")));
    }
    if est <= ZERO_ESTIMATE * cfg.tolerance {
        return Ok(cfg.kappa_max);
    }
    Ok((cfg.tolerance / est).powf(1.0 / (cfg.order as f64 + 1.0)))
}

/// Clamps the safety-scaled ratio to `[kappa_min, kappa_max]`, scales the
/// current step, then clamps to `[dt_min, dt_max]`.
pub fn predict_step(dt: f64, kappa: f64, cfg: &ControllerConfig) -> f64 {
    let ratio = (cfg.kappa_safety * kappa).clamp(cfg.kappa_min, cfg.kappa_max);
    (ratio * dt).clamp(cfg.dt_min, cfg.dt_max)
}

/// Weighted average of the current and predicted steps, clamped to the bounds.
pub fn smooth_step(dt: f64, predicted: f64, cfg: &ControllerConfig) -> f64 {
    (cfg.alpha0 * dt + cfg.alpha1 * predicted).clamp(cfg.dt_min, cfg.dt_max)
}

/// One attempted step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Time level the attempt targets (1 for the first step).
    pub level: usize,
    pub t: f64,
    pub dt: f64,
    /// BDF order of the advancing solve.
    pub order: usize,
    pub accepted: bool,
    /// Rejections at this level before this attempt.
    pub retries: usize,
    pub newton_iterations: usize,
    pub newton_converged: bool,
    /// Estimate driving the controller; infinite if the estimator failed.
    pub est_total: Option<f64>,
    pub est_components: Vec<(String, f64)>,
    pub est_implicit: Option<f64>,
    pub est_linear_implicit: Option<f64>,
    pub implicit_seconds: Option<f64>,
    pub linear_implicit_seconds: Option<f64>,
    /// Wall time spent in estimator evaluation for this attempt.
    pub estimator_seconds: f64,
    /// False when the step was accepted with the estimate still above tolerance.
    pub tolerance_met: bool,
    /// Step was shortened to land on the end time.
    pub final_step: bool,
}

impl StepRecord {
    pub fn est_component(&self, name: &str) -> Option<f64> {
        self.est_components.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub accepted_steps: usize,
    pub rejected_attempts: usize,
    /// Levels accepted after exhausting retries with the estimate above tolerance.
    pub flagged_levels: usize,
    pub newton_failures: usize,
    pub estimator_seconds: f64,
    pub final_time: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub components: Vec<String>,
    pub records: Vec<StepRecord>,
    pub summary: RunSummary,
}

impl RunLog {
    pub fn accepted(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter(|r| r.accepted)
    }

    fn push(&mut self, rec: StepRecord) {
        let s = &mut self.summary;
        s.estimator_seconds += rec.estimator_seconds;
        if !rec.newton_converged {
            s.newton_failures += 1;
        }
        if rec.accepted {
            s.accepted_steps += 1;
            s.final_time = rec.t;
            if !rec.tolerance_met {
                s.flagged_levels += 1;
            }
        } else {
            s.rejected_attempts += 1;
        }
        self.records.push(rec);
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Setup(#[from] Error),
    #[error("run aborted at t = {time}: {reason}")]
    Aborted { time: f64, reason: Error, log: Box<RunLog> },
}

impl RunError {
    /// The partial log of an aborted run.
    pub fn log(&self) -> Option<&RunLog> {
        match self {
            RunError::Aborted { log, .. } => Some(log),
            RunError::Setup(_) => None,
        }
    }
}

/// Observer of accepted states, called with `(t, U)` for the initial state and
/// after every acceptance.
pub type Observer<'a> = &'a mut dyn FnMut(f64, &StateVector);

struct Estimate {
    total: f64,
    components: Vec<(String, f64)>,
    implicit: Option<(f64, f64)>,
    linear_implicit: Option<(f64, f64)>,
    seconds: f64,
}

struct Attempt {
    state: StateVector,
    newton_iterations: usize,
    converged: bool,
}

struct Integrator<'a, P: Problem + ?Sized> {
    problem: &'a P,
    cfg: &'a ControllerConfig,
    newton: NewtonConfig,
    history: HistoryBuffer,
    t: f64,
    level: usize,
    log: RunLog,
    observer: Observer<'a>,
}

impl<'a, P: Problem + ?Sized> Integrator<'a, P> {
    fn new(problem: &'a P, cfg: &'a ControllerConfig, t0: f64, observer: Observer<'a>) -> Result<Self> {
        cfg.validate()?;
        let newton = cfg.newton.unwrap_or_else(|| NewtonConfig::for_dimension(problem.dimension()));
        let mut u0 = problem.initial_state(t0);
        problem.apply_constraints(t0, u0.values_mut());
        if !u0.is_finite() {
            return Err(Error::InvalidInput("initial state is not finite".into()));
        }
        observer(t0, &u0);
        let mut history = HistoryBuffer::new();
        history.push(t0, u0)?;
        let log = RunLog {
            components: problem.partition().names(),
            summary: RunSummary { final_time: t0, ..Default::default() },
            ..Default::default()
        };
        Ok(Self { problem, cfg, newton, history, t: t0, level: 0, log, observer })
    }

    fn abort(self, reason: Error) -> RunError {
        RunError::Aborted { time: self.t, reason, log: Box::new(self.log) }
    }

    fn finished(&self, t_end: f64) -> bool {
        t_end - self.t <= 1e-12 * t_end.abs().max(1.0)
    }

    /// Shortens `dt` so the run lands on `t_end` without leaving a remainder
    /// smaller than `dt_min`. Returns the step and whether it is the last one.
    fn fit_to_end(&self, dt: f64, t_end: f64) -> (f64, bool) {
        let remaining = t_end - self.t;
        if dt >= remaining * (1.0 - 1e-12) {
            return (remaining, true);
        }
        if remaining - dt < self.cfg.dt_min {
            let d = remaining - self.cfg.dt_min;
            if d >= self.cfg.dt_min {
                return (d, false);
            }
            return (remaining, true);
        }
        (dt, false)
    }

    fn solve(&self, order: usize, t_new: f64) -> Result<Attempt> {
        let stencil = self.history.stencil(order, t_new)?;
        let (_, guess) = self.history.newest().expect("history is never empty");
        let out = solve_implicit_step(self.problem, &stencil, &self.history, t_new, guess, &self.newton);
        match out {
            Ok(o) => Ok(Attempt { state: o.state, newton_iterations: o.iterations, converged: o.converged }),
            Err(e) if is_recoverable(&e) => Ok(Attempt {
                state: guess.clone(),
                newton_iterations: self.newton.max_iter,
                converged: false,
            }),
            Err(e) => Err(e),
        }
    }

    fn estimate(&self, kind: EstimatorKind, t_new: f64, u2: &StateVector) -> Result<Estimate> {
        let run = |k: EstimatorKind| -> Result<Option<EstimateReport>> {
            let r = match k {
                EstimatorKind::Implicit => {
                    estimate_implicit(self.problem, &self.history, t_new, u2, &self.newton, self.cfg.norm)
                }
                _ => estimate_linear_implicit(self.problem, &self.history, t_new, u2, self.cfg.norm),
            };
            match r {
                Ok(r) => Ok(Some(r)),
                Err(e) if is_recoverable(&e) => Ok(None),
                Err(e) => Err(e),
            }
        };
        let secs = |r: &Option<EstimateReport>| r.as_ref().map_or(0.0, |r| r.cost.as_secs_f64());
        let total = |r: &Option<EstimateReport>| r.as_ref().map_or(f64::INFINITY, |r| r.total);
        let (driver, implicit, li) = match kind {
            EstimatorKind::Implicit => {
                let r = run(EstimatorKind::Implicit)?;
                let i = Some((total(&r), secs(&r)));
                (r, i, None)
            }
            EstimatorKind::LinearImplicit => {
                let r = run(EstimatorKind::LinearImplicit)?;
                let l = Some((total(&r), secs(&r)));
                (r, None, l)
            }
            EstimatorKind::Both => {
                let ri = run(EstimatorKind::Implicit)?;
                let rl = run(EstimatorKind::LinearImplicit)?;
                let i = Some((total(&ri), secs(&ri)));
                let l = Some((total(&rl), secs(&rl)));
                (rl, i, l)
            }
        };
        let seconds = implicit.map_or(0.0, |x| x.1) + li.map_or(0.0, |x| x.1);
        Ok(Estimate {
            total: total(&driver),
            components: driver.map(|r| r.per_component).unwrap_or_default(),
            implicit,
            linear_implicit: li,
            seconds,
        })
    }

    fn record(&self, order: usize, t_new: f64, dt: f64, attempt: &Attempt, est: Option<&Estimate>) -> StepRecord {
        StepRecord {
            level: self.level + 1,
            t: t_new,
            dt,
            order,
            accepted: false,
            retries: 0,
            newton_iterations: attempt.newton_iterations,
            newton_converged: attempt.converged,
            est_total: est.map(|e| e.total),
            est_components: est.map(|e| e.components.clone()).unwrap_or_default(),
            est_implicit: est.and_then(|e| e.implicit.map(|x| x.0)),
            est_linear_implicit: est.and_then(|e| e.linear_implicit.map(|x| x.0)),
            implicit_seconds: est.and_then(|e| e.implicit.map(|x| x.1)),
            linear_implicit_seconds: est.and_then(|e| e.linear_implicit.map(|x| x.1)),
            estimator_seconds: est.map_or(0.0, |e| e.seconds),
            tolerance_met: true,
            final_step: false,
        }
    }

    fn accept(&mut self, t_new: f64, state: StateVector) -> Result<()> {
        if !state.is_finite() {
            return Err(Error::InvalidInput(format!("accepted state at t = {t_new} is not finite")));
        }
        (self.observer)(t_new, &state);
        self.history.push(t_new, state)?;
        self.t = t_new;
        self.level += 1;
        Ok(())
    }

    /// Constant-step solve at `order` with optional estimation; no control.
    fn fixed_step(&mut self, order: usize, dt: f64, t_end: f64, estimate: Option<EstimatorKind>) -> Result<()> {
        let (dt, last) = self.fit_to_end(dt, t_end);
        let t_new = if last { t_end } else { self.t + dt };
        let attempt = self.solve(order, t_new)?;
        if !attempt.converged {
            return Err(Error::InvalidInput(format!(
                "Newton failed for BDF{order} at t = {t_new} with dt = {dt}"
            )));
        }
        let est = match estimate {
            Some(kind) if self.history.len() >= 3 => Some(self.estimate(kind, t_new, &attempt.state)?),
            _ => None,
        };
        let mut rec = self.record(order, t_new, dt, &attempt, est.as_ref());
        rec.accepted = true;
        rec.final_step = last;
        if let Some(e) = &est {
            rec.tolerance_met = e.total < self.cfg.tolerance;
        }
        self.log.push(rec);
        self.accept(t_new, attempt.state)
    }

    /// Implicit Euler then BDF2, both with `dt_min`.
    fn startup(&mut self, t_end: f64) -> Result<()> {
        for order in 1..=2 {
            if self.finished(t_end) {
                break;
            }
            self.fixed_step(order, self.cfg.dt_min, t_end, None)?;
        }
        Ok(())
    }

    fn adaptive(&mut self, t_end: f64) -> Result<()> {
        let cfg = self.cfg;
        let mut dt_next = cfg.dt_min;
        while !self.finished(t_end) {
            let mut dt = dt_next;
            let mut retries = 0;
            loop {
                let (dt_try, last) = self.fit_to_end(dt, t_end);
                let t_new = if last { t_end } else { self.t + dt_try };
                let attempt = self.solve(2, t_new)?;
                let est = if attempt.converged { Some(self.estimate(cfg.estimator, t_new, &attempt.state)?) } else { None };
                let est_total = est.as_ref().map_or(f64::INFINITY, |e| e.total);
                let mut rec = self.record(2, t_new, dt_try, &attempt, est.as_ref());
                rec.retries = retries;
                rec.final_step = last;
                if attempt.converged && est.is_none() {
                    rec.est_total = Some(f64::INFINITY);
                }
                if !attempt.converged {
                    rec.est_total = Some(f64::INFINITY);
                }

                let within = attempt.converged && est_total < cfg.tolerance;
                // repeating an attempt at dt_min reproduces it exactly
                let exhausted = retries >= cfg.max_retries || dt_try <= cfg.dt_min * (1.0 + 1e-12);
                if within || (exhausted && attempt.converged) {
                    rec.accepted = true;
                    rec.tolerance_met = within;
                    self.log.push(rec);
                    self.accept(t_new, attempt.state)?;
                    let predicted = predict_step(dt_try, kappa_star(est_total, cfg)?, cfg);
                    dt_next = smooth_step(dt_try, predicted, cfg);
                    break;
                }
                rec.tolerance_met = false;
                self.log.push(rec);
                if exhausted {
                    return Err(Error::InvalidInput(format!(
                        "Newton failed at t = {t_new} with dt = {dt_try} after {retries} retries"
                    )));
                }
                retries += 1;
                dt = predict_step(dt_try, kappa_star(est_total, cfg)?, cfg);
            }
        }
        Ok(())
    }
}

/// Adaptive BDF2 run from `t0` to `t_end`.
pub fn run<P: Problem + ?Sized>(
    problem: &P,
    cfg: &ControllerConfig,
    t0: f64,
    t_end: f64,
) -> std::result::Result<RunLog, RunError> {
    run_observed(problem, cfg, t0, t_end, &mut |_, _| {})
}

/// Adaptive run reporting every accepted state to `observer`.
pub fn run_observed<P: Problem + ?Sized>(
    problem: &P,
    cfg: &ControllerConfig,
    t0: f64,
    t_end: f64,
    observer: Observer<'_>,
) -> std::result::Result<RunLog, RunError> {
    if !(t_end >= t0) {
        return Err(Error::InvalidInput(format!("end time {t_end} precedes start time {t0}")).into());
    }
    let mut it = Integrator::new(problem, cfg, t0, observer)?;
    if let Err(e) = it.startup(t_end).and_then(|_| it.adaptive(t_end)) {
        return Err(it.abort(e));
    }
    Ok(it.log)
}

/// Constant-step BDF2 run (implicit Euler first step), the reference for
/// adaptive runs. With `estimate` set, the estimator is evaluated and logged
/// at every step but does not influence the steps.
pub fn run_constant<P: Problem + ?Sized>(
    problem: &P,
    cfg: &ControllerConfig,
    t0: f64,
    t_end: f64,
    dt: f64,
    estimate: Option<EstimatorKind>,
    observer: Observer<'_>,
) -> std::result::Result<RunLog, RunError> {
    if !(t_end >= t0) {
        return Err(Error::InvalidInput(format!("end time {t_end} precedes start time {t0}")).into());
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("step size {dt} must be positive")).into());
    }
    let fixed = ControllerConfig { dt_min: dt.min(cfg.dt_min), dt_max: dt.max(cfg.dt_max), ..cfg.clone() };
    let mut it = Integrator::new(problem, &fixed, t0, observer)?;
    let mut order = 1;
    while !it.finished(t_end) {
        if let Err(e) = it.fixed_step(order, dt, t_end, estimate) {
            return Err(it.abort(e));
        }
        order = 2;
    }
    Ok(it.log)
}
