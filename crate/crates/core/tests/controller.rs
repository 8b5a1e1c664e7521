use std::sync::Arc;

use adaptive_bdf::verification::{make_linear_saddle_dae, make_polynomial_ode, make_stiff_nonlinear_ode};
use adaptive_bdf::{
    run, run_constant, run_observed, ComponentPartition, ControllerConfig, CsrMatrix, EstimatorKind, Problem, RunError,
    RunLog, StateVector,
};

fn check_invariants(log: &RunLog, cfg: &ControllerConfig) {
    let acc: Vec<_> = log.accepted().collect();
    for w in acc.windows(2) {
        assert!(w[1].t > w[0].t, "times must increase");
    }
    for r in &acc {
        if !r.final_step {
            assert!(r.dt >= cfg.dt_min * (1.0 - 1e-12) && r.dt <= cfg.dt_max * (1.0 + 1e-12), "dt {}", r.dt);
        }
    }
    for r in &log.records {
        assert!(r.retries <= cfg.max_retries);
    }
    let growth = cfg.max_growth();
    for w in acc.windows(2) {
        let unclamped = |dt: f64| dt > cfg.dt_min * (1.0 + 1e-9) && dt < cfg.dt_max * (1.0 - 1e-9);
        if unclamped(w[0].dt) && unclamped(w[1].dt) {
            assert!(w[1].dt / w[0].dt <= growth * (1.0 + 1e-12), "ratio {}", w[1].dt / w[0].dt);
        }
    }
}

#[test]
fn zero_estimate_grows_steps_to_the_cap() {
    let p = make_polynomial_ode(2);
    let cfg = ControllerConfig::default();
    let log = run(&p, &cfg, 0.0, 3.0).unwrap();
    check_invariants(&log, &cfg);
    let acc: Vec<_> = log.accepted().collect();
    // startup at dt_min, first adaptive step at dt_min
    assert_eq!(acc[0].order, 1);
    assert_eq!(acc[1].order, 2);
    for r in &acc[..3] {
        assert!((r.dt - cfg.dt_min).abs() < 1e-15);
    }
    for w in acc[2..].windows(2) {
        if !w[1].final_step {
            assert!(w[1].dt <= w[0].dt * 1.35 * (1.0 + 1e-12));
            assert!(w[1].dt >= w[0].dt * (1.0 - 1e-12));
        }
    }
    assert!(acc.iter().any(|r| (r.dt - cfg.dt_max).abs() < 1e-15));
    assert_eq!(log.summary.rejected_attempts, 0);
    assert!((log.summary.final_time - 3.0).abs() < 1e-12);
    assert!(acc.last().unwrap().final_step);
}

#[test]
fn runs_are_deterministic() {
    let p = make_stiff_nonlinear_ode();
    let cfg = ControllerConfig { tolerance: 1e-6, ..Default::default() };
    let a = run(&p, &cfg, 0.0, 2.0).unwrap();
    let b = run(&p, &cfg, 0.0, 2.0).unwrap();
    assert_eq!(a.records.len(), b.records.len());
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!((x.t, x.dt, x.accepted, x.retries, x.est_total), (y.t, y.dt, y.accepted, y.retries, y.est_total));
    }
    check_invariants(&a, &cfg);
}

#[test]
fn saddle_dae_run_respects_invariants_with_both_estimators() {
    let p = make_linear_saddle_dae();
    let cfg = ControllerConfig { tolerance: 1e-5, estimator: EstimatorKind::Both, ..Default::default() };
    let log = run(&p, &cfg, 0.0, 3.0).unwrap();
    check_invariants(&log, &cfg);
    for r in log.accepted().filter(|r| r.est_total.is_some()) {
        let (i, l) = (r.est_implicit.unwrap(), r.est_linear_implicit.unwrap());
        assert!((i - l).abs() <= 1e-8 * i);
        assert_eq!(r.est_total, Some(l));
    }
}

#[test]
fn empty_interval_takes_no_steps() {
    let p = make_polynomial_ode(2);
    let mut seen = Vec::new();
    let log = run_observed(&p, &ControllerConfig::default(), 1.0, 1.0, &mut |t, _| seen.push(t)).unwrap();
    assert!(log.records.is_empty());
    assert_eq!(log.summary.accepted_steps, 0);
    assert_eq!(seen, vec![1.0]);
    assert!(run(&p, &ControllerConfig::default(), 1.0, 0.5).is_err());
}

#[test]
fn invalid_config_is_rejected() {
    let p = make_polynomial_ode(2);
    let cfg = ControllerConfig { alpha0: 0.5, ..Default::default() };
    assert!(matches!(run(&p, &cfg, 0.0, 1.0), Err(RunError::Setup(_))));
}

#[test]
fn constant_run_hits_end_time() {
    let p = make_polynomial_ode(3);
    let cfg = ControllerConfig::default();
    let log = run_constant(&p, &cfg, 0.0, 0.1, 1e-3, Some(EstimatorKind::LinearImplicit), &mut |_, _| {}).unwrap();
    assert_eq!(log.summary.accepted_steps, 100);
    assert!((log.summary.final_time - 0.1).abs() < 1e-14);
    assert!(log.records.iter().skip(2).all(|r| r.est_total.is_some()));
}

/// `u' = g(t)` with `g` jumping from 0 to 1 at `t = 0.5`.
struct Jump(Arc<ComponentPartition>);

impl Problem for Jump {
    fn partition(&self) -> &Arc<ComponentPartition> {
        &self.0
    }
    fn residual(&self, t: f64, udot: &[f64], _u: &[f64]) -> Vec<f64> {
        vec![udot[0] - if t > 0.5 { 1.0 } else { 0.0 }]
    }
    fn jacobian(&self, _t: f64, _udot: &[f64], _u: &[f64], shift: f64) -> CsrMatrix {
        CsrMatrix::from_dense(&[vec![shift]])
    }
    fn initial_state(&self, _t0: f64) -> StateVector {
        StateVector::zeros(self.0.clone())
    }
}

#[test]
fn retries_stop_at_the_limit_and_flag_the_level() {
    let p = Jump(Arc::new(ComponentPartition::from_sizes(&[("u", 1)]).unwrap()));
    // retries may shrink the step by at most 10%, so the crossing cannot be resolved
    let cfg = ControllerConfig { tolerance: 1e-9, kappa_min: 0.9, dt_min: 1e-12, dt_max: 0.1, ..Default::default() };
    let log = run(&p, &cfg, 0.0, 1.0).unwrap();
    check_invariants(&log, &cfg);
    let exhausted: Vec<_> = log.accepted().filter(|r| r.retries == cfg.max_retries).collect();
    assert!(!exhausted.is_empty());
    assert!(exhausted.iter().any(|r| !r.tolerance_met));
    assert_eq!(log.summary.flagged_levels, log.accepted().filter(|r| !r.tolerance_met).count());
    assert!(log.summary.flagged_levels >= 1);
    // a retry uses the unsmoothed proposal
    for w in log.records.windows(2) {
        if !w[0].accepted && w[1].retries == w[0].retries + 1 {
            let kappa = adaptive_bdf::kappa_star(w[0].est_total.unwrap(), &cfg).unwrap();
            let expected = adaptive_bdf::predict_step(w[0].dt, kappa, &cfg);
            assert!((w[1].dt - expected).abs() <= 1e-15 * expected || w[1].final_step);
        }
    }
}

/// `u^2 + 1 = 0` past `t = 0.3`: no real solution, so Newton cannot converge.
struct Unsolvable(Arc<ComponentPartition>);

impl Problem for Unsolvable {
    fn partition(&self) -> &Arc<ComponentPartition> {
        &self.0
    }
    fn residual(&self, t: f64, udot: &[f64], u: &[f64]) -> Vec<f64> {
        if t > 0.3 {
            vec![u[0] * u[0] + 1.0]
        } else {
            vec![udot[0]]
        }
    }
    fn jacobian(&self, t: f64, _udot: &[f64], u: &[f64], shift: f64) -> CsrMatrix {
        CsrMatrix::from_dense(&[vec![if t > 0.3 { 2.0 * u[0] } else { shift }]])
    }
    fn initial_state(&self, _t0: f64) -> StateVector {
        StateVector::new(self.0.clone(), vec![1.0]).unwrap()
    }
}

#[test]
fn newton_failure_at_the_floor_aborts_with_partial_log() {
    let p = Unsolvable(Arc::new(ComponentPartition::from_sizes(&[("u", 1)]).unwrap()));
    let err = run(&p, &ControllerConfig::default(), 0.0, 1.0).unwrap_err();
    let RunError::Aborted { time, log, .. } = err else { panic!("expected abort") };
    assert!(time <= 0.3 + 1e-12);
    assert!(log.summary.accepted_steps > 0);
    assert!(log.records.last().map_or(false, |r| !r.newton_converged && !r.accepted));
}
