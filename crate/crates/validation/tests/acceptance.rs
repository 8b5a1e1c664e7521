//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Flow runs use the coarse meshes of the shipped configurations.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use adaptive_bdf::fem::NavierStokesProblem;
use adaptive_bdf::verification::{
    constant_step_error, make_linear_saddle_dae, make_stiff_nonlinear_ode, observed_order, Scheme,
};
use adaptive_bdf::{compute_coefficients, run_constant, EstimatorKind, Problem, RunLog, StateVector};
use adaptive_bdf_cli::problems::{self, BuiltProblem};
use adaptive_bdf_cli::{execute, RunConfig};
use adaptive_bdf_validation::shipped_configs;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn flow(p: &BuiltProblem) -> &NavierStokesProblem {
    match p {
        BuiltProblem::Flow(f) => f,
        BuiltProblem::Manufactured(_) => panic!("expected a flow problem"),
    }
}

// 1. Order conditions and classical uniform weights.
fn order_conditions() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let steps: Vec<f64> = (0..3).map(|_| 10f64.powf(rng.random_range(-4.0..0.0))).collect();
        for order in [2, 3] {
            let st = compute_coefficients(order, &steps[..order]).unwrap();
            let mut tau = vec![0.0];
            for h in &steps[..order] {
                tau.push(tau.last().unwrap() - h);
            }
            for m in 0..=order as i32 {
                let terms: Vec<f64> = st.coefficients().iter().zip(&tau).map(|(x, t)| x * t.powi(m)).collect();
                let sum: f64 = terms.iter().sum();
                let target = if m == 1 { 1.0 } else { 0.0 };
                let scale: f64 = terms.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
                worst = worst.max((sum - target).abs() / scale);
            }
        }
    }
    let h = 0.01;
    let classical: [(usize, Vec<f64>); 2] =
        [(2, vec![1.5, -2.0, 0.5]), (3, vec![11.0 / 6.0, -3.0, 1.5, -1.0 / 3.0])];
    let mut uniform = 0.0_f64;
    for (order, w) in classical {
        let st = compute_coefficients(order, &vec![h; order]).unwrap();
        for (x, c) in st.coefficients().iter().zip(&w) {
            uniform = uniform.max((x * h - c).abs() / c.abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-12 && uniform <= 1e-14 && secs < 1.0,
        format!("max relative order-condition defect {worst:.2e}, uniform deviation {uniform:.2e}, {secs:.3} s"),
    )
}

// 2. Observed orders on the stiff manufactured ODE.
fn convergence_orders() -> Outcome {
    let start = Instant::now();
    let p = make_stiff_nonlinear_ode();
    let hs = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
    let order = |s: Scheme| {
        let errs: Vec<f64> = hs.iter().map(|&h| constant_step_error(&p, s, 0.0, 1.0, h).unwrap()[0]).collect();
        observed_order(&hs, &errs)
    };
    let (o2, o3, oli) = (order(Scheme::Bdf2), order(Scheme::Bdf3), order(Scheme::LinearImplicit));
    let secs = start.elapsed().as_secs_f64();
    outcome(
        (o2 - 2.0).abs() <= 0.1 && (o3 - 3.0).abs() <= 0.15 && (oli - 3.0).abs() <= 0.2 && secs < 60.0,
        format!("bdf2 {o2:.4}, bdf3 {o3:.4}, li {oli:.4}, {secs:.2} s"),
    )
}

// 3. Estimator equivalence on the linear saddle DAE.
fn saddle_equivalence() -> Outcome {
    let start = Instant::now();
    let p = make_linear_saddle_dae();
    let cfg = adaptive_bdf::ControllerConfig::default();
    let (t_end, n) = (2.0, 500);
    let log = run_constant(&p, &cfg, 0.0, t_end, t_end / n as f64, Some(EstimatorKind::Both), &mut |_, _| {})
        .expect("saddle run");
    let mut worst = 0.0_f64;
    let mut count = 0;
    for r in log.accepted() {
        if let (Some(i), Some(l)) = (r.est_implicit, r.est_linear_implicit) {
            worst = worst.max((l - i).abs() / i);
            count += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let steps = log.summary.accepted_steps;
    outcome(
        steps == n && count == n - 2 && worst <= 1e-8 && secs < 10.0,
        format!("{steps} steps, {count} estimates, max |li - impl| / impl = {worst:.2e}, {secs:.2} s"),
    )
}

/// Accepted states of the adaptive step-flow run.
struct Trajectory {
    times: Vec<f64>,
    states: Vec<StateVector>,
}

impl Trajectory {
    /// Quadratic interpolation through the three accepted levels nearest `t`.
    fn at(&self, t: f64) -> StateVector {
        let n = self.times.len();
        if let Some(i) = self.times.iter().position(|s| (s - t).abs() <= 1e-12) {
            return self.states[i].clone();
        }
        let j = self.times.partition_point(|s| *s < t).clamp(1, n - 1);
        let i0 = if j + 1 < n { j - 1 } else { j - 2 };
        let ts = &self.times[i0..i0 + 3];
        let w: Vec<f64> = (0..3)
            .map(|a| (0..3).filter(|b| *b != a).map(|b| (t - ts[b]) / (ts[a] - ts[b])).product())
            .collect();
        let len = self.states[i0].len();
        let vals = (0..len)
            .map(|k| (0..3).map(|a| w[a] * self.states[i0 + a].values()[k]).sum())
            .collect();
        self.states[i0].with_values(vals).unwrap()
    }
}

fn ratios(log: &RunLog) -> Vec<(f64, f64)> {
    log.accepted()
        .filter_map(|r| Some((r.t, r.est_linear_implicit? / r.est_implicit?)))
        .collect()
}

// 4. LI / implicit agreement on the step flow.
fn nonlinear_agreement(log: &RunLog, secs: f64) -> Outcome {
    let r = ratios(log);
    let lo = r.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    let hi = r.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let bad = r.iter().filter(|x| !(0.5..=2.0).contains(&x.1)).count();
    let finished = log.summary.final_time == 2.0;
    outcome(
        finished && !r.is_empty() && bad == 0 && secs < 1800.0,
        format!("{} compared levels, ratio in [{lo:.5}, {hi:.5}], {bad} outside [0.5, 2], {secs:.1} s", r.len()),
    )
}

// 5. Controller safety on one run.
fn safety_violations(log: &RunLog, cfg: &RunConfig) -> Vec<String> {
    let c = &cfg.controller;
    let growth_cap = 1.35;
    let mut v = Vec::new();
    let acc: Vec<_> = log.accepted().collect();
    for r in &acc {
        if r.dt < c.dt_min * (1.0 - 1e-9) || r.dt > c.dt_max * (1.0 + 1e-9) {
            v.push(format!("dt {:e} at t = {}", r.dt, r.t));
        }
    }
    for r in &log.records {
        if r.retries > 5 {
            v.push(format!("{} retries at t = {}", r.retries, r.t));
        }
    }
    let unclamped = |dt: f64| dt > c.dt_min * (1.0 + 1e-9) && dt < c.dt_max * (1.0 - 1e-9);
    for w in acc.windows(2) {
        if unclamped(w[0].dt) && unclamped(w[1].dt) && !w[1].final_step && w[1].dt / w[0].dt > growth_cap * (1.0 + 1e-12)
        {
            v.push(format!("ratio {:.4} at t = {}", w[1].dt / w[0].dt, w[1].t));
        }
    }
    if log.summary.final_time != cfg.t_end {
        v.push(format!("stopped at t = {}", log.summary.final_time));
    }
    v
}

// 6. Step-size reaction to the kink at t = 1.
fn singularity_detection(log: &RunLog) -> Outcome {
    let acc: Vec<_> = log.accepted().collect();
    let min_dt = |a: f64, b: f64| acc.iter().filter(|r| r.t >= a && r.t <= b).map(|r| r.dt).fold(f64::INFINITY, f64::min);
    let (near, late) = (min_dt(0.9, 1.1), min_dt(1.5, 2.0));
    let est: Vec<(f64, f64)> = acc.iter().filter_map(|r| Some((r.t, r.est_total?))).collect();
    let peaks: Vec<f64> = est
        .windows(3)
        .filter(|w| w[1].0 >= 0.95 && w[1].0 <= 1.05 && w[1].1 > w[0].1 && w[1].1 >= w[2].1)
        .map(|w| w[1].0)
        .collect();
    let top = est.iter().filter(|e| e.0 >= 0.95 && e.0 <= 1.05).fold((0.0, 0.0), |m, e| if e.1 > m.1 { *e } else { m });
    outcome(
        near < late && !peaks.is_empty(),
        format!(
            "min dt on [0.9, 1.1] {near:.3e} vs [1.5, 2.0] {late:.3e}; {} local maxima of est in [0.95, 1.05], largest {:.3e} at t = {:.5}",
            peaks.len(),
            top.1,
            top.0
        ),
    )
}

// 7. Step count and estimator cost.
fn efficiency(log: &RunLog, dt_min: f64) -> Outcome {
    let constant = (2.0 / dt_min).ceil() as usize;
    let steps = log.summary.accepted_steps;
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let imp = mean(log.accepted().filter_map(|r| r.implicit_seconds).collect());
    let li = mean(log.accepted().filter_map(|r| r.linear_implicit_seconds).collect());
    outcome(
        (steps as f64) < 0.2 * constant as f64 && li < imp,
        format!(
            "{steps} accepted steps vs {constant} constant ({:.1}%); mean estimator cost li {:.3} ms, implicit {:.3} ms",
            100.0 * steps as f64 / constant as f64,
            li * 1e3,
            imp * 1e3
        ),
    )
}

// 8. Adaptive solution against the constant-dt_min reference.
fn error_control(problem: &dyn Problem, traj: &Trajectory, reference: &[(f64, StateVector)]) -> Outcome {
    let mut worst = 0.0_f64;
    let mut worst_at = (0.0, String::new());
    let mut finite = true;
    for (t, r) in reference {
        let a = traj.at(*t);
        finite &= a.is_finite() && r.is_finite();
        let diff = a.difference(r).unwrap();
        for (c, comp) in problem.partition().components().iter().enumerate() {
            let scale = problem.l2_norm(c, r.component(c));
            let e = problem.l2_norm(c, diff.component(c)) / if scale > 0.0 { scale } else { 1.0 };
            finite &= e.is_finite();
            if !(e <= worst) {
                worst = e;
                worst_at = (*t, comp.name.clone());
            }
        }
    }
    outcome(
        finite && reference.len() == 20 && worst < 5e-2,
        format!(
            "{} comparison times, max relative error {worst:.3e} ({} at t = {:.1})",
            reference.len(),
            worst_at.1,
            worst_at.0
        ),
    )
}

// 9. Channel: tolerance met and pressure-dominated early estimates.
fn channel_behaviour(log: &RunLog, tolerance: f64, secs: f64) -> Outcome {
    let est: Vec<_> = log.accepted().filter(|r| r.est_total.is_some()).collect();
    let met = est.iter().filter(|r| r.est_total.unwrap() < tolerance).count();
    let frac = met as f64 / est.len().max(1) as f64;
    let early: Vec<_> = est.iter().filter(|r| r.t <= 0.1).collect();
    let pressure_led = early
        .iter()
        .filter(|r| {
            let max = r.est_components.iter().map(|c| c.1).fold(0.0, f64::max);
            r.est_component("pressure").is_some_and(|p| p >= max)
        })
        .count();
    let ratio = |r: &&&adaptive_bdf::StepRecord| r.est_component("velocity").unwrap() / r.est_component("pressure").unwrap();
    let (lo, hi) = early.iter().map(ratio).fold((f64::INFINITY, 0.0_f64), |(a, b), x| (a.min(x), b.max(x)));
    let finished = log.summary.final_time > 0.0;
    outcome(
        finished && frac >= 0.95 && !early.is_empty() && pressure_led == early.len() && secs < 1200.0,
        format!(
            "est < eps at {met}/{} levels ({:.1}%); pressure largest at {pressure_led}/{} levels with t <= 0.1 \
             (velocity/pressure estimate ratio in [{lo:.1}, {hi:.1}]), {secs:.1} s",
            est.len(),
            100.0 * frac,
            early.len()
        ),
    )
}

fn main() -> ExitCode {
    let configs = shipped_configs().expect("shipped configs load");
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |id: u32, name: &'static str, o: Outcome| {
        println!("criterion {id} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };

    report(1, "order conditions", order_conditions());
    report(2, "convergence orders", convergence_orders());
    report(3, "estimator equivalence on affine problems", saddle_equivalence());

    let mut logs: BTreeMap<String, RunLog> = BTreeMap::new();

    // adaptive step flow; both estimators evaluated, the linear-implicit one drives
    let mut cfd_cfg = configs["cfd300"].clone();
    cfd_cfg.set_estimator(EstimatorKind::Both);
    let cfd = problems::build(&cfd_cfg).unwrap();
    let mut traj = Trajectory { times: Vec::new(), states: Vec::new() };
    let start = Instant::now();
    let cfd_exec = execute(&cfd_cfg, cfd.as_problem(), &mut |t, s| {
        traj.times.push(t);
        traj.states.push(s.clone());
    })
    .unwrap();
    let cfd_secs = start.elapsed().as_secs_f64();
    let cfd_log = cfd_exec.log;
    report(4, "estimator agreement on the step flow", nonlinear_agreement(&cfd_log, cfd_secs));
    report(6, "singularity detection", singularity_detection(&cfd_log));
    report(7, "efficiency", efficiency(&cfd_log, cfd_cfg.controller.dt_min));

    let ref_cfg = &configs["cfd300-reference"];
    let ref_problem = problems::build(ref_cfg).unwrap();
    let mut checkpoints: Vec<(f64, StateVector)> = Vec::new();
    let ref_exec = execute(ref_cfg, ref_problem.as_problem(), &mut |t, s| {
        let k = (t * 10.0).round();
        if k >= 1.0 && (t - k / 10.0).abs() < 1e-9 {
            checkpoints.push((k / 10.0, s.clone()));
        }
    })
    .unwrap();
    report(8, "error control against the constant-step reference", error_control(flow(&cfd), &traj, &checkpoints));
    drop(traj);

    let ch_cfg = &configs["channel"];
    let ch = problems::build(ch_cfg).unwrap();
    let start = Instant::now();
    let ch_exec = execute(ch_cfg, ch.as_problem(), &mut |_, _| {}).unwrap();
    let ch_secs = start.elapsed().as_secs_f64();
    let ch_ok = ch_exec.aborted.is_none();
    let ch9 = channel_behaviour(&ch_exec.log, ch_cfg.controller.tolerance, ch_secs);
    report(9, "pressure-impulse channel", Outcome { pass: ch9.pass && ch_ok, detail: ch9.detail });

    logs.insert("cfd300".into(), cfd_log);
    logs.insert("cfd300-reference".into(), ref_exec.log);
    logs.insert("channel".into(), ch_exec.log);
    let mut lines = Vec::new();
    let mut safe = true;
    for (name, cfg) in &configs {
        if !logs.contains_key(name) {
            let p = problems::build(cfg).unwrap();
            let exec = execute(cfg, p.as_problem(), &mut |_, _| {}).unwrap();
            safe &= exec.aborted.is_none();
            logs.insert(name.clone(), exec.log);
        }
        let v = safety_violations(&logs[name], cfg);
        safe &= v.is_empty();
        let first = v.first().map(|s| format!(", first: {s}")).unwrap_or_default();
        lines.push(format!("{name} {} steps {} violations{first}", logs[name].summary.accepted_steps, v.len()));
    }
    report(5, "controller safety on all shipped configs", outcome(safe && configs.len() >= 5, lines.join("; ")));

    let failed: Vec<String> = results.iter().filter(|r| !r.2.pass).map(|r| r.0.to_string()).collect();
    println!(
        "acceptance: {}/{} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() { String::new() } else { format!(" (failed: {})", failed.join(", ")) }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
