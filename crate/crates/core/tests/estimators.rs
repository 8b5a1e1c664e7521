use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use adaptive_bdf::estimators::{component_l2_diff, is_recoverable};
use adaptive_bdf::sparse::{reset_solve_counts, solve_counts};
use adaptive_bdf::verification::{make_linear_saddle_dae, make_polynomial_ode, make_riccati_ode, ManufacturedProblem};
use adaptive_bdf::{
    estimate_implicit, estimate_linear_implicit, solve_implicit_step, ComponentPartition, CsrMatrix, EstimateNorm,
    HistoryBuffer, NewtonConfig, Problem, StateVector,
};

/// History of exact states at `t0, t0 + h, ...` (three levels) and the BDF2
/// solution at the next level.
fn bdf2_step<P: ManufacturedProblem>(p: &P, times: &[f64; 4]) -> (HistoryBuffer, StateVector) {
    let mut h = HistoryBuffer::new();
    for &t in &times[..3] {
        h.push(t, p.exact_state(t)).unwrap();
    }
    let s = h.stencil(2, times[3]).unwrap();
    let cfg = NewtonConfig::for_dimension(p.dimension());
    let out = solve_implicit_step(p, &s, &h, times[3], &p.exact_state(times[2]), &cfg).unwrap();
    assert!(out.converged);
    (h, out.state)
}

fn newton(p: &impl Problem) -> NewtonConfig {
    NewtonConfig::for_dimension(p.dimension())
}

#[test]
fn li_matches_implicit_on_saddle_dae() {
    let p = make_linear_saddle_dae();
    for (k, &(t0, h)) in [(0.0, 0.01), (0.3, 0.05), (1.7, 0.002)].iter().enumerate() {
        let times = [t0, t0 + h, t0 + 2.5 * h, t0 + 3.2 * h + 0.1 * k as f64 * h];
        let (hist, u2) = bdf2_step(&p, &times);
        let imp = estimate_implicit(&p, &hist, times[3], &u2, &newton(&p), EstimateNorm::Absolute).unwrap();
        let li = estimate_linear_implicit(&p, &hist, times[3], &u2, EstimateNorm::Absolute).unwrap();
        assert!(imp.total > 0.0);
        assert!((li.total - imp.total).abs() <= 1e-10 * imp.total, "{} vs {}", li.total, imp.total);
        for ((n1, a), (n2, b)) in imp.per_component.iter().zip(&li.per_component) {
            assert_eq!(n1, n2);
            assert!((a - b).abs() <= 1e-10 * imp.total);
        }
        // the algebraic component is estimated too
        assert!(li.component("pressure").unwrap() > 0.0);
    }
}

#[test]
fn quadratic_solution_gives_zero_estimate() {
    let p = make_polynomial_ode(2);
    let (hist, u2) = bdf2_step(&p, &[0.1, 0.2, 0.35, 0.4]);
    assert!((u2.values()[0] - 0.16).abs() < 1e-13);
    let imp = estimate_implicit(&p, &hist, 0.4, &u2, &newton(&p), EstimateNorm::Absolute).unwrap();
    let li = estimate_linear_implicit(&p, &hist, 0.4, &u2, EstimateNorm::Absolute).unwrap();
    assert!(imp.total < 1e-13 && li.total < 1e-13);
}

#[test]
fn quintic_solution_gives_positive_estimate() {
    let p = make_polynomial_ode(5);
    let (hist, u2) = bdf2_step(&p, &[0.5, 0.6, 0.7, 0.8]);
    let li = estimate_linear_implicit(&p, &hist, 0.8, &u2, EstimateNorm::Absolute).unwrap();
    assert!(li.total > 1e-6);
}

#[test]
fn cubic_estimate_has_local_order_three() {
    let p = make_polynomial_ode(3);
    let est = |h: f64| {
        let times = [1.0, 1.0 + h, 1.0 + 2.0 * h, 1.0 + 3.0 * h];
        let (hist, u2) = bdf2_step(&p, &times);
        estimate_implicit(&p, &hist, times[3], &u2, &newton(&p), EstimateNorm::Absolute).unwrap().total
    };
    let (e1, e2) = (est(0.04), est(0.02));
    let order = (e1 / e2).log2();
    assert!((order - 3.0).abs() <= 0.2, "order {order}");
}

#[test]
fn component_difference_examples() {
    let p = make_linear_saddle_dae();
    let a = p.exact_state(0.3);
    let zero = component_l2_diff(&p, &a, &a).unwrap();
    assert!(zero.iter().all(|(_, v)| *v == 0.0));
    let mut vals = a.values().to_vec();
    vals[9] += 0.25;
    let b = a.with_values(vals).unwrap();
    let d = component_l2_diff(&p, &a, &b).unwrap();
    assert_eq!(d, vec![("velocity".to_string(), 0.0), ("pressure".to_string(), 0.25)]);

    let other = StateVector::zeros(Arc::new(ComponentPartition::from_sizes(&[("u", 11)]).unwrap()));
    assert!(component_l2_diff(&p, &a, &other).is_err());
}

#[test]
fn relative_norm_divides_by_solution_size() {
    let p = make_linear_saddle_dae();
    let (hist, u2) = bdf2_step(&p, &[0.0, 0.05, 0.1, 0.15]);
    let abs = estimate_linear_implicit(&p, &hist, 0.15, &u2, EstimateNorm::Absolute).unwrap();
    let rel = estimate_linear_implicit(&p, &hist, 0.15, &u2, EstimateNorm::Relative).unwrap();
    for (c, ((_, a), (_, r))) in abs.per_component.iter().zip(&rel.per_component).enumerate() {
        let scale = p.l2_norm(c, u2.component(c));
        assert!((a / scale - r).abs() <= 1e-14 * r);
    }
}

/// Counts residual and Jacobian evaluations of the wrapped problem.
struct Counting<P> {
    inner: P,
    residuals: AtomicUsize,
    jacobians: AtomicUsize,
}

impl<P: Problem> Problem for Counting<P> {
    fn partition(&self) -> &Arc<ComponentPartition> {
        self.inner.partition()
    }
    fn residual(&self, t: f64, udot: &[f64], u: &[f64]) -> Vec<f64> {
        self.residuals.fetch_add(1, Ordering::Relaxed);
        self.inner.residual(t, udot, u)
    }
    fn jacobian(&self, t: f64, udot: &[f64], u: &[f64], shift: f64) -> CsrMatrix {
        self.jacobians.fetch_add(1, Ordering::Relaxed);
        self.inner.jacobian(t, udot, u, shift)
    }
    fn initial_state(&self, t0: f64) -> StateVector {
        self.inner.initial_state(t0)
    }
}

#[test]
fn linear_implicit_cost_is_one_linear_solve() {
    let p = make_linear_saddle_dae();
    let (hist, u2) = bdf2_step(&p, &[0.0, 0.02, 0.04, 0.06]);
    let c = Counting { inner: p, residuals: AtomicUsize::new(0), jacobians: AtomicUsize::new(0) };
    reset_solve_counts();
    let rep = estimate_linear_implicit(&c, &hist, 0.06, &u2, EstimateNorm::Absolute).unwrap();
    let counts = solve_counts();
    assert_eq!(c.residuals.load(Ordering::Relaxed), 1);
    assert_eq!(c.jacobians.load(Ordering::Relaxed), 1);
    assert_eq!(counts.factorizations, 1);
    assert_eq!(counts.solves, 1);
    assert_eq!(rep.newton_iterations, 1);
}

#[test]
fn implicit_failure_is_recoverable() {
    let p = make_riccati_ode();
    let (hist, u2) = bdf2_step(&p, &[0.5, 0.6, 0.7, 0.8]);
    let cfg = NewtonConfig { abs_tol: 1e-300, rel_tol: 1e-300, max_iter: 1, damping: 1.0, min_iter: 0 };
    let err = estimate_implicit(&p, &hist, 0.8, &u2, &cfg, EstimateNorm::Absolute).unwrap_err();
    assert!(is_recoverable(&err));
}

#[test]
fn shallow_history_is_rejected() {
    let p = make_polynomial_ode(2);
    let mut h = HistoryBuffer::new();
    h.push(0.0, p.exact_state(0.0)).unwrap();
    h.push(0.1, p.exact_state(0.1)).unwrap();
    assert!(estimate_linear_implicit(&p, &h, 0.2, &p.exact_state(0.2), EstimateNorm::Absolute).is_err());
}

/// The saddle DAE with its components stored in reverse order.
struct Reversed {
    inner: adaptive_bdf::verification::LinearSaddleDae,
    layout: Arc<ComponentPartition>,
}

impl Reversed {
    fn new() -> Self {
        let inner = make_linear_saddle_dae();
        let layout = Arc::new(ComponentPartition::from_sizes(&[("pressure", 3), ("velocity", 8)]).unwrap());
        Self { inner, layout }
    }
    fn to_inner(v: &[f64]) -> Vec<f64> {
        [&v[3..], &v[..3]].concat()
    }
    fn from_inner(v: &[f64]) -> Vec<f64> {
        [&v[8..], &v[..8]].concat()
    }
}

impl Problem for Reversed {
    fn partition(&self) -> &Arc<ComponentPartition> {
        &self.layout
    }
    fn residual(&self, t: f64, udot: &[f64], u: &[f64]) -> Vec<f64> {
        Self::from_inner(&self.inner.residual(t, &Self::to_inner(udot), &Self::to_inner(u)))
    }
    fn jacobian(&self, t: f64, udot: &[f64], u: &[f64], shift: f64) -> CsrMatrix {
        let d = self.inner.jacobian(t, &Self::to_inner(udot), &Self::to_inner(u), shift).to_dense();
        let perm = |i: usize| if i < 8 { i + 3 } else { i - 8 };
        let mut out = vec![vec![0.0; 11]; 11];
        for i in 0..11 {
            for j in 0..11 {
                out[perm(i)][perm(j)] = d[i][j];
            }
        }
        CsrMatrix::from_dense(&out)
    }
    fn initial_state(&self, t0: f64) -> StateVector {
        StateVector::new(self.layout.clone(), Self::from_inner(&self.inner.exact(t0))).unwrap()
    }
}

#[test]
fn estimate_is_independent_of_component_order() {
    let p = make_linear_saddle_dae();
    let times = [0.2, 0.25, 0.31, 0.36];
    let (hist, u2) = bdf2_step(&p, &times);
    let a = estimate_linear_implicit(&p, &hist, times[3], &u2, EstimateNorm::Absolute).unwrap();

    let r = Reversed::new();
    let mut rh = HistoryBuffer::new();
    for &t in &times[..3] {
        rh.push(t, r.initial_state(t)).unwrap();
    }
    let ru2 = StateVector::new(r.layout.clone(), Reversed::from_inner(u2.values())).unwrap();
    let b = estimate_linear_implicit(&r, &rh, times[3], &ru2, EstimateNorm::Absolute).unwrap();
    assert!((a.total - b.total).abs() <= 1e-12 * a.total);
    assert!((a.component("pressure").unwrap() - b.component("pressure").unwrap()).abs() <= 1e-12 * a.total);
}
