//! Problems with closed-form solutions, and constant-step convergence studies
//! built on them.

use std::sync::Arc;

use crate::bdf::HistoryBuffer;
use crate::error::{Error, Result};
use crate::estimators::linear_implicit_correction;
use crate::nonlinear::{solve_implicit_step, NewtonConfig};
use crate::problem::{ComponentPartition, Problem, StateVector};
use crate::sparse::CsrMatrix;

/// A problem whose exact trajectory is known.
pub trait ManufacturedProblem: Problem {
    fn exact(&self, t: f64) -> Vec<f64>;
    fn exact_derivative(&self, t: f64) -> Vec<f64>;
    fn description(&self) -> &str;

    fn exact_state(&self, t: f64) -> StateVector {
        StateVector::new(self.partition().clone(), self.exact(t)).expect("exact solution matches layout")
    }

    /// Largest `|R(t, U'(t), U(t))|` over the given times.
    fn self_check(&self, times: &[f64]) -> f64 {
        times
            .iter()
            .map(|&t| {
                self.residual(t, &self.exact_derivative(t), &self.exact(t))
                    .iter()
                    .fold(0.0_f64, |m, r| m.max(r.abs()))
            })
            .fold(0.0, f64::max)
    }
}

fn scalar_layout() -> Arc<ComponentPartition> {
    Arc::new(ComponentPartition::from_sizes(&[("u", 1)]).expect("valid layout"))
}

/// `u' = d t^(d-1)` with `u = t^d`.
#[derive(Debug, Clone)]
pub struct PolynomialOde {
    degree: u32,
    layout: Arc<ComponentPartition>,
}

pub fn make_polynomial_ode(degree: u32) -> PolynomialOde {
    PolynomialOde { degree, layout: scalar_layout() }
}

impl PolynomialOde {
    fn forcing(&self, t: f64) -> f64 {
        if self.degree == 0 {
            0.0
        } else {
            self.degree as f64 * t.powi(self.degree as i32 - 1)
        }
    }
}

impl Problem for PolynomialOde {
    fn partition(&self) -> &Arc<ComponentPartition> {
        &self.layout
    }
    fn residual(&self, t: f64, udot: &[f64], _u: &[f64]) -> Vec<f64> {
        vec![udot[0] - self.forcing(t)]
    }
    fn jacobian(&self, _t: f64, _udot: &[f64], _u: &[f64], shift: f64) -> CsrMatrix {
        CsrMatrix::from_dense(&[vec![shift]])
    }
    fn initial_state(&self, t0: f64) -> StateVector {
        self.exact_state(t0)
    }
}

impl ManufacturedProblem for PolynomialOde {
    fn exact(&self, t: f64) -> Vec<f64> {
        vec![t.powi(self.degree as i32)]
    }
    fn exact_derivative(&self, t: f64) -> Vec<f64> {
        vec![self.forcing(t)]
    }
    fn description(&self) -> &str {
        "polynomial ODE u' = d t^(d-1)"
    }
}

/// `u' = -lambda (u - sin t) + cos t`, exact `sin t + (u0 - sin t0) e^{-lambda (t - t0)}`.
#[derive(Debug, Clone)]
pub struct StiffOde {
    pub lambda: f64,
    pub t0: f64,
    pub u0: f64,
    layout: Arc<ComponentPartition>,
}

/// Stiff relaxation onto `sin t` with `lambda = 1e3`, starting on the slow manifold.
pub fn make_stiff_nonlinear_ode() -> StiffOde {
    StiffOde::new(1e3, 0.0, 0.0)
}

impl StiffOde {
    pub fn new(lambda: f64, t0: f64, u0: f64) -> Self {
        Self { lambda, t0, u0, layout: scalar_layout() }
    }
}

impl Problem for StiffOde {
    fn partition(&self) -> &Arc<ComponentPartition> {
        &self.layout
    }
    fn residual(&self, t: f64, udot: &[f64], u: &[f64]) -> Vec<f64> {
        vec![udot[0] + self.lambda * (u[0] - t.sin()) - t.cos()]
    }
    fn jacobian(&self, _t: f64, _udot: &[f64], _u: &[f64], shift: f64) -> CsrMatrix {
        CsrMatrix::from_dense(&[vec![shift + self.lambda]])
    }
    fn initial_state(&self, t0: f64) -> StateVector {
        self.exact_state(t0)
    }
}

impl ManufacturedProblem for StiffOde {
    fn exact(&self, t: f64) -> Vec<f64> {
        let transient = (self.u0 - self.t0.sin()) * (-self.lambda * (t - self.t0)).exp();
        vec![t.sin() + transient]
    }
    fn exact_derivative(&self, t: f64) -> Vec<f64> {
        let transient = (self.u0 - self.t0.sin()) * (-self.lambda * (t - self.t0)).exp();
        vec![t.cos() - self.lambda * transient]
    }
    fn description(&self) -> &str {
        "stiff relaxation u' = -lambda (u - sin t) + cos t"
    }
}

/// `u' = -u^2`, exact `1 / (1 + t)`.
#[derive(Debug, Clone)]
pub struct RiccatiOde {
    layout: Arc<ComponentPartition>,
}

pub fn make_riccati_ode() -> RiccatiOde {
    RiccatiOde { layout: scalar_layout() }
}

impl Problem for RiccatiOde {
    fn partition(&self) -> &Arc<ComponentPartition> {
        &self.layout
    }
    fn residual(&self, _t: f64, udot: &[f64], u: &[f64]) -> Vec<f64> {
        vec![udot[0] + u[0] * u[0]]
    }
    fn jacobian(&self, _t: f64, _udot: &[f64], u: &[f64], shift: f64) -> CsrMatrix {
        CsrMatrix::from_dense(&[vec![shift + 2.0 * u[0]]])
    }
    fn initial_state(&self, t0: f64) -> StateVector {
        self.exact_state(t0)
    }
}

impl ManufacturedProblem for RiccatiOde {
    fn exact(&self, t: f64) -> Vec<f64> {
        vec![1.0 / (1.0 + t)]
    }
    fn exact_derivative(&self, t: f64) -> Vec<f64> {
        vec![-1.0 / ((1.0 + t) * (1.0 + t))]
    }
    fn description(&self) -> &str {
        "Riccati ODE u' = -u^2"
    }
}

const SADDLE_U: usize = 8;
const SADDLE_P: usize = 3;

/// `M u' + K u + B^T p = f(t)`, `B u = g(t)`: a miniature incompressible
/// system in which `p` carries no time derivative.
#[derive(Debug, Clone)]
pub struct LinearSaddleDae {
    mass: Vec<Vec<f64>>,
    stiffness: Vec<Vec<f64>>,
    constraint: Vec<Vec<f64>>,
    layout: Arc<ComponentPartition>,
}

pub fn make_linear_saddle_dae() -> LinearSaddleDae {
    let n = SADDLE_U;
    let mut mass = vec![vec![0.0; n]; n];
    let mut stiffness = vec![vec![0.0; n]; n];
    for i in 0..n {
        mass[i][i] = 2.0 + 0.1 * i as f64;
        stiffness[i][i] = 1.0 + 0.5 * i as f64;
        if i + 1 < n {
            mass[i][i + 1] = 0.3;
            mass[i + 1][i] = 0.3;
            stiffness[i][i + 1] = -0.4;
            stiffness[i + 1][i] = 0.2;
        }
    }
    let constraint = vec![
        vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.5],
        vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.5, 0.0],
        vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, -0.5],
    ];
    let layout = Arc::new(
        ComponentPartition::from_sizes(&[("velocity", SADDLE_U), ("pressure", SADDLE_P)]).expect("valid layout"),
    );
    LinearSaddleDae { mass, stiffness, constraint, layout }
}

impl LinearSaddleDae {
    fn exact_u(t: f64) -> (Vec<f64>, Vec<f64>) {
        (0..SADDLE_U)
            .map(|i| {
                let w = 0.7 * (i + 1) as f64;
                let ph = 0.3 * i as f64;
                ((w * t + ph).sin(), w * (w * t + ph).cos())
            })
            .unzip()
    }

    fn exact_p(t: f64) -> Vec<f64> {
        (0..SADDLE_P).map(|r| ((r + 1) as f64 * t).cos() + 0.5 * r as f64).collect()
    }

    fn mat_vec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        m.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    fn forcing(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let (u, ud) = Self::exact_u(t);
        let p = Self::exact_p(t);
        let mut f = Self::mat_vec(&self.mass, &ud);
        for (fi, ki) in f.iter_mut().zip(Self::mat_vec(&self.stiffness, &u)) {
            *fi += ki;
        }
        for (r, row) in self.constraint.iter().enumerate() {
            for (fi, b) in f.iter_mut().zip(row) {
                *fi += b * p[r];
            }
        }
        let g = Self::mat_vec(&self.constraint, &u);
        (f, g)
    }
}

impl Problem for LinearSaddleDae {
    fn partition(&self) -> &Arc<ComponentPartition> {
        &self.layout
    }

    fn residual(&self, t: f64, udot: &[f64], x: &[f64]) -> Vec<f64> {
        let (u, p) = x.split_at(SADDLE_U);
        let (f, g) = self.forcing(t);
        let mut r = Self::mat_vec(&self.mass, &udot[..SADDLE_U]);
        for (ri, ki) in r.iter_mut().zip(Self::mat_vec(&self.stiffness, u)) {
            *ri += ki;
        }
        for (row_idx, row) in self.constraint.iter().enumerate() {
            for (ri, b) in r.iter_mut().zip(row) {
                *ri += b * p[row_idx];
            }
        }
        for (ri, fi) in r.iter_mut().zip(&f) {
            *ri -= fi;
        }
        let bu = Self::mat_vec(&self.constraint, u);
        r.extend(bu.iter().zip(&g).map(|(a, b)| a - b));
        r
    }

    fn jacobian(&self, _t: f64, _udot: &[f64], _u: &[f64], shift: f64) -> CsrMatrix {
        let n = SADDLE_U + SADDLE_P;
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..SADDLE_U {
            for j in 0..SADDLE_U {
                d[i][j] = shift * self.mass[i][j] + self.stiffness[i][j];
            }
        }
        for (r, row) in self.constraint.iter().enumerate() {
            for (j, &b) in row.iter().enumerate() {
                d[SADDLE_U + r][j] = b;
                d[j][SADDLE_U + r] = b;
            }
        }
        CsrMatrix::from_dense(&d)
    }

    fn initial_state(&self, t0: f64) -> StateVector {
        self.exact_state(t0)
    }
}

impl ManufacturedProblem for LinearSaddleDae {
    fn exact(&self, t: f64) -> Vec<f64> {
        let mut x = Self::exact_u(t).0;
        x.extend(Self::exact_p(t));
        x
    }
    fn exact_derivative(&self, t: f64) -> Vec<f64> {
        let mut x = Self::exact_u(t).1;
        x.extend((0..SADDLE_P).map(|r| -((r + 1) as f64) * ((r + 1) as f64 * t).sin()));
        x
    }
    fn description(&self) -> &str {
        "linear saddle-point DAE with 8 differential and 3 algebraic unknowns"
    }
}

/// Constant-step schemes compared in convergence studies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Bdf2,
    Bdf3,
    /// BDF2 step followed by the linear-implicit BDF3 correction, the corrected
    /// state being propagated.
    LinearImplicit,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Bdf2 => "bdf2",
            Scheme::Bdf3 => "bdf3",
            Scheme::LinearImplicit => "li",
        }
    }
}

/// Maximum over time levels and components of the per-component error norm,
/// for a constant-step run from exact starting values on `[t0, t_end]`.
/// Returns one value per component.
pub fn constant_step_error<P: ManufacturedProblem + ?Sized>(
    problem: &P,
    scheme: Scheme,
    t0: f64,
    t_end: f64,
    h: f64,
) -> Result<Vec<f64>> {
    let steps = ((t_end - t0) / h).round() as usize;
    if steps < 3 || ((t0 + steps as f64 * h) - t_end).abs() > 1e-9 * h.max(t_end.abs()) {
        return Err(Error::InvalidInput(format!("step {h} does not divide [{t0}, {t_end}] into >= 3 steps")));
    }
    let cfg = NewtonConfig::for_dimension(problem.dimension());
    let layout = problem.partition().clone();
    let ncomp = layout.num_components();
    let mut history = HistoryBuffer::new();
    for i in 0..3 {
        history.push(t0 + i as f64 * h, problem.exact_state(t0 + i as f64 * h))?;
    }
    let mut worst = vec![0.0_f64; ncomp];
    for i in 3..=steps {
        let t_new = t0 + i as f64 * h;
        let order = if scheme == Scheme::Bdf3 { 3 } else { 2 };
        let stencil = history.stencil(order, t_new)?;
        let guess = history.newest().expect("seeded").1.clone();
        let out = solve_implicit_step(problem, &stencil, &history, t_new, &guess, &cfg)?;
        if !out.converged {
            return Err(Error::InvalidInput(format!("Newton failed at t = {t_new}")));
        }
        let state = match scheme {
            Scheme::LinearImplicit => linear_implicit_correction(problem, &history, t_new, &out.state)?,
            _ => out.state,
        };
        let exact = problem.exact(t_new);
        for (c, comp) in layout.components().iter().enumerate() {
            let diff: Vec<f64> =
                comp.range.clone().map(|k| state.values()[k] - exact[k]).collect();
            worst[c] = worst[c].max(problem.l2_norm(c, &diff));
        }
        history.push(t_new, state)?;
    }
    Ok(worst)
}

/// Least-squares slope of `log(error)` against `log(h)`.
pub fn observed_order(hs: &[f64], errors: &[f64]) -> f64 {
    assert_eq!(hs.len(), errors.len());
    let n = hs.len() as f64;
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergencePoint {
    pub h: f64,
    pub error: f64,
    /// Order observed between this step size and the previous (larger) one.
    pub observed_order: Option<f64>,
}

/// Runs [`constant_step_error`] for each step size, taking the maximum over
/// components as the error.
pub fn convergence_study<P: ManufacturedProblem + ?Sized>(
    problem: &P,
    scheme: Scheme,
    t0: f64,
    t_end: f64,
    hs: &[f64],
) -> Result<Vec<ConvergencePoint>> {
    let mut out: Vec<ConvergencePoint> = Vec::with_capacity(hs.len());
    for &h in hs {
        let error = constant_step_error(problem, scheme, t0, t_end, h)?.into_iter().fold(0.0, f64::max);
        let observed_order = out.last().map(|prev| (prev.error / error).ln() / (prev.h / h).ln());
        out.push(ConvergencePoint { h, error, observed_order });
    }
    Ok(out)
}
