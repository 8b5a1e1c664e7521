//! Variable-step backward differentiation formulae of orders 1 to 3.
//!
//! The discrete derivative at the newest time level is
//! `sum_p xi_p U^{n-p}`, with the weights chosen so that the formula is exact
//! for polynomials of degree `k` sampled on the (possibly non-uniform) grid.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::problem::StateVector;

pub const MAX_ORDER: usize = 3;
pub const HISTORY_CAPACITY: usize = 4;

/// Order, step sizes `[dt^n, dt^{n-1}, ...]` (newest first) and weights `xi_0..xi_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct BdfStencil {
    order: usize,
    steps: Vec<f64>,
    coefficients: Vec<f64>,
}

impl BdfStencil {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Weight of the newest state, the shift of the implicit Jacobian.
    pub fn shift(&self) -> f64 {
        self.coefficients[0]
    }
}

/// Weights of the order-`k` formula for the given step sizes (newest first).
///
/// The weights solve the order conditions
/// `sum_p xi_p (t_{n-p} - t_n)^m = [m == 1]` for `m = 0..=k`, in time units
/// scaled by the newest step.
pub fn compute_coefficients(order: usize, steps: &[f64]) -> Result<BdfStencil> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    if steps.len() != order {
        return Err(Error::InvalidInput(format!(
            "BDF{order} needs {order} step sizes, got {}",
            steps.len()
        )));
    }
    if let Some(bad) = steps.iter().find(|h| !(**h > 0.0) || !h.is_finite()) {
        return Err(Error::InvalidInput(format!("step size {bad} is not strictly positive")));
    }

    let h = steps[0];
    let n = order + 1;
    // distances of the nodes back from t_n, in units of h; increasing from 0
    let mut nodes = vec![0.0; n];
    for p in 1..n {
        nodes[p] = nodes[p - 1] + steps[p - 1] / h;
    }
    // sum_p xi_p y_p^m = -[m == 1] in the reflected variable y = t_n - t
    let mut xi = vec![0.0; n];
    xi[1] = -1.0;
    solve_vandermonde(&nodes, &mut xi);

    Ok(BdfStencil {
        order,
        steps: steps.to_vec(),
        coefficients: xi.into_iter().map(|x| x / h).collect(),
    })
}

/// Björck–Pereyra solve of `sum_j x_j^i z_j = b_i` in place. Componentwise
/// accurate for `0 <= x_0 < x_1 < ...` and sign-alternating `b`.
fn solve_vandermonde(x: &[f64], b: &mut [f64]) {
    let n = x.len();
    for k in 0..n - 1 {
        for i in (k + 1..n).rev() {
            b[i] -= x[k] * b[i - 1];
        }
    }
    for k in (0..n - 1).rev() {
        for i in k + 1..n {
            b[i] /= x[i] - x[i - k - 1];
        }
        for i in k..n - 1 {
            b[i] -= b[i + 1];
        }
    }
}

/// The last few accepted `(time, state)` pairs, newest first.
#[derive(Clone, Debug, Default)]
pub struct HistoryBuffer {
    entries: VecDeque<(f64, StateVector)>,
}

impl HistoryBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Pushes a new newest entry; the oldest entry is dropped beyond capacity.
    pub fn push(&mut self, t: f64, state: StateVector) -> Result<()> {
        if let Some((t_last, last)) = self.entries.front() {
            if !(t > *t_last) {
                return Err(Error::InvalidInput(format!(
                    "history time {t} does not follow {t_last}"
                )));
            }
            last.check_layout(&state)?;
        }
        self.entries.push_front((t, state));
        self.entries.truncate(HISTORY_CAPACITY);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry `p` steps back (0 is the newest).
    pub fn get(&self, p: usize) -> Option<(f64, &StateVector)> {
        self.entries.get(p).map(|(t, s)| (*t, s))
    }

    pub fn newest(&self) -> Option<(f64, &StateVector)> {
        self.get(0)
    }

    pub fn time(&self, p: usize) -> Option<f64> {
        self.entries.get(p).map(|e| e.0)
    }

    /// Step sizes `[t_new - t_0, t_0 - t_1, ...]` for an order-`k` formula.
    pub fn steps_to(&self, order: usize, t_new: f64) -> Result<Vec<f64>> {
        if self.entries.len() < order {
            return Err(Error::HistoryUnderflow { required: order, available: self.entries.len() });
        }
        let mut steps = Vec::with_capacity(order);
        let mut t_next = t_new;
        for (t, _) in self.entries.iter().take(order) {
            steps.push(t_next - t);
            t_next = *t;
        }
        Ok(steps)
    }

    /// Stencil of the given order reaching from the stored times to `t_new`.
    pub fn stencil(&self, order: usize, t_new: f64) -> Result<BdfStencil> {
        compute_coefficients(order, &self.steps_to(order, t_new)?)
    }
}

/// `xi_0 * newest + sum_{p>=1} xi_p U^{n+1-p}` written into `out`.
pub fn apply_xi_into(
    stencil: &BdfStencil,
    newest: &[f64],
    history: &HistoryBuffer,
    out: &mut [f64],
) -> Result<()> {
    let k = stencil.order;
    if history.len() < k {
        return Err(Error::HistoryUnderflow { required: k, available: history.len() });
    }
    // spacing of the stored levels must match the stencil's older steps
    for p in 1..k {
        let spacing = history.entries[p - 1].0 - history.entries[p].0;
        if (spacing - stencil.steps[p]).abs() > 1e-10 * spacing.abs().max(stencil.steps[p]) {
            return Err(Error::StencilMismatch);
        }
    }
    let n = newest.len();
    if out.len() != n {
        return Err(Error::Layout(format!("output of length {} for states of length {n}", out.len())));
    }
    let xi = &stencil.coefficients;
    for (o, v) in out.iter_mut().zip(newest) {
        *o = xi[0] * v;
    }
    for p in 1..=k {
        let state = history.entries[p - 1].1.values();
        if state.len() != n {
            return Err(Error::Layout("history state length differs from newest state".into()));
        }
        for (o, v) in out.iter_mut().zip(state) {
            *o += xi[p] * v;
        }
    }
    Ok(())
}

/// Discrete time derivative at the newest level.
pub fn apply_xi(stencil: &BdfStencil, newest: &StateVector, history: &HistoryBuffer) -> Result<StateVector> {
    if let Some((_, s)) = history.newest() {
        newest.check_layout(s)?;
    }
    let mut out = vec![0.0; newest.len()];
    apply_xi_into(stencil, newest.values(), history, &mut out)?;
    newest.with_values(out)
}
