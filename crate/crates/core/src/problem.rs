//! The semi-discrete DAE contract `R(U', U, t) = 0` shared by every test problem.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// A named block of the global unknown vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub name: String,
    pub range: Range<usize>,
}

/// Ordered, contiguous tiling of `[0, N)` into named components.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentPartition {
    components: Vec<Component>,
    len: usize,
}

impl ComponentPartition {
    /// Validates that the ranges are listed in order, are contiguous, start at zero
    /// and carry unique names.
    pub fn new(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidInput("partition needs at least one component".into()));
        }
        let mut next = 0;
        for (i, c) in components.iter().enumerate() {
            if c.range.start != next || c.range.end < c.range.start {
                return Err(Error::InvalidInput(format!(
                    "component '{}' range {:?} does not continue the tiling at {next}",
                    c.name, c.range
                )));
            }
            if components[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::InvalidInput(format!("duplicate component name '{}'", c.name)));
            }
            next = c.range.end;
        }
        Ok(Self { components, len: next })
    }

    /// Builds the partition from consecutive `(name, size)` blocks.
    pub fn from_sizes(blocks: &[(&str, usize)]) -> Result<Self> {
        let mut start = 0;
        let components = blocks
            .iter()
            .map(|&(name, size)| {
                let c = Component { name: name.to_string(), range: start..start + size };
                start += size;
                c
            })
            .collect();
        Self::new(components)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.components.iter().position(|c| c.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.components.iter().map(|c| c.name.clone()).collect()
    }
}

/// Coefficient vector of all unknowns together with its component layout.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    values: Vec<f64>,
    layout: Arc<ComponentPartition>,
}

impl StateVector {
    pub fn new(layout: Arc<ComponentPartition>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::Layout(format!(
                "{} values for a partition of length {}",
                values.len(),
                layout.len()
            )));
        }
        Ok(Self { values, layout })
    }

    pub fn zeros(layout: Arc<ComponentPartition>) -> Self {
        let values = vec![0.0; layout.len()];
        Self { values, layout }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn layout(&self) -> &Arc<ComponentPartition> {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn component(&self, index: usize) -> &[f64] {
        &self.values[self.layout.components()[index].range.clone()]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_layout(&self, other: &StateVector) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout) || *self.layout == *other.layout
    }

    pub fn check_layout(&self, other: &StateVector) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::Layout("state vectors use different partitions".into()))
        }
    }

    /// `self - other`, keeping the layout.
    pub fn difference(&self, other: &StateVector) -> Result<StateVector> {
        self.check_layout(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(StateVector { values, layout: self.layout.clone() })
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<StateVector> {
        StateVector::new(self.layout.clone(), values)
    }
}

/// A semi-discrete problem `R(t, U', U) = 0`.
///
/// Dirichlet conditions are imposed strongly: constrained rows of the residual
/// read `u_i - g_i(t)` and the matching Jacobian rows are identity rows.
pub trait Problem: Send + Sync {
    fn partition(&self) -> &Arc<ComponentPartition>;

    fn residual(&self, t: f64, udot: &[f64], u: &[f64]) -> Vec<f64>;

    /// `shift * dR/dU' + dR/dU`. Falls back to central differences.
    fn jacobian(&self, t: f64, udot: &[f64], u: &[f64], shift: f64) -> CsrMatrix {
        fd_jacobian(self, t, udot, u, shift)
    }

    /// Discrete L2 norm of one component's coefficient block. The default is the
    /// Euclidean norm, appropriate for plain ODE/DAE systems.
    fn l2_norm(&self, _component: usize, v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn initial_state(&self, t0: f64) -> StateVector;

    fn dirichlet_dofs(&self) -> &[usize] {
        &[]
    }

    fn apply_constraints(&self, _t: f64, _u: &mut [f64]) {}

    fn dimension(&self) -> usize {
        self.partition().len()
    }
}

/// Central finite-difference Jacobian, column by column. Only meant for small systems.
pub fn fd_jacobian<P: Problem + ?Sized>(
    problem: &P,
    t: f64,
    udot: &[f64],
    u: &[f64],
    shift: f64,
) -> CsrMatrix {
    let n = u.len();
    let mut triplets = Vec::new();
    let mut up = u.to_vec();
    let mut um = u.to_vec();
    let mut vp = udot.to_vec();
    let mut vm = udot.to_vec();
    for j in 0..n {
        let h = 1e-7 * (1.0 + u[j].abs());
        up[j] += h;
        um[j] -= h;
        vp[j] += shift * h;
        vm[j] -= shift * h;
        let rp = problem.residual(t, &vp, &up);
        let rm = problem.residual(t, &vm, &um);
        for (i, (a, b)) in rp.iter().zip(&rm).enumerate() {
            let d = (a - b) / (2.0 * h);
            if d != 0.0 {
                triplets.push((i, j, d));
            }
        }
        up[j] = u[j];
        um[j] = u[j];
        vp[j] = udot[j];
        vm[j] = udot[j];
    }
    CsrMatrix::from_triplets(n, n, &triplets)
}

/// Largest relative discrepancy between `J d` and a central difference of the
/// residual along `d` (with `U'` moved by `shift * d`), over the probe directions.
pub fn check_jacobian<P: Problem + ?Sized>(
    problem: &P,
    t: f64,
    udot: &[f64],
    u: &[f64],
    shift: f64,
    directions: &[Vec<f64>],
) -> f64 {
    let jac = problem.jacobian(t, udot, u, shift);
    let u_scale = 1.0 + inf_norm(u);
    let mut worst: f64 = 0.0;
    for d in directions {
        let d_norm = inf_norm(d);
        if d_norm == 0.0 {
            continue;
        }
        let h = 1e-6 * u_scale / d_norm;
        let shifted = |sign: f64| {
            let up: Vec<f64> = u.iter().zip(d).map(|(a, b)| a + sign * h * b).collect();
            let vp: Vec<f64> = udot.iter().zip(d).map(|(a, b)| a + sign * h * shift * b).collect();
            problem.residual(t, &vp, &up)
        };
        let rp = shifted(1.0);
        let rm = shifted(-1.0);
        let jd = jac.mul_vec(d);
        let num = jd
            .iter()
            .zip(rp.iter().zip(&rm))
            .map(|(j, (a, b))| (j - (a - b) / (2.0 * h)).abs())
            .fold(0.0, f64::max);
        worst = worst.max(num / (inf_norm(&jd) + f64::EPSILON));
    }
    worst
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
