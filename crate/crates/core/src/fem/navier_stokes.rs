//! Taylor–Hood semi-discretization of the incompressible Navier–Stokes
//! equations in residual form:
//!
//! ```text
//! m(u', v) + nu (grad u, grad v) + c(u, u, v) + b(p, v) = (g_N, v)_N + (f, v)
//!                                                b(u, q) = 0
//! ```
//!
//! with `b(p, v) = -(p, div v)` and `c(u, w, v) = ((u . grad) w, v)`.
//! Dirichlet rows are replaced by `u_i - g_i(t)`; boundaries without a
//! condition are homogeneous do-nothing outflows, which also fix the
//! pressure level.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::mesh::{BoundaryTag, TriangularMesh};
use super::quadrature::{degree4, degree5, gauss3_unit, TriangleRule};
use super::space::{p2_gradients, p2_values, TaylorHoodSpace, P2_LOCAL};
use crate::error::{Error, Result};
use crate::problem::{ComponentPartition, Problem, StateVector};
use crate::sparse::{CsrMatrix, SparsityPattern};

/// Time- and space-dependent vector field `(t, x) -> value`.
pub type VectorField = Arc<dyn Fn(f64, [f64; 2]) -> [f64; 2] + Send + Sync>;

#[derive(Clone)]
pub enum BoundaryCondition {
    /// Prescribed velocity.
    Dirichlet(VectorField),
    /// Prescribed traction `g_N` in the natural boundary term.
    Traction(VectorField),
}

impl fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryCondition::Dirichlet(_) => f.write_str("Dirichlet(..)"),
            BoundaryCondition::Traction(_) => f.write_str("Traction(..)"),
        }
    }
}

const LOCAL: usize = 15;
const NO_SLOT: usize = usize::MAX;

/// Velocity and pressure values with gradients of a discrete field at one
/// quadrature point.
struct PointField {
    u: [f64; 2],
    /// `grad_u[c][d] = d u_c / d x_d`
    grad_u: [[f64; 2]; 2],
}

/// Constant matrices of the discretization and the element loops for the
/// advection term.
pub struct NsAssembly {
    space: Arc<TaylorHoodSpace>,
    nu: f64,
    rule: TriangleRule,
    pattern: Arc<SparsityPattern>,
    slots: Vec<usize>,
    mass: CsrMatrix,
    linear: CsrMatrix,
    velocity_mass: CsrMatrix,
    pressure_mass: CsrMatrix,
}

impl fmt::Debug for NsAssembly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NsAssembly")
            .field("dofs", &self.space.num_dofs())
            .field("nnz", &self.pattern.nnz())
            .field("nu", &self.nu)
            .finish()
    }
}

impl NsAssembly {
    pub fn new(space: Arc<TaylorHoodSpace>, nu: f64) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::InvalidInput("viscosity must be positive".into()));
        }
        let n = space.num_dofs();
        let ne = space.num_elements();
        let mut entries = Vec::with_capacity(ne * (LOCAL * LOCAL - 9));
        for k in 0..ne {
            let d = space.element_dofs(k);
            for i in 0..LOCAL {
                for j in 0..LOCAL {
                    if i < 12 || j < 12 {
                        entries.push((d[i], d[j]));
                    }
                }
            }
        }
        let pattern = Arc::new(SparsityPattern::from_entries(n, n, entries));
        let mut slots = vec![NO_SLOT; ne * LOCAL * LOCAL];
        for k in 0..ne {
            let d = space.element_dofs(k);
            for i in 0..LOCAL {
                for j in 0..LOCAL {
                    if i < 12 || j < 12 {
                        slots[(k * LOCAL + i) * LOCAL + j] = pattern.find(d[i], d[j]).expect("entry in pattern");
                    }
                }
            }
        }

        let rule = degree4();
        let nvel = space.num_velocity_dofs();
        let mut mass = vec![0.0; pattern.nnz()];
        let mut linear = vec![0.0; pattern.nnz()];
        let mut vm = Vec::new();
        let mut pm = Vec::new();
        for k in 0..ne {
            let g = space.geometry(k);
            let d = space.element_dofs(k);
            let slot = |i: usize, j: usize| slots[(k * LOCAL + i) * LOCAL + j];
            for (l, w) in rule.points.iter().zip(&rule.weights) {
                let wa = w * g.area;
                let phi = p2_values(*l);
                let dphi = p2_gradients(*l, &g.grad_lambda);
                for a in 0..P2_LOCAL {
                    for b in 0..P2_LOCAL {
                        let m = wa * phi[a] * phi[b];
                        let s = wa * self::dot(dphi[a], dphi[b]) * nu;
                        for c in 0..2 {
                            let (i, j) = (c * P2_LOCAL + a, c * P2_LOCAL + b);
                            mass[slot(i, j)] += m;
                            linear[slot(i, j)] += s;
                            vm.push((d[i], d[j], m));
                        }
                    }
                    for q in 0..3 {
                        for c in 0..2 {
                            let bval = -wa * l[q] * dphi[a][c];
                            let i = c * P2_LOCAL + a;
                            linear[slot(i, 12 + q)] += bval;
                            linear[slot(12 + q, i)] += bval;
                        }
                    }
                }
            }
            for a in 0..3 {
                for b in 0..3 {
                    let m = g.area / 12.0 * if a == b { 2.0 } else { 1.0 };
                    pm.push((d[12 + a] - nvel, d[12 + b] - nvel, m));
                }
            }
        }
        let np = space.num_pressure_dofs();
        Ok(Self {
            nu,
            rule,
            mass: CsrMatrix::new(pattern.clone(), mass),
            linear: CsrMatrix::new(pattern.clone(), linear),
            velocity_mass: CsrMatrix::from_triplets(nvel, nvel, &vm),
            pressure_mass: CsrMatrix::from_triplets(np, np, &pm),
            pattern,
            slots,
            space,
        })
    }

    pub fn space(&self) -> &Arc<TaylorHoodSpace> {
        &self.space
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    /// `blockdiag(M, 0)` on the full system pattern.
    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// `[[nu A, B^T], [B, 0]]` on the full system pattern.
    pub fn linear(&self) -> &CsrMatrix {
        &self.linear
    }

    /// Mass matrix of the velocity unknowns alone.
    pub fn velocity_mass(&self) -> &CsrMatrix {
        &self.velocity_mass
    }

    /// P1 mass matrix of the pressure unknowns alone.
    pub fn pressure_mass(&self) -> &CsrMatrix {
        &self.pressure_mass
    }

    /// `B u`, the discrete divergence tested against every pressure basis function.
    pub fn divergence(&self, u: &[f64]) -> Vec<f64> {
        let nvel = self.space.num_velocity_dofs();
        (nvel..self.space.num_dofs())
            .map(|i| self.linear.row(i).map(|(j, v)| v * u[j]).sum())
            .collect()
    }

    fn field_at(&self, k: usize, u: &[f64], phi: &[f64; 6], dphi: &[[f64; 2]; 6]) -> PointField {
        let en = self.space.element_nodes(k);
        let mut pf = PointField { u: [0.0; 2], grad_u: [[0.0; 2]; 2] };
        for c in 0..2 {
            for a in 0..P2_LOCAL {
                let val = u[self.space.velocity_dof(c, en[a])];
                pf.u[c] += val * phi[a];
                pf.grad_u[c][0] += val * dphi[a][0];
                pf.grad_u[c][1] += val * dphi[a][1];
            }
        }
        pf
    }

    /// Adds `c(u, u, phi_i)` for every velocity test function to `out`.
    pub fn add_advection_residual(&self, u: &[f64], out: &mut [f64]) {
        for k in 0..self.space.num_elements() {
            let g = self.space.geometry(k);
            let en = self.space.element_nodes(k);
            for (l, w) in self.rule.points.iter().zip(&self.rule.weights) {
                let wa = w * g.area;
                let phi = p2_values(*l);
                let dphi = p2_gradients(*l, &g.grad_lambda);
                let f = self.field_at(k, u, &phi, &dphi);
                for c in 0..2 {
                    let adv = f.u[0] * f.grad_u[c][0] + f.u[1] * f.grad_u[c][1];
                    for a in 0..P2_LOCAL {
                        out[self.space.velocity_dof(c, en[a])] += wa * adv * phi[a];
                    }
                }
            }
        }
    }

    /// Adds the derivative of the advection residual at `u`,
    /// `c(du, u, v) + c(u, du, v)`, into `values` laid out on [`Self::pattern`].
    pub fn add_advection_jacobian(&self, u: &[f64], values: &mut [f64]) {
        for k in 0..self.space.num_elements() {
            let g = self.space.geometry(k);
            let slots = &self.slots[k * LOCAL * LOCAL..(k + 1) * LOCAL * LOCAL];
            for (l, w) in self.rule.points.iter().zip(&self.rule.weights) {
                let wa = w * g.area;
                let phi = p2_values(*l);
                let dphi = p2_gradients(*l, &g.grad_lambda);
                let f = self.field_at(k, u, &phi, &dphi);
                let mut conv = [0.0; P2_LOCAL];
                for b in 0..P2_LOCAL {
                    conv[b] = f.u[0] * dphi[b][0] + f.u[1] * dphi[b][1];
                }
                for a in 0..P2_LOCAL {
                    let wphi = wa * phi[a];
                    for c in 0..2 {
                        let row = c * P2_LOCAL + a;
                        for e in 0..2 {
                            let ge = wphi * f.grad_u[c][e];
                            for b in 0..P2_LOCAL {
                                let mut val = ge * phi[b];
                                if c == e {
                                    val += wphi * conv[b];
                                }
                                values[slots[row * LOCAL + e * P2_LOCAL + b]] += val;
                            }
                        }
                    }
                }
            }
        }
    }

    /// `c(u, w, v) = ((u . grad) w, v)` for three discrete velocity fields,
    /// integrated with the degree-5 rule (exact for P2 fields).
    pub fn advection_form(&self, u: &[f64], w: &[f64], v: &[f64]) -> f64 {
        let rule = degree5();
        let mut total = 0.0;
        for k in 0..self.space.num_elements() {
            let g = self.space.geometry(k);
            for (l, wt) in rule.points.iter().zip(&rule.weights) {
                let phi = p2_values(*l);
                let dphi = p2_gradients(*l, &g.grad_lambda);
                let fu = self.field_at(k, u, &phi, &dphi);
                let fw = self.field_at(k, w, &phi, &dphi);
                let fv = self.field_at(k, v, &phi, &dphi);
                for c in 0..2 {
                    let adv = fu.u[0] * fw.grad_u[c][0] + fu.u[1] * fw.grad_u[c][1];
                    total += wt * g.area * adv * fv.u[c];
                }
            }
        }
        total
    }

    /// L2 errors `(velocity, pressure)` of the discrete state against exact
    /// fields, integrated with the degree-5 rule.
    pub fn l2_errors(
        &self,
        state: &[f64],
        velocity: impl Fn([f64; 2]) -> [f64; 2],
        pressure: impl Fn([f64; 2]) -> f64,
    ) -> (f64, f64) {
        let rule = degree5();
        let (mut eu, mut ep) = (0.0, 0.0);
        for k in 0..self.space.num_elements() {
            let g = self.space.geometry(k);
            let en = self.space.element_nodes(k);
            for (l, wt) in rule.points.iter().zip(&rule.weights) {
                let x = g.point(*l);
                let phi = p2_values(*l);
                let dphi = p2_gradients(*l, &g.grad_lambda);
                let f = self.field_at(k, state, &phi, &dphi);
                let ue = velocity(x);
                let ph: f64 = (0..3).map(|i| l[i] * state[self.space.pressure_dof(en[i])]).sum();
                eu += wt * g.area * ((f.u[0] - ue[0]).powi(2) + (f.u[1] - ue[1]).powi(2));
                ep += wt * g.area * (ph - pressure(x)).powi(2);
            }
        }
        (eu.sqrt(), ep.sqrt())
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[derive(Clone, Copy, Debug)]
struct DirichletDof {
    dof: usize,
    component: usize,
    x: [f64; 2],
    condition: usize,
}

/// Navier–Stokes (or Stokes, with advection disabled) problem on a
/// Taylor–Hood space, with components `velocity` and `pressure`.
pub struct NavierStokesProblem {
    assembly: NsAssembly,
    partition: Arc<ComponentPartition>,
    conditions: Vec<(BoundaryTag, BoundaryCondition)>,
    dirichlet: Vec<DirichletDof>,
    dirichlet_dofs: Vec<usize>,
    body_force: Option<VectorField>,
    advection: bool,
}

impl fmt::Debug for NavierStokesProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NavierStokesProblem")
            .field("assembly", &self.assembly)
            .field("conditions", &self.conditions)
            .field("dirichlet_dofs", &self.dirichlet_dofs.len())
            .field("advection", &self.advection)
            .finish()
    }
}

impl NavierStokesProblem {
    /// Later entries of `conditions` take precedence at nodes shared by two
    /// Dirichlet boundaries. A tag may appear at most once.
    pub fn new(
        space: Arc<TaylorHoodSpace>,
        nu: f64,
        conditions: Vec<(BoundaryTag, BoundaryCondition)>,
    ) -> Result<Self> {
        for (i, (tag, _)) in conditions.iter().enumerate() {
            if conditions[..i].iter().any(|(t, _)| t == tag) {
                return Err(Error::InvalidInput(format!("boundary '{}' has two conditions", tag.name())));
            }
        }
        let mut by_node: BTreeMap<usize, usize> = BTreeMap::new();
        for (ci, (tag, bc)) in conditions.iter().enumerate() {
            if !matches!(bc, BoundaryCondition::Dirichlet(_)) {
                continue;
            }
            for f in space.mesh().facets().iter().filter(|f| f.tag == *tag) {
                let [a, b] = f.vertices;
                let m = space.edge_node(a, b).expect("facet is a mesh edge");
                for node in [a, b, m] {
                    by_node.insert(node, ci);
                }
            }
        }
        let mut dirichlet = Vec::with_capacity(2 * by_node.len());
        for component in 0..2 {
            for (&node, &condition) in &by_node {
                dirichlet.push(DirichletDof {
                    dof: space.velocity_dof(component, node),
                    component,
                    x: space.nodes()[node],
                    condition,
                });
            }
        }
        let dirichlet_dofs = dirichlet.iter().map(|d| d.dof).collect();
        let partition = Arc::new(ComponentPartition::from_sizes(&[
            ("velocity", space.num_velocity_dofs()),
            ("pressure", space.num_pressure_dofs()),
        ])?);
        Ok(Self {
            assembly: NsAssembly::new(space, nu)?,
            partition,
            conditions,
            dirichlet,
            dirichlet_dofs,
            body_force: None,
            advection: true,
        })
    }

    /// Adds a volume force `f(t, x)`.
    pub fn with_body_force(mut self, force: VectorField) -> Self {
        self.body_force = Some(force);
        self
    }

    /// Switches the advection term on or off (off gives the Stokes equations).
    pub fn with_advection(mut self, on: bool) -> Self {
        self.advection = on;
        self
    }

    pub fn assembly(&self) -> &NsAssembly {
        &self.assembly
    }

    pub fn space(&self) -> &Arc<TaylorHoodSpace> {
        self.assembly.space()
    }

    pub fn mesh(&self) -> &Arc<TriangularMesh> {
        self.assembly.space().mesh()
    }

    fn dirichlet_value(&self, d: &DirichletDof, t: f64) -> f64 {
        match &self.conditions[d.condition].1 {
            BoundaryCondition::Dirichlet(g) => g(t, d.x)[d.component],
            BoundaryCondition::Traction(_) => unreachable!("only Dirichlet conditions constrain dofs"),
        }
    }

    /// Right-hand side: traction and body-force loads at time `t`.
    pub fn load(&self, t: f64) -> Vec<f64> {
        let space = self.space();
        let mut out = vec![0.0; space.num_dofs()];
        for (tag, bc) in &self.conditions {
            let BoundaryCondition::Traction(g) = bc else { continue };
            for f in space.mesh().facets().iter().filter(|f| f.tag == *tag) {
                let [a, b] = f.vertices;
                let m = space.edge_node(a, b).expect("facet is a mesh edge");
                let (pa, pb) = (space.nodes()[a], space.nodes()[b]);
                let len = space.mesh().facet_length(f);
                for (s, w) in gauss3_unit() {
                    let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                    let val = g(t, x);
                    let shape = [(1.0 - s) * (1.0 - 2.0 * s), s * (2.0 * s - 1.0), 4.0 * s * (1.0 - s)];
                    for (node, phi) in [a, b, m].into_iter().zip(shape) {
                        for c in 0..2 {
                            out[space.velocity_dof(c, node)] += len * w * val[c] * phi;
                        }
                    }
                }
            }
        }
        if let Some(force) = &self.body_force {
            let rule = &self.assembly.rule;
            for k in 0..space.num_elements() {
                let g = space.geometry(k);
                let en = space.element_nodes(k);
                for (l, w) in rule.points.iter().zip(&rule.weights) {
                    let val = force(t, g.point(*l));
                    let phi = p2_values(*l);
                    for a in 0..P2_LOCAL {
                        for c in 0..2 {
                            out[space.velocity_dof(c, en[a])] += w * g.area * val[c] * phi[a];
                        }
                    }
                }
            }
        }
        out
    }

    /// `B u` for the velocity part of `state`.
    pub fn divergence_residual(&self, state: &[f64]) -> Vec<f64> {
        self.assembly.divergence(state)
    }
}

impl Problem for NavierStokesProblem {
    fn partition(&self) -> &Arc<ComponentPartition> {
        &self.partition
    }

    fn residual(&self, t: f64, udot: &[f64], u: &[f64]) -> Vec<f64> {
        let mut r = self.assembly.mass.mul_vec(udot);
        self.assembly.linear.mul_vec_add(u, &mut r);
        if self.advection {
            self.assembly.add_advection_residual(u, &mut r);
        }
        if self.body_force.is_some() || self.conditions.iter().any(|(_, bc)| matches!(bc, BoundaryCondition::Traction(_)))
        {
            for (ri, li) in r.iter_mut().zip(self.load(t)) {
                *ri -= li;
            }
        }
        for d in &self.dirichlet {
            r[d.dof] = u[d.dof] - self.dirichlet_value(d, t);
        }
        r
    }

    fn jacobian(&self, _t: f64, _udot: &[f64], u: &[f64], shift: f64) -> CsrMatrix {
        let a = &self.assembly;
        let mut values: Vec<f64> = a.mass.values().iter().zip(a.linear.values()).map(|(m, l)| shift * m + l).collect();
        if self.advection {
            a.add_advection_jacobian(u, &mut values);
        }
        let mut jac = CsrMatrix::new(a.pattern.clone(), values);
        for &i in &self.dirichlet_dofs {
            jac.set_identity_row(i);
        }
        jac
    }

    fn l2_norm(&self, component: usize, v: &[f64]) -> f64 {
        let m = if component == 0 { &self.assembly.velocity_mass } else { &self.assembly.pressure_mass };
        m.quadratic_form(v).max(0.0).sqrt()
    }

    fn initial_state(&self, t0: f64) -> StateVector {
        let mut s = StateVector::zeros(self.partition.clone());
        self.apply_constraints(t0, s.values_mut());
        s
    }

    fn dirichlet_dofs(&self) -> &[usize] {
        &self.dirichlet_dofs
    }

    fn apply_constraints(&self, t: f64, u: &mut [f64]) {
        for d in &self.dirichlet {
            u[d.dof] = self.dirichlet_value(d, t);
        }
    }
}
