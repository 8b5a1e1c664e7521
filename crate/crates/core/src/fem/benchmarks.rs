//! The two flow configurations: the backward-facing step and the straight
//! channel driven by an inlet pressure impulse.

use std::f64::consts::PI;
use std::sync::Arc;

use super::mesh::{build_channel_mesh, build_step_mesh, BoundaryTag};
use super::navier_stokes::{BoundaryCondition, NavierStokesProblem};
use super::space::TaylorHoodSpace;

/// Kinematic viscosity of the step flow (cm^2/s).
pub const STEP_VISCOSITY: f64 = 0.05;
/// Kinematic viscosity of the channel flow (cm^2/s).
pub const CHANNEL_VISCOSITY: f64 = 0.035;

/// Smooth start-up ramp: `(1 - cos(pi t)) / 2` on `[0, 1]`, then 1.
pub fn ramp(t: f64) -> f64 {
    if t <= 1.0 {
        0.5 * (1.0 - (PI * t).cos())
    } else {
        1.0
    }
}

/// Parabolic inflow on the step inlet `y in [2, 5]`, peaking at 5 cm/s.
pub fn inflow_velocity(t: f64, y: f64) -> [f64; 2] {
    [ramp(t) * 20.0 / 9.0 * (y - 2.0) * (5.0 - y), 0.0]
}

/// Inlet pressure of the channel: `5 (1 - cos(pi t / 0.2))` up to `t = 0.1`,
/// then 5.
pub fn inlet_pressure(t: f64) -> f64 {
    if t <= 0.1 {
        5.0 * (1.0 - (PI * t / 0.2).cos())
    } else {
        5.0
    }
}

/// Step flow with cell size `1 / 2^refine` cm: parabolic inflow, no-slip
/// walls, free outflow.
pub fn cfd300(refine: u32) -> NavierStokesProblem {
    step_flow(refine, STEP_VISCOSITY)
}

/// [`cfd300`] with a different viscosity.
pub fn step_flow(refine: u32, nu: f64) -> NavierStokesProblem {
    let space = Arc::new(TaylorHoodSpace::new(Arc::new(build_step_mesh(refine))));
    NavierStokesProblem::new(
        space,
        nu,
        vec![
            (BoundaryTag::Inlet, BoundaryCondition::Dirichlet(Arc::new(|t, x| inflow_velocity(t, x[1])))),
            (BoundaryTag::Wall, BoundaryCondition::Dirichlet(Arc::new(|_, _| [0.0, 0.0]))),
        ],
    )
    .expect("step problem is well formed")
}

/// Channel `[0,10] x [0,2.5]` with cell size `0.5 / 2^refine` cm, driven by
/// the traction `-p_in(t) n` on the inlet; no-slip walls, free outflow.
pub fn pressure_impulse_channel(refine: u32) -> NavierStokesProblem {
    channel_flow(refine, CHANNEL_VISCOSITY)
}

/// [`pressure_impulse_channel`] with a different viscosity.
pub fn channel_flow(refine: u32, nu: f64) -> NavierStokesProblem {
    let space = Arc::new(TaylorHoodSpace::new(Arc::new(build_channel_mesh(refine))));
    NavierStokesProblem::new(
        space,
        nu,
        vec![
            // outward normal at x = 0 is (-1, 0)
            (BoundaryTag::Inlet, BoundaryCondition::Traction(Arc::new(|t, _| [inlet_pressure(t), 0.0]))),
            (BoundaryTag::Wall, BoundaryCondition::Dirichlet(Arc::new(|_, _| [0.0, 0.0]))),
        ],
    )
    .expect("channel problem is well formed")
}
