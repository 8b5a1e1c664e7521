//! Finite-element discretization of incompressible flow.

pub mod benchmarks;
pub mod export;
pub mod mesh;
pub mod navier_stokes;
pub mod quadrature;
pub mod space;

pub use benchmarks::{
    cfd300, channel_flow, inflow_velocity, inlet_pressure, pressure_impulse_channel, ramp, step_flow, CHANNEL_VISCOSITY,
    STEP_VISCOSITY,
};
pub use mesh::{build_channel_mesh, build_step_mesh, BoundaryFacet, BoundaryTag, TriangularMesh};
pub use navier_stokes::{BoundaryCondition, NavierStokesProblem, NsAssembly, VectorField};
pub use space::TaylorHoodSpace;
