//! Crank–Nicolson finite differences for `iy' + div(a∇y) + p·y = F` with a
//! piecewise-constant coefficient, boundary traces and trace norms.

mod banded;
mod grid;
pub mod io;
mod stepping;
mod trace;

pub use banded::BandedLu;
pub use grid::{BoundaryNode, Grid2D};
pub use stepping::{
    derivative_mismatch, equation_time_derivative, extend_time, interface_flux_jump, restrict_nonnegative,
    solve_forward, solve_linearized, solve_time_derivative, time_steps, CrankNicolson, Dirichlet, ExtensionMode,
    FieldRole, SpaceTimeField, EXTENSION_TOL,
};
pub use trace::{h1l2_boundary_norm, neumann_trace, BoundaryTrace};
