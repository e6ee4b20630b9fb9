//! Radial chemotaxis with attractant consumption: grids, induced potentials,
//! Fokker-Planck solvers, weighted Poincare inequalities and the coupled
//! reaction system, plus the scaling harness built on top of them.

pub mod acceptance;
pub mod error;
pub mod fokker_planck;
pub mod fp_diagnostics;
pub mod grid;
pub mod harness;
pub mod poincare;
pub mod potential;
pub mod quadrature;
pub mod reaction;
pub mod special;
pub mod store;
pub mod tridiag;

pub use error::{Error, Result};
pub use fokker_planck::{dual_solve, fp_solve, stationary_state, z_and_w, FpOptions, FpTrajectory};
pub use grid::{build_graded_grid, GridSpec, ProfileKind, RadialGrid, RadialProfile};
pub use potential::{
    annulus_potential, concentration_compare, ground_state_weight, inverse_laplacian_radial, power_weight,
    radial_drift, AnnulusPotential, InducedPotential, RadialPotential, WeightSpec,
};
pub use reaction::{coupled_solve, diffusion_baseline_solve, half_time, tau_d_lower_bound, Params};
