//! Finite-difference laboratory for the heat equation on `(0, 1)` with a
//! Neumann condition at the left end and the feedback condition
//! `g'(1) = g(1) - g(0)` at the right end.
//!
//! The crate builds the free generator (`g'(1) = 0`) and the closed-loop
//! generator, the Dirichlet map, resolvents, matrix exponentials and mild
//! solutions, and a set of estimators for resolvent suprema, R-bounds and
//! maximal-regularity constants.

pub mod analytic;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod maxreg;
pub mod nonauto;
pub mod operators;
pub mod rbound;
pub mod semigroup;

pub use error::{LabError, Result};
pub use grid::{bochner_norm, lp_norm, make_grid, time_derivative, Grid, GridFunction, TimeGrid, TimeSignal};
pub use operators::{
    assemble_extended, dirichlet_closed_form, dirichlet_map, generator_matrix, greiner_residual,
    perturbation_matrix, resolvent_apply, resolvent_identity_residual, spectrum, transfer_value,
    BoundaryCondition, BoundaryFunctional, DirichletMap, ExtendedSystem, LinearMap,
};
