//! Occupied processes: diffusions enlarged by their occupation flow.
//!
//! The crate is organised around the pair `(O, X)` of an occupation measure
//! and a state vector:
//!
//! - [`measure`]: particle measures, the separating family, cylindrical and
//!   parabolic norms, projections and the coercivity function.
//! - [`osde`]: Euler-Maruyama simulation of the controlled occupied SDE.
//! - [`calculus`]: occupation derivatives and the Ito-formula residual.
//! - [`control`]: cost estimation, Hamiltonians and stability diagnostics.
//! - [`pde`]: explicit monotone solvers for the projected equations.
//! - [`pricing`]: worked scenarios with independent oracles.

pub mod measure;
pub mod calculus;
pub mod control;
pub mod osde;
pub mod pde;
pub mod pricing;
pub mod stats;

pub use measure::{OccupationMeasure, ParabolicPoint, SeparatingFamily};
pub use stats::McEstimate;
