//! Occupation derivatives of test functionals, their finite-difference
//! checks, and the residual of the Ito formula along simulated paths.

mod consistency;
mod functional;
mod ito;

pub use consistency::{derivative_consistency, DerivativeReport, ErrorRow, OCC_STEPS, SPACE_STEPS};
pub use functional::{occ_derivative_fd, FunctionalJet, LinearOuter, OuterFn, OuterJet, SmoothOuter, TestFunctional};
pub use ito::{ito_convergence, ito_residual, ConvergenceReport, ResidualRow};
