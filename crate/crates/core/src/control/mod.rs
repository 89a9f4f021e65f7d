//! Cost estimation, policy comparison, the Hamiltonian, and stability
//! diagnostics for coupled paths.
//!
//! Values are computed over finite policy sets only, so a minimized cost is
//! an upper bound on the value function and a maximized one a lower bound.

mod cil;
mod cost;
mod hamiltonian;
mod stability;

pub use cil::{cil_trace_check, is_admissible, sample_admissible_pairs, CilReport, GammaPair};
pub use cost::{cost_samples, estimate_cost, value_over_policies, PolicyTable, Sense};
pub use hamiltonian::{generator_term, hamiltonian, hamiltonian_with_sense, HamiltonianValue, JetPoint};
pub use stability::{
    coupled_exit_pair, exit_time_diagnostic, gronwall_diagnostic, holder_probe, ExitPair, ExitTimeReport,
    GronwallReport, HolderReport, HolderRow, StabilityConstants, COUPLED_TRUNCATION,
};
