//! Stationary analysis of production-inventory networks in which a single
//! supplier replenishes several locations under a strict-priority
//! load-balancing rule.
//!
//! Each location `j` is a single-server queue with Poisson demand `lambda_j`
//! and queue-length-dependent service `mu_j(n)`; serving a customer consumes
//! one item from the local inventory, demand arriving at an empty inventory
//! is lost, and every consumed item triggers an order at the supplier
//! (exponential, rate `nu`). A finished item goes to the location with the
//! largest deficit to its base-stock level, ties broken uniformly.
//!
//! The stationary distribution factorizes as `pi(n, k) = xi(n) * theta(k)`.
//! `theta` is computed three ways ([`solve_theta_exact`],
//! [`theta_unit_base_stock`], [`solve_theta_recursive`]) and checked against
//! simulation ([`simulate`]) and the structural identities in [`analysis`].

pub mod analysis;
pub mod closed_form;
pub mod error;
pub mod exact_solver;
pub mod generator;
pub mod model;
pub mod recursive_solver;
pub mod simulator;

pub use analysis::{
    check_cut_heterogeneous, check_cut_homogeneous, check_symmetry, ergodicity_check,
    inventory_marginal, queue_marginal, CutFamily, CutReport, ErgodicityReport, QueueMarginal,
};
pub use closed_form::theta_unit_base_stock;
pub use error::{Error, Result};
pub use exact_solver::{
    solve_config_exact, solve_pi_truncated, solve_theta_exact, Provenance, ThetaMeasure,
    TruncatedPi,
};
pub use generator::{
    build_reduced_generator, full_transitions, ReducedGenerator, Transition, TransitionKind,
    TransitionList,
};
pub use model::{
    enumerate_inventory_states, routing_prob, FullState, InventorySpace, InventoryState,
    NetworkConfig, ServiceRateProfile,
};
pub use recursive_solver::{
    gbe_residual, solve_theta_recursive, solve_theta_recursive_traced, AffineKappa, PhaseRecord,
    RecursiveSolution, ThetaTable,
};
pub use simulator::{
    decoupling_test, simulate, simulate_replications, Dynamics, SimulationOptions, SimulationResult,
};
