//! Simulation and verification toolkit for distributed Nash equilibrium
//! seeking in aggregative games over switching communication graphs.
//!
//! Players minimize costs coupled through an aggregate of all actions while
//! estimating that aggregate by dynamic average consensus over a directed
//! switching graph. The graph may be disconnected at every instant; the
//! toolkit certifies the working assumptions (strong monotonicity, Lipschitz
//! moduli, weight balance, joint connectivity) numerically, derives the
//! explicit sufficient gain bound, integrates the closed loop with a
//! switch-aligned fixed-step scheme, and verifies convergence against a
//! centralized equilibrium oracle.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod game;
pub mod graph;
pub mod scenario;

pub use analysis::{delta_star, estimate_p, fit_decay_rate, verify_convergence};
pub use dynamics::{integrate, simulate_ancillary, AlgorithmParams, SystemState, Trajectory};
pub use error::{Error, Result};
pub use game::{estimate_constants, solve_ne, GameConstants, GameSpec, LqGame};
pub use graph::{generate_partition_schedule, SwitchingSchedule, WeightedDigraph};
