//! Two-category backoff chain with blind repetitions and its fixed point.

mod chain;
mod scenario;
mod solver;

pub use chain::{
    arrival_probability, burst_collision, busy_probability, cw_schedule, external_collision,
    internal_collision, omega_ac0, omega_ac1, z_distribution, Ac1ChainInput, ExternalCollision,
    ZDistribution,
};
pub use scenario::{
    AccessCategory, AccessCategoryConfig, ArrivalKind, ArrivalModel, ArrivalWindow, DetectionModel,
    NetworkScenario, PhyProfile,
};
pub use solver::{arrival_interval, solve_fixed_point, FixedPointSolution, SolverOptions};
