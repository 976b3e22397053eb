//! Analytical and simulation tooling for IEEE 802.11bd EDCA with blind
//! repetitions.
//!
//! The crate is split along the lines of the model:
//!
//! * [`analytic`] holds the two-access-category backoff chain and the coupled
//!   fixed point for transmission, busy and collision probabilities.
//! * [`delay`] turns a converged solution into MAC access delay
//!   distributions, moments and the shifted-exponential reliability curve.
//! * [`sim`] is a slotted discrete-event simulator of the same protocol, used
//!   to cross-check the analysis.
//! * [`platoon`] covers the car-following side: optimal velocity function,
//!   critical feedback delay, gap acceptance and delay-ODE integration.
//! * [`config`] and [`sweep`] provide the scenario document and the parameter
//!   sweeps that produce CSV tables.
//!
//! Independent work items (sweep points, simulation runs) are distributed with
//! rayon when the `parallel` feature is enabled, and run sequentially otherwise.
//! Results do not depend on which path is taken.

pub mod analytic;
pub mod config;
pub mod delay;
mod error;
pub mod par;
pub mod platoon;
pub mod report;
pub mod sim;
pub mod sweep;

pub use error::{Error, Result};

pub use analytic::{
    AccessCategoryConfig, ArrivalKind, ArrivalModel, ArrivalWindow, DetectionModel,
    FixedPointSolution, NetworkScenario, PhyProfile, SolverOptions, ZDistribution,
};
pub use delay::{DelayMoments, DiscreteTimeDistribution, TimeGrid};
