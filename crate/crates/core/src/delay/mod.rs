//! MAC access delay: service-time distributions, their moments, and the
//! shifted-exponential reliability curve.

mod dist;
mod moments;
mod pgf;

use serde::{Deserialize, Serialize};

pub use dist::{AtomSet, DiscreteTimeDistribution, TimeGrid, TRUNCATION_MASS};
pub use moments::{moments_from_pgf, pmf_from_pgf};
pub use pgf::{
    backoff_step_atoms, mean_packet_bits, pgf_backoff_step, pgf_service_ac0, pgf_service_ac1,
    pgf_transmission, transmission_atoms, transmission_time, ServiceModel, TransmissionProfile,
};

use crate::analytic::{FixedPointSolution, NetworkScenario};
use crate::Result;

/// Mean and standard deviation of the access delay, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayMoments {
    pub mean: f64,
    pub stddev: f64,
}

/// Probability that the access delay does not exceed `tau`, with the delay
/// modelled as `T_tr` plus an exponential of mean `stddev`.
pub fn reliability(moments: &DelayMoments, t_tr: f64, tau: f64) -> f64 {
    if tau < t_tr {
        return 0.0;
    }
    if moments.stddev <= 0.0 {
        return 1.0;
    }
    -(-(tau - t_tr) / moments.stddev).exp_m1()
}

/// Service models of both categories at a converged solution.
pub fn service_models(s: &NetworkScenario, sol: &FixedPointSolution, grid: TimeGrid) -> Result<[ServiceModel; 2]> {
    Ok([
        ServiceModel::ac0(s, grid, sol.p_busy[0])?,
        ServiceModel::ac1(s, grid, sol.p_busy[1], sol.p_coll_ac1)?,
    ])
}

/// Closed-form delay moments of both categories.
pub fn delay_moments(s: &NetworkScenario, sol: &FixedPointSolution, grid: TimeGrid) -> Result<[DelayMoments; 2]> {
    let [m0, m1] = service_models(s, sol, grid)?;
    Ok([m0.moments(), m1.moments()])
}
