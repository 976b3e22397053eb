use serde::{Deserialize, Serialize};

use super::chain::{
    arrival_probability, busy_probability, cw_schedule, external_collision, internal_collision,
    omega_ac0, omega_ac1, z_distribution, Ac1ChainInput, ZDistribution,
};
use super::scenario::{ArrivalKind, ArrivalWindow, NetworkScenario};
use crate::delay::{ServiceModel, TimeGrid, TransmissionProfile};
use crate::{Error, Result};

/// How far an iterate may stray outside `[0, 1]` before it is reported.
const PROBABILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Weight of the newly computed utilisation in each update.
    pub damping: f64,
    /// Stop once `|rho_computed - rho_used| <= tolerance` for both categories.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub initial_rho: [f64; 2],
    /// Grid on which service times are evaluated.
    pub grid: TimeGrid,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            damping: 0.5,
            tolerance: 1e-5,
            max_iterations: 10_000,
            initial_rho: [0.5, 0.5],
            grid: TimeGrid::default(),
        }
    }
}

/// Converged chain probabilities. Two-element arrays are indexed by access
/// category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSolution {
    pub omega: [f64; 2],
    pub beta: [f64; 2],
    pub p_busy: [f64; 2],
    /// Per-copy external collision probability `p_ex`.
    pub p_ext_single: f64,
    /// Burst external collision probability `p_o`.
    pub p_ext: f64,
    pub p_internal: [f64; 2],
    pub p_coll_ac1: f64,
    pub rho: [f64; 2],
    /// Per-interval arrival probabilities used in the chain.
    pub p_arrival: [f64; 2],
    /// Mean service times in seconds at the returned probabilities.
    pub service_time: [f64; 2],
    pub iterations: usize,
    /// Largest `|rho_computed - rho_used|` at the last iteration.
    pub residual: f64,
}

/// Interval over which arrivals are counted for category `ac`.
pub fn arrival_interval(s: &NetworkScenario, ac: usize, p_busy: f64, z: &ZDistribution) -> f64 {
    match s.arrival_window {
        ArrivalWindow::SlotTime => s.phy.slot_time,
        ArrivalWindow::Fixed(eps) => eps,
        ArrivalWindow::BackoffStep => {
            let tp = TransmissionProfile::for_scenario(s);
            let burst: f64 = z
                .iter()
                .map(|(k, p)| p * (k as f64 * tp.t_tr + (k - 1) as f64 * tp.sifs))
                .sum();
            (1.0 - p_busy) * s.phy.slot_time + p_busy * (burst + s.ac[ac].aifs_time(&s.phy))
        }
    }
}

/// Chain state for a given total per-station transmission probability.
struct Inner<'a> {
    s: &'a NetworkScenario,
    z: ZDistribution,
    rho: [f64; 2],
}

impl Inner<'_> {
    fn active(&self, ac: usize) -> bool {
        self.s.ac[ac].arrival.rate > 0.0
    }

    fn p_arrival(&self, ac: usize, p_busy: f64) -> Result<f64> {
        let m = &self.s.ac[ac].arrival;
        let eps = arrival_interval(self.s, ac, p_busy, &self.z);
        // A backoff step longer than the packet period always sees an arrival.
        if self.s.arrival_window == ArrivalWindow::BackoffStep
            && m.kind == ArrivalKind::Periodic
            && m.rate * eps > 1.0
        {
            return Ok(1.0);
        }
        arrival_probability(m, eps)
    }

    /// Evaluates every chain quantity assuming `beta_0 + beta_1 = x`.
    fn evaluate(&self, x: f64) -> Result<FixedPointSolution> {
        let s = self.s;
        let n = s.n_stations;
        let ext = external_collision(x, n, &self.z);
        let p_b0 = busy_probability([x, 0.0], 0.0, n, 0);
        let pa0 = self.p_arrival(0, p_b0)?;
        let omega0 = if self.active(0) {
            omega_ac0(cw_schedule(&s.ac[0], 0)?, p_b0, self.rho[0], pa0)?
        } else {
            0.0
        };
        let (pv0, pv1) = internal_collision(omega0);
        let p_c1 = pv1 + (1.0 - pv1) * ext.p_o;
        let p_b1 = busy_probability([x, 0.0], omega0, n, 1);
        let pa1 = self.p_arrival(1, p_b1)?;
        let ac1 = &s.ac[1];
        let omega1 = if self.active(1) {
            omega_ac1(&Ac1ChainInput {
                w10: ac1.base_window(),
                doublings: ac1.doubling_limit(),
                retry_limit: ac1.retry_limit,
                p_collision: p_c1,
                p_busy: p_b1,
                rho: self.rho[1],
                p_arrival: pa1,
            })?
        } else {
            0.0
        };
        Ok(FixedPointSolution {
            omega: [omega0, omega1],
            beta: [omega0, omega1 * (1.0 - omega0)],
            p_busy: [p_b0, p_b1],
            p_ext_single: ext.p_ex,
            p_ext: ext.p_o,
            p_internal: [pv0, pv1],
            p_coll_ac1: p_c1,
            rho: self.rho,
            p_arrival: [pa0, pa1],
            service_time: [0.0; 2],
            iterations: 0,
            residual: 0.0,
        })
    }

    /// `beta_0 + beta_1 - x`, or `-1` where the chain is singular (which
    /// only happens as `x -> 1`).
    fn gap(&self, x: f64) -> Result<f64> {
        match self.evaluate(x) {
            Ok(sol) => Ok(sol.beta[0] + sol.beta[1] - x),
            Err(Error::Singular { .. }) => Ok(-1.0),
            Err(e) => Err(e),
        }
    }

    /// Bisection on `x`; the gap is positive at 0 and negative at 1.
    fn solve(&self) -> Result<FixedPointSolution> {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        if self.gap(lo)? <= 0.0 {
            return self.evaluate(lo);
        }
        while hi - lo > f64::EPSILON * hi.max(1e-300) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.gap(mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.evaluate(lo)
    }
}

fn check_probabilities(sol: &FixedPointSolution) -> Result<()> {
    let named = [
        ("omega0", sol.omega[0]),
        ("omega1", sol.omega[1]),
        ("beta0", sol.beta[0]),
        ("beta1", sol.beta[1]),
        ("p_b0", sol.p_busy[0]),
        ("p_b1", sol.p_busy[1]),
        ("p_ex", sol.p_ext_single),
        ("p_o", sol.p_ext),
        ("p_v1", sol.p_internal[1]),
        ("p_c1", sol.p_coll_ac1),
    ];
    for (name, v) in named {
        if !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&v) {
            return Err(Error::Divergence { name, value: v });
        }
    }
    Ok(())
}

fn service_means(s: &NetworkScenario, sol: &FixedPointSolution, grid: TimeGrid) -> Result<[f64; 2]> {
    Ok([
        ServiceModel::ac0(s, grid, sol.p_busy[0])?.mean(),
        ServiceModel::ac1(s, grid, sol.p_busy[1], sol.p_coll_ac1)?.mean(),
    ])
}

/// Solves the coupled chain equations and the utilisation feedback
/// `rho_i = min(lambda_i T_Si, 1)` by damped substitution on `rho`.
///
/// For each `rho` the chain equations are solved exactly (to machine
/// precision) by bisection on the total transmission probability, so the
/// returned probabilities are mutually consistent and only `rho` carries
/// iteration error.
pub fn solve_fixed_point(s: &NetworkScenario, opts: &SolverOptions) -> Result<FixedPointSolution> {
    s.validate()?;
    let z = z_distribution(&s.detection);
    let mut rho: [f64; 2] =
        std::array::from_fn(|i| if s.ac[i].arrival.rate > 0.0 { opts.initial_rho[i] } else { 0.0 });
    let mut residual = f64::INFINITY;
    for iteration in 1..=opts.max_iterations {
        let inner = Inner { s, z, rho };
        let mut sol = inner.solve()?;
        check_probabilities(&sol)?;
        let means = service_means(s, &sol, opts.grid)?;
        let computed: [f64; 2] =
            std::array::from_fn(|i| (s.ac[i].arrival.rate * means[i]).min(1.0));
        residual = (0..2).map(|i| (computed[i] - rho[i]).abs()).fold(0.0, f64::max);
        if !residual.is_finite() {
            return Err(Error::Divergence { name: "rho", value: residual });
        }
        if residual <= opts.tolerance {
            sol.service_time = means;
            sol.iterations = iteration;
            sol.residual = residual;
            return Ok(sol);
        }
        for i in 0..2 {
            rho[i] = (1.0 - opts.damping) * rho[i] + opts.damping * computed[i];
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iterations, residual })
}
