//! Parameter sweeps over the analytic model, the reliability curve, and the
//! headway sweep that couples the platoon side to the MAC model.

use std::fmt;
use std::str::FromStr;

use crate::analytic::{solve_fixed_point, FixedPointSolution, NetworkScenario, SolverOptions};
use crate::delay::{delay_moments, reliability, DelayMoments, TransmissionProfile};
use crate::par::{self, Strategy};
use crate::platoon::{GapMapping, PlatoonSetup, StabilityResult};
use crate::sim::{run_all, SimConfig, SimStats};
use crate::{Error, Result};

/// Converged model and the derived delay figures for one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Analysis {
    pub solution: FixedPointSolution,
    pub moments: [DelayMoments; 2],
    pub t_tr: f64,
}

impl Analysis {
    pub fn reliability(&self, tau: f64) -> [f64; 2] {
        self.moments.map(|m| reliability(&m, self.t_tr, tau))
    }
}

pub fn analyze(s: &NetworkScenario, opts: &SolverOptions) -> Result<Analysis> {
    let solution = solve_fixed_point(s, opts)?;
    let moments = delay_moments(s, &solution, opts.grid)?;
    Ok(Analysis { solution, moments, t_tr: TransmissionProfile::for_scenario(s).t_tr })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    NStations,
    DataRate,
    PacketBits,
    Lambda0,
    Lambda1,
    Headway,
    Tau,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 7] = [
        SweepAxis::NStations,
        SweepAxis::DataRate,
        SweepAxis::PacketBits,
        SweepAxis::Lambda0,
        SweepAxis::Lambda1,
        SweepAxis::Headway,
        SweepAxis::Tau,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::NStations => "n_stations",
            SweepAxis::DataRate => "data_rate",
            SweepAxis::PacketBits => "packet_bits",
            SweepAxis::Lambda0 => "lambda0",
            SweepAxis::Lambda1 => "lambda1",
            SweepAxis::Headway => "headway",
            SweepAxis::Tau => "tau",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config(format!("unknown sweep axis {s:?}")))
    }
}

/// `steps` points from `from` to `to` inclusive, evenly spaced on a linear
/// or logarithmic scale.
pub fn axis_values(from: f64, to: f64, steps: usize, log_spaced: bool) -> Result<Vec<f64>> {
    if steps == 0 || !from.is_finite() || !to.is_finite() {
        return Err(Error::config("sweep range must be finite and non-empty"));
    }
    if log_spaced && (from <= 0.0 || to <= 0.0) {
        return Err(Error::config("log-spaced sweeps need positive bounds"));
    }
    if steps == 1 {
        return Ok(vec![from]);
    }
    let last = (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| {
            let f = i as f64 / last;
            match (i, log_spaced) {
                (0, _) => from,
                (i, _) if i == steps - 1 => to,
                (_, true) => (from.ln() + f * (to.ln() - from.ln())).exp(),
                (_, false) => from + f * (to - from),
            }
        })
        .collect())
}

/// Everything a sweep point may need.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepContext {
    pub scenario: NetworkScenario,
    pub solver: SolverOptions,
    pub platoon: PlatoonSetup,
    pub strategy: Strategy,
}

/// One row of a delay sweep; NaN marks a failed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayRow {
    pub x: f64,
    pub mean: [f64; 2],
    pub stddev: [f64; 2],
}

impl DelayRow {
    fn failed(x: f64) -> Self {
        DelayRow { x, mean: [f64::NAN; 2], stddev: [f64::NAN; 2] }
    }

    fn from_moments(x: f64, m: &[DelayMoments; 2]) -> Self {
        DelayRow { x, mean: m.map(|m| m.mean), stddev: m.map(|m| m.stddev) }
    }
}

impl SweepContext {
    /// Scenario at one point of a MAC-parameter axis.
    pub fn scenario_at(&self, axis: SweepAxis, x: f64) -> Result<NetworkScenario> {
        let mut s = self.scenario.clone();
        match axis {
            SweepAxis::NStations => {
                if !(x >= 1.0 && x.is_finite()) {
                    return Err(Error::domain(format!("station count {x} below one")));
                }
                s.n_stations = x.round() as u32;
            }
            SweepAxis::DataRate => s.phy.data_rate = x,
            SweepAxis::PacketBits => s.phy.packet_payload = x,
            SweepAxis::Lambda0 => s.ac[0].arrival.rate = x,
            SweepAxis::Lambda1 => s.ac[1].arrival.rate = x,
            SweepAxis::Headway => {
                let r = self.platoon.evaluate(x)?;
                s.n_stations = self.platoon.stations_in_range(x)?;
                s.ac[0].arrival.rate = r.lambda0;
            }
            SweepAxis::Tau => return Err(Error::config("tau is a reliability axis, not a scenario axis")),
        }
        Ok(s)
    }

    /// Mean and standard deviation of both categories along an axis. Failed
    /// points are logged and reported as NaN.
    pub fn delay_sweep(&self, axis: SweepAxis, values: &[f64]) -> Vec<DelayRow> {
        par::map(self.strategy, values, |&x| {
            let point = self.scenario_at(axis, x).and_then(|s| analyze(&s, &self.solver));
            match point {
                Ok(a) => DelayRow::from_moments(x, &a.moments),
                Err(e) => {
                    log::warn!("{axis} = {x}: {e}");
                    DelayRow::failed(x)
                }
            }
        })
    }

    /// Reliability of both categories at each `tau` (seconds).
    pub fn reliability_curve(&self, taus: &[f64]) -> Result<Vec<(f64, [f64; 2])>> {
        let a = analyze(&self.scenario, &self.solver)?;
        Ok(taus.iter().map(|&t| (t, a.reliability(t))).collect())
    }

    /// Headway sweep: gap acceptance, critical delay and budget, MAC delay
    /// and reliability at the budget, optionally with simulated delays.
    pub fn platoon_sweep(
        &self,
        headways: &[f64],
        mapping: GapMapping,
        sim: Option<&SimConfig>,
    ) -> Vec<PlatoonRow> {
        let mut setup = self.platoon;
        setup.gap.mapping = mapping;
        let ctx = SweepContext { platoon: setup, ..self.clone() };
        par::map(self.strategy, headways, |&y| {
            ctx.platoon_point(y, sim).unwrap_or_else(|e| {
                log::warn!("headway {y} m ({mapping:?} mapping): {e}");
                PlatoonRow::failed(y)
            })
        })
    }

    fn platoon_point(&self, y: f64, sim: Option<&SimConfig>) -> Result<PlatoonRow> {
        let stability = self.platoon.evaluate(y)?;
        if stability.tau_c <= 0.0 {
            log::warn!(
                "headway {y} m: critical delay {:.6} s is not positive; no communication budget",
                stability.tau_c
            );
        }
        let scenario = self.scenario_at(SweepAxis::Headway, y)?;
        let a = analyze(&scenario, &self.solver)?;
        let simulated = match sim {
            Some(cfg) => {
                let cfg = SimConfig { scenario: scenario.clone(), ..cfg.clone() };
                let runs = run_all(&cfg, self.strategy)?;
                Some(SimStats::pooled(&runs))
            }
            None => None,
        };
        Ok(PlatoonRow {
            headway: y,
            n_stations: scenario.n_stations,
            stability,
            moments: a.moments,
            reliability: a.reliability(stability.tau_cr),
            simulated,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlatoonRow {
    pub headway: f64,
    pub n_stations: u32,
    pub stability: StabilityResult,
    pub moments: [DelayMoments; 2],
    /// Reliability at `tau = tau_cr`.
    pub reliability: [f64; 2],
    pub simulated: Option<SimStats>,
}

impl PlatoonRow {
    fn failed(y: f64) -> Self {
        let nan = f64::NAN;
        PlatoonRow {
            headway: y,
            n_stations: 0,
            stability: StabilityResult {
                y_star: y,
                speed: nan,
                v_prime: nan,
                d_tilde: nan,
                sigma_root: nan,
                sigma_other: nan,
                log_argument: nan,
                tau_c: nan,
                tau_cr: nan,
                p_accept: nan,
                lambda0: nan,
            },
            moments: [DelayMoments { mean: nan, stddev: nan }; 2],
            reliability: [nan; 2],
            simulated: None,
        }
    }

    pub fn is_failed(&self) -> bool {
        self.stability.tau_c.is_nan()
    }
}
