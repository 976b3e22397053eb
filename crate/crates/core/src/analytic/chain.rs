//! Closed forms of the per-category backoff chain: window schedule,
//! repetition count, collision and busy probabilities, and the transmission
//! probabilities obtained by normalising the chain.

use serde::{Deserialize, Serialize};

use super::scenario::{AccessCategoryConfig, ArrivalKind, ArrivalModel, DetectionModel};
use crate::{Error, Result};

/// Half-width of the neighbourhood of `p_c1 = 1/2` (and `p_c1 = 1`) in which
/// geometric sums are evaluated term by term.
const GEOMETRIC_GUARD: f64 = 1e-6;

/// Contention window `W_{i,j}` of a backoff stage.
pub fn cw_schedule(ac: &AccessCategoryConfig, stage: u32) -> Result<u32> {
    if stage > ac.retry_limit {
        return Err(Error::domain(format!(
            "backoff stage {stage} exceeds retry limit {}",
            ac.retry_limit
        )));
    }
    let doublings = stage.min(ac.doubling_limit());
    Ok(ac.base_window() << doublings)
}

/// Distribution of the number of copies sent, `p(Z = 1..4)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZDistribution {
    pub probs: [f64; 4],
}

impl ZDistribution {
    pub const SINGLE: ZDistribution = ZDistribution { probs: [1.0, 0.0, 0.0, 0.0] };

    pub fn p(&self, copies: usize) -> f64 {
        self.probs[copies - 1]
    }

    /// Iterates `(copies, probability)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.probs.iter().enumerate().map(|(i, &p)| (i as u32 + 1, p))
    }

    pub fn mean_copies(&self) -> f64 {
        self.iter().map(|(k, p)| k as f64 * p).sum()
    }
}

/// Repetition-count distribution for the given detection probabilities.
///
/// Each copy is either detected and decoded (`p_d p_s`, sending stops),
/// detected but not decoded, or missed entirely. The fourth copy is sent
/// whenever the first three fail.
pub fn z_distribution(d: &DetectionModel) -> ZDistribution {
    let (pd, ps) = (d.p_preamble, d.p_decode);
    let z1 = pd * ps;
    let z2 = pd * (1.0 - ps) * ps * pd + (1.0 - pd) * ps * pd;
    let z3 = pd * (1.0 - ps) * pd * (1.0 - ps) * ps * pd
        + pd * (1.0 - ps) * (1.0 - pd) * pd * ps
        + (1.0 - pd) * pd * (1.0 - ps) * ps * pd
        + (1.0 - pd) * (1.0 - pd) * pd * ps;
    let z4 = 1.0 - (z1 + z2 + z3);
    ZDistribution { probs: [z1, z2, z3, z4] }
}

/// External collision probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExternalCollision {
    /// Probability that a single copy meets another station's transmission.
    pub p_ex: f64,
    /// Probability that a burst of repetitions suffers an external collision.
    pub p_o: f64,
}

/// Collision probability of a burst of `copies` copies, as the expanded
/// inclusion-exclusion polynomials in `p_ex`.
pub fn burst_collision(p_ex: f64, copies: u32) -> f64 {
    let p = p_ex;
    match copies {
        1 => p,
        2 => 2.0 * p - p * p,
        3 => 3.0 * p - 3.0 * p * p + p * p * p,
        4 => 4.0 * p - 6.0 * p * p + 4.0 * p * p * p - p * p * p * p,
        _ => panic!("at most four copies are sent, got {copies}"),
    }
}

pub fn external_collision(beta_sum: f64, n_stations: u32, z: &ZDistribution) -> ExternalCollision {
    let others = n_stations.saturating_sub(1) as i32;
    let p_ex = 1.0 - (1.0 - beta_sum).powi(others);
    let p_o = z.iter().map(|(k, pz)| pz * burst_collision(p_ex, k)).sum();
    ExternalCollision { p_ex, p_o }
}

/// Internal (same-station) collision probabilities `(p_v0, p_v1)`.
/// AC0 always wins, AC1 loses whenever AC0 transmits.
pub fn internal_collision(omega0: f64) -> (f64, f64) {
    (0.0, omega0)
}

/// Probability that a backoff slot of the given category is busy.
///
/// AC0 sees other stations only; AC1 additionally defers to its own
/// station's AC0.
pub fn busy_probability(beta: [f64; 2], omega0: f64, n_stations: u32, ac_index: usize) -> f64 {
    let others = n_stations.saturating_sub(1) as i32;
    let idle_ext = (1.0 - beta[0] - beta[1]).powi(others);
    match ac_index {
        0 => 1.0 - idle_ext,
        1 => 1.0 - idle_ext * (1.0 - omega0),
        _ => panic!("only AC0 and AC1 are modelled"),
    }
}

/// Probability of at least one arrival within `interval` seconds.
pub fn arrival_probability(m: &ArrivalModel, interval: f64) -> Result<f64> {
    if !(interval.is_finite() && interval > 0.0) {
        return Err(Error::domain(format!("arrival interval must be positive, got {interval}")));
    }
    if !(m.rate.is_finite() && m.rate >= 0.0) {
        return Err(Error::domain(format!("arrival rate must be non-negative, got {}", m.rate)));
    }
    let mean = m.rate * interval;
    match m.kind {
        ArrivalKind::Poisson => Ok(-(-mean).exp_m1()),
        ArrivalKind::Periodic if mean > 1.0 => Err(Error::domain(format!(
            "periodic arrivals: rate*interval = {mean} exceeds one"
        ))),
        ArrivalKind::Periodic => Ok(mean),
    }
}

fn post_queue_term(rho: f64, p_arrival: f64) -> Result<f64> {
    if rho >= 1.0 {
        return Ok(0.0);
    }
    if p_arrival <= 0.0 {
        return Err(Error::Singular {
            term: "(1 - rho) / p_a",
            detail: format!("arrival probability is zero with rho = {rho}"),
        });
    }
    Ok((1.0 - rho) / p_arrival)
}

/// Transmission probability of AC0,
/// `[(W00 + 1) / (2 (1 - p_b0)) + (1 - rho0) / p_a0]^-1`.
pub fn omega_ac0(w00: u32, p_busy: f64, rho: f64, p_arrival: f64) -> Result<f64> {
    if p_busy >= 1.0 {
        return Err(Error::Singular {
            term: "1 - p_b0",
            detail: "AC0 busy probability is one".into(),
        });
    }
    let backoff = (w00 as f64 + 1.0) / (2.0 * (1.0 - p_busy));
    Ok(1.0 / (backoff + post_queue_term(rho, p_arrival)?))
}

/// Inputs of the AC1 transmission probability.
#[derive(Debug, Clone, Copy)]
pub struct Ac1ChainInput {
    pub w10: u32,
    /// Number of window doublings `M`.
    pub doublings: u32,
    /// Retry limit `L`.
    pub retry_limit: u32,
    pub p_collision: f64,
    pub p_busy: f64,
    pub rho: f64,
    pub p_arrival: f64,
}

/// `sum_{j=1}^{m} x^j`, term by term.
fn geometric_tail(x: f64, m: u32) -> f64 {
    let mut acc = 0.0;
    let mut pow = 1.0;
    for _ in 0..m {
        pow *= x;
        acc += pow;
    }
    acc
}

/// `sum_{j=1}^{m} x^j` in closed form, switching to the finite sum near
/// the removable singularity at `x = 1`.
fn geometric_tail_closed(x: f64, m: u32) -> f64 {
    if (1.0 - x).abs() < GEOMETRIC_GUARD {
        geometric_tail(x, m)
    } else {
        x * (1.0 - x.powi(m as i32)) / (1.0 - x)
    }
}

/// `sum_{j=0}^{n-1} x^j` in closed form with the same guard.
fn geometric_head_closed(x: f64, n: u32) -> f64 {
    if (1.0 - x).abs() < GEOMETRIC_GUARD {
        1.0 + geometric_tail(x, n.saturating_sub(1))
    } else {
        (1.0 - x.powi(n as i32)) / (1.0 - x)
    }
}

/// Expected number of backoff slots over all stages, before the
/// `1 / (2 (1 - p_b1))` factor:
/// `(W - 1) + W 2p (1 - (2p)^M) / (1 - 2p) - p (1 - p^M) / (1 - p)
///  + (2^M W - 1) (1 - p^{L-M}) p^{M+1} / (1 - p)`.
fn ac1_backoff_sum(w: f64, m: u32, l: u32, p: f64) -> f64 {
    let doubled = w * geometric_tail_closed(2.0 * p, m);
    let plain = geometric_tail_closed(p, m);
    let capped = if l > m {
        (2f64.powi(m as i32) * w - 1.0) * p.powi(m as i32 + 1) * geometric_head_closed(p, l - m)
    } else {
        0.0
    };
    (w - 1.0) + doubled - plain + capped
}

/// Transmission probability of AC1.
///
/// The number of doublings is clamped to the retry limit, since stages
/// beyond `L` never occur.
pub fn omega_ac1(input: &Ac1ChainInput) -> Result<f64> {
    let Ac1ChainInput { w10, doublings, retry_limit, p_collision: p, p_busy, rho, p_arrival } = *input;
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Singular {
            term: "1 - p_c1",
            detail: format!("AC1 collision probability {p} outside [0, 1)"),
        });
    }
    if p_busy >= 1.0 {
        return Err(Error::Singular {
            term: "1 - p_b1",
            detail: "AC1 busy probability is one".into(),
        });
    }
    let m = doublings.min(retry_limit);
    let attempts = geometric_head_closed(p, retry_limit + 1);
    let backoff = ac1_backoff_sum(w10 as f64, m, retry_limit, p) / (2.0 * (1.0 - p_busy));
    Ok(attempts / (attempts + backoff + post_queue_term(rho, p_arrival)?))
}
