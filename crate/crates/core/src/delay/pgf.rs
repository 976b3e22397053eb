use super::dist::{AtomSet, DiscreteTimeDistribution, TimeGrid};
use super::DelayMoments;
use crate::analytic::{cw_schedule, z_distribution, FixedPointSolution, NetworkScenario, PhyProfile, ZDistribution};
use crate::Result;

/// Mean payload on air per access, counting repetitions: `sum_k p(Z=k) k P`.
pub fn mean_packet_bits(z: &ZDistribution, payload: f64) -> f64 {
    z.iter().map(|(k, p)| p * k as f64 * payload).sum()
}

/// `T_tr = PHY_H / R_b + (MAC_H + E[P]) / R_d + delta`.
pub fn transmission_time(phy: &PhyProfile, mean_packet: f64) -> f64 {
    phy.phy_header / phy.basic_rate + (phy.mac_header + mean_packet) / phy.data_rate + phy.propagation_delay
}

/// Timing inputs shared by the transmission and backoff-step PGFs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionProfile {
    pub t_tr: f64,
    pub mean_packet_bits: f64,
    pub sifs: f64,
}

impl TransmissionProfile {
    pub fn for_scenario(s: &NetworkScenario) -> Self {
        let z = z_distribution(&s.detection);
        let mean_packet_bits = mean_packet_bits(&z, s.phy.packet_payload);
        TransmissionProfile {
            t_tr: transmission_time(&s.phy, mean_packet_bits),
            mean_packet_bits,
            sifs: s.phy.sifs,
        }
    }
}

/// Burst length with `k` copies: `k T_tr + (k - 1) SIFS`.
fn burst(k: u32, t_tr: f64, sifs: f64) -> f64 {
    k as f64 * t_tr + (k - 1) as f64 * sifs
}

pub fn transmission_atoms(z: &ZDistribution, t_tr: f64, sifs: f64, grid: TimeGrid) -> AtomSet {
    AtomSet::new(z.iter().map(|(k, p)| (grid.ticks(burst(k, t_tr, sifs)), p)))
}

/// Transmission-time PGF: one atom per repetition count.
pub fn pgf_transmission(z: &ZDistribution, t_tr: f64, sifs: f64, grid: TimeGrid) -> DiscreteTimeDistribution {
    DiscreteTimeDistribution::from_atoms(grid, &transmission_atoms(z, t_tr, sifs, grid))
}

pub fn backoff_step_atoms(
    p_busy: f64,
    z: &ZDistribution,
    slot: f64,
    t_tr: f64,
    sifs: f64,
    aifs: f64,
    grid: TimeGrid,
) -> AtomSet {
    let idle = std::iter::once((grid.ticks(slot), 1.0 - p_busy));
    let busy = z.iter().map(|(k, p)| (grid.ticks(burst(k, t_tr, sifs) + aifs), p_busy * p));
    AtomSet::new(idle.chain(busy))
}

/// Duration of one backoff decrement: an idle slot, or a busy period of
/// another station's burst followed by the category's AIFS.
pub fn pgf_backoff_step(
    p_busy: f64,
    z: &ZDistribution,
    slot: f64,
    t_tr: f64,
    sifs: f64,
    aifs: f64,
    grid: TimeGrid,
) -> DiscreteTimeDistribution {
    DiscreteTimeDistribution::from_atoms(grid, &backoff_step_atoms(p_busy, z, slot, t_tr, sifs, aifs, grid))
}

/// Uniform distribution on `0..w` decrements.
fn uniform_counts(w: u32) -> Vec<f64> {
    vec![1.0 / w as f64; w as usize]
}

fn convolve_counts(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Service time as a compound sum: `X * TR + H_1 + ... + H_K` with a joint
/// law of the transmission indicator `X` and the decrement count `K`.
///
/// `with_tx[m]` is `P(X = 1, K = m)`, `without_tx[m]` is `P(X = 0, K = m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceModel {
    pub grid: TimeGrid,
    pub transmission: AtomSet,
    pub step: AtomSet,
    pub with_tx: Vec<f64>,
    pub without_tx: Vec<f64>,
}

impl ServiceModel {
    fn atoms_for(s: &NetworkScenario, ac: usize, p_busy: f64, grid: TimeGrid) -> (AtomSet, AtomSet) {
        let z = z_distribution(&s.detection);
        let tp = TransmissionProfile::for_scenario(s);
        let aifs = s.ac[ac].aifs_time(&s.phy);
        (
            transmission_atoms(&z, tp.t_tr, tp.sifs, grid),
            backoff_step_atoms(p_busy, &z, s.phy.slot_time, tp.t_tr, tp.sifs, aifs, grid),
        )
    }

    /// AC0: uniform backoff over `W00` decrements, then the burst.
    pub fn ac0(s: &NetworkScenario, grid: TimeGrid, p_busy: f64) -> Result<Self> {
        let (transmission, step) = Self::atoms_for(s, 0, p_busy, grid);
        let w = cw_schedule(&s.ac[0], 0)?;
        Ok(ServiceModel { grid, transmission, step, with_tx: uniform_counts(w), without_tx: Vec::new() })
    }

    /// AC1: stage `n` is reached with probability `p_c1^n`; a success at
    /// stage `n` pays the backoffs of stages `0..=n` and one burst, retry
    /// exhaustion pays the backoffs of all `L + 1` stages.
    pub fn ac1(s: &NetworkScenario, grid: TimeGrid, p_busy: f64, p_collision: f64) -> Result<Self> {
        let (transmission, step) = Self::atoms_for(s, 1, p_busy, grid);
        let ac = &s.ac[1];
        let p = p_collision;
        let mut stage_counts = uniform_counts(cw_schedule(ac, 0)?);
        let max_len: usize = (0..=ac.retry_limit)
            .map(|j| cw_schedule(ac, j).map(|w| w as usize - 1))
            .sum::<Result<usize>>()?
            + 1;
        let mut with_tx = vec![0.0; max_len];
        let mut reach = 1.0;
        for n in 0..=ac.retry_limit {
            if n > 0 {
                stage_counts = convolve_counts(&stage_counts, &uniform_counts(cw_schedule(ac, n)?));
                reach *= p;
            }
            let w = (1.0 - p) * reach;
            for (m, c) in stage_counts.iter().enumerate() {
                with_tx[m] += w * c;
            }
        }
        let exhausted = reach * p;
        let without_tx = stage_counts.iter().map(|c| exhausted * c).collect();
        Ok(ServiceModel { grid, transmission, step, with_tx, without_tx })
    }

    /// Mean and variance in ticks, from the compound-sum identities.
    pub fn moments_ticks(&self) -> (f64, f64) {
        let (t1, t2) = self.transmission.raw_moments();
        let t_total = self.transmission.total();
        let (h1, h2) = self.step.raw_moments();
        let h_total = self.step.total();
        let (et, et2) = (t1 / t_total, t2 / t_total);
        let (eh, eh2) = (h1 / h_total, h2 / h_total);
        let var_h = eh2 - eh * eh;

        let sums = |v: &[f64]| {
            v.iter().enumerate().fold((0.0, 0.0, 0.0), |(s0, s1, s2), (m, &w)| {
                let m = m as f64;
                (s0 + w, s1 + w * m, s2 + w * m * m)
            })
        };
        let (a0, a1, a2) = sums(&self.with_tx);
        let (_, b1, b2) = sums(&self.without_tx);

        let mean = a0 * et + (a1 + b1) * eh;
        let second = a0 * et2 + 2.0 * a1 * et * eh + (a1 + b1) * var_h + (a2 + b2) * eh * eh;
        (mean, second - mean * mean)
    }

    /// Closed-form mean and standard deviation in seconds.
    pub fn moments(&self) -> DelayMoments {
        let (mean, var) = self.moments_ticks();
        DelayMoments { mean: mean * self.grid.tick, stddev: var.max(0.0).sqrt() * self.grid.tick }
    }

    pub fn mean(&self) -> f64 {
        self.moments_ticks().0 * self.grid.tick
    }

    /// Explicit service-time distribution:
    /// `TR * sum_m with_tx[m] H^m + sum_m without_tx[m] H^m`, with no tail
    /// truncation.
    pub fn distribution(&self) -> DiscreteTimeDistribution {
        let g = self.grid;
        let step = DiscreteTimeDistribution::from_atoms(g, &self.step);
        let mut power = DiscreteTimeDistribution::point(g, 0);
        let mut acc_tx = DiscreteTimeDistribution::empty(g);
        let mut acc_bare = DiscreteTimeDistribution::empty(g);
        let top = self.with_tx.len().max(self.without_tx.len());
        for m in 0..top {
            let a = self.with_tx.get(m).copied().unwrap_or(0.0);
            let b = self.without_tx.get(m).copied().unwrap_or(0.0);
            acc_tx.add_scaled(&power, a);
            acc_bare.add_scaled(&power, b);
            if m + 1 < top {
                power = power.convolve_exact(&step);
            }
        }
        let tr = DiscreteTimeDistribution::from_atoms(g, &self.transmission);
        let mut out = acc_tx.convolve_exact(&tr);
        out.add_scaled(&acc_bare, 1.0);
        out
    }
}

/// AC0 service-time distribution for a converged solution.
pub fn pgf_service_ac0(s: &NetworkScenario, sol: &FixedPointSolution, grid: TimeGrid) -> Result<DiscreteTimeDistribution> {
    Ok(ServiceModel::ac0(s, grid, sol.p_busy[0])?.distribution())
}

/// AC1 service-time distribution for a converged solution.
pub fn pgf_service_ac1(s: &NetworkScenario, sol: &FixedPointSolution, grid: TimeGrid) -> Result<DiscreteTimeDistribution> {
    Ok(ServiceModel::ac1(s, grid, sol.p_busy[1], sol.p_coll_ac1)?.distribution())
}
