//! Slotted discrete-event simulator of two-category EDCA with blind
//! repetitions.
//!
//! Time is kept in integer nanoseconds. After every busy period the channel
//! restarts its slot clock: boundary `k` lies `SIFS + k * slot` after the end
//! of the busy period, and a category with AIFSN `a` may count down from
//! boundary `a` on. A busy period therefore costs one decrement, as does
//! every idle slot. Runs of idle slots are skipped by computing, for every
//! contending category, the boundary at which its counter reaches zero.
//!
//! Collisions happen only between stations that fire on the same boundary.
//! AC0 never retries (its delay is recorded at the end of its burst whether
//! or not the burst collided). AC1 retries with a doubled window up to its
//! retry limit and then drops the packet; the delay of a dropped packet runs
//! from the head-of-line instant to the start of the last failed attempt.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::analytic::{cw_schedule, ArrivalKind, NetworkScenario};
use crate::delay::TransmissionProfile;
use crate::par::{self, Strategy};
use crate::{Error, Result};

const NS: f64 = 1e9;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scenario: NetworkScenario,
    /// Simulated time per run, seconds.
    pub duration: f64,
    /// Initial period excluded from statistics, seconds.
    pub warmup: f64,
    pub seed: u64,
    pub runs: u32,
    /// Categories whose queue never empties.
    pub saturated: [bool; 2],
}

impl SimConfig {
    /// Config with the warmup set to 10% of the duration.
    pub fn new(scenario: NetworkScenario, duration: f64, seed: u64, runs: u32) -> Self {
        SimConfig { scenario, duration, warmup: 0.1 * duration, seed, runs, saturated: [false; 2] }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if !(self.duration.is_finite() && self.warmup >= 0.0 && self.duration > self.warmup) {
            return Err(Error::Simulation(format!(
                "need duration > warmup >= 0, got duration {} and warmup {}",
                self.duration, self.warmup
            )));
        }
        if self.runs == 0 {
            return Err(Error::Simulation("at least one run is required".into()));
        }
        Ok(())
    }
}

/// Streaming mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Pools two accumulators.
    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    /// Population standard deviation.
    pub fn stddev(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.m2 / self.n as f64).max(0.0).sqrt()
        }
    }
}

/// Per-category results of one run, or of several pooled runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AcStats {
    /// Access delay in seconds.
    pub delay: Welford,
    pub internal_collisions: u64,
    pub external_collisions: u64,
    pub drops: u64,
    /// Transmissions by number of copies sent.
    pub copies: [u64; 4],
}

impl AcStats {
    pub fn n_samples(&self) -> u64 {
        self.delay.n
    }

    pub fn mean(&self) -> f64 {
        self.delay.mean
    }

    pub fn stddev(&self) -> f64 {
        self.delay.stddev()
    }

    pub fn merge(&mut self, other: &AcStats) {
        self.delay.merge(&other.delay);
        self.internal_collisions += other.internal_collisions;
        self.external_collisions += other.external_collisions;
        self.drops += other.drops;
        for (a, b) in self.copies.iter_mut().zip(other.copies) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub ac: [AcStats; 2],
    /// Busy periods with a single transmitter.
    pub successes: u64,
    pub busy_periods: u64,
    /// Idle slots elapsed between busy periods.
    pub idle_slots: u64,
}

impl SimStats {
    /// Pools runs in the given order.
    pub fn pooled<'a>(runs: impl IntoIterator<Item = &'a SimStats>) -> SimStats {
        let mut out = SimStats::default();
        for r in runs {
            for i in 0..2 {
                out.ac[i].merge(&r.ac[i]);
            }
            out.successes += r.successes;
            out.busy_periods += r.busy_periods;
            out.idle_slots += r.idle_slots;
        }
        out
    }
}

/// Contention state of one category of one station.
#[derive(Debug, Clone, Default)]
pub struct StationState {
    /// Arrival instants (ns) of packets behind the head of line.
    pub queue: VecDeque<u64>,
    /// Head-of-line instant, if a packet is contending.
    pub hol: Option<u64>,
    pub counter: u32,
    pub stage: u32,
    /// Boundary index at which the counter reaches zero in the current
    /// idle period.
    fire_k: u64,
    /// First boundary of the current idle period at which this category
    /// counts, and whether it decrements there.
    first_k: u64,
    first_decrements: bool,
    next_arrival: u64,
    arrival_index: u64,
    phase: f64,
}

/// Fixed timing of a run, in nanoseconds.
#[derive(Debug, Clone, Copy)]
struct Timing {
    slot: u64,
    sifs: u64,
    t_tr: u64,
    aifsn: [u64; 2],
    aifs: [u64; 2],
}

impl Timing {
    fn new(s: &NetworkScenario) -> Self {
        let ns = |t: f64| (t * NS).round() as u64;
        let tp = TransmissionProfile::for_scenario(s);
        Timing {
            slot: ns(s.phy.slot_time),
            sifs: ns(s.phy.sifs),
            t_tr: ns(tp.t_tr),
            aifsn: [s.ac[0].aifsn as u64, s.ac[1].aifsn as u64],
            aifs: [ns(s.ac[0].aifs_time(&s.phy)), ns(s.ac[1].aifs_time(&s.phy))],
        }
    }

    fn burst(&self, copies: u32) -> u64 {
        copies as u64 * self.t_tr + (copies as u64 - 1) * self.sifs
    }
}

struct Simulator<'a> {
    cfg: &'a SimConfig,
    timing: Timing,
    windows: [Vec<u32>; 2],
    rng: ChaCha8Rng,
    stations: Vec<[StationState; 2]>,
    /// End of the last busy period; boundary `k` is at
    /// `epoch + SIFS + k * slot`.
    epoch: u64,
    warmup: u64,
    end: u64,
    stats: SimStats,
}

impl<'a> Simulator<'a> {
    fn new(cfg: &'a SimConfig, run: u32) -> Result<Self> {
        let s = &cfg.scenario;
        let windows = [0, 1].map(|i| {
            (0..=s.ac[i].retry_limit).map(|j| cw_schedule(&s.ac[i], j)).collect::<Result<Vec<_>>>()
        });
        let [w0, w1] = windows;
        let timing = Timing::new(s);
        let mut sim = Simulator {
            cfg,
            timing,
            windows: [w0?, w1?],
            rng: ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(run as u64)),
            stations: vec![Default::default(); s.n_stations as usize],
            // The channel is taken to have been idle for long enough that
            // every category may count down from the first boundary.
            epoch: 0,
            warmup: (cfg.warmup * NS).round() as u64,
            end: (cfg.duration * NS).round() as u64,
            stats: SimStats::default(),
        };
        for st in 0..sim.stations.len() {
            for ac in 0..2 {
                sim.init_arrivals(st, ac);
            }
        }
        Ok(sim)
    }

    fn boundary(&self, k: u64) -> u64 {
        self.epoch + self.timing.sifs + k * self.timing.slot
    }

    fn init_arrivals(&mut self, st: usize, ac: usize) {
        if self.cfg.saturated[ac] {
            self.stations[st][ac].next_arrival = u64::MAX;
            self.start_hol(st, ac, 0);
            return;
        }
        let arrival = self.cfg.scenario.ac[ac].arrival;
        let first = if arrival.rate <= 0.0 {
            u64::MAX
        } else {
            match arrival.kind {
                ArrivalKind::Poisson => self.exp_gap(arrival.rate),
                ArrivalKind::Periodic => {
                    let phase = self.rng.random::<f64>() / arrival.rate;
                    self.stations[st][ac].phase = phase;
                    (phase * NS).round() as u64
                }
            }
        };
        self.stations[st][ac].next_arrival = first;
    }

    fn exp_gap(&mut self, rate: f64) -> u64 {
        let gap: f64 = Exp::new(rate).expect("positive rate").sample(&mut self.rng);
        (gap * NS).round() as u64
    }

    fn advance_arrival(&mut self, st: usize, ac: usize) {
        let arrival = self.cfg.scenario.ac[ac].arrival;
        let now = self.stations[st][ac].next_arrival;
        let next = match arrival.kind {
            ArrivalKind::Poisson => now.saturating_add(self.exp_gap(arrival.rate)),
            ArrivalKind::Periodic => {
                let state = &mut self.stations[st][ac];
                state.arrival_index += 1;
                ((state.phase + state.arrival_index as f64 / arrival.rate) * NS).round() as u64
            }
        };
        self.stations[st][ac].next_arrival = next;
    }

    fn draw_counter(&mut self, ac: usize, stage: u32) -> u32 {
        let w = self.windows[ac][stage as usize];
        self.rng.random_range(0..w)
    }

    /// Puts a packet at the head of line at instant `hol` and schedules it in
    /// the current idle period.
    fn start_hol(&mut self, st: usize, ac: usize, hol: u64) {
        let counter = self.draw_counter(ac, 0);
        let state = &mut self.stations[st][ac];
        state.hol = Some(hol);
        state.stage = 0;
        state.counter = counter;
        self.arm(st, ac);
    }

    /// Computes the firing boundary of a contending category in the current
    /// idle period from its counter and head-of-line instant.
    fn arm(&mut self, st: usize, ac: usize) {
        let hol = self.stations[st][ac].hol.expect("armed category has a packet");
        let base = self.epoch + self.timing.sifs;
        let k_hol = if hol <= base { 0 } else { (hol - base).div_ceil(self.timing.slot) };
        let first_k = k_hol.max(self.timing.aifsn[ac]);
        let first_decrements = hol < self.boundary(first_k);
        let state = &mut self.stations[st][ac];
        let c = state.counter as u64;
        state.first_k = first_k;
        state.first_decrements = first_decrements;
        state.fire_k = match c {
            0 => first_k,
            _ if first_decrements => first_k + c - 1,
            _ => first_k + c,
        };
    }

    /// Counter after the boundaries up to and including `k` have passed
    /// without this category firing.
    fn settle(&mut self, st: usize, ac: usize, k: u64) {
        let state = &mut self.stations[st][ac];
        if state.hol.is_none() || k < state.first_k {
            return;
        }
        let passed = k - state.first_k + 1 - u64::from(!state.first_decrements);
        debug_assert!(passed < state.counter as u64);
        state.counter -= passed as u32;
    }

    fn record(&mut self, ac: usize, completed_at: u64, hol: u64) {
        if completed_at >= self.warmup && completed_at <= self.end {
            self.stats.ac[ac].delay.push((completed_at - hol) as f64 / NS);
        }
    }

    fn counting(&self, t: u64) -> bool {
        t >= self.warmup && t <= self.end
    }

    /// Number of copies sent, stopping at the first copy whose preamble is
    /// detected and whose payload is decoded.
    fn draw_copies(&mut self) -> u32 {
        let d = self.cfg.scenario.detection;
        for k in 1..4 {
            let detected = self.rng.random::<f64>() < d.p_preamble;
            let decoded = detected && self.rng.random::<f64>() < d.p_decode;
            if decoded {
                return k;
            }
        }
        4
    }

    fn next_fire(&self) -> Option<u64> {
        self.stations
            .iter()
            .flat_map(|s| s.iter())
            .filter(|a| a.hol.is_some())
            .map(|a| a.fire_k)
            .min()
    }

    fn next_arrival(&self) -> Option<(u64, usize, usize)> {
        let mut best: Option<(u64, usize, usize)> = None;
        for (st, s) in self.stations.iter().enumerate() {
            for (ac, a) in s.iter().enumerate() {
                if a.next_arrival != u64::MAX && best.is_none_or(|b| a.next_arrival < b.0) {
                    best = Some((a.next_arrival, st, ac));
                }
            }
        }
        best
    }

    fn on_arrival(&mut self, t: u64, st: usize, ac: usize) {
        if self.stations[st][ac].hol.is_none() {
            self.start_hol(st, ac, t);
        } else {
            self.stations[st][ac].queue.push_back(t);
        }
        self.advance_arrival(st, ac);
    }

    /// Moves the next queued packet (if any) to the head of line once the
    /// current one has left, at the end of the category's AIFS after `busy_end`.
    fn next_packet(&mut self, st: usize, ac: usize, busy_end: u64) {
        let state = &mut self.stations[st][ac];
        state.hol = None;
        let ready = busy_end + self.timing.aifs[ac];
        if self.cfg.saturated[ac] {
            self.start_hol_deferred(st, ac, ready);
        } else if let Some(arrived) = state.queue.pop_front() {
            self.start_hol_deferred(st, ac, ready.max(arrived));
        }
    }

    /// Like `start_hol`, but arming is left to the epoch change that follows.
    fn start_hol_deferred(&mut self, st: usize, ac: usize, hol: u64) {
        let counter = self.draw_counter(ac, 0);
        let state = &mut self.stations[st][ac];
        state.hol = Some(hol);
        state.stage = 0;
        state.counter = counter;
    }

    /// Handles every category firing on boundary `k`.
    fn on_fire(&mut self, k: u64) {
        let t = self.boundary(k);
        let counting = self.counting(t);
        // (station, category, copies)
        let mut transmitters: Vec<(usize, usize, u32)> = Vec::new();
        let mut internal_losers: Vec<usize> = Vec::new();
        for st in 0..self.stations.len() {
            let fires = [0, 1].map(|ac| {
                let a = &self.stations[st][ac];
                a.hol.is_some() && a.fire_k == k
            });
            match fires {
                [true, true] => {
                    transmitters.push((st, 0, 0));
                    internal_losers.push(st);
                }
                [true, false] => transmitters.push((st, 0, 0)),
                [false, true] => transmitters.push((st, 1, 0)),
                [false, false] => {}
            }
        }
        for tx in transmitters.iter_mut() {
            tx.2 = self.draw_copies();
        }
        let busy_end = t + transmitters.iter().map(|tx| self.timing.burst(tx.2)).max().unwrap_or(0);
        let collided = transmitters.len() > 1;
        if counting {
            self.stats.successes += u64::from(!collided);
            self.stats.busy_periods += 1;
            self.stats.idle_slots += k;
        }

        // Everyone who did not fire has counted down through boundary k.
        let firing: Vec<(usize, usize)> = transmitters
            .iter()
            .map(|tx| (tx.0, tx.1))
            .chain(internal_losers.iter().map(|&st| (st, 1)))
            .collect();
        for st in 0..self.stations.len() {
            for ac in 0..2 {
                if !firing.contains(&(st, ac)) {
                    self.settle(st, ac, k);
                }
            }
        }

        for &(st, ac, copies) in &transmitters {
            if counting {
                self.stats.ac[ac].copies[copies as usize - 1] += 1;
                if collided {
                    self.stats.ac[ac].external_collisions += 1;
                }
            }
            let hol = self.stations[st][ac].hol.unwrap();
            if collided && ac == 1 {
                self.retry_or_drop(st, ac, t, busy_end);
            } else {
                self.record(ac, t + self.timing.burst(copies), hol);
                self.next_packet(st, ac, busy_end);
            }
        }
        for &st in &internal_losers {
            if counting {
                self.stats.ac[1].internal_collisions += 1;
            }
            self.retry_or_drop(st, 1, t, busy_end);
        }

        self.epoch = busy_end;
        for st in 0..self.stations.len() {
            for ac in 0..2 {
                if self.stations[st][ac].hol.is_some() {
                    self.arm(st, ac);
                }
            }
        }
    }

    fn retry_or_drop(&mut self, st: usize, ac: usize, t: u64, busy_end: u64) {
        let limit = self.cfg.scenario.ac[ac].retry_limit;
        let stage = self.stations[st][ac].stage + 1;
        if stage > limit {
            let hol = self.stations[st][ac].hol.unwrap();
            if self.counting(t) {
                self.stats.ac[ac].drops += 1;
            }
            self.record(ac, t, hol);
            self.next_packet(st, ac, busy_end);
        } else {
            let counter = self.draw_counter(ac, stage);
            let state = &mut self.stations[st][ac];
            state.stage = stage;
            state.counter = counter;
        }
    }

    fn run(mut self) -> SimStats {
        loop {
            let fire = self.next_fire().map(|k| (self.boundary(k), k));
            let arrival = self.next_arrival();
            match (fire, arrival) {
                (_, Some((ta, st, ac))) if fire.is_none_or(|f| ta <= f.0) => {
                    if ta > self.end {
                        break;
                    }
                    self.on_arrival(ta, st, ac);
                }
                (Some((tf, k)), _) => {
                    if tf > self.end {
                        break;
                    }
                    self.on_fire(k);
                }
                _ => break,
            }
        }
        self.stats
    }
}

/// Runs run number `run` of the configuration, seeded with `seed + run`.
pub fn run_single(cfg: &SimConfig, run: u32) -> Result<SimStats> {
    cfg.validate()?;
    Ok(Simulator::new(cfg, run)?.run())
}

/// Runs a single simulation (run 0).
pub fn run_simulation(cfg: &SimConfig) -> Result<SimStats> {
    run_single(cfg, 0)
}

/// Runs all configured runs, in parallel when the strategy allows it.
/// Results are returned in run order.
pub fn run_all(cfg: &SimConfig, strategy: Strategy) -> Result<Vec<SimStats>> {
    cfg.validate()?;
    par::map_range(strategy, cfg.runs as usize, |r| run_single(cfg, r as u32))
        .into_iter()
        .collect()
}

/// True when two runs with the same seed give identical statistics.
pub fn replay_determinism(cfg: &SimConfig) -> Result<bool> {
    Ok(run_simulation(cfg)? == run_simulation(cfg)?)
}
