//! Finite discrete distributions on a uniform time grid.
//!
//! A probability generating function with finite support is stored as its
//! coefficient vector, so products of PGFs become exact convolutions and the
//! PMF is read off directly.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Cumulative mass below which distribution tails are dropped.
pub const TRUNCATION_MASS: f64 = 1e-12;

/// Output size above which convolutions are split across threads.
#[cfg(feature = "parallel")]
const PARALLEL_WORK: usize = 1 << 18;

/// Quantisation of continuous times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    /// Seconds per tick.
    pub tick: f64,
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid { tick: 1e-6 }
    }
}

impl TimeGrid {
    pub fn new(tick: f64) -> Result<Self> {
        if !(tick.is_finite() && tick > 0.0) {
            return Err(Error::domain(format!("grid tick must be positive, got {tick}")));
        }
        Ok(TimeGrid { tick })
    }

    /// Nearest tick to a non-negative time.
    pub fn ticks(&self, seconds: f64) -> u64 {
        debug_assert!(seconds >= 0.0);
        (seconds / self.tick).round() as u64
    }

    pub fn seconds(&self, ticks: u64) -> f64 {
        ticks as f64 * self.tick
    }

    /// Snaps a time to the grid.
    pub fn snap(&self, seconds: f64) -> f64 {
        self.seconds(self.ticks(seconds))
    }
}

/// A handful of weighted atoms, the building block of the delay PGFs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AtomSet {
    atoms: Vec<(u64, f64)>,
}

impl AtomSet {
    /// Builds from `(tick, probability)` pairs; zero-mass atoms are skipped
    /// and atoms on the same tick are merged.
    pub fn new(pairs: impl IntoIterator<Item = (u64, f64)>) -> Self {
        let mut atoms: Vec<(u64, f64)> = Vec::new();
        for (t, p) in pairs {
            if p == 0.0 {
                continue;
            }
            match atoms.iter_mut().find(|(u, _)| *u == t) {
                Some(a) => a.1 += p,
                None => atoms.push((t, p)),
            }
        }
        atoms.sort_by_key(|a| a.0);
        AtomSet { atoms }
    }

    pub fn atoms(&self) -> &[(u64, f64)] {
        &self.atoms
    }

    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// First and second raw moments in ticks.
    pub fn raw_moments(&self) -> (f64, f64) {
        self.atoms.iter().fold((0.0, 0.0), |(m1, m2), &(t, p)| {
            let t = t as f64;
            (m1 + p * t, m2 + p * t * t)
        })
    }
}

/// Probability masses on `offset, offset + 1, ...` ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTimeDistribution {
    tick: f64,
    offset: u64,
    masses: Vec<f64>,
    dropped: f64,
}

impl DiscreteTimeDistribution {
    pub fn empty(grid: TimeGrid) -> Self {
        DiscreteTimeDistribution { tick: grid.tick, offset: 0, masses: Vec::new(), dropped: 0.0 }
    }

    pub fn point(grid: TimeGrid, at: u64) -> Self {
        DiscreteTimeDistribution { tick: grid.tick, offset: at, masses: vec![1.0], dropped: 0.0 }
    }

    pub fn from_atoms(grid: TimeGrid, atoms: &AtomSet) -> Self {
        let Some(&(lo, _)) = atoms.atoms().first() else {
            return Self::empty(grid);
        };
        let hi = atoms.atoms().last().unwrap().0;
        let mut masses = vec![0.0; (hi - lo + 1) as usize];
        for &(t, p) in atoms.atoms() {
            masses[(t - lo) as usize] += p;
        }
        DiscreteTimeDistribution { tick: grid.tick, offset: lo, masses, dropped: 0.0 }
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid { tick: self.tick }
    }

    /// First tick with stored mass.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Mass discarded by tail truncation so far.
    pub fn dropped_mass(&self) -> f64 {
        self.dropped
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Mass at a tick, zero outside the support.
    pub fn mass_at_tick(&self, t: u64) -> f64 {
        t.checked_sub(self.offset)
            .and_then(|i| self.masses.get(i as usize))
            .copied()
            .unwrap_or(0.0)
    }

    /// Iterates `(tick, mass)` over non-zero entries.
    pub fn iter_ticks(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.masses
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0.0)
            .map(move |(i, &p)| (self.offset + i as u64, p))
    }

    /// Iterates `(seconds, mass)` over non-zero entries.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.iter_ticks().map(move |(t, p)| (t as f64 * self.tick, p))
    }

    pub fn scale(&mut self, w: f64) {
        self.masses.iter_mut().for_each(|m| *m *= w);
        self.dropped *= w;
    }

    /// `self += w * other`.
    pub fn add_scaled(&mut self, other: &DiscreteTimeDistribution, w: f64) {
        if other.masses.is_empty() || w == 0.0 {
            return;
        }
        if self.masses.is_empty() {
            self.offset = other.offset;
        }
        let lo = self.offset.min(other.offset);
        let hi = (self.offset + self.masses.len() as u64).max(other.offset + other.masses.len() as u64);
        if lo < self.offset {
            let shift = (self.offset - lo) as usize;
            let mut grown = vec![0.0; shift];
            grown.append(&mut self.masses);
            self.masses = grown;
            self.offset = lo;
        }
        self.masses.resize((hi - lo) as usize, 0.0);
        let base = (other.offset - lo) as usize;
        for (i, &m) in other.masses.iter().enumerate() {
            self.masses[base + i] += w * m;
        }
        self.dropped += w * other.dropped;
    }

    /// Distribution of the sum of independent draws from both operands,
    /// with tails below [`TRUNCATION_MASS`] removed.
    pub fn convolve(&self, other: &DiscreteTimeDistribution) -> DiscreteTimeDistribution {
        let mut out = self.convolve_exact(other);
        out.trim(TRUNCATION_MASS);
        out
    }

    /// Convolution without truncation. Each output entry is accumulated in
    /// the same order regardless of threading, so results are bitwise stable.
    pub fn convolve_exact(&self, other: &DiscreteTimeDistribution) -> DiscreteTimeDistribution {
        let tick = self.tick;
        if self.masses.is_empty() || other.masses.is_empty() {
            return DiscreteTimeDistribution { tick, offset: 0, masses: Vec::new(), dropped: 0.0 };
        }
        let (big, small) = if self.nonzeros() >= other.nonzeros() { (self, other) } else { (other, self) };
        let taps: Vec<(usize, f64)> = small
            .masses
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0.0)
            .map(|(i, &p)| (i, p))
            .collect();
        let n = big.masses.len() + small.masses.len() - 1;
        let src = &big.masses;
        let entry = |i: usize| -> f64 {
            let mut acc = 0.0;
            for &(j, w) in &taps {
                if j <= i && i - j < src.len() {
                    acc += src[i - j] * w;
                }
            }
            acc
        };
        let masses = Self::fill(n, taps.len(), entry);
        let dropped = self.dropped + other.dropped - self.dropped * other.dropped;
        DiscreteTimeDistribution { tick, offset: big.offset + small.offset, masses, dropped }
    }

    #[cfg(feature = "parallel")]
    fn fill(n: usize, taps: usize, entry: impl Fn(usize) -> f64 + Sync + Send) -> Vec<f64> {
        use rayon::prelude::*;
        if n.saturating_mul(taps) >= PARALLEL_WORK {
            (0..n).into_par_iter().map(entry).collect()
        } else {
            (0..n).map(entry).collect()
        }
    }

    #[cfg(not(feature = "parallel"))]
    fn fill(n: usize, _taps: usize, entry: impl Fn(usize) -> f64) -> Vec<f64> {
        (0..n).map(entry).collect()
    }

    fn nonzeros(&self) -> usize {
        self.masses.iter().filter(|&&p| p != 0.0).count()
    }

    /// Removes leading and trailing entries whose cumulative mass from
    /// either end stays below `threshold`.
    pub fn trim(&mut self, threshold: f64) {
        let mut head = 0;
        let mut acc = 0.0;
        while head < self.masses.len() && acc + self.masses[head] < threshold {
            acc += self.masses[head];
            head += 1;
        }
        let mut tail = self.masses.len();
        let mut acc_tail = 0.0;
        while tail > head && acc_tail + self.masses[tail - 1] < threshold {
            acc_tail += self.masses[tail - 1];
            tail -= 1;
        }
        if head == 0 && tail == self.masses.len() {
            return;
        }
        self.dropped += acc + acc_tail;
        self.masses.truncate(tail);
        self.masses.drain(..head);
        self.offset += head as u64;
    }

    /// `(P'(1), P''(1))` with time measured in ticks.
    pub fn factorial_moments(&self) -> (f64, f64) {
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for (i, &p) in self.masses.iter().enumerate() {
            let t = (self.offset + i as u64) as f64;
            d1 += t * p;
            d2 += t * (t - 1.0) * p;
        }
        (d1, d2)
    }

    /// Mean in seconds.
    pub fn mean(&self) -> f64 {
        self.factorial_moments().0 * self.tick
    }
}
