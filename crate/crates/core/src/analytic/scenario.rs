use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Physical-layer constants. Rates in bit/s, headers and payload in bits,
/// times in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhyProfile {
    pub basic_rate: f64,
    pub data_rate: f64,
    pub phy_header: f64,
    pub mac_header: f64,
    pub slot_time: f64,
    pub sifs: f64,
    pub propagation_delay: f64,
    pub packet_payload: f64,
}

impl Default for PhyProfile {
    fn default() -> Self {
        PhyProfile {
            basic_rate: 1e6,
            data_rate: 27e6,
            phy_header: 48.0,
            mac_header: 0.0,
            slot_time: 13e-6,
            sifs: 32e-6,
            propagation_delay: 0.0,
            packet_payload: 4000.0,
        }
    }
}

impl PhyProfile {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("basic_rate", self.basic_rate),
            ("data_rate", self.data_rate),
            ("slot_time", self.slot_time),
            ("sifs", self.sifs),
            ("packet_payload", self.packet_payload),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("phy_header", self.phy_header),
            ("mac_header", self.mac_header),
            ("propagation_delay", self.propagation_delay),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::domain(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AccessCategory {
    Ac0,
    Ac1,
}

impl AccessCategory {
    pub const ALL: [AccessCategory; 2] = [AccessCategory::Ac0, AccessCategory::Ac1];

    pub fn index(self) -> usize {
        match self {
            AccessCategory::Ac0 => 0,
            AccessCategory::Ac1 => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrivalKind {
    Poisson,
    Periodic,
}

/// Packet arrivals at one MAC queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalModel {
    pub kind: ArrivalKind,
    /// Packets per second.
    pub rate: f64,
}

impl ArrivalModel {
    pub fn poisson(rate: f64) -> Self {
        ArrivalModel { kind: ArrivalKind::Poisson, rate }
    }

    pub fn periodic(rate: f64) -> Self {
        ArrivalModel { kind: ArrivalKind::Periodic, rate }
    }
}

/// Length of the interval over which the per-interval arrival probability
/// is evaluated.
///
/// The chain advances one backoff step at a time, so the default counts
/// arrivals over the mean step duration; this keeps the chain's attempt
/// rate equal to the offered load.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum ArrivalWindow {
    /// One backoff slot.
    SlotTime,
    /// A fixed interval in seconds.
    Fixed(f64),
    /// The mean duration of one backoff step of the category, i.e. the mean
    /// of the backoff-step distribution at the current busy probability.
    #[default]
    BackoffStep,
}

/// Per access category protocol constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessCategoryConfig {
    pub category: AccessCategory,
    pub aifsn: u32,
    pub cw_min: u32,
    pub cw_max: u32,
    /// Retry limit `L`.
    pub retry_limit: u32,
    pub arrival: ArrivalModel,
}

impl AccessCategoryConfig {
    /// AC0 defaults: AIFSN 2, a fixed window of 16 slots, Poisson arrivals at 50 pkt/s.
    pub fn ac0_default() -> Self {
        AccessCategoryConfig {
            category: AccessCategory::Ac0,
            aifsn: 2,
            cw_min: 15,
            cw_max: 15,
            retry_limit: 0,
            arrival: ArrivalModel::poisson(50.0),
        }
    }

    /// AC1 defaults: AIFSN 3, CW 15..31, retry limit 2, periodic arrivals at 30 pkt/s.
    pub fn ac1_default() -> Self {
        AccessCategoryConfig {
            category: AccessCategory::Ac1,
            aifsn: 3,
            cw_min: 15,
            cw_max: 31,
            retry_limit: 2,
            arrival: ArrivalModel::periodic(30.0),
        }
    }

    pub fn aifs_time(&self, phy: &PhyProfile) -> f64 {
        phy.sifs + self.aifsn as f64 * phy.slot_time
    }

    /// Number of window doublings `M = log2((CW_max + 1) / (CW_min + 1))`.
    pub fn doubling_limit(&self) -> u32 {
        ((self.cw_max + 1) / (self.cw_min + 1)).trailing_zeros()
    }

    /// Window of stage zero, `W_{i,0} = CW_min + 1`.
    pub fn base_window(&self) -> u32 {
        self.cw_min + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.aifsn == 0 {
            return Err(Error::domain("aifsn must be positive"));
        }
        if self.cw_max < self.cw_min {
            return Err(Error::domain(format!(
                "cw_max ({}) < cw_min ({})",
                self.cw_max, self.cw_min
            )));
        }
        let (hi, lo) = (self.cw_max as u64 + 1, self.cw_min as u64 + 1);
        if hi % lo != 0 || !(hi / lo).is_power_of_two() {
            return Err(Error::domain(format!(
                "(cw_max+1)/(cw_min+1) must be a power of two, got {hi}/{lo}"
            )));
        }
        let rate = self.arrival.rate;
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::domain(format!("arrival rate must be non-negative, got {rate}")));
        }
        Ok(())
    }
}

/// Preamble detection and data decoding probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionModel {
    pub p_preamble: f64,
    pub p_decode: f64,
}

impl Default for DetectionModel {
    fn default() -> Self {
        DetectionModel { p_preamble: 0.9, p_decode: 0.8 }
    }
}

impl DetectionModel {
    /// Single transmission, no repetitions.
    pub const LEGACY: DetectionModel = DetectionModel { p_preamble: 1.0, p_decode: 1.0 };

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_preamble", self.p_preamble), ("p_decode", self.p_decode)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::domain(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkScenario {
    pub n_stations: u32,
    pub phy: PhyProfile,
    pub ac: [AccessCategoryConfig; 2],
    pub detection: DetectionModel,
    pub arrival_window: ArrivalWindow,
}

impl Default for NetworkScenario {
    fn default() -> Self {
        NetworkScenario {
            n_stations: 100,
            phy: PhyProfile::default(),
            ac: [AccessCategoryConfig::ac0_default(), AccessCategoryConfig::ac1_default()],
            detection: DetectionModel::default(),
            arrival_window: ArrivalWindow::default(),
        }
    }
}

impl NetworkScenario {
    pub fn validate(&self) -> Result<()> {
        if self.n_stations == 0 {
            return Err(Error::domain("n_stations must be at least 1"));
        }
        self.phy.validate()?;
        self.detection.validate()?;
        for (i, ac) in self.ac.iter().enumerate() {
            ac.validate()?;
            if ac.category.index() != i {
                return Err(Error::domain(format!("access category at slot {i} is {:?}", ac.category)));
            }
        }
        if self.ac[0].aifsn >= self.ac[1].aifsn {
            return Err(Error::domain(format!(
                "AC0 must have a strictly smaller AIFSN than AC1 ({} >= {})",
                self.ac[0].aifsn, self.ac[1].aifsn
            )));
        }
        if let ArrivalWindow::Fixed(eps) = self.arrival_window {
            if !(eps.is_finite() && eps > 0.0) {
                return Err(Error::domain(format!("arrival window must be positive, got {eps}")));
            }
        }
        Ok(())
    }

    pub fn with_stations(mut self, n: u32) -> Self {
        self.n_stations = n;
        self
    }

    pub fn with_detection(mut self, detection: DetectionModel) -> Self {
        self.detection = detection;
        self
    }

    pub fn with_rates(mut self, lambda0: f64, lambda1: f64) -> Self {
        self.ac[0].arrival.rate = lambda0;
        self.ac[1].arrival.rate = lambda1;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        NetworkScenario::default().validate().unwrap();
    }

    #[test]
    fn doubling_limit() {
        let ac1 = AccessCategoryConfig::ac1_default();
        assert_eq!(ac1.doubling_limit(), 1);
        assert_eq!(AccessCategoryConfig::ac0_default().doubling_limit(), 0);
        let wide = AccessCategoryConfig { cw_min: 15, cw_max: 1023, ..ac1 };
        assert_eq!(wide.doubling_limit(), 6);
    }

    #[test]
    fn rejects_non_power_of_two_windows() {
        let bad = AccessCategoryConfig { cw_min: 15, cw_max: 40, ..AccessCategoryConfig::ac1_default() };
        assert!(bad.validate().is_err());
        let inverted = AccessCategoryConfig { cw_min: 31, cw_max: 15, ..AccessCategoryConfig::ac1_default() };
        assert!(inverted.validate().is_err());
    }

    #[test]
    fn rejects_priority_inversion() {
        let mut s = NetworkScenario::default();
        s.ac[0].aifsn = 3;
        assert!(s.validate().is_err());
    }

    #[test]
    fn aifs_time() {
        let phy = PhyProfile::default();
        let ac1 = AccessCategoryConfig::ac1_default();
        assert!((ac1.aifs_time(&phy) - 71e-6).abs() < 1e-15);
    }
}
