//! Scenario configuration document (TOML).
//!
//! Times are given in microseconds, rates in bit/s and packets/s. Every key
//! is optional and defaults to the reference scenario; unknown keys are
//! rejected.

use std::marker::PhantomData;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytic::{
    AccessCategoryConfig, ArrivalKind, ArrivalModel, ArrivalWindow, DetectionModel,
    NetworkScenario, PhyProfile, SolverOptions,
};
use crate::delay::TimeGrid;
use crate::platoon::{FvdParams, GapAcceptanceModel, KappaMode, PlatoonSetup};
use crate::sim::SimConfig;
use crate::{Error, Result};

const US: f64 = 1e-6;

/// Selects the category, and its defaults, of an [`AcBlock`].
pub trait CategoryDefaults {
    fn defaults() -> AccessCategoryConfig;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ac0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ac1;

impl CategoryDefaults for Ac0 {
    fn defaults() -> AccessCategoryConfig {
        AccessCategoryConfig::ac0_default()
    }
}

impl CategoryDefaults for Ac1 {
    fn defaults() -> AccessCategoryConfig {
        AccessCategoryConfig::ac1_default()
    }
}

/// Per-category block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound = "C: CategoryDefaults")]
pub struct AcBlock<C> {
    pub aifsn: u32,
    pub cw_min: u32,
    pub cw_max: u32,
    pub retry_limit: u32,
    pub arrival_kind: ArrivalKind,
    pub rate_pps: f64,
    #[serde(skip)]
    category: PhantomData<C>,
}

impl<C: CategoryDefaults> AcBlock<C> {
    fn from_config(c: &AccessCategoryConfig) -> Self {
        AcBlock {
            aifsn: c.aifsn,
            cw_min: c.cw_min,
            cw_max: c.cw_max,
            retry_limit: c.retry_limit,
            arrival_kind: c.arrival.kind,
            rate_pps: c.arrival.rate,
            category: PhantomData,
        }
    }

    fn to_config(&self) -> AccessCategoryConfig {
        AccessCategoryConfig {
            category: C::defaults().category,
            aifsn: self.aifsn,
            cw_min: self.cw_min,
            cw_max: self.cw_max,
            retry_limit: self.retry_limit,
            arrival: ArrivalModel { kind: self.arrival_kind, rate: self.rate_pps },
        }
    }
}

impl<C: CategoryDefaults> Default for AcBlock<C> {
    fn default() -> Self {
        Self::from_config(&C::defaults())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    #[default]
    BackoffStep,
    SlotTime,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimBlock {
    pub duration_s: f64,
    /// Defaults to 10% of the duration.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup_s: Option<f64>,
    pub seed: u64,
    pub runs: u32,
}

impl Default for SimBlock {
    fn default() -> Self {
        SimBlock { duration_s: 10.0, warmup_s: None, seed: 1, runs: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlatoonBlock {
    pub a: f64,
    pub l: f64,
    pub v0: f64,
    pub y_m: f64,
    pub y_tilde: f64,
    pub n_vehicles: usize,
    pub comm_range_m: f64,
    pub kappa_mode: KappaMode,
    pub kappa_seed: u64,
    pub gap: GapAcceptanceModel,
}

impl Default for PlatoonBlock {
    fn default() -> Self {
        let s = PlatoonSetup::default();
        PlatoonBlock {
            a: s.fvd.a,
            l: s.fvd.l,
            v0: s.fvd.v0,
            y_m: s.fvd.y_m,
            y_tilde: s.fvd.y_tilde,
            n_vehicles: s.fvd.n_vehicles,
            comm_range_m: s.comm_range,
            kappa_mode: s.kappa_mode,
            kappa_seed: s.kappa_seed,
            gap: s.gap,
        }
    }
}

/// The whole configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigDocument {
    pub basic_rate_bps: f64,
    pub data_rate_bps: f64,
    pub phy_header_bits: f64,
    pub mac_header_bits: f64,
    pub slot_time_us: f64,
    pub sifs_us: f64,
    pub propagation_delay_us: f64,
    pub packet_bits: f64,
    pub n_stations: u32,
    pub p_preamble: f64,
    pub p_decode: f64,
    /// Interval over which arrival probabilities are evaluated.
    pub arrival_window: WindowKind,
    /// Interval for `arrival_window = "fixed"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arrival_window_us: Option<f64>,
    /// Time quantisation of delay distributions.
    pub grid_us: f64,
    pub ac0: AcBlock<Ac0>,
    pub ac1: AcBlock<Ac1>,
    pub sim: SimBlock,
    pub platoon: PlatoonBlock,
}

impl Default for ConfigDocument {
    fn default() -> Self {
        let phy = PhyProfile::default();
        let det = DetectionModel::default();
        ConfigDocument {
            basic_rate_bps: phy.basic_rate,
            data_rate_bps: phy.data_rate,
            phy_header_bits: phy.phy_header,
            mac_header_bits: phy.mac_header,
            slot_time_us: phy.slot_time / US,
            sifs_us: phy.sifs / US,
            propagation_delay_us: phy.propagation_delay / US,
            packet_bits: phy.packet_payload,
            n_stations: NetworkScenario::default().n_stations,
            p_preamble: det.p_preamble,
            p_decode: det.p_decode,
            arrival_window: WindowKind::default(),
            arrival_window_us: None,
            grid_us: 1.0,
            ac0: AcBlock::default(),
            ac1: AcBlock::default(),
            sim: SimBlock::default(),
            platoon: PlatoonBlock::default(),
        }
    }
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: ConfigDocument = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        doc.scenario()?;
        doc.grid()?;
        doc.sim_config()?;
        doc.platoon_setup()?;
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => Error::Config(format!("{}: {other}", path.display())),
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn scenario(&self) -> Result<NetworkScenario> {
        let arrival_window = match (self.arrival_window, self.arrival_window_us) {
            (WindowKind::BackoffStep, None) => ArrivalWindow::BackoffStep,
            (WindowKind::SlotTime, None) => ArrivalWindow::SlotTime,
            (WindowKind::Fixed, Some(us)) => ArrivalWindow::Fixed(us * US),
            (WindowKind::Fixed, None) => {
                return Err(Error::config("arrival_window = \"fixed\" needs arrival_window_us"))
            }
            (_, Some(_)) => {
                return Err(Error::config("arrival_window_us is only used with arrival_window = \"fixed\""))
            }
        };
        let s = NetworkScenario {
            n_stations: self.n_stations,
            phy: PhyProfile {
                basic_rate: self.basic_rate_bps,
                data_rate: self.data_rate_bps,
                phy_header: self.phy_header_bits,
                mac_header: self.mac_header_bits,
                slot_time: self.slot_time_us * US,
                sifs: self.sifs_us * US,
                propagation_delay: self.propagation_delay_us * US,
                packet_payload: self.packet_bits,
            },
            ac: [self.ac0.to_config(), self.ac1.to_config()],
            detection: DetectionModel { p_preamble: self.p_preamble, p_decode: self.p_decode },
            arrival_window,
        };
        s.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(s)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid_us * US).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn solver_options(&self) -> Result<SolverOptions> {
        Ok(SolverOptions { grid: self.grid()?, ..SolverOptions::default() })
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let mut cfg = SimConfig::new(self.scenario()?, self.sim.duration_s, self.sim.seed, self.sim.runs);
        if let Some(w) = self.sim.warmup_s {
            cfg.warmup = w;
        }
        cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn platoon_setup(&self) -> Result<PlatoonSetup> {
        let p = &self.platoon;
        let setup = PlatoonSetup {
            fvd: FvdParams {
                a: p.a,
                l: p.l,
                v0: p.v0,
                y_m: p.y_m,
                y_tilde: p.y_tilde,
                n_vehicles: p.n_vehicles,
                tau: 0.0,
            },
            comm_range: p.comm_range_m,
            kappa_mode: p.kappa_mode,
            kappa_seed: p.kappa_seed,
            gap: p.gap,
        };
        setup.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(setup)
    }
}
