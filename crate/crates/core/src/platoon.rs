//! Car-following side: the Bando optimal velocity function, the critical
//! feedback delay for non-oscillatory headway convergence of a full velocity
//! difference platoon, gap acceptance by two-wheelers, and delay-ODE
//! integration of the platoon.

use std::f64::consts::SQRT_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Full velocity difference model parameters (`l = 0` gives the modified
/// optimal velocity model).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FvdParams {
    /// Headway sensitivity, 1/s.
    pub a: f64,
    /// Velocity-difference gain, 1/s.
    pub l: f64,
    /// m/s.
    pub v0: f64,
    /// m.
    pub y_m: f64,
    /// m.
    pub y_tilde: f64,
    pub n_vehicles: usize,
    /// Feedback delay, s.
    pub tau: f64,
}

impl Default for FvdParams {
    fn default() -> Self {
        FvdParams { a: 0.6, l: 0.5, v0: 15.0, y_m: 5.0, y_tilde: 2.0, n_vehicles: 10, tau: 0.0 }
    }
}

/// Closed intervals bracketing the defaults, used when drawing random
/// parameter sets for checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FvdRanges {
    pub a: (f64, f64),
    pub l: (f64, f64),
    pub v0: (f64, f64),
    pub y_m: (f64, f64),
    pub y_tilde: (f64, f64),
}

pub const FVD_DEFAULT_RANGES: FvdRanges = FvdRanges {
    a: (0.4, 1.0),
    l: (0.2, 0.8),
    v0: (10.0, 20.0),
    y_m: (4.0, 6.0),
    y_tilde: (1.5, 2.5),
};

impl FvdRanges {
    /// Parameters at fractions `u` (each in `[0, 1]`) of the ranges, in the
    /// order a, l, v0, y_m, y_tilde.
    pub fn at(&self, u: [f64; 5], base: &FvdParams) -> FvdParams {
        let lerp = |(lo, hi): (f64, f64), t: f64| lo + t * (hi - lo);
        FvdParams {
            a: lerp(self.a, u[0]),
            l: lerp(self.l, u[1]),
            v0: lerp(self.v0, u[2]),
            y_m: lerp(self.y_m, u[3]),
            y_tilde: lerp(self.y_tilde, u[4]),
            ..*base
        }
    }
}

impl FvdParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.a > 0.0, "a must be positive"),
            (self.l >= 0.0, "l must be non-negative"),
            (self.v0 > 0.0, "v0 must be positive"),
            (self.y_tilde > 0.0, "y_tilde must be positive"),
            (self.y_m.is_finite(), "y_m must be finite"),
            (self.n_vehicles >= 2, "a platoon needs at least two vehicles"),
            (self.tau >= 0.0 && self.tau.is_finite(), "tau must be non-negative"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::domain(msg));
            }
        }
        Ok(())
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }
}

/// `V(y) = V0 (tanh((y - y_m) / y~) + tanh(y_m / y~))`.
pub fn bovf(y: f64, p: &FvdParams) -> f64 {
    p.v0 * (((y - p.y_m) / p.y_tilde).tanh() + (p.y_m / p.y_tilde).tanh())
}

/// `V'(y) = (V0 / y~) sech^2((y - y_m) / y~)`.
pub fn bovf_slope(y: f64, p: &FvdParams) -> f64 {
    let sech = 1.0 / ((y - p.y_m) / p.y_tilde).cosh();
    p.v0 / p.y_tilde * sech * sech
}

/// Left-hand side of the characteristic equation
/// `s^2 + (a + l) s e^{-s tau} + a V' e^{-s tau}` at a real `s`.
pub fn characteristic(s: f64, tau: f64, p: &FvdParams, v_prime: f64) -> f64 {
    let e = (-s * tau).exp();
    s * s + (p.a + p.l) * s * e + p.a * v_prime * e
}

/// Critical delay and the communication budget for one headway.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityResult {
    pub y_star: f64,
    /// Equilibrium speed `V(y*)`.
    pub speed: f64,
    pub v_prime: f64,
    pub d_tilde: f64,
    /// Double real root `d~ (-2 - sqrt 2)` used for the critical delay.
    pub sigma_root: f64,
    /// The companion root `d~ (-2 + sqrt 2)`.
    pub sigma_other: f64,
    /// `ln(aV'(1 + sqrt 2) / (d~^2 (2 + sqrt 2)^2))`, whose negation fixes
    /// the sign of `tau_c`.
    pub log_argument: f64,
    pub tau_c: f64,
    pub tau_cr: f64,
    pub p_accept: f64,
    pub lambda0: f64,
}

/// Critical feedback delay `tau_C` at equilibrium headway `y_star`.
///
/// `tau_c` is non-positive when `a V' <= (a + l)^2 / (2 + sqrt 2)^2 * (1 + sqrt 2)`,
/// i.e. for flat regions of the velocity function; the value is returned
/// as is and callers decide how to treat it. The budget, acceptance and
/// rate fields are left at zero.
pub fn critical_delay(p: &FvdParams, y_star: f64) -> Result<StabilityResult> {
    p.validate()?;
    let v_prime = bovf_slope(y_star, p);
    let gain = p.a + p.l;
    let d_tilde = p.a * v_prime / gain;
    let k = 2.0 + SQRT_2;
    let log_argument = p.a * v_prime * (1.0 + SQRT_2) / (d_tilde * d_tilde * k * k);
    if !(log_argument.is_finite() && log_argument > 0.0) {
        return Err(Error::domain(format!(
            "critical delay undefined at headway {y_star} m: log argument {log_argument}"
        )));
    }
    Ok(StabilityResult {
        y_star,
        speed: bovf(y_star, p),
        v_prime,
        d_tilde,
        sigma_root: -d_tilde * k,
        sigma_other: d_tilde * (SQRT_2 - 2.0),
        log_argument,
        tau_c: -log_argument.ln() / (d_tilde * k),
        tau_cr: 0.0,
        p_accept: 0.0,
        lambda0: 0.0,
    })
}

/// How the communication share `kappa` of the feedback delay is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KappaMode {
    /// `kappa = 0.1`.
    #[default]
    Deterministic,
    /// `kappa ~ N(0.1, 0.1^2)` truncated to `(0, 1]`.
    Sampled,
}

pub const KAPPA_MEAN: f64 = 0.1;
pub const KAPPA_STDDEV: f64 = 0.1;

/// Draws `kappa` for the given mode; `seed` is only used when sampling.
pub fn kappa(mode: KappaMode, seed: u64) -> f64 {
    match mode {
        KappaMode::Deterministic => KAPPA_MEAN,
        KappaMode::Sampled => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(KAPPA_MEAN, KAPPA_STDDEV).expect("valid normal");
            loop {
                let k: f64 = normal.sample(&mut rng);
                if k > 0.0 && k <= 1.0 {
                    return k;
                }
            }
        }
    }
}

/// Communication delay budget `tau_cr = kappa tau_C`.
pub fn comm_delay_budget(tau_c: f64, mode: KappaMode, seed: u64) -> Result<f64> {
    if !(tau_c.is_finite() && tau_c > 0.0) {
        return Err(Error::domain(format!("critical delay must be positive, got {tau_c}")));
    }
    Ok(kappa(mode, seed) * tau_c)
}

/// Map from gap-acceptance probability to the AC0 packet rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapMapping {
    /// `lambda0 = eta P`.
    #[default]
    Linear,
    /// `lambda0 = 1 - eta ln(1 - P)`.
    #[serde(alias = "log")]
    Logarithmic,
}

/// Functional form of the acceptance probability in `u = alpha + gamma y*/v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptanceForm {
    /// `e^u / (1 + e^u)`.
    #[default]
    Logistic,
    /// `exp(alpha + gamma y*/v / (1 + e^u))`, the bracketing taken literally.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapAcceptanceModel {
    pub alpha: f64,
    pub gamma: f64,
    pub eta: f64,
    pub mapping: GapMapping,
    pub form: AcceptanceForm,
}

impl Default for GapAcceptanceModel {
    fn default() -> Self {
        GapAcceptanceModel {
            alpha: -1.933,
            gamma: 0.652,
            eta: 50.0,
            mapping: GapMapping::Linear,
            form: AcceptanceForm::Logistic,
        }
    }
}

impl GapAcceptanceModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::domain(format!("eta must be positive, got {}", self.eta)));
        }
        Ok(())
    }
}

/// Probability that a two-wheeler accepts a gap of `y_star` metres in
/// traffic moving at `speed` m/s.
pub fn gap_acceptance(y_star: f64, speed: f64, g: &GapAcceptanceModel) -> Result<f64> {
    if !(speed.is_finite() && speed > 0.0) {
        return Err(Error::domain(format!("speed must be positive, got {speed}")));
    }
    let x = g.gamma * y_star / speed;
    let u = g.alpha + x;
    let p = match g.form {
        AcceptanceForm::Logistic => {
            if u >= 0.0 {
                1.0 / (1.0 + (-u).exp())
            } else {
                u.exp() / (1.0 + u.exp())
            }
        }
        AcceptanceForm::Literal => (g.alpha + x / (1.0 + u.exp())).exp(),
    };
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("acceptance probability {p} outside [0, 1]")));
    }
    Ok(p)
}

/// AC0 packet rate for an acceptance probability.
pub fn lambda0_from_gap(p_accept: f64, g: &GapAcceptanceModel) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_accept) {
        return Err(Error::domain(format!("acceptance probability {p_accept} outside [0, 1]")));
    }
    match g.mapping {
        GapMapping::Linear => Ok(g.eta * p_accept),
        GapMapping::Logarithmic if p_accept >= 1.0 => {
            Err(Error::domain("logarithmic rate mapping is unbounded at P = 1"))
        }
        GapMapping::Logarithmic => Ok(1.0 - g.eta * (-p_accept).ln_1p()),
    }
}

/// Everything needed to go from an equilibrium headway to a packet rate,
/// a station count and a communication delay budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlatoonSetup {
    pub fvd: FvdParams,
    /// Contention range in metres.
    pub comm_range: f64,
    pub kappa_mode: KappaMode,
    pub kappa_seed: u64,
    pub gap: GapAcceptanceModel,
}

impl Default for PlatoonSetup {
    fn default() -> Self {
        PlatoonSetup {
            fvd: FvdParams::default(),
            comm_range: 300.0,
            kappa_mode: KappaMode::Deterministic,
            kappa_seed: 0,
            gap: GapAcceptanceModel::default(),
        }
    }
}

impl PlatoonSetup {
    pub fn validate(&self) -> Result<()> {
        self.fvd.validate()?;
        self.gap.validate()?;
        if !(self.comm_range.is_finite() && self.comm_range > 0.0) {
            return Err(Error::domain(format!("comm range must be positive, got {}", self.comm_range)));
        }
        Ok(())
    }

    /// Vehicles within contention range, `floor(range / y*) + 1`.
    pub fn stations_in_range(&self, y_star: f64) -> Result<u32> {
        if !(y_star.is_finite() && y_star > 0.0) {
            return Err(Error::domain(format!("headway must be positive, got {y_star}")));
        }
        Ok((self.comm_range / y_star).floor() as u32 + 1)
    }

    /// Critical delay, acceptance probability, AC0 rate and budget at one
    /// headway. A non-positive critical delay leaves no budget: `tau_cr`
    /// is then zero.
    pub fn evaluate(&self, y_star: f64) -> Result<StabilityResult> {
        self.validate()?;
        let mut r = critical_delay(&self.fvd, y_star)?;
        r.p_accept = gap_acceptance(y_star, r.speed, &self.gap)?;
        r.lambda0 = lambda0_from_gap(r.p_accept, &self.gap)?;
        r.tau_cr = if r.tau_c > 0.0 {
            comm_delay_budget(r.tau_c, self.kappa_mode, self.kappa_seed)?
        } else {
            0.0
        };
        Ok(r)
    }
}

/// Leader position, speed and acceleration at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeadState {
    pub position: f64,
    pub speed: f64,
    pub acceleration: f64,
}

impl LeadState {
    pub fn cruising(speed: f64, t: f64) -> Self {
        LeadState { position: speed * t, speed, acceleration: 0.0 }
    }
}

/// Which form of the platoon dynamics to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dynamics {
    #[default]
    Nonlinear,
    /// First-order expansion about the equilibrium `(y*, 0)`.
    Linearized,
}

/// Headway and relative velocity of one follower.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub headway: f64,
    pub rel_velocity: f64,
}

/// Sampled platoon trajectory; `states[k][i]` is follower `i + 1` at `times[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<VehicleState>>,
}

impl Trajectory {
    /// Headway series of one follower (0-based).
    pub fn headways(&self, vehicle: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[vehicle].headway).collect()
    }
}

/// Integration step used by default: `min(tau / 20, 1 ms)`.
pub fn default_step(tau: f64) -> f64 {
    if tau > 0.0 {
        (tau / 20.0).min(1e-3)
    } else {
        1e-3
    }
}

/// Packs states as `[y_1, v_1, y_2, v_2, ...]`.
fn pack(states: &[VehicleState]) -> Vec<f64> {
    states.iter().flat_map(|s| [s.headway, s.rel_velocity]).collect()
}

fn unpack(x: &[f64]) -> Vec<VehicleState> {
    x.chunks_exact(2).map(|c| VehicleState { headway: c[0], rel_velocity: c[1] }).collect()
}

struct Rhs<'a> {
    p: &'a FvdParams,
    y_star: f64,
    v_prime: f64,
    dynamics: Dynamics,
}

impl Rhs<'_> {
    /// Derivative at time `t` from the current state `x` and delayed state `xd`.
    fn eval(&self, lead: &LeadState, x: &[f64], xd: &[f64], out: &mut [f64]) {
        let (a, l) = (self.p.a, self.p.l);
        let n = x.len() / 2;
        for i in 0..n {
            let (yd, vd) = (xd[2 * i], xd[2 * i + 1]);
            out[2 * i] = x[2 * i + 1];
            out[2 * i + 1] = match (self.dynamics, i) {
                (Dynamics::Nonlinear, 0) => {
                    lead.acceleration + a * (lead.speed - bovf(yd, self.p) - vd) - l * vd
                }
                (Dynamics::Nonlinear, _) => {
                    let (yp, vp) = (xd[2 * i - 2], xd[2 * i - 1]);
                    a * (bovf(yp, self.p) - bovf(yd, self.p) - vd) + l * (vp - vd)
                }
                (Dynamics::Linearized, 0) => {
                    -a * self.v_prime * (yd - self.y_star) - (a + l) * vd
                }
                (Dynamics::Linearized, _) => {
                    let (yp, vp) = (xd[2 * i - 2], xd[2 * i - 1]);
                    a * self.v_prime * (yp - yd) - a * vd + l * (vp - vd)
                }
            };
        }
    }
}

/// History buffer on the integration grid, constant before `t = 0`.
struct History {
    dt: f64,
    initial: Vec<f64>,
    samples: Vec<Vec<f64>>,
}

impl History {
    fn at(&self, t: f64) -> Vec<f64> {
        if t <= 0.0 {
            return self.initial.clone();
        }
        let f = t / self.dt;
        let i = (f.floor() as usize).min(self.samples.len() - 1);
        if i + 1 >= self.samples.len() {
            return self.samples[i].clone();
        }
        let w = f - i as f64;
        self.samples[i].iter().zip(&self.samples[i + 1]).map(|(a, b)| a + w * (b - a)).collect()
    }
}

/// Integrates the platoon with fixed-step RK4 and a linearly interpolated
/// history. The history on `[-tau, 0]` is held at `initial`.
///
/// `y_star` is the equilibrium headway about which the linearized dynamics
/// are expanded; it is ignored by the nonlinear dynamics.
pub fn integrate_platoon(
    p: &FvdParams,
    y_star: f64,
    dynamics: Dynamics,
    lead: &dyn Fn(f64) -> LeadState,
    initial: &[VehicleState],
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    p.validate()?;
    if initial.len() != p.n_vehicles - 1 {
        return Err(Error::domain(format!(
            "expected {} follower states, got {}",
            p.n_vehicles - 1,
            initial.len()
        )));
    }
    if !(dt > 0.0 && horizon >= 0.0) {
        return Err(Error::domain("step and horizon must be positive"));
    }
    if p.tau > 0.0 && dt >= p.tau / 10.0 {
        return Err(Error::domain(format!("step {dt} s must be below tau/10 = {} s", p.tau / 10.0)));
    }
    let rhs = Rhs { p, y_star, v_prime: bovf_slope(y_star, p), dynamics };
    let x0 = pack(initial);
    let dim = x0.len();
    let steps = (horizon / dt).round() as usize;
    let mut hist = History { dt, initial: x0.clone(), samples: Vec::with_capacity(steps + 1) };
    hist.samples.push(x0);

    let delayed = |hist: &History, t: f64, x: &[f64]| -> Vec<f64> {
        if p.tau == 0.0 {
            x.to_vec()
        } else {
            hist.at(t - p.tau)
        }
    };
    let mut k = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
    for step in 0..steps {
        let t = step as f64 * dt;
        let x = hist.samples[step].clone();
        let mut stage = x.clone();
        for (j, c) in [0.0, 0.5, 0.5, 1.0].into_iter().enumerate() {
            if j > 0 {
                for d in 0..dim {
                    stage[d] = x[d] + c * dt * k[j - 1][d];
                }
            }
            let ts = t + c * dt;
            let xd = delayed(&hist, ts, &stage);
            rhs.eval(&lead(ts), &stage, &xd, &mut k[j]);
        }
        let next: Vec<f64> = (0..dim)
            .map(|d| x[d] + dt / 6.0 * (k[0][d] + 2.0 * k[1][d] + 2.0 * k[2][d] + k[3][d]))
            .collect();
        if let Some(bad) = next.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite state {bad} at t = {} s", t + dt)));
        }
        hist.samples.push(next);
    }
    Ok(Trajectory {
        times: (0..=steps).map(|s| s as f64 * dt).collect(),
        states: hist.samples.iter().map(|x| unpack(x)).collect(),
    })
}

/// Sign changes of a series, ignoring excursions smaller than `threshold`
/// in magnitude.
pub fn count_sign_changes(series: &[f64], threshold: f64) -> usize {
    let mut last = 0i8;
    let mut changes = 0;
    for &x in series {
        let s = if x > threshold {
            1
        } else if x < -threshold {
            -1
        } else {
            continue;
        };
        if last != 0 && s != last {
            changes += 1;
        }
        last = s;
    }
    changes
}
