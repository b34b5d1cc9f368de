//! Antenna plant: two slew-rate-limited axes, resolver readback and the
//! beacon receiver.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::beacon_model::{beacon_level, ParabolaParams};
use crate::error::{Error, Result};

/// 16-bit resolver-to-digital converter.
pub const DEFAULT_RESOLVER_STEP: f64 = 360.0 / 65536.0;

/// Receiver telemetry output span, volts.
pub const FULL_SCALE_VOLTS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaConfig {
    pub initial_azimuth_deg: f64,
    pub initial_elevation_deg: f64,
    #[serde(default = "default_rate")]
    pub az_slew_rate_deg_per_s: f64,
    #[serde(default = "default_rate")]
    pub el_slew_rate_deg_per_s: f64,
    #[serde(default = "default_az_limits")]
    pub az_limits_deg: [f64; 2],
    #[serde(default = "default_el_limits")]
    pub el_limits_deg: [f64; 2],
    #[serde(default = "default_resolver_step")]
    pub resolver_step_deg: f64,
}

fn default_rate() -> f64 {
    1.0
}
fn default_az_limits() -> [f64; 2] {
    [0.0, 360.0]
}
fn default_el_limits() -> [f64; 2] {
    [5.0, 90.0]
}
fn default_resolver_step() -> f64 {
    DEFAULT_RESOLVER_STEP
}

impl AntennaConfig {
    pub fn at(azimuth: f64, elevation: f64) -> Self {
        Self {
            initial_azimuth_deg: azimuth,
            initial_elevation_deg: elevation,
            az_slew_rate_deg_per_s: default_rate(),
            el_slew_rate_deg_per_s: default_rate(),
            az_limits_deg: default_az_limits(),
            el_limits_deg: default_el_limits(),
            resolver_step_deg: default_resolver_step(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaState {
    pub true_azimuth: f64,
    pub true_elevation: f64,
    pub target_azimuth: f64,
    pub target_elevation: f64,
    pub az_slew_rate: f64,
    pub el_slew_rate: f64,
    pub az_limits: [f64; 2],
    pub el_limits: [f64; 2],
    pub resolver_step: f64,
}

impl AntennaState {
    /// Antenna at rest at the configured initial pointing.
    pub fn new(config: &AntennaConfig) -> Result<Self> {
        let state = Self {
            true_azimuth: config.initial_azimuth_deg,
            true_elevation: config.initial_elevation_deg,
            target_azimuth: config.initial_azimuth_deg,
            target_elevation: config.initial_elevation_deg,
            az_slew_rate: config.az_slew_rate_deg_per_s,
            el_slew_rate: config.el_slew_rate_deg_per_s,
            az_limits: config.az_limits_deg,
            el_limits: config.el_limits_deg,
            resolver_step: config.resolver_step_deg,
        };
        if !(state.az_slew_rate > 0.0 && state.el_slew_rate > 0.0) {
            return Err(Error::Domain("slew rates must be positive".into()));
        }
        if !(state.resolver_step > 0.0) {
            return Err(Error::Domain("resolver step must be positive".into()));
        }
        for (name, [lo, hi]) in [("azimuth", state.az_limits), ("elevation", state.el_limits)] {
            if !(lo < hi) {
                return Err(Error::Domain(format!("{name} limits [{lo}, {hi}] are empty")));
            }
        }
        state.check_limits(state.true_azimuth, state.true_elevation)?;
        Ok(state)
    }

    pub fn check_limits(&self, azimuth: f64, elevation: f64) -> Result<()> {
        check_axis("azimuth", azimuth, self.az_limits)?;
        check_axis("elevation", elevation, self.el_limits)
    }

    /// Stores a new target; the axes start moving on the next [`tick`](Self::tick).
    pub fn command(&mut self, target_azimuth: f64, target_elevation: f64) -> Result<()> {
        self.check_limits(target_azimuth, target_elevation)?;
        self.target_azimuth = target_azimuth;
        self.target_elevation = target_elevation;
        Ok(())
    }

    /// Advances both axes toward the target by at most `rate * dt`, landing
    /// exactly on the target instead of overshooting.
    pub fn tick(&mut self, dt: f64) {
        if !(dt > 0.0) {
            return;
        }
        self.true_azimuth = slew(self.true_azimuth, self.target_azimuth, self.az_slew_rate * dt);
        self.true_elevation =
            slew(self.true_elevation, self.target_elevation, self.el_slew_rate * dt);
    }

    pub fn at_target(&self) -> bool {
        self.true_azimuth == self.target_azimuth && self.true_elevation == self.target_elevation
    }

    /// Resolver readback, quantized to the nearest count.
    pub fn read_resolvers(&self) -> (f64, f64) {
        (
            quantize(self.true_azimuth, self.resolver_step),
            quantize(self.true_elevation, self.resolver_step),
        )
    }

    pub fn quantize(&self, angle: f64) -> f64 {
        quantize(angle, self.resolver_step)
    }
}

fn check_axis(axis: &'static str, value: f64, [min, max]: [f64; 2]) -> Result<()> {
    if value.is_finite() && value >= min && value <= max {
        Ok(())
    } else {
        Err(Error::Limit {
            axis,
            value,
            min,
            max,
        })
    }
}

fn slew(current: f64, target: f64, max_step: f64) -> f64 {
    let delta = target - current;
    if delta.abs() <= max_step {
        target
    } else {
        current + max_step.copysign(delta)
    }
}

/// Nearest multiple of `step`.
pub fn quantize(angle: f64, step: f64) -> f64 {
    (angle / step).round() * step
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverConfig {
    #[serde(rename = "floor_db", default = "default_floor")]
    pub floor_db: f64,
    #[serde(rename = "max_db", default = "default_max")]
    pub max_db: f64,
    #[serde(rename = "noise_sigma_db", default)]
    pub noise_sigma: f64,
    #[serde(rename = "drift_amplitude_db", default)]
    pub drift_amplitude: f64,
    #[serde(rename = "drift_period_s", default = "default_drift_period")]
    pub drift_period: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_floor() -> f64 {
    -24.0
}
fn default_max() -> f64 {
    6.0
}
fn default_drift_period() -> f64 {
    6.0 * 3600.0
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            floor_db: default_floor(),
            max_db: default_max(),
            noise_sigma: 0.0,
            drift_amplitude: 0.0,
            drift_period: default_drift_period(),
            rng_seed: 0,
        }
    }
}

impl ReceiverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_db > self.floor_db) {
            return Err(Error::Domain(format!(
                "receiver max_db {} must exceed floor_db {}",
                self.max_db, self.floor_db
            )));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Domain("noise sigma must be >= 0".into()));
        }
        if !(self.drift_period > 0.0) {
            return Err(Error::Domain("drift period must be positive".into()));
        }
        Ok(())
    }

    /// Slow additive level variation (weather, temperature).
    pub fn drift(&self, t: f64) -> f64 {
        self.drift_amplitude * (std::f64::consts::TAU * t / self.drift_period).sin()
    }
}

/// Affine dB-to-volts telemetry map: `floor_db` → 0 V, `max_db` → 10 V.
pub fn receiver_voltage(level_db: f64, rx: &ReceiverConfig) -> f64 {
    let frac = (level_db - rx.floor_db) / (rx.max_db - rx.floor_db);
    (frac * FULL_SCALE_VOLTS).clamp(0.0, FULL_SCALE_VOLTS)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeaconSample {
    pub t: f64,
    /// Resolver readback.
    pub azimuth: f64,
    /// Resolver readback.
    pub elevation: f64,
    pub level: f64,
}

/// Beacon receiver with its own seeded noise source.
#[derive(Debug, Clone)]
pub struct BeaconReceiver {
    config: ReceiverConfig,
    rng: ChaCha8Rng,
}

impl BeaconReceiver {
    pub fn new(config: ReceiverConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
        })
    }

    pub fn config(&self) -> &ReceiverConfig {
        &self.config
    }

    /// Samples the beacon with the antenna's true pointing; `params` carries
    /// the current satellite direction as its peak.
    pub fn measure(&mut self, antenna: &AntennaState, params: &ParabolaParams, t: f64) -> BeaconSample {
        // one draw per sample regardless of sigma keeps the stream aligned
        let z: f64 = StandardNormal.sample(&mut self.rng);
        let raw = beacon_level(params, antenna.true_azimuth, antenna.true_elevation)
            + self.config.drift(t)
            + self.config.noise_sigma * z;
        let (azimuth, elevation) = antenna.read_resolvers();
        BeaconSample {
            t,
            azimuth,
            elevation,
            level: raw.max(self.config.floor_db),
        }
    }

    pub fn voltage(&self, level_db: f64) -> f64 {
        receiver_voltage(level_db, &self.config)
    }
}
