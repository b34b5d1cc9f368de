//! Apparent motion of an inclined geosynchronous satellite.
//!
//! Seen from the ground the satellite traces a daily figure-8. We model it as
//! a lemniscate of Gerono: one axis follows `a₁·sin(θ)`, the other
//! `(a₂/2)·sin(2θ)`, with `θ = ωt + phase` and `ω = 2π/period`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SIDEREAL_DAY_S: f64 = 86164.0;

/// Which pointing axis carries the single-frequency (large) term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisMode {
    /// Near-equator station: north-south motion shows up mostly in azimuth.
    #[default]
    AzimuthSingle,
    ElevationSingle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitConfig {
    #[serde(rename = "center_azimuth_deg")]
    pub center_azimuth: f64,
    #[serde(rename = "center_elevation_deg")]
    pub center_elevation: f64,
    #[serde(rename = "azimuth_amplitude_deg")]
    pub azimuth_amplitude: f64,
    #[serde(rename = "elevation_amplitude_deg")]
    pub elevation_amplitude: f64,
    #[serde(rename = "period_s", default = "default_period")]
    pub period: f64,
    #[serde(rename = "phase_rad", default)]
    pub phase: f64,
    #[serde(default)]
    pub axis_mode: AxisMode,
    /// Secular drift added on top of the periodic motion.
    #[serde(default)]
    pub azimuth_drift_deg_per_day: f64,
    #[serde(default)]
    pub elevation_drift_deg_per_day: f64,
}

fn default_period() -> f64 {
    SIDEREAL_DAY_S
}

impl Default for OrbitConfig {
    /// Azimuth swing of 32° peak-to-peak, elevation 1.6°, one sidereal day.
    fn default() -> Self {
        Self {
            center_azimuth: 290.0,
            center_elevation: 73.0,
            azimuth_amplitude: 16.0,
            elevation_amplitude: 1.6,
            period: SIDEREAL_DAY_S,
            phase: 0.0,
            axis_mode: AxisMode::AzimuthSingle,
            azimuth_drift_deg_per_day: 0.0,
            elevation_drift_deg_per_day: 0.0,
        }
    }
}

impl OrbitConfig {
    /// A satellite that never moves.
    pub fn stationary(azimuth: f64, elevation: f64) -> Self {
        Self {
            center_azimuth: azimuth,
            center_elevation: elevation,
            azimuth_amplitude: 0.0,
            elevation_amplitude: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.center_azimuth,
            self.center_elevation,
            self.azimuth_amplitude,
            self.elevation_amplitude,
            self.period,
            self.phase,
            self.azimuth_drift_deg_per_day,
            self.elevation_drift_deg_per_day,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("orbit configuration"));
        }
        if !(self.period > 0.0) {
            return Err(Error::Domain(format!(
                "orbit period must be positive, got {}",
                self.period
            )));
        }
        if self.azimuth_amplitude < 0.0 || self.elevation_amplitude < 0.0 {
            return Err(Error::Domain("orbit amplitudes must be >= 0".into()));
        }
        let reach = self.elevation_swing();
        if self.center_elevation - reach < 0.0 || self.center_elevation + reach > 90.0 {
            return Err(Error::Domain(format!(
                "orbit elevation {} ± {} leaves [0, 90]",
                self.center_elevation, reach
            )));
        }
        Ok(())
    }

    /// Largest elevation excursion from the center (without drift).
    pub fn elevation_swing(&self) -> f64 {
        match self.axis_mode {
            AxisMode::AzimuthSingle => self.elevation_amplitude / 2.0,
            AxisMode::ElevationSingle => self.elevation_amplitude,
        }
    }

    /// Largest azimuth excursion from the center (without drift).
    pub fn azimuth_swing(&self) -> f64 {
        match self.axis_mode {
            AxisMode::AzimuthSingle => self.azimuth_amplitude,
            AxisMode::ElevationSingle => self.azimuth_amplitude / 2.0,
        }
    }
}

/// True satellite direction `(azimuth, elevation)` in degrees at time `t` seconds.
pub fn satellite_direction(config: &OrbitConfig, t: f64) -> (f64, f64) {
    let theta = TAU * t / config.period + config.phase;
    let single = theta.sin();
    let double = (2.0 * theta).sin();
    let (daz, del) = match config.axis_mode {
        AxisMode::AzimuthSingle => (
            config.azimuth_amplitude * single,
            0.5 * config.elevation_amplitude * double,
        ),
        AxisMode::ElevationSingle => (
            0.5 * config.azimuth_amplitude * double,
            config.elevation_amplitude * single,
        ),
    };
    let days = t / 86400.0;
    (
        config.center_azimuth + daz + config.azimuth_drift_deg_per_day * days,
        config.center_elevation + del + config.elevation_drift_deg_per_day * days,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub t: f64,
    pub azimuth: f64,
    pub elevation: f64,
}

/// Samples the direction at `t0, t0 + step, ...` up to and including `t1`
/// when it falls on the grid.
pub fn orbit_trace(config: &OrbitConfig, t0: f64, t1: f64, step: f64) -> Result<Vec<TracePoint>> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Domain(format!("trace step must be positive, got {step}")));
    }
    if !(t1 > t0) {
        return Err(Error::Domain(format!("trace needs t1 > t0, got [{t0}, {t1}]")));
    }
    // small slack so that 10/5 lands on 2 and not 1.9999999
    let n = ((t1 - t0) / step + 1e-9).floor() as usize + 1;
    Ok((0..n)
        .map(|i| {
            let t = t0 + i as f64 * step;
            let (azimuth, elevation) = satellite_direction(config, t);
            TracePoint {
                t,
                azimuth,
                elevation,
            }
        })
        .collect())
}

/// Number of sign changes of `value - center` along a sequence, ignoring exact zeros.
pub fn count_crossings(values: impl IntoIterator<Item = f64>, center: f64) -> usize {
    let mut last_sign = 0.0;
    let mut crossings = 0;
    for v in values {
        let d = v - center;
        if d == 0.0 {
            continue;
        }
        let s = d.signum();
        if last_sign != 0.0 && s != last_sign {
            crossings += 1;
        }
        last_sign = s;
    }
    crossings
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_amplitude_is_stationary() {
        let c = OrbitConfig::stationary(12.0, 40.0);
        for t in [0.0, 1.0, 1234.5, 86164.0] {
            assert_eq!(satellite_direction(&c, t), (12.0, 40.0));
        }
    }

    #[test]
    fn quarter_period_values() {
        let c = OrbitConfig {
            center_azimuth: 100.0,
            center_elevation: 50.0,
            azimuth_amplitude: 15.0,
            elevation_amplitude: 1.0,
            period: 3600.0,
            ..OrbitConfig::default()
        };
        let (az, el) = satellite_direction(&c, 900.0);
        assert!((az - 115.0).abs() < 1e-12);
        assert!((el - 50.0).abs() < 1e-12);
    }

    #[test]
    fn trace_grid() {
        let c = OrbitConfig::stationary(1.0, 2.0);
        let tr = orbit_trace(&c, 0.0, 10.0, 5.0).unwrap();
        let ts: Vec<f64> = tr.iter().map(|p| p.t).collect();
        assert_eq!(ts, vec![0.0, 5.0, 10.0]);
        assert!(tr.iter().all(|p| p.azimuth == 1.0 && p.elevation == 2.0));
        assert!(orbit_trace(&c, 0.0, 10.0, 0.0).is_err());
        assert!(orbit_trace(&c, 0.0, 10.0, -1.0).is_err());
        assert!(orbit_trace(&c, 5.0, 5.0, 1.0).is_err());
    }

    #[test]
    fn default_peak_to_peak() {
        let c = OrbitConfig::default();
        // phase 0: extrema at quarter periods, which are on this grid
        let tr = orbit_trace(&c, 0.0, c.period, c.period / 400.0).unwrap();
        let (lo, hi) = tr.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| {
            (lo.min(p.azimuth), hi.max(p.azimuth))
        });
        assert!((hi - lo - 2.0 * c.azimuth_amplitude).abs() < 1e-6);
        assert!(hi - lo > 30.0);
        let (lo, hi) = tr.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| {
            (lo.min(p.elevation), hi.max(p.elevation))
        });
        assert!(hi - lo < 2.0);
        c.validate().unwrap();
    }

    #[test]
    fn figure8_crosses_center_twice() {
        let c = OrbitConfig {
            phase: 0.1,
            ..OrbitConfig::default()
        };
        let tr = orbit_trace(&c, 0.0, c.period, 60.0).unwrap();
        assert_eq!(count_crossings(tr.iter().map(|p| p.azimuth), c.center_azimuth), 2);
        // the double-frequency axis crosses four times
        assert_eq!(count_crossings(tr.iter().map(|p| p.elevation), c.center_elevation), 4);
    }

    #[test]
    fn validation() {
        let mut c = OrbitConfig::default();
        c.period = 0.0;
        assert!(c.validate().is_err());
        let mut c = OrbitConfig::default();
        c.center_elevation = 89.5;
        assert!(c.validate().is_err());
        let mut c = OrbitConfig::default();
        c.azimuth_amplitude = -1.0;
        assert!(c.validate().is_err());
    }

    proptest! {
        #[test]
        fn periodic(
            amp_az in 0.0f64..20.0, amp_el in 0.0f64..3.0,
            period in 10.0f64..1e5, phase in -3.0f64..3.0, t in 0.0f64..1e5,
            el_single in any::<bool>(),
        ) {
            let c = OrbitConfig {
                azimuth_amplitude: amp_az,
                elevation_amplitude: amp_el,
                period,
                phase,
                axis_mode: if el_single { AxisMode::ElevationSingle } else { AxisMode::AzimuthSingle },
                ..OrbitConfig::default()
            };
            let a = satellite_direction(&c, t);
            let b = satellite_direction(&c, t + period);
            prop_assert!((a.0 - b.0).abs() < 1e-9);
            prop_assert!((a.1 - b.1).abs() < 1e-9);
            prop_assert!((a.0 - c.center_azimuth).abs() <= c.azimuth_swing() + 1e-12);
            prop_assert!((a.1 - c.center_elevation).abs() <= c.elevation_swing() + 1e-12);
        }
    }
}
