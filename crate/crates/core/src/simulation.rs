//! Closed-loop scenario runner: orbit, plant, receiver and tracker advanced
//! together on a fixed sample clock.

use serde::{Deserialize, Serialize};

use crate::antenna_sim::{AntennaState, BeaconReceiver, ReceiverConfig};
use crate::beacon_model::{kx_from_elevation, ParabolaParams};
use crate::error::{Error, Result};
use crate::orbit_sim::{satellite_direction, OrbitConfig};
use crate::telemetry::{BeaconStats, StatsAccumulator, TelemetryRecord, TelemetrySink};
use crate::tracker::{plan_pattern, Tracker, TrackerConfig, TrackerEvent, TrackerEventKind};

/// True beacon pattern of the simulated antenna.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParabolaConfig {
    #[serde(rename = "k_y_db_per_deg2")]
    pub k_y: f64,
    #[serde(rename = "l_pq_db", default = "default_peak")]
    pub l_pq: f64,
    /// Free-form remarks, e.g. on the region where the quadratic model holds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

fn default_peak() -> f64 {
    6.0
}

impl ParabolaConfig {
    pub fn new(k_y: f64, l_pq: f64) -> Self {
        Self {
            k_y,
            l_pq,
            notes: None,
        }
    }

    /// Beacon pattern centered on the satellite; `k_x` follows the satellite elevation.
    pub fn at(&self, azimuth: f64, elevation: f64) -> Result<ParabolaParams> {
        Ok(ParabolaParams {
            k_x: kx_from_elevation(self.k_y, elevation.clamp(0.0, 90.0))?,
            k_y: self.k_y,
            p: azimuth,
            q: elevation,
            l_pq: self.l_pq,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub records: usize,
    pub cycles: u64,
    pub events: Vec<TrackerEvent>,
    pub beacon: Option<BeaconStats>,
    /// `(min, max)` of the commanded azimuth.
    pub commanded_az_range: Option<(f64, f64)>,
    pub commanded_el_range: Option<(f64, f64)>,
}

impl ScenarioReport {
    pub fn aborted_cycles(&self) -> usize {
        self.events
            .iter()
            .filter(|e| {
                matches!(
                    e.kind,
                    TrackerEventKind::Aborted(_) | TrackerEventKind::PatternInfeasible(_)
                )
            })
            .count()
    }

    /// Per-cycle move targets in time order.
    pub fn move_commands(&self) -> Vec<(f64, (f64, f64))> {
        self.events
            .iter()
            .filter_map(|e| match e.kind {
                TrackerEventKind::Estimated { command, .. } => Some((e.t, command)),
                _ => None,
            })
            .collect()
    }
}

/// Number of sample ticks that fit in `duration`.
pub fn tick_count(duration: f64, sample_interval: f64) -> usize {
    if !(duration > 0.0) {
        return 0;
    }
    (duration / sample_interval + 1e-9).floor() as usize
}

/// Runs the closed loop for `duration` seconds, one telemetry record per tick.
///
/// Configuration problems, including a first pattern that would leave the
/// axis limits, are reported before the first tick. Estimation failures
/// during the run are recorded as events.
#[allow(clippy::too_many_arguments)]
pub fn run_scenario<S: TelemetrySink>(
    orbit: &OrbitConfig,
    plant: &AntennaState,
    rx: &ReceiverConfig,
    parabola: &ParabolaConfig,
    config: &TrackerConfig,
    duration: f64,
    sink: &mut S,
) -> Result<ScenarioReport> {
    orbit.validate()?;
    config.validate()?;
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::Config(format!("duration_s must be >= 0, got {duration}")));
    }
    if !(parabola.k_y < 0.0) {
        return Err(Error::Config(format!(
            "k_y_db_per_deg2 must be negative, got {}",
            parabola.k_y
        )));
    }
    let needed = config.pattern_duration(plant);
    if !(config.cycle_period > needed) {
        return Err(Error::Config(format!(
            "cycle_period_s {} does not exceed the pattern duration {:.3} s",
            config.cycle_period, needed
        )));
    }
    let start = (
        plant.quantize(plant.target_azimuth),
        plant.quantize(plant.target_elevation),
    );
    plan_pattern(start, config, plant)?;

    let mut plant = *plant;
    let mut receiver = BeaconReceiver::new(*rx)?;
    let mut tracker = Tracker::new(*config, 0.0)?;
    let dt = config.sample_interval;

    let mut events = Vec::new();
    let mut beacon = StatsAccumulator::new();
    let mut az_range: Option<(f64, f64)> = None;
    let mut el_range: Option<(f64, f64)> = None;
    let widen = |r: &mut Option<(f64, f64)>, v: f64| {
        *r = Some(match *r {
            Some((lo, hi)) => (lo.min(v), hi.max(v)),
            None => (v, v),
        });
    };

    let n = tick_count(duration, dt);
    for i in 0..n {
        let t = i as f64 * dt;
        let (p, q) = satellite_direction(orbit, t);
        let params = parabola.at(p, q)?;
        let sample = receiver.measure(&plant, &params, t);

        let phase = tracker.phase();
        let cycle_index = tracker.state().cycle_index;
        let out = tracker.step(&plant, &sample, t);
        if let Some((az, el)) = out.command {
            if let Err(e) = plant.command(az, el) {
                events.push(TrackerEvent {
                    t,
                    cycle_index: tracker.state().cycle_index,
                    kind: TrackerEventKind::Aborted(e),
                });
            }
        }
        events.extend(out.events);

        let record = TelemetryRecord {
            t,
            commanded_az: plant.target_azimuth,
            commanded_el: plant.target_elevation,
            readback_az: sample.azimuth,
            readback_el: sample.elevation,
            beacon_db: sample.level,
            receiver_volts: receiver.voltage(sample.level),
            phase,
            cycle_index,
        };
        sink.append(record)?;
        beacon.push(sample.level);
        widen(&mut az_range, record.commanded_az);
        widen(&mut el_range, record.commanded_el);

        plant.tick(dt);
    }

    Ok(ScenarioReport {
        records: n,
        cycles: tracker.state().cycle_index,
        events,
        beacon: beacon.finish(),
        commanded_az_range: az_range,
        commanded_el_range: el_range,
    })
}
